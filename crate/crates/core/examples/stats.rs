// Empirical orientation moments of sampled configurations against the
// continuum active stress.

use active_stokes::density::{OrientationDensity, OrientationFamily};
use active_stokes::effective::ActiveStress;
use active_stokes::error::Result;
use active_stokes::kernels::{FluidParams, Vec3};
use active_stokes::stats::{empirical_moments, stress_convergence, BinGrid};
use active_stokes::suspension::{sample_configuration, SamplingMode};
use active_stokes::swimmer::SwimmerParams;

pub fn run_example() -> Result<()> {
    let density = OrientationDensity::with_family(OrientationFamily::von_mises_fisher(Vec3::z(), 4.0)?);
    let sp = SwimmerParams::new(-1.0, 1.5, 0.01, FluidParams::new(1.0)?)?;
    let stress = ActiveStress::new(density.clone(), &sp);
    let mut configs = Vec::new();
    for n in [500, 2000, 8000] {
        configs.push(sample_configuration(&density, n, 0.01, 0.5, 1.2, 1, SamplingMode::Relaxed)?);
    }
    let grid = BinGrid::cubic(4);
    let m = empirical_moments(&configs[2], grid, stress.coefficient());
    println!("second moment at N = 8000:\n{:.4}", m.second_moment);
    print!("{}", stress_convergence(&configs, &stress, grid)?.to_csv().render());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
