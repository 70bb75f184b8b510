// Sample a dilute suspension, inspect its separation and evaluate the
// superposed flow and its boundary error.

use active_stokes::density::OrientationDensity;
use active_stokes::error::Result;
use active_stokes::kernels::{FluidParams, Vec3};
use active_stokes::suspension::{boundary_error_functional, sample_configuration, separation_report, u_app_evaluate, BallQuadSpec, SamplingMode};

pub fn run_example() -> Result<()> {
    let fluid = FluidParams::new(1.0)?;
    let density = OrientationDensity::uniform();
    let cfg = sample_configuration(&density, 300, 0.01, 0.8, 1.2, 7, SamplingMode::Strict)?;
    let sp = cfg.swimmer(-1.0, fluid)?;
    let rep = separation_report(&cfg, 0.8);
    println!("N = {}, a = {:.4e}, min gap = {:.4e} ({} spacings)", cfg.n, cfg.a, rep.min_gap, rep.min_gap / cfg.spacing());

    let points = [Vec3::new(1.2, 0.0, 0.0), Vec3::new(0.0, 1.5, 0.0), Vec3::new(0.0, 0.0, -2.0)];
    for (x, u) in points.iter().zip(u_app_evaluate(&cfg, &sp, &points)?) {
        println!("u_app({:.1}, {:.1}, {:.1}) = ({:+.3e}, {:+.3e}, {:+.3e})", x.x, x.y, x.z, u.x, u.y, u.z);
    }
    println!("boundary error functional: {:.4e}", boundary_error_functional(&cfg, &sp, &BallQuadSpec::default())?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
