// Active stress of an aligned population, the flow it drives, and the
// energy balance in an extensional flow.

use active_stokes::density::{OrientationDensity, OrientationFamily};
use active_stokes::effective::{energy_dissipation, solve_w0, ActiveStress, LinearFlow};
use active_stokes::error::Result;
use active_stokes::flow::{FlowField, GradientMode};
use active_stokes::kernels::{FluidParams, Mat3, Vec3};
use active_stokes::quadrature::BoxQuadrature;
use active_stokes::swimmer::SwimmerParams;

pub fn run_example() -> Result<()> {
    let fluid = FluidParams::new(1.0)?;
    let sp = SwimmerParams::new(-1.0, 1.5, 0.01, fluid)?;
    let density = OrientationDensity::with_family(OrientationFamily::dirac(Vec3::z())?);
    let stress = ActiveStress::new(density, &sp);
    println!("sigma_1 inside =\n{:.5}", stress.sigma(&Vec3::zeros()));

    let w0 = solve_w0(&stress, 0.01, 16)?;
    for z in [0.0, 0.25, 0.75, 1.5] {
        let u = w0.velocity(&Vec3::new(0.1, 0.0, z))?;
        println!("w0(0.1, 0, {z}) = ({:+.4e}, {:+.4e}, {:+.4e})", u.x, u.y, u.z);
    }

    let flow = LinearFlow(Mat3::from_diagonal(&Vec3::new(-0.5, -0.5, 1.0)));
    let rule = BoxQuadrature::gauss(Vec3::repeat(-0.5), Vec3::repeat(0.5), 2, 3)?;
    let e = energy_dissipation(&flow, &stress, 0.01, rule.nodes(), GradientMode::Analytic)?;
    println!("pusher in extension: viscous {:.4e}, active {:+.4e}", e.viscous, e.active);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
