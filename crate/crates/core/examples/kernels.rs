// Oseen tensor, its dipole derivative, and a sphere rule integrating it.

use active_stokes::error::Result;
use active_stokes::kernels::{deviatoric, grad_oseen_apply, oseen, outer, FluidParams, Vec3};
use active_stokes::quadrature::SurfaceQuadrature;

pub fn run_example() -> Result<()> {
    let fluid = FluidParams::new(1.0)?;
    let x = Vec3::new(0.3, -0.4, 1.2);
    let u = oseen(&x, &fluid)?;
    println!("U(x) =\n{u:.6}");
    println!("asymmetry |U - U^T| = {:.3e}", (u - u.transpose()).norm());

    let p = Vec3::z();
    let dipole = grad_oseen_apply(&x, &deviatoric(&outer(&p, &p)), &fluid)?;
    println!("force-dipole velocity at x: {dipole:.6}");

    // mean of U over the unit sphere is (4/3) Id / (8 pi mu)
    let q = SurfaceQuadrature::product(8, 16)?;
    let mean = q.integrate(|n| oseen(&n.into_inner(), &fluid).expect("off the origin")) / (4.0 * std::f64::consts::PI);
    println!("sphere mean of U: {:.6} (expected {:.6})", mean[(0, 0)], 4.0 / 3.0 / (8.0 * std::f64::consts::PI));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
