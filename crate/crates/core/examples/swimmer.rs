// A single swimmer: its flow, the traction balance on its surface and the
// far-field dipole.

use active_stokes::error::Result;
use active_stokes::flow::{traction_converged, GradientMode};
use active_stokes::kernels::{FluidParams, UnitVec3, Vec3};
use active_stokes::quadrature::SurfaceQuadrature;
use active_stokes::suspension::radius_for;
use active_stokes::swimmer::{dipole_decomposition, elementary_velocity, ExteriorFlow, SolutionPart, SwimmerParams};

pub fn run_example() -> Result<()> {
    let fluid = FluidParams::new(1.0)?;
    let sp = SwimmerParams::new(-1.0, 2.0, 0.5, fluid)?;
    let p = UnitVec3::new_normalize(Vec3::new(1.0, 1.0, 0.0));
    println!("k_f = {:.6}, stresslet coefficient = {:.6}", sp.k_f(), sp.stresslet_coefficient());

    let dir = Vec3::new(1.0, 0.0, 1.0).normalize();
    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v = elementary_velocity(&(dir * r), &p, &sp)?;
        println!("v at r = {r:>4}: {:+.6e} along p, |v| = {:.6e}", v.dot(&p), v.norm());
    }

    let flow = ExteriorFlow::new(p, sp, SolutionPart::Full);
    let rule = |level: usize| SurfaceQuadrature::graded(&p, 0.5, 8 + 4 * level, 16);
    let m = traction_converged(&flow, sp.a, rule, 6, 1e-11, GradientMode::Analytic, &fluid)?;
    println!("surface force + k_f p = {:.3e}", (m.force + p.into_inner() * sp.k_f()).norm());
    println!("surface torque = {:.3e}", m.torque.norm());

    // the dipole coefficient is tied to a dilute suspension's radius
    let small = sp.with_radius(radius_for(0.01, 1000))?;
    let d = dipole_decomposition(&p, &small, 0.01, 1000)?;
    let x = dir * 0.5;
    println!("dipole remainder at |x| = 0.5: {:.3e} of {:.3e}", d.remainder(&x, &p, &small)?.norm(), elementary_velocity(&x, &p, &small)?.norm());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
