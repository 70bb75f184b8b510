// Stationary orientation law of swimmers in a frozen extensional strain.

use active_stokes::effective::anisotropy_condition;
use active_stokes::error::Result;
use active_stokes::fokker_planck::stationary_orientation_density;
use active_stokes::kernels::{Mat3, UnitVec3, Vec3};

pub fn run_example() -> Result<()> {
    let s = Mat3::from_diagonal(&Vec3::new(-0.5, -0.5, 1.0)) / 1.5f64.sqrt();
    for xi in [0.1, 1.0, 3.0] {
        let f = stationary_orientation_density(&s, xi, 1.0, 12, 1e-4)?;
        let pole = f.value(&UnitVec3::new_normalize(Vec3::new(1e-9, 0.0, 1.0)));
        let equator = f.value(&Vec3::x_axis());
        let aniso = anisotropy_condition(&f.to_family(65, 128)?, &s)?;
        println!(
            "xi = {xi}: 4 pi F(pole) = {:.4}, 4 pi F(equator) = {:.4}, c = {:.4}, anisotropy = {aniso:.4}",
            4.0 * std::f64::consts::PI * pole,
            4.0 * std::f64::consts::PI * equator,
            f.linear_response()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
