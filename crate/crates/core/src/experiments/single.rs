//! Single-swimmer checks: traction identities, the scaling law and the far
//! field remainder.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Check, Outcome, Params, Tolerances};
use crate::density::uniform_direction;
use crate::error::{Error, Result};
use crate::fit;
use crate::flow::{traction_converged, GradientMode, SurfaceMoments};
use crate::io::Csv;
use crate::kernels::{deviatoric, outer, FluidParams, UnitVec3};
use crate::quadrature::SurfaceQuadrature;
use crate::swimmer::{dipole_decomposition, elementary_velocity, ExteriorFlow, SolutionPart, SwimmerParams};

/// Traction moments with the sphere rule refined until two levels agree.
fn moments(p: &UnitVec3, sp: &SwimmerParams, radius: f64) -> Result<(SurfaceMoments, usize)> {
    let feature = (sp.beta - 1.0).min(0.5);
    let rule = |level: usize| SurfaceQuadrature::graded(p, feature, 8 + 4 * level, 16);
    let flow = ExteriorFlow::new(*p, *sp, SolutionPart::Full);
    let m = traction_converged(&flow, radius, rule, 6, 1e-11, GradientMode::Analytic, &sp.fluid)?;
    Ok((m, rule(6)?.len()))
}

pub(super) fn identity_checks(params: &Params, tol: &Tolerances) -> Result<Outcome> {
    let fluid = FluidParams::new(params.mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seeds.first().copied().unwrap_or(0));
    let mut csv = Csv::new(["beta", "a", "force_error", "torque_error", "stresslet_error", "stresslet_scalar", "scaling_error", "max_nodes"]);
    csv.comment("force_error = |F + k_f p| / |k_f|, torque_error = |T| / |k_f|");
    csv.comment("stresslet_error: trace-free traction moment of the unit-scaled solution against (-5/2 b^-2 + 3/2 b^-4)(p p - Id/3)");
    csv.comment("stresslet_scalar = 3/2 p.S.p of that moment; scaling_error = max relative deviation of v(a x) from (k_f/a) v_unit(x)");
    let mut out = Outcome::default();
    let (t_force, t_torque, t_stress, t_scale) =
        (tol.get("force", 1e-6), tol.get("torque", 1e-8), tol.get("stresslet", 1e-6), tol.get("scaling", 1e-12));
    for &beta in &params.betas {
        let unit = SwimmerParams::unit_scaled(beta, fluid)?;
        let p = uniform_direction(&mut rng);
        let (m_unit, _) = moments(&p, &unit, 1.0)?;
        let want = deviatoric(&outer(&p, &p)) * unit.stresslet_coefficient();
        let tf = m_unit.trace_free_stresslet();
        let stress_err = (tf - want).norm() / want.norm();
        let scalar = 1.5 * p.dot(&(tf * p.into_inner()));
        out.checks.push(Check::below(format!("stresslet beta={beta}"), stress_err, t_stress));
        if beta == 2.0 {
            out.checks.push(Check::near("stresslet scalar beta=2", scalar, -0.53125, t_stress * 0.53125));
        }
        for &a in &params.radii {
            let sp = SwimmerParams::new(params.alpha, beta, a, fluid)?;
            let kf = sp.k_f();
            let (m, nodes) = moments(&p, &sp, a)?;
            let force_err = (m.force + p.into_inner() * kf).norm() / kf.abs();
            let torque_err = m.torque.norm() / kf.abs();
            let mut scaling_err: f64 = 0.0;
            for _ in 0..params.points {
                let q = uniform_direction(&mut rng);
                let x = uniform_direction(&mut rng).into_inner() * rng.random_range(0.5..6.0);
                let lhs = elementary_velocity(&(x * a), &q, &sp)?;
                let rhs = elementary_velocity(&x, &q, &unit)? * (kf / a);
                scaling_err = scaling_err.max((lhs - rhs).norm() / rhs.norm());
            }
            out.checks.push(Check::below(format!("force beta={beta} a={a}"), force_err, t_force));
            out.checks.push(Check::below(format!("torque beta={beta} a={a}"), torque_err, t_torque));
            out.checks.push(Check::below(format!("scaling beta={beta} a={a}"), scaling_err, t_scale));
            csv.push(vec![beta, a, force_err, torque_err, stress_err, scalar, scaling_err, nodes as f64])?;
        }
    }
    out.csv = csv;
    out.notes.push("stresslet identity compared on the trace-free part; the isotropic part is a pressure gauge".into());
    Ok(out)
}

pub(super) fn dipole_remainder(params: &Params, tol: &Tolerances) -> Result<Outcome> {
    let fluid = FluidParams::new(params.mu)?;
    let beta = params.betas.first().copied().unwrap_or(2.0);
    let n = params.ns.first().copied().unwrap_or(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seeds.first().copied().unwrap_or(0));
    let p = uniform_direction(&mut rng);
    let dir = uniform_direction(&mut rng).into_inner();
    let lambda_for = |a: f64| 4.0 * PI * a.powi(3) * n as f64 / 3.0;
    let mut csv = Csv::new(["sweep", "a", "r", "remainder"]);
    csv.comment("sweep 0: radius a at |x| = 1; sweep 1: |x| = 20a 2^k at the smallest radius");
    let mut out = Outcome::default();

    if params.radii.len() < 2 {
        return Err(Error::InvalidParameter("the radius sweep needs at least two radii".into()));
    }
    let (mut la, mut lr) = (Vec::new(), Vec::new());
    let mut ratios = Vec::new();
    for &a in &params.radii {
        let sp = SwimmerParams::new(params.alpha, beta, a, fluid)?;
        let c = dipole_decomposition(&p, &sp, lambda_for(a), n)?;
        let r = c.remainder(&dir, &p, &sp)?.norm();
        la.push(a);
        lr.push(r);
        ratios.push(c.jprime / c.jcal);
        csv.push(vec![0.0, a, 1.0, r])?;
    }
    let slope_a = fit::log_log(&la, &lr)?.slope;

    let a0 = params.radii.iter().copied().fold(f64::INFINITY, f64::min);
    let sp = SwimmerParams::new(params.alpha, beta, a0, fluid)?;
    let c = dipole_decomposition(&p, &sp, lambda_for(a0), n)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..5 {
        let r = 20.0 * a0 * 2f64.powi(k);
        let rem = c.remainder(&(dir * r), &p, &sp)?.norm();
        xs.push(r);
        ys.push(rem);
        csv.push(vec![1.0, a0, r, rem])?;
    }
    let slope_r = fit::log_log(&xs, &ys)?.slope;
    out.checks.push(Check::near("remainder slope in a", slope_a, 4.0, tol.get("slope_a", 0.1)));
    out.checks.push(Check::near("remainder decay in |x|", slope_r, -3.0, tol.get("slope_r", 0.1)));
    let worst = ratios.iter().map(|r| (r - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    out.checks.push(Check::below("isotropic coefficient J'/J - 1/3", worst, tol.get("jprime", 1e-6)));
    out.csv = csv;
    Ok(out)
}
