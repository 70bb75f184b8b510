//! Continuum-level experiments: energy balance signs and the stationary
//! orientation law.

use super::{Check, Outcome, Params, Tolerances};
use crate::density::{OrientationDensity, OrientationFamily};
use crate::effective::{anisotropy_condition, energy_dissipation, ActiveStress, LinearFlow};
use crate::error::{Error, Result};
use crate::flow::GradientMode;
use crate::fokker_planck::stationary_orientation_density;
use crate::io::Csv;
use crate::kernels::{sym, FluidParams, Mat3, Vec3};
use crate::quadrature::BoxQuadrature;
use crate::swimmer::SwimmerParams;

/// Unit-norm extension along `e3`.
fn extension() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(-0.5, -0.5, 1.0)) / 1.5f64.sqrt()
}

pub(super) fn energy_signs(params: &Params, tol: &Tolerances) -> Result<Outcome> {
    let fluid = FluidParams::new(params.mu)?;
    let beta = params.betas.first().copied().unwrap_or(2.0);
    let lambda = params.lambdas.first().copied().unwrap_or(0.05);
    let rule = BoxQuadrature::gauss(Vec3::repeat(-0.5), Vec3::repeat(0.5), params.grid.max(1), 3)?.nodes().to_vec();
    let swimmer = |alpha: f64| SwimmerParams::new(alpha, beta, 0.01, fluid);
    let terms = |flow: &LinearFlow, family: OrientationFamily, alpha: f64| -> Result<_> {
        let stress = ActiveStress::new(OrientationDensity::with_family(family), &swimmer(alpha)?);
        energy_dissipation(flow, &stress, lambda, &rule, GradientMode::Analytic)
    };
    let alpha = params.alpha.abs();
    if alpha == 0.0 {
        return Err(Error::InvalidParameter("swimming intensity must be nonzero".into()));
    }

    let mut csv = Csv::new(["case", "alpha", "viscous", "active"]);
    csv.comment("case 0: aligned with the extension axis; 1: von Mises-Fisher about e1 under shear S = sym(e1 e2); 2: isotropic");
    csv.comment("negative alpha is a pusher");
    let mut out = Outcome::default();

    let ext = LinearFlow(extension());
    let aligned = OrientationFamily::dirac(Vec3::z())?;
    let push = terms(&ext, aligned.clone(), -alpha)?;
    let pull = terms(&ext, aligned, alpha)?;
    csv.push(vec![0.0, -alpha, push.viscous, push.active])?;
    csv.push(vec![0.0, alpha, pull.viscous, pull.active])?;
    out.checks.push(Check::holds("pusher active term positive", push.active > 0.0));
    out.checks.push(Check::holds("puller active term negative", pull.active < 0.0));
    out.checks.push(Check::holds("viscous term negative", push.viscous < 0.0 && pull.viscous < 0.0));

    let shear = LinearFlow(sym(&Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)));
    let vmf = OrientationFamily::von_mises_fisher(Vec3::x(), 2.0)?;
    let cross = terms(&shear, vmf, -alpha)?;
    csv.push(vec![1.0, -alpha, cross.viscous, cross.active])?;
    out.checks.push(Check::below("axisymmetric law under transverse shear, |active| / |viscous|", cross.active.abs() / cross.viscous.abs(), tol.get("transverse", 1e-6)));

    let iso = terms(&ext, OrientationFamily::Uniform, -alpha)?;
    csv.push(vec![2.0, -alpha, iso.viscous, iso.active])?;
    out.checks.push(Check::below("isotropic law active term", iso.active.abs(), 0.0));
    out.csv = csv;
    Ok(out)
}

pub(super) fn fp_stationary(params: &Params, tol: &Tolerances) -> Result<Outcome> {
    let s = extension();
    let l_max = params.l_max;
    let truncation = tol.get("truncation", 1e-4);
    let mut csv = Csv::new(["peclet", "linear_response", "anisotropy", "min_value", "mass_error", "tail_norm"]);
    csv.comment("S = diag(-1/2, -1/2, 1) / |S|, D_r = 1, xi = peclet");
    csv.comment("linear_response: least-squares c in 4 pi F = 1 + c xi p.Sp; anisotropy = 4 pi (second moment : S)");
    csv.comment(format!("harmonic degree {l_max}, checked against degree {}", l_max + 4));
    let mut out = Outcome::default();

    let still = stationary_orientation_density(&s, 0.0, 1.0, l_max, truncation)?;
    let no_flow = stationary_orientation_density(&Mat3::zeros(), 1.0, 1.0, l_max, truncation)?;
    let tail = |d: &crate::fokker_planck::StationaryDensity| d.coefficients.rows(1, d.coefficients.len() - 1).norm();
    out.checks.push(Check::below("uniform law without alignment", tail(&still).max(tail(&no_flow)), 1e-14));

    let mut peclets = params.peclets.clone();
    peclets.sort_by(f64::total_cmp);
    let mut masses: f64 = 0.0;
    let mut all_positive = true;
    for (k, &pe) in peclets.iter().enumerate() {
        let d = stationary_orientation_density(&s, pe, 1.0, l_max, truncation)?;
        let c = d.linear_response();
        let aniso = match d.to_family(65, 128) {
            Ok(f) => anisotropy_condition(&f, &s)?,
            Err(_) => {
                out.notes.push(format!("peclet {pe}: truncation dips to {:e}, anisotropy skipped", d.min_value));
                f64::NAN
            }
        };
        let mass_err = (d.mass() - 1.0).abs();
        masses = masses.max(mass_err);
        all_positive &= aniso > 0.0 || aniso.is_nan();
        if k == 0 {
            out.checks.push(Check::near(format!("linear response at peclet {pe}"), c, 0.5, tol.get("linear_response", 0.005)));
        }
        csv.push(vec![pe, c, aniso, d.min_value, mass_err, tail(&d)])?;
    }
    out.checks.push(Check::below("mass conservation", masses, tol.get("mass", 1e-14)));
    out.checks.push(Check::holds("positive alignment with the extension", all_positive));
    out.csv = csv;
    Ok(out)
}
