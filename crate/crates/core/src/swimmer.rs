//! Single-swimmer Stokes solution: a sphere of radius `a` centred at the origin,
//! pushed by a point force `−k_f p` applied in the fluid at `aβp`.
//!
//! The exterior field is a point force plus an image system at `aβ⁻¹p`
//! (Stokeslet, stresslet, potential dipole) that cancels it on the sphere,
//! plus a translating-sphere field. Inside the ball the field is the rigid
//! translation `U₂ p`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fd_gradient, FlowField};
use crate::kernels::{
    contract_xx, grad_oseen_apply, grad_oseen_apply_gradient, guarded_norm, laplacian_oseen,
    laplacian_oseen_apply_gradient, oseen, oseen_apply_gradient, oseen_tilde, outer, FluidParams, Mat3,
    UnitVec3, Vec3,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwimmerParams {
    /// Swimming intensity; positive for pullers, negative for pushers.
    pub alpha: f64,
    /// Force offset, `> 1`.
    pub beta: f64,
    /// Particle radius.
    pub a: f64,
    pub fluid: FluidParams,
}

impl SwimmerParams {
    pub fn new(alpha: f64, beta: f64, a: f64, fluid: FluidParams) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {beta}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {a}")));
        }
        Ok(Self { alpha, beta, a, fluid })
    }

    /// Unit radius and unit force: `a = 1`, `k_f = 1`.
    pub fn unit_scaled(beta: f64, fluid: FluidParams) -> Result<Self> {
        Self::new(1.0 / (PI * fluid.mu), beta, 1.0, fluid)
    }

    pub fn with_radius(self, a: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, a, self.fluid)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.beta, self.a, self.fluid)
    }

    /// Propulsive force magnitude `k_f = απμa²`.
    pub fn k_f(&self) -> f64 {
        self.alpha * PI * self.fluid.mu * self.a * self.a
    }

    /// Image coefficients `(γ₁, γ₂, γ₃)`.
    pub fn gammas(&self) -> (f64, f64, f64) {
        let b1 = 1.0 / self.beta;
        let b2 = b1 * b1;
        (1.5 * b1 - 0.5 * b2 * b1, b2 - b2 * b2, 0.25 * b1 * (1.0 - b2).powi(2))
    }

    /// `F(β) = β − (5/2)β⁻² + (3/2)β⁻⁴`, the far-field dipole strength per `k_f a`.
    pub fn dipole_factor(&self) -> f64 {
        self.beta + self.stresslet_coefficient()
    }

    /// `−(5/2)β⁻² + (3/2)β⁻⁴`, the traction-moment coefficient of the unit-scaled solution.
    pub fn stresslet_coefficient(&self) -> f64 {
        let b2 = self.beta.powi(-2);
        -2.5 * b2 + 1.5 * b2 * b2
    }

    /// The active-stress prefactor as it is usually quoted, `(3αμ/4) F(β)`.
    ///
    /// It carries one power of `α` and of `μ` more than the far field of the
    /// swimmer supports; [`DipoleCoefficient::jcal`] is the consistent value.
    pub fn jcal_quoted(&self) -> f64 {
        0.75 * self.alpha * self.fluid.mu * self.dipole_factor()
    }

    /// Rigid translation speed `U₂ = k_f(1−γ₁)/(6πμa)`.
    pub fn u2(&self) -> f64 {
        self.k_f() * (1.0 - self.gammas().0) / (6.0 * PI * self.fluid.mu * self.a)
    }

    /// Volume fraction per particle, `4πa³/3`.
    pub fn volume(&self) -> f64 {
        4.0 * PI * self.a.powi(3) / 3.0
    }

    /// `k_f / (μ a)`, the natural velocity scale near the particle.
    pub fn velocity_scale(&self) -> f64 {
        self.k_f().abs() / (self.fluid.mu * self.a)
    }

    fn source_points(&self, p: &Vec3) -> (Vec3, Vec3) {
        (p * (self.a * self.beta), p * (self.a / self.beta))
    }
}

/// Which pieces of the exterior solution to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionPart {
    /// Point force plus image system plus translation.
    Full,
    /// Point force plus image system, which vanishes on the sphere.
    ImageSystem,
    /// Translating-sphere field, equal to `U₂ p` on the sphere.
    Translation,
}

impl SolutionPart {
    fn image(self) -> bool {
        matches!(self, SolutionPart::Full | SolutionPart::ImageSystem)
    }
    fn translation(self) -> bool {
        matches!(self, SolutionPart::Full | SolutionPart::Translation)
    }
}

/// Pressure of the exterior solution, written as
///
/// `k_f/(4π) [c₀ p·r₁/|r₁|³ + c₁ p·r₂/|r₂|³ + c₂ γ₂ a (A:r₂⊗r₂)/|r₂|⁵
///            + c₃ γ₃ a² p·r₂/|r₂|⁵ + c₄ (1−γ₁) p·x/|x|³]`
///
/// with `r₁ = x − aβp`, `r₂ = x − aβ⁻¹p`, `A = p⊗p − Id/3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureCoefficients(pub [f64; 5]);

impl PressureCoefficients {
    /// The commonly quoted form. It fails the Stokes residual check; kept for comparison.
    pub fn quoted() -> Self {
        Self([1.0, 1.0, 3.0, 3.0, 1.0])
    }

    /// Coefficients consistent with the velocity field.
    pub fn derived(sp: &SwimmerParams) -> Self {
        Self([-1.0, sp.gammas().0, 3.0, 0.0, 1.0])
    }

    fn basis(x: &Vec3, p: &Vec3, sp: &SwimmerParams) -> Result<[f64; 5]> {
        let guard = sp.fluid.singular_guard;
        let (s1, s2) = sp.source_points(p);
        let (r1, r2) = (x - s1, x - s2);
        let n1 = guarded_norm(&r1, guard)?;
        let n2 = guarded_norm(&r2, guard)?;
        let n0 = guarded_norm(x, guard)?;
        let (g1, g2, g3) = sp.gammas();
        let a = sp.a;
        let amat = outer(p, p) - Mat3::identity() / 3.0;
        let pref = sp.k_f() / (4.0 * PI);
        Ok([
            pref * p.dot(&r1) / n1.powi(3),
            pref * p.dot(&r2) / n2.powi(3),
            pref * g2 * a * contract_xx(&amat, &r2) / n2.powi(5),
            pref * g3 * a * a * p.dot(&r2) / n2.powi(5),
            pref * (1.0 - g1) * p.dot(x) / n0.powi(3),
        ])
    }
}

fn image_velocity_raw(x: &Vec3, p: &Vec3, sp: &SwimmerParams) -> Result<Vec3> {
    let f = &sp.fluid;
    let (s1, s2) = sp.source_points(p);
    let (r1, r2) = (x - s1, x - s2);
    let (g1, g2, g3) = sp.gammas();
    let a = sp.a;
    let amat = outer(p, p) - Mat3::identity() / 3.0;
    let v = -(oseen(&r1, f)? * p) + oseen(&r2, f)? * p * g1 - grad_oseen_apply(&r2, &amat, f)? * (g2 * a)
        + laplacian_oseen(&r2, f)? * p * (g3 * a * a);
    Ok(v * sp.k_f())
}

fn image_gradient_raw(x: &Vec3, p: &Vec3, sp: &SwimmerParams) -> Result<Mat3> {
    let f = &sp.fluid;
    let (s1, s2) = sp.source_points(p);
    let (r1, r2) = (x - s1, x - s2);
    let (g1, g2, g3) = sp.gammas();
    let a = sp.a;
    let amat = outer(p, p) - Mat3::identity() / 3.0;
    let j = -oseen_apply_gradient(&r1, p, f)? + oseen_apply_gradient(&r2, p, f)? * g1
        - grad_oseen_apply_gradient(&r2, &amat, f)? * (g2 * a)
        + laplacian_oseen_apply_gradient(&r2, p, f)? * (g3 * a * a);
    Ok(j * sp.k_f())
}

fn translation_velocity_raw(x: &Vec3, p: &Vec3, sp: &SwimmerParams) -> Result<Vec3> {
    let f = &sp.fluid;
    let r = guarded_norm(x, f.singular_guard)?;
    let c = sp.k_f() * (1.0 - sp.gammas().0);
    Ok((oseen(x, f)? * p + oseen_tilde(x, f)? * p * (sp.a * sp.a / (r * r))) * c)
}

fn translation_gradient_raw(x: &Vec3, p: &Vec3, sp: &SwimmerParams) -> Result<Mat3> {
    let f = &sp.fluid;
    let r = guarded_norm(x, f.singular_guard)?;
    let r2 = r * r;
    let r5 = r2 * r2 * r;
    let xp = x.dot(p);
    let dipole = (-(p * x.transpose()) - x * p.transpose() - Mat3::identity() * xp) / r5
        + x * x.transpose() * (5.0 * xp / (r5 * r2));
    let c = sp.k_f() * (1.0 - sp.gammas().0) / (8.0 * PI * f.mu);
    Ok(oseen_apply_gradient(x, p, f)? * (c * 8.0 * PI * f.mu) + dipole * (c * sp.a * sp.a))
}

/// Image-system velocity `v₁`, zero on `|x| = a`.
pub fn image_velocity(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<Vec3> {
    image_velocity_raw(x, p.as_ref(), sp)
}

/// Translating-sphere velocity `v₂`, equal to `U₂ p` on `|x| = a`.
pub fn translation_velocity(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<Vec3> {
    translation_velocity_raw(x, p.as_ref(), sp)
}

/// Exterior formula, evaluated wherever it is non-singular (also inside the ball).
pub fn exterior_velocity(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams, part: SolutionPart) -> Result<Vec3> {
    let p = p.as_ref();
    let mut v = Vec3::zeros();
    if part.image() {
        v += image_velocity_raw(x, p, sp)?;
    }
    if part.translation() {
        v += translation_velocity_raw(x, p, sp)?;
    }
    Ok(v)
}

/// Jacobian of [`exterior_velocity`].
pub fn exterior_gradient(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams, part: SolutionPart) -> Result<Mat3> {
    let p = p.as_ref();
    let mut j = Mat3::zeros();
    if part.image() {
        j += image_gradient_raw(x, p, sp)?;
    }
    if part.translation() {
        j += translation_gradient_raw(x, p, sp)?;
    }
    Ok(j)
}

/// Elementary solution `v[p]`: the exterior field for `|x| > a`, the rigid
/// translation `U₂ p` on the closed ball.
pub fn elementary_velocity(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<Vec3> {
    if x.norm() <= sp.a {
        Ok(p.as_ref() * sp.u2())
    } else {
        exterior_velocity(x, p, sp, SolutionPart::Full)
    }
}

/// Jacobian of [`elementary_velocity`]; zero inside the ball.
pub fn elementary_gradient(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<Mat3> {
    if x.norm() <= sp.a {
        Ok(Mat3::zeros())
    } else {
        exterior_gradient(x, p, sp, SolutionPart::Full)
    }
}

/// Exterior pressure with the consistent coefficients.
pub fn elementary_pressure(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<f64> {
    if x.norm() <= sp.a {
        return Err(Error::Domain(format!("pressure is defined outside the particle, |x| = {} <= a = {}", x.norm(), sp.a)));
    }
    pressure_with(x, p, sp, &PressureCoefficients::derived(sp), SolutionPart::Full)
}

fn pressure_with(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams, c: &PressureCoefficients, part: SolutionPart) -> Result<f64> {
    let b = PressureCoefficients::basis(x, p.as_ref(), sp)?;
    let mut q = 0.0;
    if part.image() {
        q += (0..4).map(|k| c.0[k] * b[k]).sum::<f64>();
    }
    if part.translation() {
        q += c.0[4] * b[4];
    }
    Ok(q)
}

/// The exterior solution as a [`FlowField`], for traction and residual checks.
#[derive(Clone, Copy, Debug)]
pub struct ExteriorFlow {
    pub p: UnitVec3,
    pub sp: SwimmerParams,
    pub part: SolutionPart,
    pub pressure: PressureCoefficients,
}

impl ExteriorFlow {
    pub fn new(p: UnitVec3, sp: SwimmerParams, part: SolutionPart) -> Self {
        Self { p, sp, part, pressure: PressureCoefficients::derived(&sp) }
    }

    pub fn with_pressure(mut self, pressure: PressureCoefficients) -> Self {
        self.pressure = pressure;
        self
    }
}

impl FlowField for ExteriorFlow {
    fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        exterior_velocity(x, &self.p, &self.sp, self.part)
    }
    fn gradient(&self, x: &Vec3) -> Result<Mat3> {
        exterior_gradient(x, &self.p, &self.sp, self.part)
    }
    fn pressure(&self, x: &Vec3) -> Result<f64> {
        pressure_with(x, &self.p, &self.sp, &self.pressure, self.part)
    }
}

/// Relative Stokes residual `|−μΔv + ∇p| / (|μΔv| + |∇p|)` by central differences
/// of the analytic velocity gradient and of the pressure.
pub fn stokes_residual<F: FlowField + ?Sized>(flow: &F, x: &Vec3, h: f64, fluid: &FluidParams) -> Result<f64> {
    let (lap, gp) = laplacian_and_pressure_gradient(flow, x, h)?;
    let lap = lap * fluid.mu;
    Ok((gp - lap).norm() / (lap.norm() + gp.norm()).max(1e-300))
}

fn laplacian_and_pressure_gradient<F: FlowField + ?Sized>(flow: &F, x: &Vec3, h: f64) -> Result<(Vec3, Vec3)> {
    let mut lap = Vec3::zeros();
    let mut gp = Vec3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let (gu, gd) = match (flow.gradient(&(x + e)), flow.gradient(&(x - e))) {
            (Ok(u), Ok(d)) => (u, d),
            _ => (fd_gradient(flow, &(x + e), h)?, fd_gradient(flow, &(x - e), h)?),
        };
        lap += (gu.column(k) - gd.column(k)) / (2.0 * h);
        gp[k] = (flow.pressure(&(x + e))? - flow.pressure(&(x - e))?) / (2.0 * h);
    }
    Ok((lap, gp))
}

/// Re-derives the pressure coefficients by least squares on the momentum
/// equation `μΔv = ∇p` at random exterior points.
pub fn fit_pressure_coefficients(p: &UnitVec3, sp: &SwimmerParams, samples: usize, seed: u64) -> Result<PressureCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flow = ExteriorFlow::new(*p, *sp, SolutionPart::Full);
    let (s1, s2) = sp.source_points(p.as_ref());
    let h = 1e-4 * sp.a;
    let mut rows = Vec::with_capacity(3 * samples);
    let mut rhs = Vec::with_capacity(3 * samples);
    let mut taken = 0;
    while taken < samples {
        let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if dir.norm() < 0.1 || dir.norm() > 1.0 {
            continue;
        }
        let x = dir.normalize() * (sp.a * rng.random_range(1.1..3.0));
        let clearance = (x - s1).norm().min((x - s2).norm());
        if clearance < 0.2 * sp.a {
            continue;
        }
        let (lap, _) = laplacian_and_pressure_gradient(&flow, &x, h)?;
        let mut grads = [Vec3::zeros(); 5];
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let up = PressureCoefficients::basis(&(x + e), p.as_ref(), sp)?;
            let dn = PressureCoefficients::basis(&(x - e), p.as_ref(), sp)?;
            for m in 0..5 {
                grads[m][k] = (up[m] - dn[m]) / (2.0 * h);
            }
        }
        let scale = lap.norm().max(1e-300);
        for k in 0..3 {
            rows.push(grads.map(|g| g[k] / scale));
            rhs.push(lap[k] * sp.fluid.mu / scale);
        }
        taken += 1;
    }
    let m = DMatrix::from_fn(rows.len(), 5, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let sol = m
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Convergence(format!("pressure fit: {e}")))?;
    let mut c = [0.0; 5];
    c.copy_from_slice(sol.as_slice());
    Ok(PressureCoefficients(c))
}

/// Far-field dipole of the swimmer: `v[p](x) ≈ (λ/N) μ ∇U(x) C(p)` with
/// `C(p) = α𝒥 p⊗p − 𝒥′ Id` and `λ/N = 4πa³/3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleCoefficient {
    /// `C(p)` for the generating orientation.
    pub cp: Mat3,
    /// `𝒥 = (3/4) F(β)`, independent of `α` and `μ`.
    pub jcal: f64,
    /// Isotropic coefficient, fitted from the far field.
    pub jprime: f64,
}

/// Far-field decay exponent the calibrated remainder must reach.
pub const REQUIRED_REMAINDER_DECAY: f64 = 2.8;

impl DipoleCoefficient {
    /// `R[p](x) = v[p](x) − (λ/N) μ ∇U(x) C(p)`.
    pub fn remainder(&self, x: &Vec3, p: &UnitVec3, sp: &SwimmerParams) -> Result<Vec3> {
        let v = elementary_velocity(x, p, sp)?;
        Ok(v - dipole_field(x, &self.cp, sp)?)
    }
}

fn dipole_field(x: &Vec3, c: &Mat3, sp: &SwimmerParams) -> Result<Vec3> {
    Ok(grad_oseen_apply(x, c, &sp.fluid)? * (sp.volume() * sp.fluid.mu))
}

/// Builds `C(p)` and calibrates `𝒥′` against the far field of `v[p]`.
///
/// `lambda` and `n` must satisfy `a³ = 3λ/(4πN)` for the radius in `sp`.
pub fn dipole_decomposition(p: &UnitVec3, sp: &SwimmerParams, lambda: f64, n: usize) -> Result<DipoleCoefficient> {
    if !(lambda > 0.0) || n == 0 {
        return Err(Error::InvalidParameter("need lambda > 0 and N >= 1".into()));
    }
    let a3 = 3.0 * lambda / (4.0 * PI * n as f64);
    if ((sp.a.powi(3) - a3) / a3).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "radius {} is inconsistent with lambda = {lambda}, N = {n} (expected {})",
            sp.a,
            a3.cbrt()
        )));
    }
    let jcal = 0.75 * sp.dipole_factor();
    let pp = outer(p.as_ref(), p.as_ref());
    let traced = pp * (sp.alpha * jcal);

    // Isotropic part: project the residual onto the radial field of −Id over
    // spheres of radius R and 2R, then extrapolate in R⁻².
    let quad = crate::quadrature::SurfaceQuadrature::product_about(p, 8, 16)?;
    let fit_at = |radius: f64| -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (n, w) in quad.nodes() {
            let x = n.into_inner() * radius;
            let e = elementary_velocity(&x, p, sp)? - dipole_field(&x, &traced, sp)?;
            let g = dipole_field(&x, &(-Mat3::identity()), sp)?;
            num += w * e.dot(&g);
            den += w * g.dot(&g);
        }
        Ok(num / den)
    };
    let r0 = 200.0 * sp.a * sp.beta;
    let (c1, c2) = (fit_at(r0)?, fit_at(2.0 * r0)?);
    let jprime = (4.0 * c2 - c1) / 3.0;
    let coeff = DipoleCoefficient { cp: traced - Mat3::identity() * jprime, jcal, jprime };

    let exponent = remainder_decay_exponent(&coeff, p, sp)?;
    if exponent < REQUIRED_REMAINDER_DECAY {
        return Err(Error::Calibration { exponent, required: REQUIRED_REMAINDER_DECAY });
    }
    Ok(coeff)
}

/// Least-squares decay exponent of `|R[p]|` along a few rays over `|x| ∈ [20a, 320a]`.
pub fn remainder_decay_exponent(coeff: &DipoleCoefficient, p: &UnitVec3, sp: &SwimmerParams) -> Result<f64> {
    let dirs = [
        Vec3::new(1.0, 0.3, -0.2),
        Vec3::new(-0.4, 1.0, 0.5),
        Vec3::new(0.2, -0.6, 1.0),
        Vec3::new(-0.7, -0.7, -0.3),
    ];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for d in dirs {
        let d = d.normalize();
        for k in 0..5 {
            let r = sp.a * 20.0 * 2f64.powi(k);
            let rem = coeff.remainder(&(d * r), p, sp)?.norm();
            xs.push(r.ln());
            ys.push(rem.ln());
        }
    }
    Ok(-crate::fit::slope(&xs, &ys)?)
}

/// `R[p](x)` with a freshly calibrated `C(p)`.
pub fn taylor_remainder(x: &Vec3, p: &UnitVec3, sp: &SwimmerParams, lambda: f64, n: usize) -> Result<Vec3> {
    dipole_decomposition(p, sp, lambda, n)?.remainder(x, p, sp)
}

/// Disturbance of a rigid sphere of radius `a` held in the strain `Sx`:
/// `w[S] = −(5/2)(S:x⊗x)a³x/|x|⁵ − Sx a⁵/|x|⁵ + (5/2)(S:x⊗x)a⁵x/|x|⁷`.
pub fn passive_strain_velocity(x: &Vec3, s: &Mat3, a: f64) -> Result<Vec3> {
    let r = x.norm();
    if r < a * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("passive strain field needs |x| >= a, got |x| = {r}, a = {a}")));
    }
    let r2 = r * r;
    let r5 = r2 * r2 * r;
    let sxx = contract_xx(s, x);
    let a3 = a * a * a;
    let a5 = a3 * a * a;
    Ok(x * (-2.5 * sxx * a3 / r5) - s * x * (a5 / r5) + x * (2.5 * sxx * a5 / (r5 * r2)))
}
