//! The continuum model: active stress, Oseen volume potentials, the flow to
//! first order in `λ`, and the energy balance of the effective system.
//!
//! Volume potentials `∫_Ω K(x − y) τ(y) dy` use singularity subtraction: the
//! constant `τ(x̂)` at the closest domain point is integrated exactly through a
//! boundary integral, and the remainder `τ(y) − τ(x̂)` is summed on a volume rule
//! that skips the node sharing a cell with `x`.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Domain, OrientationDensity, OrientationFamily};
use crate::error::{Error, Result};
use crate::flow::{FlowField, GradientMode};
use crate::kernels::{oseen, oseen_apply_gradient, sym, FluidParams, Mat3, UnitVec3, Vec3};
use crate::quadrature::{gauss_legendre, BallQuadrature, SurfaceQuadrature};
use crate::swimmer::SwimmerParams;

/// How the swimming intensity enters the active stress.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaConvention {
    /// `σ₁ = α (3μ/4) F(β) Q`, linear in `α`.
    #[default]
    Linear,
    /// `σ₁ = α · (3αμ/4) F(β) Q`.
    AsPrinted,
}

/// `σ₁(x) = c ρ(x) ∫ (p⊗p − Id/3) F(p) dp` with `c` fixed by the convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveStress {
    pub density: OrientationDensity,
    pub alpha: f64,
    /// `(3/4) F(β)`, free of `α` and `μ`.
    pub jcal: f64,
    pub mu: f64,
    pub convention: AlphaConvention,
    q: Mat3,
}

impl ActiveStress {
    pub fn new(density: OrientationDensity, sp: &SwimmerParams) -> Self {
        let q = density.family.q_tensor();
        Self { density, alpha: sp.alpha, jcal: 0.75 * sp.dipole_factor(), mu: sp.fluid.mu, convention: AlphaConvention::Linear, q }
    }

    pub fn with_convention(mut self, convention: AlphaConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Prefactor of `ρ Q` in `σ₁`.
    pub fn coefficient(&self) -> f64 {
        match self.convention {
            AlphaConvention::Linear => self.alpha * self.mu * self.jcal,
            AlphaConvention::AsPrinted => self.alpha * self.alpha * self.mu * self.jcal,
        }
    }

    /// Orientation tensor `∫ (p⊗p − Id/3) F dp` of the density's family.
    pub fn orientation_tensor(&self) -> Mat3 {
        self.q
    }

    /// Symmetric, trace-free, and zero outside the domain.
    pub fn sigma(&self, x: &Vec3) -> Mat3 {
        let rho = self.density.rho(x);
        if rho == 0.0 {
            return Mat3::zeros();
        }
        self.q * (self.coefficient() * rho)
    }

    pub fn fluid(&self) -> FluidParams {
        FluidParams { mu: self.mu, ..FluidParams::default() }
    }
}

/// Region carrying a volume potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Cube { center: Vec3, half: f64 },
    Ball { center: Vec3, radius: f64 },
}

impl Region {
    pub fn of_domain(domain: &Domain) -> Self {
        match domain {
            Domain::UnitCube => Region::Cube { center: Vec3::zeros(), half: 0.5 },
            Domain::Ball => Region::Ball { center: Vec3::zeros(), radius: Domain::ball_radius() },
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Region::Cube { half, .. } => (2.0 * half).powi(3),
            Region::Ball { radius, .. } => 4.0 * PI / 3.0 * radius.powi(3),
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        match *self {
            Region::Cube { center, half } => (x - center).amax() <= half,
            Region::Ball { center, radius } => (x - center).norm() <= radius,
        }
    }

    pub fn project(&self, x: &Vec3) -> Vec3 {
        match *self {
            Region::Cube { center, half } => center + (x - center).map(|c| c.clamp(-half, half)),
            Region::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= radius {
                    *x
                } else {
                    center + d * (radius / r)
                }
            }
        }
    }

    /// Closest point, moved a relative `1e-12` toward the center so that
    /// evaluations there see the interior.
    pub fn project_inside(&self, x: &Vec3) -> Vec3 {
        let (center, p) = match *self {
            Region::Cube { center, .. } | Region::Ball { center, .. } => (center, self.project(x)),
        };
        center + (p - center) * (1.0 - 1e-12)
    }

    /// Nodes, weights and exclusion radii. A cube gets the `n³` midpoint rule;
    /// a ball gets a refined spherical tensor rule with about `n` nodes per axis.
    pub fn volume_rule(&self, n: usize) -> Result<Vec<(Vec3, f64, f64)>> {
        if n == 0 {
            return Err(Error::InvalidParameter("volume rule needs n >= 1".into()));
        }
        match *self {
            Region::Cube { center, half } => {
                let h = 2.0 * half / n as f64;
                let w = h * h * h;
                let mut nodes = Vec::with_capacity(n * n * n);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let y = center
                                + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h
                                - Vec3::repeat(half);
                            nodes.push((y, w, 0.5 * h));
                        }
                    }
                }
                Ok(nodes)
            }
            Region::Ball { center, radius } => {
                let level = ((n as f64 / 4.0).log2().ceil().max(0.0)) as usize;
                let q = BallQuadrature::refined(4, level)?;
                let r3 = radius.powi(3);
                Ok(q.nodes().iter().map(|(y, w)| (center + y * radius, w * r3, 0.5 * (w * r3).cbrt())).collect())
            }
        }
    }

    /// `∮_{∂Ω} f(y, n(y)) dS(y)` resolved around `x`.
    pub fn boundary_integral<T, F>(&self, x: &Vec3, f: F) -> T
    where
        T: Add<Output = T> + Mul<f64, Output = T> + Default,
        F: Fn(&Vec3, &Vec3) -> T,
    {
        match *self {
            Region::Cube { center, half } => {
                let mut total = T::default();
                for axis in 0..3 {
                    for sign in [-1.0, 1.0] {
                        let mut n = Vec3::zeros();
                        n[axis] = sign;
                        let mut u = Vec3::zeros();
                        u[(axis + 1) % 3] = 1.0;
                        let mut v = Vec3::zeros();
                        v[(axis + 2) % 3] = 1.0;
                        let c = center + n * half;
                        total = total + face_panel(x, &c, &u, &v, &n, half, 0, &f);
                    }
                }
                total
            }
            Region::Ball { center, radius } => {
                let d = x - center;
                let r = d.norm();
                let axis = if r > 1e-14 { UnitVec3::new_normalize(d) } else { Vec3::z_axis() };
                let feature = ((r - radius).abs() / radius).max(1e-12);
                let q = SurfaceQuadrature::graded(&axis, feature, 10, 24).expect("sphere rule");
                let area = radius * radius;
                q.nodes().iter().fold(T::default(), |acc, (n, w)| {
                    let n = n.into_inner();
                    acc + f(&(center + n * radius), &n) * (w * area)
                })
            }
        }
    }
}

/// Gauss rule on a square panel of half-width `half`, split while `x` is close.
#[allow(clippy::too_many_arguments)]
fn face_panel<T, F>(x: &Vec3, c: &Vec3, u: &Vec3, v: &Vec3, n: &Vec3, half: f64, depth: usize, f: &F) -> T
where
    T: Add<Output = T> + Mul<f64, Output = T> + Default,
    F: Fn(&Vec3, &Vec3) -> T,
{
    const ORDER: usize = 6;
    if depth < 24 && (x - c).norm() < 3.0 * half {
        let h = 0.5 * half;
        let mut acc = T::default();
        for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            acc = acc + face_panel(x, &(c + u * (su * h) + v * (sv * h)), u, v, n, h, depth + 1, f);
        }
        return acc;
    }
    let (g, gw) = gauss_legendre(ORDER);
    let mut acc = T::default();
    for (a, wa) in g.iter().zip(&gw) {
        for (b, wb) in g.iter().zip(&gw) {
            let y = c + u * (a * half) + v * (b * half);
            acc = acc + f(&y, n) * (wa * wb * half * half);
        }
    }
    acc
}

type TensorField = Arc<dyn Fn(&Vec3) -> Mat3 + Send + Sync>;
type VectorField = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// `scale · St⁻¹(div τ)(x) = scale · ∫_Ω ∂_k U_ij(x − y) τ_jk(y) dy`.
#[derive(Clone)]
pub struct StressPotential {
    region: Region,
    nodes: Vec<(Vec3, f64, f64)>,
    values: Vec<Mat3>,
    field: TensorField,
    scale: f64,
    fluid: FluidParams,
    zero: bool,
}

impl std::fmt::Debug for StressPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StressPotential")
            .field("region", &self.region)
            .field("nodes", &self.nodes.len())
            .field("scale", &self.scale)
            .finish()
    }
}

/// `∂_k U_ij(r) τ_jk = (tr τ r/|r|³ − 3 (τ:r⊗r) r/|r|⁵) / (8πμ)` for symmetric `τ`.
#[inline]
fn doublet(r: &Vec3, tau: &Mat3, prefactor: f64) -> Vec3 {
    let r2 = r.norm_squared();
    let rn = r2.sqrt();
    let r3 = r2 * rn;
    let trr = r.dot(&(tau * r));
    r * (prefactor * (tau.trace() / r3 - 3.0 * trr / (r3 * r2)))
}

impl StressPotential {
    pub fn new(region: Region, n: usize, field: TensorField, scale: f64, fluid: FluidParams) -> Result<Self> {
        let nodes = region.volume_rule(n)?;
        let values: Vec<Mat3> = nodes.par_iter().map(|(y, _, _)| field(y)).collect();
        let zero = values.iter().all(|v| *v == Mat3::zeros());
        Ok(Self { region, nodes, values, field, scale, fluid, zero })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        let inside = self.region.contains(x);
        let anchor = if inside { *x } else { self.region.project_inside(x) };
        let hat = (self.field)(&anchor);
        if self.zero && hat == Mat3::zeros() {
            return Vec3::zeros();
        }
        // Inside the region the linear Taylor part of τ about x is subtracted
        // too, leaving a bounded integrand for the volume rule.
        let grad = if inside { fd_in_region(&self.region, &*self.field, x, Mat3::zeros()) } else { [Mat3::zeros(); 3] };
        let linear = |y: &Vec3| {
            let d = y - x;
            hat + grad[0] * d.x + grad[1] * d.y + grad[2] * d.z
        };
        let c = self.fluid.prefactor();
        let mut sum = Vec3::zeros();
        for ((y, w, _), v) in self.nodes.iter().zip(&self.values) {
            let r = x - y;
            if r.norm_squared() < 1e-24 {
                continue;
            }
            let d = v - linear(y);
            if d != Mat3::zeros() {
                sum += doublet(&r, &d, c) * *w;
            }
        }
        let fluid = self.fluid;
        // ∫_Ω ∂_k U_ij(x − y) τ_jk(y) dy = −∮ U(x − y) τ(y) n dS + ∫_Ω U(x − y) div τ dy
        // for τ affine; div τ is constant and the last integral is `K(x) div τ`.
        sum -= self.region.boundary_integral(x, |y, n| oseen(&(x - y), &fluid).map(|u| u * (linear(y) * n)).unwrap_or_default());
        if inside {
            let div = Vec3::from_fn(|j, _| (0..3).map(|k| grad[k][(j, k)]).sum());
            sum += volume_oseen(&self.region, x, &fluid) * div;
        }
        sum * self.scale
    }
}

/// `∂f/∂x_m` by central differences with both points kept inside the region.
fn fd_in_region<T, F>(region: &Region, field: &F, x: &Vec3, zero: T) -> [T; 3]
where
    T: Copy + Sub<Output = T> + Div<f64, Output = T>,
    F: Fn(&Vec3) -> T + ?Sized,
{
    let step = 1e-6 * region.volume().cbrt();
    let mut g = [zero; 3];
    for (m, gm) in g.iter_mut().enumerate() {
        let mut e = Vec3::zeros();
        e[m] = step;
        let (hi, lo) = (region.project_inside(&(x + e)), region.project_inside(&(x - e)));
        let span = hi[m] - lo[m];
        if span > 0.0 {
            *gm = (field(&hi) - field(&lo)) / span;
        }
    }
    g
}

/// `∫_Ω U(x − y) dy = (1/8πμ) ∮ [Id (y − x)·n − (y − x)⊗n] / |y − x| dS`.
fn volume_oseen(region: &Region, x: &Vec3, fluid: &FluidParams) -> Mat3 {
    let k: Mat3 = region.boundary_integral(x, |y, n| {
        let s = y - x;
        let rn = s.norm();
        if rn == 0.0 {
            return Mat3::zeros();
        }
        (Mat3::identity() * s.dot(n) - s * n.transpose()) / rn
    });
    k * fluid.prefactor()
}

/// `St⁻¹(g)(x) = ∫ U(x − y) g(y) dy` and its gradient.
#[derive(Clone)]
pub struct SourcePotential {
    region: Region,
    nodes: Vec<(Vec3, f64, f64)>,
    values: Vec<Vec3>,
    field: VectorField,
    fluid: FluidParams,
}

impl std::fmt::Debug for SourcePotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourcePotential").field("region", &self.region).field("nodes", &self.nodes.len()).finish()
    }
}

impl SourcePotential {
    pub fn new(region: Region, n: usize, field: VectorField, fluid: FluidParams) -> Result<Self> {
        let nodes = region.volume_rule(n)?;
        let values = nodes.par_iter().map(|(y, _, _)| field(y)).collect();
        Ok(Self { region, nodes, values, field, fluid })
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        let hat = (self.field)(&self.region.project_inside(x));
        let c = self.fluid.prefactor();
        let mut sum = Vec3::zeros();
        for ((y, w, ex), g) in self.nodes.iter().zip(&self.values) {
            let r = x - y;
            let r2 = r.norm_squared();
            if r2 < ex * ex {
                continue;
            }
            let d = g - hat;
            let rn = r2.sqrt();
            sum += (d / rn + r * (r.dot(&d) / (r2 * rn))) * (c * w);
        }
        if hat != Vec3::zeros() {
            sum += volume_oseen(&self.region, x, &self.fluid) * hat;
        }
        sum
    }

    /// Jacobian `∂u_i/∂x_k`.
    pub fn gradient(&self, x: &Vec3) -> Mat3 {
        let inside = self.region.contains(x);
        let anchor = if inside { *x } else { self.region.project_inside(x) };
        let hat = (self.field)(&anchor);
        // columns ∂g/∂x_m, subtracted with g(x) when x is inside
        let g = if inside { fd_in_region(&self.region, &*self.field, x, Vec3::zeros()) } else { [Vec3::zeros(); 3] };
        let linear = |y: &Vec3| {
            let d = y - x;
            hat + g[0] * d.x + g[1] * d.y + g[2] * d.z
        };
        let mut sum = Mat3::zeros();
        for ((y, w, _), v) in self.nodes.iter().zip(&self.values) {
            let r = x - y;
            if r.norm_squared() < 1e-24 {
                continue;
            }
            let d = v - linear(y);
            if d != Vec3::zeros() {
                sum += oseen_apply_gradient(&r, &d, &self.fluid).unwrap_or_default() * *w;
            }
        }
        let fluid = self.fluid;
        // ∫_Ω ∂_k U_ij(x − y) ℓ_j(y) dy = −∮ (U(x − y) ℓ(y)) ⊗ n dS + ∫_Ω U(x − y) ∂_k ℓ dy
        sum -= self
            .region
            .boundary_integral(x, |y, n| oseen(&(x - y), &fluid).map(|u| (u * linear(y)) * n.transpose()).unwrap_or_default());
        if inside {
            let jac = Mat3::from_columns(&g);
            sum += volume_oseen(&self.region, x, &fluid) * jac;
        }
        sum
    }
}

/// Smooth compactly supported force `g(x) = f (1 − |x − c|²/R²)⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceBump {
    pub center: Vec3,
    pub radius: f64,
    pub strength: Vec3,
}

impl Default for ForceBump {
    fn default() -> Self {
        Self { center: Vec3::zeros(), radius: 0.3, strength: Vec3::new(0.0, 0.0, 1.0) }
    }
}

impl ForceBump {
    pub fn value(&self, x: &Vec3) -> Vec3 {
        let s = (x - self.center).norm_squared() / (self.radius * self.radius);
        if s >= 1.0 {
            Vec3::zeros()
        } else {
            self.strength * (1.0 - s).powi(4)
        }
    }

    pub fn support(&self) -> Region {
        Region::Ball { center: self.center, radius: self.radius }
    }
}

/// Which construction produced an [`EffectiveFlow`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    W0,
    EinsteinCorrected,
}

/// Resolution of the volume potentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveGrid {
    /// Nodes per axis for `σ₁`.
    pub stress: usize,
    /// Nodes per axis for the Einstein term `5μ ρ D(u₀)`.
    pub einstein: usize,
    /// Nodes per axis on the support of `g`.
    pub source: usize,
}

impl Default for EffectiveGrid {
    fn default() -> Self {
        Self { stress: 48, einstein: 24, source: 16 }
    }
}

/// `ū = u₀ + w₀ + λ E`, with `u₀ = St⁻¹(g)`, `w₀ = St⁻¹(λ div σ₁)` and
/// `E = St⁻¹(5μ div(ρ D(u₀)))`.
#[derive(Clone, Debug)]
pub struct EffectiveFlow {
    pub kind: FlowKind,
    pub lambda: f64,
    pub w0: StressPotential,
    pub u0: Option<SourcePotential>,
    pub einstein: Option<StressPotential>,
}

impl EffectiveFlow {
    /// First-order correction `u₁ = w₀/λ + E`.
    pub fn first_order(&self, x: &Vec3) -> Vec3 {
        let mut u = self.w0.velocity(x) / self.lambda;
        if let Some(e) = &self.einstein {
            u += e.velocity(x);
        }
        u
    }

    pub fn leading_order(&self, x: &Vec3) -> Vec3 {
        self.u0.as_ref().map_or_else(Vec3::zeros, |u| u.velocity(x))
    }
}

impl FlowField for EffectiveFlow {
    fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        let mut u = self.w0.velocity(x);
        if let Some(u0) = &self.u0 {
            u += u0.velocity(x);
        }
        if let Some(e) = &self.einstein {
            u += e.velocity(x) * self.lambda;
        }
        Ok(u)
    }
}

/// `w₀ = St⁻¹(λ div σ₁) = λ ∫_Ω ∇U(x − y) σ₁(y) dy` on an `n³` grid.
pub fn solve_w0(stress: &ActiveStress, lambda: f64, n: usize) -> Result<EffectiveFlow> {
    let s = stress.clone();
    let field: TensorField = Arc::new(move |x| s.sigma(x));
    let w0 = StressPotential::new(Region::of_domain(&stress.density.domain), n, field, lambda, stress.fluid())?;
    Ok(EffectiveFlow { kind: FlowKind::W0, lambda, w0, u0: None, einstein: None })
}

/// Values of `w₀` at `points` on grids `n` and `2n`; fails when they differ by
/// more than `tolerance` relative to the largest value.
pub fn solve_w0_checked(stress: &ActiveStress, lambda: f64, points: &[Vec3], n: usize, tolerance: f64) -> Result<Vec<Vec3>> {
    let coarse = solve_w0(stress, lambda, n)?;
    let fine = solve_w0(stress, lambda, 2 * n)?;
    let a: Vec<Vec3> = points.par_iter().map(|x| coarse.w0.velocity(x)).collect();
    let b: Vec<Vec3> = points.par_iter().map(|x| fine.w0.velocity(x)).collect();
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let change = a.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
    if change > tolerance * scale {
        return Err(Error::Convergence(format!(
            "w0 changed by {:.3e} (relative) between grids {n} and {}",
            change / scale.max(f64::MIN_POSITIVE),
            2 * n
        )));
    }
    Ok(b)
}

/// The flow of the effective system to first order in `λ`.
pub fn solve_effective(g: &ForceBump, stress: &ActiveStress, lambda: f64, grid: &EffectiveGrid) -> Result<EffectiveFlow> {
    if !(g.radius > 0.0 && g.radius.is_finite()) {
        return Err(Error::InvalidParameter("force support must be a ball of positive radius".into()));
    }
    let fluid = stress.fluid();
    let mut flow = solve_w0(stress, lambda, grid.stress)?;
    flow.kind = FlowKind::EinsteinCorrected;
    let bump = *g;
    let u0 = SourcePotential::new(g.support(), grid.source, Arc::new(move |x| bump.value(x)), fluid)?;
    let u0_shared = Arc::new(u0.clone());
    let density = stress.density.clone();
    let mu = stress.mu;
    let tau: TensorField = Arc::new(move |x| {
        let rho = density.rho(x);
        if rho == 0.0 {
            Mat3::zeros()
        } else {
            sym(&u0_shared.gradient(x)) * (5.0 * mu * rho)
        }
    });
    flow.einstein = Some(StressPotential::new(Region::of_domain(&stress.density.domain), grid.einstein, tau, 1.0, fluid)?);
    flow.u0 = Some(u0);
    Ok(flow)
}

/// Divergence-free test field `φ = ∇b × A` with `b = (1 − |x − c|²/R²)⁶`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolenoidalBump {
    pub center: Vec3,
    pub radius: f64,
    pub axis: Vec3,
}

impl SolenoidalBump {
    /// `(g', g'', g''')` of `g(s) = (1 − s)⁶`, or zeros outside the support.
    fn profile(&self, x: &Vec3) -> (Vec3, f64, [f64; 3]) {
        let y = x - self.center;
        let r2 = self.radius * self.radius;
        let s = y.norm_squared() / r2;
        if s >= 1.0 {
            return (y, s, [0.0; 3]);
        }
        let t = 1.0 - s;
        (y, s, [-6.0 * t.powi(5), 30.0 * t.powi(4), -120.0 * t.powi(3)])
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        let (y, _, [g1, g2, _]) = self.profile(x);
        let r2 = self.radius * self.radius;
        y * y.transpose() * (4.0 * g2 / (r2 * r2)) + Mat3::identity() * (2.0 * g1 / r2)
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        let (y, _, [g1, _, _]) = self.profile(x);
        (y * (2.0 * g1 / (self.radius * self.radius))).cross(&self.axis)
    }

    /// `∂φ_i/∂x_j`.
    pub fn gradient(&self, x: &Vec3) -> Mat3 {
        let h = self.hessian(x);
        let mut g = Mat3::zeros();
        for j in 0..3 {
            g.set_column(j, &h.column(j).into_owned().cross(&self.axis));
        }
        g
    }

    pub fn laplacian(&self, x: &Vec3) -> Vec3 {
        let (y, s, [_, g2, g3]) = self.profile(x);
        let r4 = self.radius.powi(4);
        (y * (2.0 * (4.0 * s * g3 + 10.0 * g2) / r4)).cross(&self.axis)
    }

    /// Ball rule on the support.
    pub fn support_rule(&self, n: usize, level: usize) -> Result<Vec<(Vec3, f64)>> {
        let q = BallQuadrature::refined(n, level)?;
        let r3 = self.radius.powi(3);
        Ok(q.nodes().iter().map(|(y, w)| (self.center + y * self.radius, w * r3)).collect())
    }
}

/// Both sides of `2μ ∫ D(u):D(φ) = λ ∫ τ:D(φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakForm {
    /// `2μ ∫ D(u):D(φ)`, evaluated as `−μ ∫ u·Δφ`.
    pub viscous: f64,
    /// `λ ∫ σ₁:D(φ)`
    pub forcing: f64,
}

impl WeakForm {
    pub fn ratio(&self) -> f64 {
        self.viscous / self.forcing
    }
}

/// Weak-form pairing of `flow` and the active forcing against `φ`.
pub fn weak_form<F: FlowField + ?Sized>(
    flow: &F,
    stress: &ActiveStress,
    lambda: f64,
    phi: &SolenoidalBump,
    rule: &[(Vec3, f64)],
) -> Result<WeakForm> {
    let parts: Result<Vec<(f64, f64)>> = rule
        .par_iter()
        .map(|(x, w)| {
            let u = flow.velocity(x)?;
            let visc = -stress.mu * u.dot(&phi.laplacian(x)) * w;
            let force = lambda * stress.sigma(x).component_mul(&sym(&phi.gradient(x))).sum() * w;
            Ok((visc, force))
        })
        .collect();
    let (viscous, forcing) = parts?.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(WeakForm { viscous, forcing })
}

/// Rate-of-energy terms `−2μ ∫ (1 + 5ρλ/2)|D(u)|²` and `−λ ∫ σ₁:D(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub viscous: f64,
    pub active: f64,
}

pub fn energy_dissipation<F: FlowField + ?Sized>(
    flow: &F,
    stress: &ActiveStress,
    lambda: f64,
    rule: &[(Vec3, f64)],
    mode: GradientMode,
) -> Result<EnergyTerms> {
    let parts: Result<Vec<(f64, f64)>> = rule
        .par_iter()
        .map(|(x, w)| {
            let d = sym(&mode.evaluate(flow, x)?);
            let rho = stress.density.rho(x);
            let viscous = -2.0 * stress.mu * (1.0 + 2.5 * rho * lambda) * d.norm_squared() * w;
            let active = -lambda * stress.sigma(x).component_mul(&d).sum() * w;
            Ok((viscous, active))
        })
        .collect();
    let (viscous, active) = parts?.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(EnergyTerms { viscous, active })
}

/// Linear background flow `u = G x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFlow(pub Mat3);

impl FlowField for LinearFlow {
    fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.0 * x)
    }
    fn gradient(&self, _x: &Vec3) -> Result<Mat3> {
        Ok(self.0)
    }
}

/// `|S²| ∫ (p⊗p : S) F(p) dp` for a normalized orientation law.
pub fn anisotropy_condition(family: &OrientationFamily, s: &Mat3) -> Result<f64> {
    let scale = s.norm().max(1.0);
    if (s - s.transpose()).norm() > 1e-12 * scale || s.trace().abs() > 1e-12 * scale {
        return Err(Error::InvalidParameter("strain must be symmetric and trace-free".into()));
    }
    let value = match family {
        OrientationFamily::DiracAligned { p0 } => p0.dot(&(s * p0)),
        OrientationFamily::Uniform => 0.0,
        other => other.second_moment().component_mul(s).sum(),
    };
    Ok(4.0 * PI * value)
}
