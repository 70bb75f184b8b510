//! Phase-space densities `f(x, p) = ρ(x) F(p)` on a containment domain of
//! unit volume.

use std::f64::consts::PI;

use nalgebra::Unit;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{outer, Mat3, UnitVec3, Vec3};
use crate::quadrature::SurfaceQuadrature;

/// Containment domain, centred at the origin, of volume one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[-1/2, 1/2]³`
    #[default]
    UnitCube,
    /// Ball of radius `(3/(4π))^{1/3}`.
    Ball,
}

impl Domain {
    pub fn volume(&self) -> f64 {
        1.0
    }

    pub fn ball_radius() -> f64 {
        (3.0 / (4.0 * PI)).cbrt()
    }

    /// Half-width of the smallest centred cube containing the domain.
    pub fn half_extent(&self) -> f64 {
        match self {
            Domain::UnitCube => 0.5,
            Domain::Ball => Self::ball_radius(),
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Domain::UnitCube => x.iter().all(|c| c.abs() <= 0.5),
            Domain::Ball => x.norm() <= Self::ball_radius(),
        }
    }

    /// Closest point of the closed domain.
    pub fn project(&self, x: &Vec3) -> Vec3 {
        match self {
            Domain::UnitCube => x.map(|c| c.clamp(-0.5, 0.5)),
            Domain::Ball => {
                let r = x.norm();
                let rb = Self::ball_radius();
                if r <= rb {
                    *x
                } else {
                    x * (rb / r)
                }
            }
        }
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        match self {
            Domain::UnitCube => {
                let q = x.map(|c| c.abs() - 0.5);
                let outside = q.map(|c| c.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
            Domain::Ball => x.norm() - Self::ball_radius(),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let h = self.half_extent();
        loop {
            let x = Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h));
            if self.contains(&x) {
                return x;
            }
        }
    }
}

/// Trilinear table on the domain's bounding cube, nodes at both ends of each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialTable {
    pub dims: [usize; 3],
    /// Values in x-fastest order.
    pub values: Vec<f64>,
}

impl SpatialTable {
    pub fn from_fn(dims: [usize; 3], half: f64, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidParameter("spatial table needs >= 2 nodes per axis".into()));
        }
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let x = Self::node(dims, half, [i, j, k]);
                    values.push(f(&x));
                }
            }
        }
        let table = Self { dims, values };
        table.validate()?;
        Ok(table)
    }

    fn node(dims: [usize; 3], half: f64, idx: [usize; 3]) -> Vec3 {
        Vec3::from_fn(|a, _| -half + 2.0 * half * idx[a] as f64 / (dims[a] - 1) as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.dims.iter().product::<usize>() {
            return Err(Error::InvalidParameter("spatial table size does not match its dimensions".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("spatial table values must be finite and nonnegative".into()));
        }
        Ok(())
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn interpolate(&self, x: &Vec3, half: f64) -> f64 {
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a] - 1;
            let s = ((x[a] + half) / (2.0 * half) * n as f64).clamp(0.0, n as f64);
            let i = (s.floor() as usize).min(n - 1);
            idx[a] = i;
            frac[a] = s - i as f64;
        }
        let mut v = 0.0;
        for corner in 0..8 {
            let (di, dj, dk) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = [di, dj, dk]
                .iter()
                .zip(&frac)
                .map(|(&d, &t)| if d == 1 { t } else { 1.0 - t })
                .product::<f64>();
            v += w * self.at(idx[0] + di, idx[1] + dj, idx[2] + dk);
        }
        v
    }

    /// Exact integral of the trilinear interpolant over the cube.
    fn integral(&self, half: f64) -> f64 {
        let h: Vec<f64> = (0..3).map(|a| 2.0 * half / (self.dims[a] - 1) as f64).collect();
        let w = |a: usize, i: usize| if i == 0 || i == self.dims[a] - 1 { 0.5 * h[a] } else { h[a] };
        let mut s = 0.0;
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    s += w(0, i) * w(1, j) * w(2, k) * self.at(i, j, k);
                }
            }
        }
        s
    }

    fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Spatial profile `ρ(x)`, normalized to total mass one on the domain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialProfile {
    #[default]
    Uniform,
    /// `Π_k 2 sin²(π(x_k + 1/2))` on the unit cube: smooth, vanishing with
    /// its derivative on the boundary.
    SineSquared,
    Tabulated(SpatialTable),
}

/// Orientation law `F(p)` on the unit sphere, mass one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrientationFamily {
    Uniform,
    DiracAligned { p0: Vec3 },
    /// Von Mises–Fisher law `κ e^{κ p·p₀} / (4π sinh κ)`.
    AxisymmetricSmooth { p0: Vec3, kappa: f64 },
    Tabulated(SphereTable),
}

/// Bilinear table in `(θ, φ)`: `n_theta` rows from pole to pole, `n_phi`
/// periodic columns. Normalized to mass one on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTable {
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

impl SphereTable {
    pub fn from_fn(n_theta: usize, n_phi: usize, f: impl Fn(&UnitVec3) -> f64) -> Result<Self> {
        if n_theta < 2 || n_phi < 3 {
            return Err(Error::InvalidParameter("sphere table needs n_theta >= 2 and n_phi >= 3".into()));
        }
        let mut values = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = PI * i as f64 / (n_theta - 1) as f64;
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let p = Unit::new_unchecked(Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
                values.push(f(&p));
            }
        }
        Self::from_values(n_theta, n_phi, values)
    }

    pub fn from_values(n_theta: usize, n_phi: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_theta * n_phi {
            return Err(Error::InvalidParameter("sphere table size does not match its dimensions".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("sphere table values must be finite and nonnegative".into()));
        }
        let mut t = Self { n_theta, n_phi, values };
        let mass = t.mass();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("sphere table has zero mass".into()));
        }
        t.values.iter_mut().for_each(|v| *v /= mass);
        Ok(t)
    }

    /// Exact integral of the interpolant over the sphere.
    pub fn mass(&self) -> f64 {
        let h = PI / (self.n_theta - 1) as f64;
        let dphi = 2.0 * PI / self.n_phi as f64;
        let row = |i: usize| self.values[i * self.n_phi..(i + 1) * self.n_phi].iter().sum::<f64>() * dphi;
        let mut total = 0.0;
        for i in 0..self.n_theta - 1 {
            let (t0, t1) = (h * i as f64, h * (i + 1) as f64);
            // ∫ t sinθ over the row band, t = (θ − θᵢ)/h
            let w_hi = -t1.cos() + (t1.sin() - t0.sin()) / h;
            let w_lo = t0.cos() - t1.cos() - w_hi;
            total += w_lo * row(i) + w_hi * row(i + 1);
        }
        total
    }

    pub fn interpolate(&self, p: &UnitVec3) -> f64 {
        let theta = p.z.clamp(-1.0, 1.0).acos();
        let mut phi = p.y.atan2(p.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let s = theta / PI * (self.n_theta - 1) as f64;
        let i = (s.floor() as usize).min(self.n_theta - 2);
        let ti = s - i as f64;
        let u = phi / (2.0 * PI) * self.n_phi as f64;
        let j = (u.floor() as usize) % self.n_phi;
        let tj = u - u.floor();
        let j1 = (j + 1) % self.n_phi;
        let at = |a: usize, b: usize| self.values[a * self.n_phi + b];
        (1.0 - ti) * ((1.0 - tj) * at(i, j) + tj * at(i, j1)) + ti * ((1.0 - tj) * at(i + 1, j) + tj * at(i + 1, j1))
    }

    fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// `E[(p·p₀)²]` for the von Mises–Fisher law.
pub fn vmf_axial_moment(kappa: f64) -> f64 {
    if kappa < 1e-3 {
        let k2 = kappa * kappa;
        1.0 / 3.0 + 2.0 * k2 / 45.0 - 4.0 * k2 * k2 / 945.0
    } else {
        let langevin = 1.0 / kappa.tanh() - 1.0 / kappa;
        1.0 - 2.0 * langevin / kappa
    }
}

impl OrientationFamily {
    pub fn dirac(p0: Vec3) -> Result<Self> {
        Ok(OrientationFamily::DiracAligned { p0: unit(&p0)?.into_inner() })
    }

    pub fn von_mises_fisher(p0: Vec3, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("concentration must be finite and >= 0, got {kappa}")));
        }
        Ok(OrientationFamily::AxisymmetricSmooth { p0: unit(&p0)?.into_inner(), kappa })
    }

    /// Density value `F(p)`; `None` for the Dirac law.
    pub fn value(&self, p: &UnitVec3) -> Option<f64> {
        match self {
            OrientationFamily::Uniform => Some(1.0 / (4.0 * PI)),
            OrientationFamily::DiracAligned { .. } => None,
            OrientationFamily::AxisymmetricSmooth { p0, kappa } => {
                let k = *kappa;
                if k < 1e-8 {
                    return Some(1.0 / (4.0 * PI));
                }
                // κ e^{κ(c−1)} / (2π (1 − e^{−2κ}))
                let c = p.dot(p0);
                Some(k * (k * (c - 1.0)).exp() / (2.0 * PI * (-(-2.0 * k).exp_m1())))
            }
            OrientationFamily::Tabulated(t) => Some(t.interpolate(p)),
        }
    }

    /// `∫ p⊗p F(p) dp`.
    pub fn second_moment(&self) -> Mat3 {
        match self {
            OrientationFamily::Uniform => Mat3::identity() / 3.0,
            OrientationFamily::DiracAligned { p0 } => outer(p0, p0),
            OrientationFamily::AxisymmetricSmooth { p0, kappa } => {
                let m = vmf_axial_moment(*kappa);
                let pp = outer(p0, p0);
                pp * m + (Mat3::identity() - pp) * (0.5 * (1.0 - m))
            }
            OrientationFamily::Tabulated(t) => {
                let q = SurfaceQuadrature::product((t.n_theta * 8).max(64), (t.n_phi * 8).max(128)).expect("sphere rule");
                let m: Mat3 = q.integrate(|p| outer(p, p) * t.interpolate(p));
                crate::kernels::sym(&m)
            }
        }
    }

    /// `∫ (p⊗p − Id/3) F(p) dp`, symmetric and trace-free.
    pub fn q_tensor(&self) -> Mat3 {
        match self {
            OrientationFamily::Uniform => Mat3::zeros(),
            _ => crate::kernels::deviatoric(&self.second_moment()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVec3 {
        match self {
            OrientationFamily::Uniform => uniform_direction(rng),
            OrientationFamily::DiracAligned { p0 } => Unit::new_unchecked(*p0),
            OrientationFamily::AxisymmetricSmooth { p0, kappa } => sample_vmf(rng, p0, *kappa),
            OrientationFamily::Tabulated(t) => {
                let bound = t.max();
                loop {
                    let p = uniform_direction(rng);
                    if rng.random::<f64>() * bound <= t.interpolate(&p) {
                        return p;
                    }
                }
            }
        }
    }
}

fn unit(v: &Vec3) -> Result<UnitVec3> {
    let n = v.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidParameter("orientation axis must be a nonzero vector".into()));
    }
    Ok(Unit::new_normalize(*v))
}

pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> UnitVec3 {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Unit::new_normalize(Vec3::new(v[0], v[1], v[2]))
}

fn sample_vmf<R: Rng + ?Sized>(rng: &mut R, p0: &Vec3, kappa: f64) -> UnitVec3 {
    if kappa < 1e-8 {
        return uniform_direction(rng);
    }
    let u: f64 = rng.random();
    let w = (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let helper = if p0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = p0.cross(&helper).normalize();
    let e2 = p0.cross(&e1);
    let s = (1.0 - w * w).max(0.0).sqrt();
    Unit::new_normalize(p0 * w + (e1 * phi.cos() + e2 * phi.sin()) * s)
}

/// Separable phase-space density `f(x, p) = ρ(x) F(p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationDensity {
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub profile: SpatialProfile,
    pub family: OrientationFamily,
}

impl OrientationDensity {
    pub fn new(domain: Domain, profile: SpatialProfile, family: OrientationFamily) -> Result<Self> {
        let mut d = Self { domain, profile, family };
        d.normalize()?;
        Ok(d)
    }

    pub fn uniform() -> Self {
        Self { domain: Domain::UnitCube, profile: SpatialProfile::Uniform, family: OrientationFamily::Uniform }
    }

    pub fn with_family(family: OrientationFamily) -> Self {
        Self { domain: Domain::UnitCube, profile: SpatialProfile::Uniform, family }
    }

    fn normalize(&mut self) -> Result<()> {
        match (&mut self.profile, self.domain) {
            (SpatialProfile::SineSquared, Domain::Ball) | (SpatialProfile::Tabulated(_), Domain::Ball) => {
                Err(Error::InvalidParameter("sine-squared and tabulated profiles are defined on the unit cube".into()))
            }
            (SpatialProfile::Tabulated(t), Domain::UnitCube) => {
                t.validate()?;
                let mass = t.integral(0.5);
                if !(mass > 0.0) {
                    return Err(Error::InvalidParameter("spatial table has zero mass".into()));
                }
                t.values.iter_mut().for_each(|v| *v /= mass);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Spatial density `ρ(x)`, zero outside the domain.
    pub fn rho(&self, x: &Vec3) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        match &self.profile {
            SpatialProfile::Uniform => 1.0,
            SpatialProfile::SineSquared => x.iter().map(|c| 2.0 * (PI * (c + 0.5)).sin().powi(2)).product(),
            SpatialProfile::Tabulated(t) => t.interpolate(x, 0.5),
        }
    }

    fn rho_max(&self) -> f64 {
        match &self.profile {
            SpatialProfile::Uniform => 1.0,
            SpatialProfile::SineSquared => 8.0,
            SpatialProfile::Tabulated(t) => t.max(),
        }
    }

    /// `f(x, p)`; `None` for Dirac orientation laws.
    pub fn value(&self, x: &Vec3, p: &UnitVec3) -> Option<f64> {
        self.family.value(p).map(|f| f * self.rho(x))
    }

    /// `∫ (p⊗p − Id/3) f(x, p) dp`.
    pub fn q_tensor_at(&self, x: &Vec3) -> Mat3 {
        self.family.q_tensor() * self.rho(x)
    }

    /// Center drawn from `ρ` by rejection against the bounding cube.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let bound = self.rho_max();
        loop {
            let x = self.domain.sample_uniform(rng);
            if matches!(self.profile, SpatialProfile::Uniform) || rng.random::<f64>() * bound <= self.rho(&x) {
                return x;
            }
        }
    }

    pub fn sample_orientation<R: Rng + ?Sized>(&self, rng: &mut R, _x: &Vec3) -> UnitVec3 {
        self.family.sample(rng)
    }
}
