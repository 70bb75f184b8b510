//! Quadrature rules: Gauss–Legendre on intervals, product rules on the unit
//! sphere, tensor rules on balls and boxes.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};

use crate::error::{Error, Result};
use crate::kernels::{UnitVec3, Vec3};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

/// Gauss–Legendre rule mapped to `[lo, hi]`.
pub fn gauss_legendre_interval(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

/// Nodes and weights on the unit sphere.
#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    nodes: Vec<(UnitVec3, f64)>,
    order: usize,
}

impl SurfaceQuadrature {
    /// Gauss–Legendre in `cos θ` times a uniform azimuthal grid about `e₃`.
    ///
    /// Exact for spherical harmonics of degree `≤ min(2 n_theta − 1, n_phi − 1)`.
    pub fn product(n_theta: usize, n_phi: usize) -> Result<Self> {
        Self::product_about(&Vec3::z_axis(), n_theta, n_phi)
    }

    /// Product rule with its pole rotated onto `axis`.
    pub fn product_about(axis: &UnitVec3, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidParameter("sphere rule needs n_theta, n_phi >= 1".into()));
        }
        let (u, w) = gauss_legendre(n_theta);
        let panels: Vec<(f64, f64, f64)> = u.iter().zip(&w).map(|(&u, &w)| (1.0 - u, 1.0 + u, w)).collect();
        let order = (2 * n_theta - 1).min(n_phi - 1);
        Ok(Self { nodes: assemble(axis, &panels, n_phi), order })
    }

    /// Composite rule whose `cos θ` panels shrink geometrically toward the pole
    /// `axis`, resolving fields with sources at distance `min_feature` (relative
    /// to the radius) just outside the pole. Keeps polynomial exactness of
    /// degree `min(2 n_per_panel − 1, n_phi − 1)`.
    pub fn graded(axis: &UnitVec3, min_feature: f64, n_per_panel: usize, n_phi: usize) -> Result<Self> {
        if !(min_feature > 0.0) || n_per_panel == 0 || n_phi == 0 {
            return Err(Error::InvalidParameter("graded sphere rule needs positive feature size and node counts".into()));
        }
        // Panels are laid out in t = 1 − cos θ ∈ [0, 2]; nodes keep t and 2 − t
        // separately so that positions near the pole carry full precision.
        let ratio: f64 = 0.5;
        let t_min = (min_feature * min_feature * 1e-2).min(1e-2);
        let mut edges = vec![2.0];
        let mut t = 1.0;
        while t > t_min {
            edges.push(t);
            t *= ratio;
        }
        edges.push(t);
        edges.push(0.0);
        let (g, gw) = gauss_legendre(n_per_panel);
        let mut panels = Vec::new();
        for pair in edges.windows(2) {
            let (hi, lo) = (pair[0], pair[1]);
            let half = 0.5 * (hi - lo);
            for (x, w) in g.iter().zip(&gw) {
                let t = lo + half * (1.0 + x);
                panels.push((t, 2.0 - t, w * half));
            }
        }
        let order = (2 * n_per_panel - 1).min(n_phi - 1);
        Ok(Self { nodes: assemble(axis, &panels, n_phi), order })
    }

    pub fn nodes(&self) -> &[(UnitVec3, f64)] {
        &self.nodes
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_{S²} f` over the unit sphere.
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: Fn(&UnitVec3) -> T,
    {
        self.nodes.iter().fold(T::default(), |acc, (n, w)| acc + f(n) * *w)
    }
}

impl Default for SurfaceQuadrature {
    fn default() -> Self {
        Self::product(32, 64).expect("default sphere rule")
    }
}

/// Builds sphere nodes from `(1 − cos θ, 1 + cos θ, weight)` triples.
fn assemble(axis: &UnitVec3, cos_panels: &[(f64, f64, f64)], n_phi: usize) -> Vec<(UnitVec3, f64)> {
    let rot = Rotation3::rotation_between(&Vec3::z(), axis.as_ref())
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), PI));
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(cos_panels.len() * n_phi);
    for &(one_minus, one_plus, w) in cos_panels {
        let sin_t = (one_minus * one_plus).sqrt();
        let cos_t = if one_minus < one_plus { 1.0 - one_minus } else { one_plus - 1.0 };
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            let local = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
            nodes.push((Unit::new_normalize(rot * local), w * dphi));
        }
    }
    nodes
}

/// Tensor rule on the unit ball: Gauss in `r`, Gauss in `cos θ`, midpoint in `φ`.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    nodes: Vec<(Vec3, f64)>,
    n: usize,
    level: usize,
}

impl BallQuadrature {
    /// `n³` nodes on the unit ball.
    pub fn new(n: usize) -> Result<Self> {
        Self::blocks(n, 1)
    }

    /// `n³` nodes in each of `8^level` spherical sub-blocks.
    pub fn refined(n: usize, level: usize) -> Result<Self> {
        Self::blocks(n, 1 << level)
    }

    fn blocks(n: usize, splits: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ball rule needs n >= 1".into()));
        }
        let (g, gw) = gauss_legendre(n);
        let h = 1.0 / splits as f64;
        let dphi = 2.0 * PI / (n * splits) as f64;
        let mut nodes = Vec::with_capacity((n * splits).pow(3));
        for br in 0..splits {
            for bu in 0..splits {
                let r_lo = br as f64 * h;
                let u_lo = -1.0 + 2.0 * bu as f64 * h;
                for (xr, wr) in g.iter().zip(&gw) {
                    let r = r_lo + 0.5 * h * (1.0 + xr);
                    let wr = wr * 0.5 * h * r * r;
                    for (xu, wu) in g.iter().zip(&gw) {
                        let u = u_lo + h * (1.0 + xu);
                        let wu = wu * h;
                        let s = (1.0 - u * u).max(0.0).sqrt();
                        for k in 0..n * splits {
                            let phi = (k as f64 + 0.5) * dphi;
                            nodes.push((Vec3::new(r * s * phi.cos(), r * s * phi.sin(), r * u), wr * wu * dphi));
                        }
                    }
                }
            }
        }
        Ok(Self { nodes, n, level: splits.trailing_zeros() as usize })
    }

    pub fn nodes(&self) -> &[(Vec3, f64)] {
        &self.nodes
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Composite Gauss rule on an axis-aligned box.
#[derive(Clone, Debug)]
pub struct BoxQuadrature {
    nodes: Vec<(Vec3, f64)>,
}

impl BoxQuadrature {
    /// `cells` panels per axis with `n` Gauss points each.
    pub fn gauss(lo: Vec3, hi: Vec3, cells: usize, n: usize) -> Result<Self> {
        if cells == 0 || n == 0 || (0..3).any(|k| hi[k] <= lo[k]) {
            return Err(Error::InvalidParameter("box rule needs a non-empty box and node counts >= 1".into()));
        }
        let axis = |k: usize| {
            let h = (hi[k] - lo[k]) / cells as f64;
            let mut xs = Vec::with_capacity(cells * n);
            for c in 0..cells {
                let a = lo[k] + c as f64 * h;
                let (x, w) = gauss_legendre_interval(n, a, a + h);
                xs.extend(x.into_iter().zip(w));
            }
            xs
        };
        let (ax, ay, az) = (axis(0), axis(1), axis(2));
        let mut nodes = Vec::with_capacity(ax.len() * ay.len() * az.len());
        for &(x, wx) in &ax {
            for &(y, wy) in &ay {
                for &(z, wz) in &az {
                    nodes.push((Vec3::new(x, y, z), wx * wy * wz));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[(Vec3, f64)] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
