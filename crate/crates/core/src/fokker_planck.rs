//! Stationary orientation law of swimmers in a frozen strain `S`:
//!
//! `∂_t F + ∇_p·((Id − p⊗p) ξ S p F) − D_r Δ_p F = 0`
//!
//! solved by Galerkin truncation in real spherical harmonics. Transport in
//! space and vorticity are left out.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::density::{OrientationFamily, SphereTable};
use crate::error::{Error, Result};
use crate::kernels::{Mat3, UnitVec3, Vec3};
use crate::quadrature::gauss_legendre;

/// Values below this are reported as negative excursions.
pub const NEGATIVITY_FLOOR: f64 = -1e-8;

/// Number of real harmonics up to degree `l`.
pub fn basis_len(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// Orthonormal real spherical harmonics and their surface gradients at one
/// point, all degrees up to `l_max`, ordered by `l² + l + m`.
#[derive(Clone, Debug)]
pub struct HarmonicTable {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec3>,
}

/// Fully normalized `P̄_l^m(cos θ)` and `dP̄_l^m/dθ` for `0 ≤ m ≤ l ≤ l_max`,
/// indexed `[l][m]`, without the Condon–Shortley phase.
fn legendre_table(l_max: usize, theta: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (s, c) = theta.sin_cos();
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    let mut d = vec![vec![0.0; l_max + 1]; l_max + 1];
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..l_max {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * c * p[m][m];
    }
    for m in 0..=l_max {
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[l][m] = a * (c * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    for l in 1..=l_max {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let lower = if m < l { p[l - 1][m] } else { 0.0 };
            let k = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)).sqrt();
            d[l][m] = (lf * c * p[l][m] - k * lower) / s;
        }
    }
    (p, d)
}

impl HarmonicTable {
    /// Evaluates at `p`; undefined exactly at the poles.
    pub fn at(l_max: usize, p: &UnitVec3) -> Self {
        let theta = p.z.clamp(-1.0, 1.0).acos();
        let phi = p.y.atan2(p.x);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let e_theta = Vec3::new(ct * cp, ct * sp, -st);
        let e_phi = Vec3::new(-sp, cp, 0.0);
        let (leg, dleg) = legendre_table(l_max, theta);
        let n = basis_len(l_max);
        let mut values = vec![0.0; n];
        let mut gradients = vec![Vec3::zeros(); n];
        for l in 0..=l_max {
            let c = l * l + l;
            values[c] = leg[l][0];
            gradients[c] = e_theta * dleg[l][0];
            for m in 1..=l {
                let mf = m as f64;
                let (sm, cm) = (mf * phi).sin_cos();
                let r2 = std::f64::consts::SQRT_2;
                values[c + m] = r2 * leg[l][m] * cm;
                values[c - m] = r2 * leg[l][m] * sm;
                gradients[c + m] = (e_theta * (dleg[l][m] * cm) - e_phi * (mf * leg[l][m] * sm / st)) * r2;
                gradients[c - m] = (e_theta * (dleg[l][m] * sm) + e_phi * (mf * leg[l][m] * cm / st)) * r2;
            }
        }
        Self { values, gradients }
    }
}

/// Gauss–Legendre × trapezoid rule exact for polynomials of degree
/// `degree` on the sphere. Nodes avoid the poles.
fn exact_rule(degree: usize) -> Vec<(UnitVec3, f64)> {
    let n_theta = degree / 2 + 1;
    let n_phi = degree + 1;
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (z, wz) in x.iter().zip(&w) {
        let s = (1.0 - z * z).sqrt();
        for j in 0..n_phi {
            let phi = dphi * (j as f64 + 0.5);
            nodes.push((UnitVec3::new_unchecked(Vec3::new(s * phi.cos(), s * phi.sin(), *z)), wz * dphi));
        }
    }
    nodes
}

/// Truncated generator of the orientation dynamics at frozen strain.
#[derive(Clone, Debug)]
pub struct FokkerPlanck {
    s: Mat3,
    xi: f64,
    dr: f64,
    l_max: usize,
    /// `A` with `dc/dt = A c` on harmonic coefficients.
    operator: DMatrix<f64>,
}

impl FokkerPlanck {
    pub fn new(s: &Mat3, xi: f64, dr: f64, l_max: usize) -> Result<Self> {
        if !(dr > 0.0 && dr.is_finite()) {
            return Err(Error::InvalidParameter(format!("rotational diffusivity must be positive, got {dr}")));
        }
        if !xi.is_finite() {
            return Err(Error::InvalidParameter("xi must be finite".into()));
        }
        if l_max < 4 {
            return Err(Error::InvalidParameter(format!("truncation degree must be at least 4, got {l_max}")));
        }
        let scale = s.norm().max(f64::MIN_POSITIVE);
        if (s - s.transpose()).norm() > 1e-12 * scale || s.trace().abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter("strain must be symmetric and trace-free".into()));
        }
        let n = basis_len(l_max);
        let mut operator = DMatrix::zeros(n, n);
        for l in 0..=l_max {
            for k in l * l..(l + 1) * (l + 1) {
                operator[(k, k)] = -dr * (l * (l + 1)) as f64;
            }
        }
        if xi != 0.0 && s.norm() > 0.0 {
            // ⟨Y_a, −∇·(v Y_b)⟩ = ∫ Y_b v·∇Y_a, with v = ξ(Sp − (p·Sp)p)
            for (p, w) in exact_rule(2 * l_max + 2) {
                let sp = s * p.into_inner();
                let v = (sp - p.into_inner() * p.dot(&sp)) * xi;
                let h = HarmonicTable::at(l_max, &p);
                let drift: Vec<f64> = h.gradients.iter().map(|g| v.dot(g) * w).collect();
                for (a, da) in drift.iter().enumerate() {
                    if *da == 0.0 {
                        continue;
                    }
                    for (b, yb) in h.values.iter().enumerate() {
                        operator[(a, b)] += da * yb;
                    }
                }
            }
        }
        Ok(Self { s: *s, xi, dr, l_max, operator })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// `∫F`, carried by the degree-0 coefficient alone.
    pub fn mass(&self, coefficients: &DVector<f64>) -> f64 {
        coefficients[0] * (4.0 * PI).sqrt()
    }

    /// Implicit Euler steps of `dc/dt = A c`.
    pub fn evolve(&self, coefficients: &DVector<f64>, dt: f64, steps: usize) -> Result<DVector<f64>> {
        let n = self.operator.nrows();
        if coefficients.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} coefficients, got {}", coefficients.len())));
        }
        // row 0 of A vanishes, so only the tail evolves
        let m = n - 1;
        let lu = (DMatrix::identity(m, m) - self.operator.view((1, 1), (m, m)) * dt).lu();
        let source = self.operator.view((1, 0), (m, 1)) * (coefficients[0] * dt);
        let mut c = coefficients.clone();
        for _ in 0..steps {
            let rhs = c.rows(1, m) + &source;
            let tail = lu.solve(&rhs).ok_or_else(|| Error::Convergence("singular implicit step".into()))?;
            c.rows_mut(1, m).copy_from(&tail);
        }
        Ok(c)
    }

    /// Kernel of `A` normalized to mass one.
    pub fn stationary(&self) -> Result<StationaryDensity> {
        let n = self.operator.nrows();
        let mut coefficients = DVector::zeros(n);
        coefficients[0] = 1.0 / (4.0 * PI).sqrt();
        let forcing = -self.operator.view((1, 0), (n - 1, 1)) * coefficients[0];
        if forcing.iter().any(|f| *f != 0.0) {
            let reduced = self.operator.view((1, 1), (n - 1, n - 1)).into_owned();
            let tail = reduced
                .lu()
                .solve(&forcing)
                .ok_or_else(|| Error::Convergence("stationary Galerkin system is singular".into()))?;
            coefficients.rows_mut(1, n - 1).copy_from(&tail);
        }
        Ok(StationaryDensity::new(self.l_max, coefficients, self.s, self.xi / self.dr))
    }
}

/// Stationary law `F[S]` as harmonic coefficients.
#[derive(Clone, Debug)]
pub struct StationaryDensity {
    pub l_max: usize,
    pub coefficients: DVector<f64>,
    /// Smallest value on the check grid.
    pub min_value: f64,
    /// `Some(min)` when the truncation dips below [`NEGATIVITY_FLOOR`].
    pub negative_excursion: Option<f64>,
    s: Mat3,
    peclet: f64,
}

impl StationaryDensity {
    fn new(l_max: usize, coefficients: DVector<f64>, s: Mat3, peclet: f64) -> Self {
        let mut out = Self { l_max, coefficients, min_value: 0.0, negative_excursion: None, s, peclet };
        let min = exact_rule(4 * l_max + 8).iter().map(|(p, _)| out.value(p)).fold(f64::INFINITY, f64::min);
        out.min_value = min;
        out.negative_excursion = (min < NEGATIVITY_FLOOR).then_some(min);
        out
    }

    pub fn value(&self, p: &UnitVec3) -> f64 {
        let h = HarmonicTable::at(self.l_max, p);
        let tail: f64 = h.values.iter().zip(self.coefficients.iter()).skip(1).map(|(y, c)| y * c).sum();
        1.0 / (4.0 * PI) + tail
    }

    pub fn mass(&self) -> f64 {
        self.coefficients[0] * (4.0 * PI).sqrt()
    }

    /// L² distance to another truncation, missing coefficients read as 0.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let n = self.coefficients.len().max(other.coefficients.len());
        let at = |c: &DVector<f64>, k: usize| c.get(k).copied().unwrap_or(0.0);
        (0..n).map(|k| (at(&self.coefficients, k) - at(&other.coefficients, k)).powi(2)).sum::<f64>().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// Least-squares `c` in `4πF ≈ 1 + c (ξ/D_r) p·Sp`.
    pub fn linear_response(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (p, w) in exact_rule(2 * self.l_max + 4) {
            let q = p.dot(&(self.s * p.into_inner()));
            num += w * q * (4.0 * PI * self.value(&p) - 1.0);
            den += w * q * q;
        }
        if den == 0.0 || self.peclet == 0.0 {
            return 0.0;
        }
        num / (den * self.peclet)
    }

    /// Bilinear `(θ, φ)` table. Fails on negative excursions.
    pub fn to_table(&self, n_theta: usize, n_phi: usize) -> Result<SphereTable> {
        if let Some(min) = self.negative_excursion {
            return Err(Error::Domain(format!("stationary density dips to {min:e}; increase the truncation degree")));
        }
        SphereTable::from_fn(n_theta, n_phi, |p| {
            // poles are off the harmonic table's chart, nudge them
            if p.z.abs() >= 1.0 - 1e-14 {
                let q = UnitVec3::new_normalize(Vec3::new(1e-9, 0.0, p.z));
                self.value(&q).max(0.0)
            } else {
                self.value(p).max(0.0)
            }
        })
    }

    pub fn to_family(&self, n_theta: usize, n_phi: usize) -> Result<OrientationFamily> {
        Ok(OrientationFamily::Tabulated(self.to_table(n_theta, n_phi)?))
    }
}

/// Stationary solution at degree `l_max`, checked against `l_max + 4`.
pub fn stationary_orientation_density(s: &Mat3, xi: f64, dr: f64, l_max: usize, tolerance: f64) -> Result<StationaryDensity> {
    let coarse = FokkerPlanck::new(s, xi, dr, l_max)?.stationary()?;
    let fine = FokkerPlanck::new(s, xi, dr, l_max + 4)?.stationary()?;
    let change = coarse.l2_distance(&fine) / fine.l2_norm();
    if change > tolerance {
        return Err(Error::Convergence(format!(
            "degrees {l_max} and {} differ by {change:e} in L² (ξ|S|/D_r = {:.3} is too strong for this truncation)",
            l_max + 4,
            xi.abs() * s.norm() / dr
        )));
    }
    Ok(coarse)
}
