//! Discrete suspensions: seeded sampling under a minimum-separation rule,
//! separation diagnostics, the superposed field `u_N^app`, and the
//! boundary-error functional `Σᵢ ∫_{Bᵢ} |D(hᵢ)|²`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Domain, OrientationDensity};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::kernels::{sym, Mat3, UnitVec3, Vec3};
use crate::quadrature::BallQuadrature;
use crate::swimmer::{elementary_velocity, exterior_gradient, SolutionPart, SwimmerParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Enforce `min |xᵢ − xⱼ| ≥ c N^{-1/3}` and force-offset admissibility.
    #[default]
    Strict,
    /// Record positions as drawn.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuspensionConfig {
    pub n: usize,
    pub lambda: f64,
    /// Particle radius `(3λ/(4πN))^{1/3}`.
    pub a: f64,
    pub beta: f64,
    pub sep_c: f64,
    pub seed: u64,
    #[serde(default)]
    pub domain: Domain,
    pub centers: Vec<Vec3>,
    pub orientations: Vec<UnitVec3>,
}

/// Upper admissible force offset `(c/2)(4π/3)^{1/3} λ^{-1/3}`.
pub fn beta_upper_bound(sep_c: f64, lambda: f64) -> f64 {
    0.5 * sep_c * (4.0 * PI / 3.0).cbrt() * lambda.powf(-1.0 / 3.0)
}

pub fn check_admissibility(beta: f64, sep_c: f64, lambda: f64) -> Result<()> {
    let upper = beta_upper_bound(sep_c, lambda);
    if beta > 1.0 && beta < upper {
        Ok(())
    } else {
        Err(Error::Admissibility { beta, upper })
    }
}

pub fn radius_for(lambda: f64, n: usize) -> f64 {
    (3.0 * lambda / (4.0 * PI * n as f64)).cbrt()
}

impl SuspensionConfig {
    /// Assembles a configuration from given positions, checking sizes and domain.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        centers: Vec<Vec3>,
        orientations: Vec<UnitVec3>,
        lambda: f64,
        beta: f64,
        sep_c: f64,
        seed: u64,
        domain: Domain,
    ) -> Result<Self> {
        let n = centers.len();
        if n == 0 || orientations.len() != n {
            return Err(Error::InvalidParameter(format!(
                "need N >= 1 centers and as many orientations, got {} and {}",
                n,
                orientations.len()
            )));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("volume fraction must lie in (0, 1), got {lambda}")));
        }
        if let Some(x) = centers.iter().find(|x| !domain.contains(x)) {
            return Err(Error::Domain(format!("center {x:?} lies outside the containment domain")));
        }
        Ok(Self { n, lambda, a: radius_for(lambda, n), beta, sep_c, seed, domain, centers, orientations })
    }

    /// `N^{-1/3}`, the mean interparticle spacing on a unit-volume domain.
    pub fn spacing(&self) -> f64 {
        (self.n as f64).powf(-1.0 / 3.0)
    }

    /// Swimmer parameters for this configuration's radius and force offset.
    pub fn swimmer(&self, alpha: f64, fluid: crate::kernels::FluidParams) -> Result<SwimmerParams> {
        SwimmerParams::new(alpha, self.beta, self.a, fluid)
    }

    /// Same geometry under a rigid rotation about the origin.
    pub fn rotated(&self, rot: &Rotation3<f64>) -> Self {
        let mut c = self.clone();
        c.centers = self.centers.iter().map(|x| rot * x).collect();
        c.orientations = self.orientations.iter().map(|p| Unit::new_normalize(rot * p.into_inner())).collect();
        c
    }

    fn check_swimmer(&self, sp: &SwimmerParams) -> Result<()> {
        if ((sp.a - self.a) / self.a).abs() > 1e-12 || sp.beta != self.beta {
            return Err(Error::InvalidParameter(format!(
                "swimmer (a = {}, beta = {}) does not match configuration (a = {}, beta = {})",
                sp.a, sp.beta, self.a, self.beta
            )));
        }
        Ok(())
    }
}

/// Uniform hash grid over point indices.
struct CellGrid {
    cell: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
}

impl CellGrid {
    fn new(cell: f64) -> Self {
        Self { cell, map: HashMap::new() }
    }

    fn key(&self, x: &Vec3) -> [i64; 3] {
        [(x.x / self.cell).floor() as i64, (x.y / self.cell).floor() as i64, (x.z / self.cell).floor() as i64]
    }

    fn insert(&mut self, x: &Vec3, i: usize) {
        let k = self.key(x);
        self.map.entry(k).or_default().push(i);
    }

    /// Indices in the cells within `reach` cells of `x`.
    fn around(&self, x: &Vec3, reach: i64) -> impl Iterator<Item = usize> + '_ {
        let k = self.key(x);
        let r = reach;
        (-r..=r).flat_map(move |dx| {
            (-r..=r).flat_map(move |dy| {
                (-r..=r).flat_map(move |dz| {
                    self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]).into_iter().flatten().copied()
                })
            })
        })
    }
}

/// Samples `N` particles from `density`, deterministically in `seed`.
///
/// Positions and orientations use independent ChaCha streams of the same seed.
/// In strict mode, centers are placed by dart throwing with at most `200 N`
/// attempts.
pub fn sample_configuration(
    density: &OrientationDensity,
    n: usize,
    lambda: f64,
    sep_c: f64,
    beta: f64,
    seed: u64,
    mode: SamplingMode,
) -> Result<SuspensionConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("need N >= 1".into()));
    }
    if mode == SamplingMode::Strict {
        check_admissibility(beta, sep_c, lambda)?;
    }
    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    pos_rng.set_stream(0);
    let mut ori_rng = ChaCha8Rng::seed_from_u64(seed);
    ori_rng.set_stream(1);

    let dmin = sep_c * (n as f64).powf(-1.0 / 3.0);
    let max_attempts = 200 * n;
    let mut centers: Vec<Vec3> = Vec::with_capacity(n);
    let mut grid = CellGrid::new(dmin.max(1e-9));
    let mut attempts = 0;
    while centers.len() < n {
        if attempts >= max_attempts {
            return Err(Error::PackingFailure { placed: centers.len(), requested: n, attempts });
        }
        attempts += 1;
        let x = density.sample_position(&mut pos_rng);
        if mode == SamplingMode::Strict && grid.around(&x, 1).any(|j| (centers[j] - x).norm() < dmin) {
            continue;
        }
        grid.insert(&x, centers.len());
        centers.push(x);
    }
    let orientations = centers.iter().map(|x| density.sample_orientation(&mut ori_rng, x)).collect();
    SuspensionConfig::from_parts(centers, orientations, lambda, beta, sep_c, seed, density.domain)
}

/// Distance from each center to its nearest other center (`inf` for `N = 1`).
pub fn nearest_neighbor_distances(centers: &[Vec3]) -> Vec<f64> {
    let n = centers.len();
    if n < 2 {
        return vec![f64::INFINITY; n];
    }
    let (lo, hi) = centers.iter().fold((Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)), |(lo, hi), x| {
        (lo.inf(x), hi.sup(x))
    });
    let extent = (hi - lo).max().max(1e-12);
    let cell = extent / (n as f64).cbrt().ceil().max(1.0);
    let mut grid = CellGrid::new(cell);
    for (i, x) in centers.iter().enumerate() {
        grid.insert(x, i);
    }
    let max_reach = (extent / cell).ceil() as i64 + 1;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &centers[i];
            let mut best = f64::INFINITY;
            let mut reach = 1;
            loop {
                for j in grid.around(x, reach) {
                    if j != i {
                        best = best.min((centers[j] - x).norm());
                    }
                }
                // every point within reach·cell has been seen
                if best <= reach as f64 * cell || reach >= max_reach {
                    return best;
                }
                reach += 1;
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub min_gap: f64,
    pub eta: f64,
    pub good_indices: Vec<usize>,
    pub bad_indices: Vec<usize>,
    pub bad_fraction: f64,
    /// `min gap ≥ c N^{-1/3}`
    pub h2_ok: bool,
    /// `min gap ≥ M a` with `M > 2β`.
    pub h2prime_ok: bool,
    /// `min gap / a − 2β`.
    pub m_margin: f64,
}

pub fn separation_report(cfg: &SuspensionConfig, eta: f64) -> SeparationReport {
    let nn = nearest_neighbor_distances(&cfg.centers);
    report_from_nn(cfg, &nn, eta)
}

fn report_from_nn(cfg: &SuspensionConfig, nn: &[f64], eta: f64) -> SeparationReport {
    let threshold = eta * cfg.spacing();
    let (good, bad): (Vec<usize>, Vec<usize>) = (0..cfg.n).partition(|&i| nn[i] >= threshold);
    let min_gap = nn.iter().copied().fold(f64::INFINITY, f64::min);
    let m_margin = min_gap / cfg.a - 2.0 * cfg.beta;
    SeparationReport {
        min_gap,
        eta,
        bad_fraction: bad.len() as f64 / cfg.n as f64,
        good_indices: good,
        bad_indices: bad,
        h2_ok: min_gap >= cfg.sep_c * cfg.spacing() * (1.0 - 1e-12),
        h2prime_ok: m_margin > 0.0,
        m_margin,
    }
}

/// `(η, bad fraction)` for each threshold.
pub fn bad_fraction_curve(cfg: &SuspensionConfig, etas: &[f64]) -> Vec<(f64, f64)> {
    let nn = nearest_neighbor_distances(&cfg.centers);
    etas.iter().map(|&eta| (eta, report_from_nn(cfg, &nn, eta).bad_fraction)).collect()
}

/// Exponent `α_sep` of `bad_fraction(η) ≈ C η^{α_sep}`, fitted on the points
/// with a nonzero bad fraction.
pub fn fit_alpha_sep(curve: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<_> = curve.iter().filter(|(_, f)| *f > 0.0).collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|(e, _)| *e).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, f)| *f).collect();
    crate::fit::log_log(&xs, &ys).ok().map(|f| f.slope)
}

/// Normalized sums in rescaled coordinates `yᵢ = xᵢ N^{1/3}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    /// `η⁴ sup_{i∈G_η} Σ_{j∈G_η, j≠i} (η + |yᵢ − yⱼ|)^{-4}`
    pub good_constant: f64,
    /// `λ^{4/3} sup_i Σ_{j≠i} (M̃λ^{1/3} + |yᵢ − yⱼ|)^{-4}`, `M̃ = M (3/(4π))^{1/3}`
    pub all_constant: f64,
    /// The `M` used, `min gap / a`.
    pub m: f64,
}

pub fn series_diagnostics(cfg: &SuspensionConfig, eta: f64) -> SeriesDiagnostics {
    let scale = (cfg.n as f64).cbrt();
    let ys: Vec<Vec3> = cfg.centers.iter().map(|x| x * scale).collect();
    let report = separation_report(cfg, eta);
    let mut is_good = vec![false; cfg.n];
    for &i in &report.good_indices {
        is_good[i] = true;
    }
    let m = if report.min_gap.is_finite() { report.min_gap / cfg.a } else { 0.0 };
    let shift = m * (3.0 / (4.0 * PI)).cbrt() * cfg.lambda.cbrt();
    let (good_sup, all_sup) = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let (mut sg, mut sa) = (0.0, 0.0);
            for j in 0..cfg.n {
                if j == i {
                    continue;
                }
                let d = (ys[i] - ys[j]).norm();
                sa += (shift + d).powi(-4);
                if is_good[i] && is_good[j] {
                    sg += (eta + d).powi(-4);
                }
            }
            (sg, sa)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    SeriesDiagnostics { good_constant: good_sup * eta.powi(4), all_constant: all_sup * cfg.lambda.powf(4.0 / 3.0), m }
}

/// `u_N^app(x) = Σᵢ v[pᵢ](x − xᵢ)`, summed in particle order for every point.
pub fn u_app_evaluate(cfg: &SuspensionConfig, sp: &SwimmerParams, points: &[Vec3]) -> Result<Vec<Vec3>> {
    cfg.check_swimmer(sp)?;
    points.par_iter().map(|x| u_app_at(cfg, sp, x)).collect()
}

fn u_app_at(cfg: &SuspensionConfig, sp: &SwimmerParams, x: &Vec3) -> Result<Vec3> {
    let mut u = Vec3::zeros();
    for (i, (c, p)) in cfg.centers.iter().zip(&cfg.orientations).enumerate() {
        u += elementary_velocity(&(x - c), p, sp).map_err(|e| match e {
            Error::Singular { .. } => Error::SingularParticle { particle: i, point: *x },
            other => other,
        })?;
    }
    Ok(u)
}

/// `u_N^app` as a [`FlowField`].
pub struct UAppFlow<'a> {
    pub cfg: &'a SuspensionConfig,
    pub sp: SwimmerParams,
}

impl<'a> UAppFlow<'a> {
    pub fn new(cfg: &'a SuspensionConfig, sp: SwimmerParams) -> Result<Self> {
        cfg.check_swimmer(&sp)?;
        Ok(Self { cfg, sp })
    }
}

impl FlowField for UAppFlow<'_> {
    fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        u_app_at(self.cfg, &self.sp, x)
    }
}

/// Ball rule and near/far split for [`boundary_error_functional`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallQuadSpec {
    /// Gauss points per axis on each ball.
    pub points_per_axis: usize,
    /// Neighbours closer than this many radii get the refined rule.
    pub refine_within: f64,
    /// Neighbours farther than `max(far_radii · a, far_spacings · N^{-1/3})`
    /// are evaluated at the ball center only; their strain is treated as
    /// uniform over the ball (relative error `O((a/d)²)`).
    pub far_radii: f64,
    pub far_spacings: f64,
}

impl Default for BallQuadSpec {
    fn default() -> Self {
        Self { points_per_axis: 5, refine_within: 4.0, far_radii: 8.0, far_spacings: 1.5 }
    }
}

impl BallQuadSpec {
    /// Every neighbour evaluated at every node.
    pub fn exact(points_per_axis: usize) -> Self {
        Self { points_per_axis, refine_within: 4.0, far_radii: f64::INFINITY, far_spacings: f64::INFINITY }
    }
}

/// `Σᵢ ∫_{Bᵢ} |D(hᵢ)|² dx` with `hᵢ(x) = Σ_{j≠i} v[pⱼ](x − xⱼ)`.
///
/// Each ball's rule is oriented by its two nearest neighbours, so the value is
/// invariant under rigid rotations of the configuration.
pub fn boundary_error_functional(cfg: &SuspensionConfig, sp: &SwimmerParams, spec: &BallQuadSpec) -> Result<f64> {
    cfg.check_swimmer(sp)?;
    if cfg.n < 2 {
        return Ok(0.0);
    }
    let a = cfg.a;
    let coarse = BallQuadrature::new(spec.points_per_axis)?;
    let fine = BallQuadrature::refined(spec.points_per_axis, 1)?;
    let r_far = (spec.far_radii * a).max(spec.far_spacings * cfg.spacing());
    let cell = if r_far.is_finite() { r_far } else { 1.0 };
    let reach = if r_far.is_finite() { 1 } else { i64::MAX };
    let mut grid = CellGrid::new(cell);
    for (i, x) in cfg.centers.iter().enumerate() {
        grid.insert(x, i);
    }

    let per_ball: Vec<Result<f64>> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let xi = cfg.centers[i];
            let mut near: Vec<(usize, f64)> = Vec::new();
            if reach == i64::MAX {
                near.extend((0..cfg.n).filter(|&j| j != i).map(|j| (j, (cfg.centers[j] - xi).norm())));
            } else {
                for j in grid.around(&xi, reach) {
                    let d = (cfg.centers[j] - xi).norm();
                    if j != i && d < r_far {
                        near.push((j, d));
                    }
                }
            }
            near.sort_by(|u, v| u.1.total_cmp(&v.1).then(u.0.cmp(&v.0)));

            // uniform strain from far neighbours, summed in index order
            let mut far = Mat3::zeros();
            if reach != i64::MAX {
                for j in 0..cfg.n {
                    if j == i {
                        continue;
                    }
                    let r = xi - cfg.centers[j];
                    if r.norm() >= r_far {
                        far += sym(&exterior_gradient(&r, &cfg.orientations[j], sp, SolutionPart::Full)?);
                    }
                }
            }

            let rule = if near.first().is_some_and(|&(_, d)| d < spec.refine_within * a) { &fine } else { &coarse };
            let frame = ball_frame(cfg, i, &near);
            let vol = a * a * a;
            let mut integral = 0.0;
            for (y, w) in rule.nodes() {
                let x = xi + frame * (y * a);
                let mut d = far;
                for &(j, _) in &near {
                    d += sym(&exterior_gradient(&(x - cfg.centers[j]), &cfg.orientations[j], sp, SolutionPart::Full)?);
                }
                integral += w * vol * d.norm_squared();
            }
            Ok(integral)
        })
        .collect();
    let mut total = 0.0;
    for v in per_ball {
        total += v?;
    }
    Ok(total)
}

/// Local frame: pole toward the nearest neighbour, azimuth origin toward the
/// second nearest; identity when fewer than two neighbours are known.
fn ball_frame(cfg: &SuspensionConfig, i: usize, near: &[(usize, f64)]) -> Rotation3<f64> {
    let xi = cfg.centers[i];
    let Some(&(j1, _)) = near.first() else {
        return Rotation3::identity();
    };
    let e3 = (cfg.centers[j1] - xi).normalize();
    let mut e1 = near.get(1).map(|&(j2, _)| {
        let v = cfg.centers[j2] - xi;
        v - e3 * v.dot(&e3)
    });
    if e1.is_none_or(|v| v.norm() < 1e-12) {
        let p = cfg.orientations[i].into_inner();
        e1 = Some(p - e3 * p.dot(&e3));
    }
    let mut e1 = e1.unwrap_or_else(Vec3::zeros);
    if e1.norm() < 1e-12 {
        let helper = if e3.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        e1 = helper - e3 * helper.dot(&e3);
    }
    let e1 = e1.normalize();
    let e2 = e3.cross(&e1);
    Rotation3::from_matrix_unchecked(Mat3::from_columns(&[e1, e2, e3]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{OrientationFamily, SpatialProfile};
    use crate::kernels::{m_apply, FluidParams};
    use crate::swimmer::dipole_decomposition;
    use approx::assert_relative_eq;

    fn fluid() -> FluidParams {
        FluidParams::default()
    }

    #[test]
    fn volume_fraction_identity() {
        let cfg = sample_configuration(&OrientationDensity::uniform(), 37, 0.013, 0.5, 1.2, 3, SamplingMode::Relaxed).unwrap();
        let lam = cfg.a.powi(3) * 4.0 * PI / 3.0 * cfg.n as f64;
        assert!(((lam - cfg.lambda) / cfg.lambda).abs() < 1e-14);
    }

    #[test]
    fn strict_sampling_respects_separation_and_is_deterministic() {
        let d = OrientationDensity::uniform();
        let cfg = sample_configuration(&d, 500, 0.01, 0.8, 1.2, 42, SamplingMode::Strict).unwrap();
        let rep = separation_report(&cfg, 0.5);
        assert!(rep.h2_ok && rep.min_gap >= 0.8 * cfg.spacing());
        assert!(rep.bad_indices.is_empty());
        let again = sample_configuration(&d, 500, 0.01, 0.8, 1.2, 42, SamplingMode::Strict).unwrap();
        assert_eq!(cfg, again);
        let other = sample_configuration(&d, 500, 0.01, 0.8, 1.2, 43, SamplingMode::Strict).unwrap();
        assert_ne!(cfg.centers, other.centers);
    }

    #[test]
    fn close_packing_fails_loudly() {
        let err = sample_configuration(&OrientationDensity::uniform(), 1000, 0.01, 1.0, 1.2, 1, SamplingMode::Strict).unwrap_err();
        assert!(matches!(err, Error::PackingFailure { requested: 1000, .. }), "{err}");
    }

    #[test]
    fn admissibility_is_checked_in_strict_mode() {
        let d = OrientationDensity::uniform();
        let err = sample_configuration(&d, 10, 0.5, 0.5, 3.0, 1, SamplingMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Admissibility { .. }));
        assert!(sample_configuration(&d, 10, 0.5, 0.5, 3.0, 1, SamplingMode::Relaxed).is_ok());
    }

    #[test]
    fn dirac_orientations_are_exact() {
        let d = OrientationDensity::with_family(OrientationFamily::dirac(Vec3::z()).unwrap());
        let cfg = sample_configuration(&d, 50, 0.01, 0.5, 1.2, 0, SamplingMode::Strict).unwrap();
        assert!(cfg.orientations.iter().all(|p| p.into_inner() == Vec3::z()));
    }

    #[test]
    fn nearest_neighbours_match_brute_force() {
        let d = OrientationDensity::new(Domain::UnitCube, SpatialProfile::SineSquared, OrientationFamily::Uniform).unwrap();
        let cfg = sample_configuration(&d, 400, 0.01, 0.3, 1.1, 8, SamplingMode::Relaxed).unwrap();
        let fast = nearest_neighbor_distances(&cfg.centers);
        for i in 0..cfg.n {
            let brute = (0..cfg.n).filter(|&j| j != i).map(|j| (cfg.centers[i] - cfg.centers[j]).norm()).fold(f64::INFINITY, f64::min);
            assert_eq!(fast[i], brute);
        }
    }

    #[test]
    fn constructed_bad_pair() {
        let n = 8;
        let eta = 0.4;
        let s = (n as f64).powf(-1.0 / 3.0);
        let mut centers: Vec<Vec3> =
            [(1.0, 1.0, 1.0), (-1.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, -1.0), (-1.0, -1.0, 1.0), (-1.0, 1.0, -1.0)]
                .iter()
                .map(|&(x, y, z)| Vec3::new(x, y, z) * 0.4)
                .collect();
        centers.push(Vec3::zeros());
        centers.push(Vec3::new(0.5 * eta * s, 0.0, 0.0));
        let ori = vec![Vec3::z_axis(); n];
        let cfg = SuspensionConfig::from_parts(centers, ori, 0.001, 1.1, 0.1, 0, Domain::UnitCube).unwrap();
        let rep = separation_report(&cfg, eta);
        assert_eq!(rep.bad_indices, vec![6, 7]);
        let mut last = usize::MAX;
        for e in [0.9, 0.6, 0.3, 0.1, 0.01] {
            let g = separation_report(&cfg, e).good_indices.len();
            assert!(last == usize::MAX || g >= last);
            last = g;
        }
    }

    #[test]
    fn single_particle_has_no_boundary_error() {
        let cfg = SuspensionConfig::from_parts(vec![Vec3::zeros()], vec![Vec3::x_axis()], 0.01, 1.5, 1.0, 0, Domain::UnitCube).unwrap();
        let sp = cfg.swimmer(1.0, fluid()).unwrap();
        assert_eq!(boundary_error_functional(&cfg, &sp, &BallQuadSpec::default()).unwrap(), 0.0);
        let rep = separation_report(&cfg, 0.5);
        assert!(rep.h2_ok && rep.bad_indices.is_empty());
    }

    #[test]
    fn u_app_single_particle_and_linearity() {
        let cfg = SuspensionConfig::from_parts(vec![Vec3::new(0.1, 0.0, -0.1)], vec![Vec3::y_axis()], 0.01, 2.0, 1.0, 0, Domain::UnitCube).unwrap();
        let sp = cfg.swimmer(1.0, fluid()).unwrap();
        let pts = vec![Vec3::new(0.3, 0.2, 0.1), Vec3::new(-0.4, 0.0, 0.2)];
        let u = u_app_evaluate(&cfg, &sp, &pts).unwrap();
        for (x, ux) in pts.iter().zip(&u) {
            assert_eq!(*ux, elementary_velocity(&(x - cfg.centers[0]), &cfg.orientations[0], &sp).unwrap());
        }
        let u2 = u_app_evaluate(&cfg, &sp.with_alpha(2.0).unwrap(), &pts).unwrap();
        for (a, b) in u.iter().zip(&u2) {
            assert_relative_eq!(*b, a * 2.0, epsilon = 1e-18);
        }
    }

    #[test]
    fn u_app_names_the_singular_particle() {
        let cfg = SuspensionConfig::from_parts(
            vec![Vec3::new(-0.3, 0.0, 0.0), Vec3::new(0.2, 0.0, 0.0)],
            vec![Vec3::x_axis(), Vec3::z_axis()],
            0.01,
            2.0,
            1.0,
            0,
            Domain::UnitCube,
        )
        .unwrap();
        let sp = cfg.swimmer(1.0, fluid()).unwrap();
        let force_point = cfg.centers[1] + Vec3::z() * (cfg.a * cfg.beta);
        let err = u_app_evaluate(&cfg, &sp, &[force_point]).unwrap_err();
        assert!(matches!(err, Error::SingularParticle { particle: 1, .. }), "{err}");
    }

    #[test]
    fn two_particles_far_apart() {
        let lambda = 0.002;
        let d = 0.6;
        let cfg = SuspensionConfig::from_parts(
            vec![Vec3::new(-0.3, 0.0, 0.0), Vec3::new(0.3, 0.0, 0.0)],
            vec![Unit::new_normalize(Vec3::new(1.0, 1.0, 0.0)), Vec3::z_axis()],
            lambda,
            2.0,
            1.0,
            0,
            Domain::UnitCube,
        )
        .unwrap();
        let sp = cfg.swimmer(1.0, fluid()).unwrap();
        let x = cfg.centers[0] + Vec3::new(0.0, 2.0 * cfg.a, 0.0);
        let u = u_app_evaluate(&cfg, &sp, &[x]).unwrap()[0];
        let own = elementary_velocity(&(x - cfg.centers[0]), &cfg.orientations[0], &sp).unwrap();
        let bound = 3.0 * sp.velocity_scale() * (cfg.a / d).powi(2) * cfg.a;
        assert!((u - own).norm() < bound);
    }

    #[test]
    fn near_far_split_matches_exact_functional() {
        let d = OrientationDensity::with_family(OrientationFamily::von_mises_fisher(Vec3::new(0.0, 1.0, 1.0), 2.0).unwrap());
        for lambda in [0.003, 0.05] {
            let cfg = sample_configuration(&d, 300, lambda, 0.8, 1.2, 5, SamplingMode::Strict).unwrap();
            let sp = cfg.swimmer(1.0, fluid()).unwrap();
            let fast = boundary_error_functional(&cfg, &sp, &BallQuadSpec::default()).unwrap();
            let exact = boundary_error_functional(&cfg, &sp, &BallQuadSpec::exact(5)).unwrap();
            assert!(((fast - exact) / exact).abs() < 0.02, "lambda {lambda}: {fast} vs {exact}");
        }
    }

    #[test]
    fn functional_is_rotation_invariant() {
        let d = OrientationDensity::with_family(OrientationFamily::von_mises_fisher(Vec3::x(), 1.0).unwrap());
        let cfg = sample_configuration(&d, 200, 0.05, 0.8, 1.2, 2, SamplingMode::Strict).unwrap();
        let sp = cfg.swimmer(-1.0, fluid()).unwrap();
        let base = boundary_error_functional(&cfg, &sp, &BallQuadSpec::default()).unwrap();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.3, -1.0, 0.4)), 0.83);
        let turned = boundary_error_functional(&cfg.rotated(&rot), &sp, &BallQuadSpec::default()).unwrap();
        assert!(((turned - base) / base).abs() < 1e-8, "{base} vs {turned}");
    }

    #[test]
    fn two_body_functional_approaches_dipole_leading_term() {
        // The dipole approximation of a neighbour's strain is accurate to O(a/d),
        // so the relative gap must shrink like λ^{1/3} at fixed distance.
        let p = Unit::new_normalize(Vec3::new(0.3, 0.4, 0.5));
        let q = Unit::new_normalize(Vec3::new(-0.5, 0.1, 0.2));
        let gap = |lambda: f64| {
            let cfg = SuspensionConfig::from_parts(vec![Vec3::new(-0.3, 0.0, 0.0), Vec3::new(0.3, 0.0, 0.0)], vec![p, q], lambda, 2.0, 1.0, 0, Domain::UnitCube)
                .unwrap();
            let sp = cfg.swimmer(1.0, fluid()).unwrap();
            let value = boundary_error_functional(&cfg, &sp, &BallQuadSpec::exact(5)).unwrap();
            let fine = boundary_error_functional(&cfg, &sp, &BallQuadSpec::exact(9)).unwrap();
            assert!(((value - fine) / fine).abs() < 1e-6);
            let vol = sp.volume();
            let mut lead = 0.0;
            for (i, j) in [(0, 1), (1, 0)] {
                let c = dipole_decomposition(&cfg.orientations[j], &sp, lambda, 2).unwrap();
                let dm = m_apply(&(cfg.centers[i] - cfg.centers[j]), &c.cp).unwrap() * (3.0 / (8.0 * PI) * vol);
                lead += vol * dm.norm_squared();
            }
            ((value - lead) / lead).abs()
        };
        let (coarse, fine) = (gap(1e-4), gap(1e-7));
        assert!(fine < 0.05, "{fine}");
        assert!(fine < coarse * 0.2, "{coarse} -> {fine}");
    }

    #[test]
    fn series_diagnostics_are_finite() {
        let cfg = sample_configuration(&OrientationDensity::uniform(), 300, 0.01, 0.7, 1.2, 4, SamplingMode::Strict).unwrap();
        let s = series_diagnostics(&cfg, 0.5);
        assert!(s.good_constant.is_finite() && s.good_constant > 0.0);
        assert!(s.all_constant.is_finite() && s.all_constant > 0.0);
    }

    #[test]
    fn snapshot_fields_round_trip_through_toml() {
        let cfg = sample_configuration(&OrientationDensity::uniform(), 20, 0.01, 0.5, 1.2, 9, SamplingMode::Strict).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: SuspensionConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
