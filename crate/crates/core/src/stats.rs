//! Empirical moments of sampled configurations and their distance to the
//! continuum active stress.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::effective::ActiveStress;
use crate::error::Result;
use crate::fit::{self, LineFit};
use crate::io::Csv;
use crate::kernels::{outer, Mat3, Vec3};
use crate::quadrature::BoxQuadrature;
use crate::suspension::SuspensionConfig;

/// Uniform spatial binning of the cube `[-h, h]³` enclosing the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinGrid {
    pub dims: [usize; 3],
}

impl Default for BinGrid {
    fn default() -> Self {
        Self { dims: [8; 3] }
    }
}

impl BinGrid {
    pub fn cubic(n: usize) -> Self {
        Self { dims: [n; 3] }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: &Vec3, half: f64) -> usize {
        let mut k = 0;
        for a in (0..3).rev() {
            let n = self.dims[a];
            let t = ((x[a] + half) / (2.0 * half) * n as f64).floor();
            k = k * n + (t.max(0.0) as usize).min(n - 1);
        }
        k
    }

    pub fn cell(&self, k: usize) -> [usize; 3] {
        [k % self.dims[0], (k / self.dims[0]) % self.dims[1], k / (self.dims[0] * self.dims[1])]
    }

    pub fn bounds(&self, k: usize, half: f64) -> (Vec3, Vec3) {
        let c = self.cell(k);
        let lo = Vector3::from_fn(|a, _| -half + 2.0 * half * c[a] as f64 / self.dims[a] as f64);
        let hi = Vector3::from_fn(|a, _| -half + 2.0 * half * (c[a] + 1) as f64 / self.dims[a] as f64);
        (lo, hi)
    }
}

/// Discrete moments of `(1/N) Σ δ_{(xᵢ, pᵢ)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSummary {
    pub count: usize,
    pub first_moment: Vec3,
    /// `(1/N) Σ pᵢ⊗pᵢ`.
    pub second_moment: Mat3,
    pub grid: BinGrid,
    pub half: f64,
    pub counts: Vec<usize>,
    /// `(c/N) Σ_{i ∈ bin} (pᵢ⊗pᵢ − Id/3)` with `c` the active-stress prefactor.
    pub stresses: Vec<Mat3>,
}

pub fn empirical_moments(cfg: &SuspensionConfig, grid: BinGrid, coefficient: f64) -> MomentSummary {
    let half = cfg.domain.half_extent();
    let n = cfg.centers.len();
    let mut counts = vec![0usize; grid.len()];
    let mut sums = vec![Mat3::zeros(); grid.len()];
    let mut first = Vec3::zeros();
    let mut second = Mat3::zeros();
    for (x, p) in cfg.centers.iter().zip(&cfg.orientations) {
        let k = grid.index(x, half);
        let pp = outer(p, p);
        counts[k] += 1;
        sums[k] += pp;
        first += p.into_inner();
        second += pp;
    }
    let inv = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    let stresses = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| (s - Mat3::identity() * (*c as f64 / 3.0)) * (coefficient * inv))
        .collect();
    MomentSummary { count: n, first_moment: first * inv, second_moment: second * inv, grid, half, counts, stresses }
}

impl MomentSummary {
    pub fn global_stress(&self) -> Mat3 {
        self.stresses.iter().sum()
    }

    /// Coarsens by an integer factor along every axis.
    pub fn merged(&self, factor: usize) -> Option<Self> {
        if factor == 0 || self.grid.dims.iter().any(|d| d % factor != 0) {
            return None;
        }
        let grid = BinGrid { dims: self.grid.dims.map(|d| d / factor) };
        let mut counts = vec![0; grid.len()];
        let mut stresses = vec![Mat3::zeros(); grid.len()];
        for k in 0..self.grid.len() {
            let c = self.grid.cell(k);
            let j = (c[2] / factor * grid.dims[1] + c[1] / factor) * grid.dims[0] + c[0] / factor;
            counts[j] += self.counts[k];
            stresses[j] += self.stresses[k];
        }
        Some(Self { grid, counts, stresses, ..self.clone() })
    }

    /// Columns `ix, iy, iz, count, sxx, sxy, sxz, syy, syz, szz`.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["ix", "iy", "iz", "count", "sxx", "sxy", "sxz", "syy", "syz", "szz"]);
        csv.comment(format!("N = {}, bins {:?} over [-{h}, {h}]^3", self.count, self.grid.dims, h = self.half));
        csv.comment("s = (alpha J / N) sum over the bin of (p p - Id/3)");
        for (k, s) in self.stresses.iter().enumerate() {
            let c = self.grid.cell(k);
            let row = vec![
                c[0] as f64,
                c[1] as f64,
                c[2] as f64,
                self.counts[k] as f64,
                s[(0, 0)],
                s[(0, 1)],
                s[(0, 2)],
                s[(1, 1)],
                s[(1, 2)],
                s[(2, 2)],
            ];
            csv.push(row).expect("fixed width");
        }
        csv
    }
}

/// `∫_bin σ₁ dx` for every bin, by a Gauss rule on each bin.
pub fn continuum_bin_stress(stress: &ActiveStress, grid: BinGrid, half: f64) -> Result<Vec<Mat3>> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = grid.bounds(k, half);
            let rule = BoxQuadrature::gauss(lo, hi, 2, 4)?;
            Ok(rule.nodes().iter().map(|(x, w)| stress.sigma(x) * *w).sum())
        })
        .collect()
}

/// `(Σ_bins ‖Σ_N − ∫σ₁‖²)^{1/2}`.
pub fn stress_discrepancy(summary: &MomentSummary, continuum: &[Mat3]) -> f64 {
    summary.stresses.iter().zip(continuum).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StressConvergence {
    /// `(N, seed, discrepancy)`.
    pub rows: Vec<(usize, u64, f64)>,
    /// Log-log fit of discrepancy against `N`, when there are two or more sizes.
    pub fit: Option<LineFit>,
}

impl StressConvergence {
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(["n", "seed", "discrepancy"]);
        if let Some(f) = &self.fit {
            csv.comment(format!("log-log slope {:.6}", f.slope));
        }
        for (n, seed, d) in &self.rows {
            csv.push(vec![*n as f64, *seed as f64, *d]).expect("fixed width");
        }
        csv
    }
}

/// Discrepancy of each configuration against `stress`, and its decay in `N`.
pub fn stress_convergence(configs: &[SuspensionConfig], stress: &ActiveStress, grid: BinGrid) -> Result<StressConvergence> {
    let mut rows = Vec::with_capacity(configs.len());
    let mut continuum: Option<(f64, Vec<Mat3>)> = None;
    for cfg in configs {
        let half = cfg.domain.half_extent();
        if continuum.as_ref().is_none_or(|(h, _)| *h != half) {
            continuum = Some((half, continuum_bin_stress(stress, grid, half)?));
        }
        let summary = empirical_moments(cfg, grid, stress.coefficient());
        let d = stress_discrepancy(&summary, &continuum.as_ref().expect("set above").1);
        rows.push((cfg.n, cfg.seed, d));
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let distinct = ns.iter().any(|n| *n != ns[0]);
    let fit = if distinct && ds.iter().all(|d| *d > 0.0) { Some(fit::log_log(&ns, &ds)?) } else { None };
    Ok(StressConvergence { rows, fit })
}
