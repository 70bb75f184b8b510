//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use active_stokes::{Mat3, Vec3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Finite-volume stationary Fokker–Planck solver on a latitude–longitude grid.
///
/// Solves `D_r Δf = ∇·(ξ (Id − p⊗p) S p f)` by fixed-point iteration on the
/// drift, each step a conservative Poisson solve: FFT in φ, tridiagonal in θ.
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Cell values, row-major in θ.
    pub f: Vec<f64>,
}

impl SphereGrid {
    pub fn center(&self, i: usize, j: usize) -> Vec3 {
        let t = PI * (i as f64 + 0.5) / self.n_theta as f64;
        let p = 2.0 * PI * j as f64 / self.n_phi as f64;
        Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
    }

    pub fn area(&self, i: usize) -> f64 {
        let h = PI / self.n_theta as f64;
        2.0 * PI / self.n_phi as f64 * ((h * i as f64).cos() - (h * (i + 1) as f64).cos())
    }

    pub fn mass(&self) -> f64 {
        (0..self.n_theta).map(|i| self.area(i) * self.f[i * self.n_phi..(i + 1) * self.n_phi].iter().sum::<f64>()).sum()
    }

    /// Least-squares `c` in `4πf ≈ 1 + c (ξ/D_r) p·Sp`.
    pub fn linear_response(&self, s: &Mat3, peclet: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let p = self.center(i, j);
                let q = p.dot(&(s * p));
                num += self.area(i) * q * (4.0 * PI * self.f[i * self.n_phi + j] - 1.0);
                den += self.area(i) * q * q;
            }
        }
        num / (den * peclet)
    }
}

pub fn fv_stationary(s: &Mat3, xi: f64, dr: f64, n_theta: usize, n_phi: usize) -> SphereGrid {
    let dt = PI / n_theta as f64;
    let dp = 2.0 * PI / n_phi as f64;
    let face_sin = |k: usize| if k == 0 || k == n_theta { 0.0 } else { (dt * k as f64).sin() };
    let theta_c = |i: usize| dt * (i as f64 + 0.5);
    let frame = |t: f64, ph: f64| {
        let p = Vec3::new(t.sin() * ph.cos(), t.sin() * ph.sin(), t.cos());
        let e_t = Vec3::new(t.cos() * ph.cos(), t.cos() * ph.sin(), -t.sin());
        let e_p = Vec3::new(-ph.sin(), ph.cos(), 0.0);
        let sp = s * p;
        let v = (sp - p * p.dot(&sp)) * xi;
        (v.dot(&e_t), v.dot(&e_p))
    };
    // face velocities: θ-faces (k, j) at θ_k, φ_j ; φ-faces (i, j) at θ_i, φ_{j+1/2}
    let mut vt = vec![0.0; (n_theta + 1) * n_phi];
    for k in 0..=n_theta {
        for j in 0..n_phi {
            vt[k * n_phi + j] = frame(dt * k as f64, dp * j as f64).0;
        }
    }
    let mut vp = vec![0.0; n_theta * n_phi];
    for i in 0..n_theta {
        for j in 0..n_phi {
            vp[i * n_phi + j] = frame(theta_c(i), dp * (j as f64 + 0.5)).1;
        }
    }
    let mut grid = SphereGrid { n_theta, n_phi, f: vec![1.0 / (4.0 * PI); n_theta * n_phi] };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_phi);
    let inv = planner.plan_fft_inverse(n_phi);
    for _ in 0..200 {
        let f = &grid.f;
        let at = |i: usize, j: usize| f[i * n_phi + (j % n_phi)];
        // A_i · ∇·(v f) / D_r, conservative face fluxes
        let mut rhs = vec![Complex::new(0.0, 0.0); n_theta * n_phi];
        for i in 0..n_theta {
            for j in 0..n_phi {
                let mut out = 0.0;
                if i + 1 < n_theta {
                    out += vt[(i + 1) * n_phi + j] * 0.5 * (at(i, j) + at(i + 1, j)) * face_sin(i + 1) * dp;
                }
                if i > 0 {
                    out -= vt[i * n_phi + j] * 0.5 * (at(i, j) + at(i - 1, j)) * face_sin(i) * dp;
                }
                out += vp[i * n_phi + j] * 0.5 * (at(i, j) + at(i, j + 1)) * dt;
                out -= vp[i * n_phi + (j + n_phi - 1) % n_phi] * 0.5 * (at(i, j) + at(i, j + n_phi - 1)) * dt;
                rhs[i * n_phi + j] = Complex::new(out / dr, 0.0);
            }
        }
        for row in rhs.chunks_mut(n_phi) {
            fwd.process(row);
        }
        let mut sol = vec![Complex::new(0.0, 0.0); n_theta * n_phi];
        let mut col = vec![Complex::new(0.0, 0.0); n_theta];
        for m in 0..n_phi {
            let lam = 2.0 - 2.0 * (2.0 * PI * m as f64 / n_phi as f64).cos();
            let lower: Vec<f64> = (0..n_theta).map(|i| dp / dt * face_sin(i)).collect();
            let upper: Vec<f64> = (0..n_theta).map(|i| dp / dt * face_sin(i + 1)).collect();
            let mut diag: Vec<f64> = (0..n_theta).map(|i| -(lower[i] + upper[i]) - dt * lam / (theta_c(i).sin() * dp)).collect();
            for i in 0..n_theta {
                col[i] = rhs[i * n_phi + m];
            }
            let mut up = upper.clone();
            let mut lo = lower.clone();
            if m == 0 {
                // pin the null space
                diag[0] = 1.0;
                up[0] = 0.0;
                col[0] = Complex::new(0.0, 0.0);
                lo[0] = 0.0;
            }
            // Thomas
            let mut c = vec![0.0; n_theta];
            let mut d = vec![Complex::new(0.0, 0.0); n_theta];
            c[0] = up[0] / diag[0];
            d[0] = col[0] / diag[0];
            for i in 1..n_theta {
                let den = diag[i] - lo[i] * c[i - 1];
                c[i] = up[i] / den;
                d[i] = (col[i] - d[i - 1] * lo[i]) / den;
            }
            for i in (0..n_theta - 1).rev() {
                d[i] = d[i] - d[i + 1] * c[i];
            }
            for i in 0..n_theta {
                sol[i * n_phi + m] = d[i];
            }
        }
        for row in sol.chunks_mut(n_phi) {
            inv.process(row);
        }
        let mut next = SphereGrid { n_theta, n_phi, f: sol.iter().map(|z| z.re / n_phi as f64).collect() };
        let shift = (1.0 - next.mass()) / (4.0 * PI);
        next.f.iter_mut().for_each(|v| *v += shift);
        let change = next.f.iter().zip(&grid.f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        grid = next;
        if change < 1e-15 {
            break;
        }
    }
    grid
}
