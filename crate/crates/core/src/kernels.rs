//! Singular Stokes tensors: the Oseen tensor and the derived kernels that the
//! swimmer solutions are assembled from.
//!
//! Every kernel refuses to evaluate closer than `FluidParams::singular_guard`
//! to its source instead of returning `inf`. Gradient kernels return the full
//! Jacobian `J[(i, k)] = ∂f_i/∂x_k` of the corresponding vector field.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

pub const DEFAULT_SINGULAR_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Dynamic viscosity.
    pub mu: f64,
    /// Kernels return [`Error::Singular`] when `|x|` is below this radius.
    #[serde(default = "default_guard")]
    pub singular_guard: f64,
}

fn default_guard() -> f64 {
    DEFAULT_SINGULAR_GUARD
}

impl FluidParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {mu}")));
        }
        Ok(Self { mu, singular_guard: DEFAULT_SINGULAR_GUARD })
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.singular_guard = guard;
        self
    }

    /// `1/(8πμ)`
    #[inline]
    pub fn prefactor(&self) -> f64 {
        1.0 / (8.0 * PI * self.mu)
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        Self { mu: 1.0, singular_guard: DEFAULT_SINGULAR_GUARD }
    }
}

#[inline]
pub(crate) fn guarded_norm(x: &Vec3, guard: f64) -> Result<f64> {
    let r = x.norm();
    if r < guard {
        Err(Error::Singular { distance: r, guard })
    } else {
        Ok(r)
    }
}

/// `A : x⊗x`, i.e. `xᵀ A x`.
#[inline]
pub fn contract_xx(a: &Mat3, x: &Vec3) -> f64 {
    x.dot(&(a * x))
}

/// Oseen tensor `U(x) = (Id/|x| + x⊗x/|x|³) / (8πμ)`.
pub fn oseen(x: &Vec3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let c = fluid.prefactor();
    Ok((Mat3::identity() / r + x * x.transpose() / (r * r * r)) * c)
}

/// `Ũ(x) = (Id/(3|x|) − x⊗x/|x|³) / (8πμ)`, trace-free.
pub fn oseen_tilde(x: &Vec3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let c = fluid.prefactor();
    Ok((Mat3::identity() / (3.0 * r) - x * x.transpose() / (r * r * r)) * c)
}

/// `ΔU(x) = (2 Id/|x|³ − 6 x⊗x/|x|⁵) / (8πμ)`.
pub fn laplacian_oseen(x: &Vec3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let r2 = r * r;
    let r3 = r2 * r;
    let c = fluid.prefactor();
    Ok((Mat3::identity() * (2.0 / r3) - x * x.transpose() * (6.0 / (r3 * r2))) * c)
}

/// Stokeslet-doublet contraction `∇U(x)A = −3/(8πμ) (A:x⊗x) x/|x|⁵`.
///
/// This coincides with `∂_k U_ij A_jk` only for trace-free `A`; for `A = Id`
/// it yields the point-source field `−3x/(8πμ|x|³)`.
pub fn grad_oseen_apply(x: &Vec3, a: &Mat3, fluid: &FluidParams) -> Result<Vec3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let r5 = r.powi(5);
    Ok(x * (-3.0 * fluid.prefactor() * contract_xx(a, x) / r5))
}

/// μ-free kernel `ℳ(x)A` with `D(y ↦ ∇U(y)A)(x) = 3/(8πμ) ℳ(x)A`:
///
/// `ℳ(x)A = −(Âx⊗x + x⊗Âx)/|x|⁵ − (A:x⊗x) Id/|x|⁵ + 5 (A:x⊗x) x⊗x/|x|⁷`,
/// where `Â` is the symmetric part of `A`.
pub fn m_apply(x: &Vec3, a: &Mat3) -> Result<Mat3> {
    let r = guarded_norm(x, DEFAULT_SINGULAR_GUARD)?;
    let r2 = r * r;
    let r5 = r2 * r2 * r;
    let sym = (a + a.transpose()) * 0.5;
    let ax = sym * x;
    let axx = x.dot(&ax);
    let outer = ax * x.transpose() + x * ax.transpose();
    Ok(-outer / r5 - Mat3::identity() * (axx / r5) + x * x.transpose() * (5.0 * axx / (r5 * r2)))
}

/// Jacobian of `x ↦ U(x)p`.
pub fn oseen_apply_gradient(x: &Vec3, p: &Vec3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let r3 = r * r * r;
    let xp = x.dot(p);
    let j = (-p * x.transpose() + x * p.transpose() + Mat3::identity() * xp) / r3
        - x * x.transpose() * (3.0 * xp / (r3 * r * r));
    Ok(j * fluid.prefactor())
}

/// Jacobian of `x ↦ ∇U(x)A` (the contraction of [`grad_oseen_apply`]).
pub fn grad_oseen_apply_gradient(x: &Vec3, a: &Mat3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let r2 = r * r;
    let r5 = r2 * r2 * r;
    let two_sym_x = (a + a.transpose()) * x;
    let axx = contract_xx(a, x);
    let j = x * two_sym_x.transpose() / r5 + Mat3::identity() * (axx / r5)
        - x * x.transpose() * (5.0 * axx / (r5 * r2));
    Ok(j * (-3.0 * fluid.prefactor()))
}

/// Jacobian of `x ↦ ΔU(x)p`.
pub fn laplacian_oseen_apply_gradient(x: &Vec3, p: &Vec3, fluid: &FluidParams) -> Result<Mat3> {
    let r = guarded_norm(x, fluid.singular_guard)?;
    let r2 = r * r;
    let r5 = r2 * r2 * r;
    let xp = x.dot(p);
    let j = (p * x.transpose() + x * p.transpose() + Mat3::identity() * xp) * (-6.0 / r5)
        + x * x.transpose() * (30.0 * xp / (r5 * r2));
    Ok(j * fluid.prefactor())
}

/// Symmetric part of a matrix.
#[inline]
pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Trace-free part of a matrix.
#[inline]
pub fn deviatoric(m: &Mat3) -> Mat3 {
    m - Mat3::identity() * (m.trace() / 3.0)
}

/// Outer product `a ⊗ b`.
#[inline]
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fluid() -> FluidParams {
        FluidParams::default()
    }

    /// Central-difference Jacobian, the oracle for every derivative kernel.
    fn fd_jacobian(f: impl Fn(&Vec3) -> Vec3, x: &Vec3, h: f64) -> Mat3 {
        let mut j = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let col = (f(&(x + e)) - f(&(x - e))) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }

    #[test]
    fn oseen_on_axis() {
        let u = oseen(&Vec3::new(1.0, 0.0, 0.0), &fluid()).unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0)) / (8.0 * PI);
        assert_relative_eq!(u, expected, epsilon = 1e-15);
        assert_relative_eq!(u[(0, 0)], 0.0795775, epsilon = 1e-7);
        assert_relative_eq!(u[(1, 1)], 0.0397887, epsilon = 1e-7);
    }

    #[test]
    fn oseen_is_even_and_divergence_free() {
        let x = Vec3::new(0.3, -1.2, 0.7);
        assert_eq!(oseen(&x, &fluid()).unwrap(), oseen(&-x, &fluid()).unwrap());
        // row-wise divergence by central differences at (1,2,3)
        let x0 = Vec3::new(1.0, 2.0, 3.0);
        let h = 1e-5;
        for i in 0..3 {
            let mut div = 0.0;
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let up = oseen(&(x0 + e), &fluid()).unwrap();
                let dn = oseen(&(x0 - e), &fluid()).unwrap();
                div += (up[(i, k)] - dn[(i, k)]) / (2.0 * h);
            }
            assert!(div.abs() < 1e-6, "row {i}: div = {div}");
        }
    }

    #[test]
    fn oseen_tilde_values() {
        let ut = oseen_tilde(&Vec3::new(1.0, 0.0, 0.0), &fluid()).unwrap();
        assert_relative_eq!(ut[(0, 0)], -0.0265258, epsilon = 1e-7);
        assert_relative_eq!(ut[(1, 1)], 0.0132629, epsilon = 1e-7);
        assert_relative_eq!(ut[(2, 2)], 0.0132629, epsilon = 1e-7);
        let x = Vec3::new(0.2, 0.5, -0.9);
        assert!(ut.trace().abs() < 1e-16);
        assert!(oseen_tilde(&x, &fluid()).unwrap().trace().abs() < 1e-15);
        let half = oseen_tilde(&x, &fluid()).unwrap() / 2.0;
        assert_relative_eq!(oseen_tilde(&(2.0 * x), &fluid()).unwrap(), half, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_matches_fourth_order_differences() {
        let lu = laplacian_oseen(&Vec3::new(0.0, 0.0, 1.0), &fluid()).unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(2.0, 2.0, -4.0)) / (8.0 * PI);
        assert_relative_eq!(lu, expected, epsilon = 1e-15);

        let x = Vec3::new(1.0, 1.0, 1.0);
        let h = 1e-2;
        let mut lap = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let u = |s: f64| oseen(&(x + e * s), &fluid()).unwrap();
            lap += (-u(2.0) + u(1.0) * 16.0 - u(0.0) * 30.0 + u(-1.0) * 16.0 - u(-2.0)) / (12.0 * h * h);
        }
        let exact = laplacian_oseen(&x, &fluid()).unwrap();
        assert!((lap - exact).norm() / exact.norm() < 1e-5);
        assert!(exact.trace().abs() < 1e-15);
    }

    #[test]
    fn grad_oseen_apply_values() {
        let a = outer(&Vec3::x(), &Vec3::x());
        let g = grad_oseen_apply(&Vec3::x(), &a, &fluid()).unwrap();
        assert_relative_eq!(g, Vec3::new(-3.0 / (8.0 * PI), 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(g[0], -0.1193662, epsilon = 1e-7);
        let skew = Mat3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        let x = Vec3::new(0.4, -1.1, 0.8);
        assert!(grad_oseen_apply(&x, &skew, &fluid()).unwrap().norm() < 1e-16);
    }

    #[test]
    fn directional_derivative_of_stokeslet_is_the_dipole_contraction() {
        // (p·∇)U(x)p equals ∇U(x)(p⊗p − Id/3) under the contraction `∇U(x)A = ∂_k U_ij A_jk`.
        let p = Vec3::new(1.0, 2.0, -2.0) / 3.0;
        let x = Vec3::new(0.7, -0.4, 1.3);
        let h = 1e-5;
        let f = |s: f64| oseen(&(x + p * s), &fluid()).unwrap() * p;
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let a = outer(&p, &p) - Mat3::identity() / 3.0;
        let exact = grad_oseen_apply(&x, &a, &fluid()).unwrap();
        assert!((fd - exact).norm() < 1e-6 * exact.norm().max(1.0));
    }

    #[test]
    fn m_apply_is_the_symmetrized_gradient() {
        let x = Vec3::new(1.0, 2.0, -1.0);
        let a = Mat3::new(0.3, 0.1, -0.2, 0.1, -0.5, 0.4, -0.2, 0.4, 0.2);
        let jac = fd_jacobian(|y| grad_oseen_apply(y, &a, &fluid()).unwrap(), &x, 1e-5);
        let d = sym(&jac);
        let m = m_apply(&x, &a).unwrap() * (3.0 / (8.0 * PI));
        assert!((d - m).norm() < 1e-5 * m.norm());
        assert_relative_eq!(m_apply(&(2.0 * x), &a).unwrap(), m_apply(&x, &a).unwrap() / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn m_apply_identity() {
        // ℳ(x)Id = 3x⊗x/|x|⁵ − Id/|x|³; its trace-free part is that of 3x⊗x/|x|⁵.
        let x = Vec3::new(0.5, -1.5, 2.0);
        let r = x.norm();
        let m = m_apply(&x, &Mat3::identity()).unwrap();
        let expected = outer(&x, &x) * (3.0 / r.powi(5)) - Mat3::identity() / r.powi(3);
        assert_relative_eq!(m, expected, epsilon = 1e-14);
        assert!(m.trace().abs() < 1e-14);
        let printed = outer(&x, &x) * (3.0 / r.powi(5));
        assert_relative_eq!(deviatoric(&m), deviatoric(&printed), epsilon = 1e-14);
    }

    #[test]
    fn gradient_kernels_match_finite_differences_at_many_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let f = FluidParams::new(1.7).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..120 {
            let x = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if x.norm() < 0.3 {
                continue;
            }
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a = {
                let m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                deviatoric(&sym(&m))
            };
            let h = 1e-6;
            let cases = [
                (fd_jacobian(|y| oseen(y, &f).unwrap() * p, &x, h), oseen_apply_gradient(&x, &p, &f).unwrap()),
                (fd_jacobian(|y| grad_oseen_apply(y, &a, &f).unwrap(), &x, h), grad_oseen_apply_gradient(&x, &a, &f).unwrap()),
                (fd_jacobian(|y| laplacian_oseen(y, &f).unwrap() * p, &x, h), laplacian_oseen_apply_gradient(&x, &p, &f).unwrap()),
            ];
            for (fd, exact) in cases {
                worst = worst.max((fd - exact).norm() / exact.norm());
            }
        }
        assert!(worst < 1e-5, "worst relative FD mismatch {worst:e}");
    }

    #[test]
    fn singular_point_is_an_error() {
        let err = oseen(&Vec3::zeros(), &fluid()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert!(laplacian_oseen(&Vec3::new(1e-13, 0.0, 0.0), &fluid()).is_err());
        assert!(m_apply(&Vec3::zeros(), &Mat3::identity()).is_err());
        let coarse = fluid().with_guard(1e-3);
        assert!(oseen(&Vec3::new(1e-4, 0.0, 0.0), &coarse).is_err());
    }

    fn vec_strategy() -> impl Strategy<Value = Vec3> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_filter("away from origin", |(a, b, c)| a * a + b * b + c * c > 0.01)
            .prop_map(|(a, b, c)| Vec3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn kernels_are_homogeneous(x in vec_strategy(), si in 0usize..3) {
            let s = [0.5, 2.0, 10.0][si];
            let f = fluid();
            let a = Mat3::new(0.2, 0.3, 0.0, 0.3, -0.1, 0.5, 0.0, 0.5, -0.1);
            let pairs = [
                (oseen(&(x * s), &f).unwrap(), oseen(&x, &f).unwrap() / s),
                (oseen_tilde(&(x * s), &f).unwrap(), oseen_tilde(&x, &f).unwrap() / s),
                (laplacian_oseen(&(x * s), &f).unwrap(), laplacian_oseen(&x, &f).unwrap() / s.powi(3)),
                (m_apply(&(x * s), &a).unwrap(), m_apply(&x, &a).unwrap() / s.powi(3)),
            ];
            for (lhs, rhs) in pairs {
                let scale = rhs.norm();
                prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
            }
            let g1 = grad_oseen_apply(&(x * s), &a, &f).unwrap();
            let g0 = grad_oseen_apply(&x, &a, &f).unwrap() / (s * s);
            prop_assert!((g1 - g0).norm() <= 1e-12 * g0.norm() + 1e-300);
        }

        #[test]
        fn oseen_is_symmetric_positive_semidefinite(x in vec_strategy()) {
            let u = oseen(&x, &fluid()).unwrap();
            prop_assert!((u - u.transpose()).norm() == 0.0);
            let eig = u.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&l| l >= -1e-15));
        }

        #[test]
        fn kernels_are_pure(x in vec_strategy()) {
            let f = fluid();
            prop_assert_eq!(oseen(&x, &f).unwrap(), oseen(&x, &f).unwrap());
            prop_assert_eq!(laplacian_oseen(&x, &f).unwrap(), laplacian_oseen(&x, &f).unwrap());
        }
    }
}
