//! Flow evaluators and surface moments of their stress.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{FluidParams, Mat3, Vec3};
use crate::quadrature::SurfaceQuadrature;

/// Position → velocity, with optional gradient and pressure.
pub trait FlowField: Sync {
    fn velocity(&self, x: &Vec3) -> Result<Vec3>;

    /// Closed-form Jacobian `∂u_i/∂x_k`, when the field has one.
    fn gradient(&self, _x: &Vec3) -> Result<Mat3> {
        Err(Error::Unsupported("analytic velocity gradient"))
    }

    fn pressure(&self, _x: &Vec3) -> Result<f64> {
        Err(Error::Unsupported("pressure"))
    }
}

impl<F: FlowField + ?Sized> FlowField for &F {
    fn velocity(&self, x: &Vec3) -> Result<Vec3> {
        (**self).velocity(x)
    }
    fn gradient(&self, x: &Vec3) -> Result<Mat3> {
        (**self).gradient(x)
    }
    fn pressure(&self, x: &Vec3) -> Result<f64> {
        (**self).pressure(x)
    }
}

/// Central-difference Jacobian of the velocity with step `h`.
pub fn fd_gradient<F: FlowField + ?Sized>(flow: &F, x: &Vec3, h: f64) -> Result<Mat3> {
    let mut j = Mat3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let col = (flow.velocity(&(x + e))? - flow.velocity(&(x - e))?) / (2.0 * h);
        j.set_column(k, &col);
    }
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientMode {
    FiniteDifference { step: f64 },
    Analytic,
}

impl GradientMode {
    pub fn evaluate<F: FlowField + ?Sized>(&self, flow: &F, x: &Vec3) -> Result<Mat3> {
        match *self {
            GradientMode::FiniteDifference { step } => fd_gradient(flow, x, step),
            GradientMode::Analytic => flow.gradient(x),
        }
    }
}

/// Cauchy stress `2μD(u) − p Id` from a velocity gradient and pressure.
pub fn cauchy_stress(grad: &Mat3, pressure: f64, fluid: &FluidParams) -> Mat3 {
    (grad + grad.transpose()) * fluid.mu - Mat3::identity() * pressure
}

/// Force, torque and first traction moment of a flow over a sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceMoments {
    /// `∮ σn ds`
    pub force: Vec3,
    /// `∮ σn × x ds`
    pub torque: Vec3,
    /// `∮ σn ⊗ x ds`, unsymmetrized.
    pub stresslet: Mat3,
}

impl SurfaceMoments {
    pub fn symmetric_stresslet(&self) -> Mat3 {
        crate::kernels::sym(&self.stresslet)
    }

    pub fn trace_free_stresslet(&self) -> Mat3 {
        crate::kernels::deviatoric(&self.symmetric_stresslet())
    }

    fn distance(&self, other: &Self) -> f64 {
        let scale = self.force.norm().max(self.stresslet.norm()).max(1e-300);
        ((self.force - other.force).norm() + (self.torque - other.torque).norm() + (self.stresslet - other.stresslet).norm())
            / scale
    }
}

/// Traction moments on the sphere `|x| = radius` centred at the origin, with
/// outward normal.
pub fn traction_on_sphere<F: FlowField + ?Sized>(
    flow: &F,
    radius: f64,
    quad: &SurfaceQuadrature,
    mode: GradientMode,
    fluid: &FluidParams,
) -> Result<SurfaceMoments> {
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    let mut stresslet = Mat3::zeros();
    let area = radius * radius;
    for (n, w) in quad.nodes() {
        let n = n.into_inner();
        let x = n * radius;
        let grad = mode.evaluate(flow, &x)?;
        let sigma = cauchy_stress(&grad, flow.pressure(&x)?, fluid);
        let t = sigma * n * (w * area);
        force += t;
        torque += t.cross(&x);
        stresslet += t * x.transpose();
    }
    Ok(SurfaceMoments { force, torque, stresslet })
}

/// Doubles the resolution of `make_rule(level)` until two successive levels
/// agree to `tol` (relative to the force / stresslet scale).
pub fn traction_converged<F, R>(
    flow: &F,
    radius: f64,
    make_rule: R,
    max_level: usize,
    tol: f64,
    mode: GradientMode,
    fluid: &FluidParams,
) -> Result<SurfaceMoments>
where
    F: FlowField + ?Sized,
    R: Fn(usize) -> Result<SurfaceQuadrature>,
{
    let mut prev = traction_on_sphere(flow, radius, &make_rule(0)?, mode, fluid)?;
    let mut change = f64::INFINITY;
    for level in 1..=max_level {
        let next = traction_on_sphere(flow, radius, &make_rule(level)?, mode, fluid)?;
        change = next.distance(&prev);
        if change <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { tolerance: tol, achieved: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::oseen;

    /// Rigid translation `u = c` has zero traction.
    struct Uniform(Vec3);
    impl FlowField for Uniform {
        fn velocity(&self, _x: &Vec3) -> Result<Vec3> {
            Ok(self.0)
        }
        fn gradient(&self, _x: &Vec3) -> Result<Mat3> {
            Ok(Mat3::zeros())
        }
        fn pressure(&self, _x: &Vec3) -> Result<f64> {
            Ok(0.0)
        }
    }

    struct Stokeslet {
        f: Vec3,
        fluid: FluidParams,
    }
    impl FlowField for Stokeslet {
        fn velocity(&self, x: &Vec3) -> Result<Vec3> {
            Ok(oseen(x, &self.fluid)? * self.f)
        }
        fn pressure(&self, x: &Vec3) -> Result<f64> {
            Ok(self.f.dot(x) / (4.0 * std::f64::consts::PI * x.norm().powi(3)))
        }
    }

    #[test]
    fn uniform_flow_has_no_traction() {
        let m = traction_on_sphere(
            &Uniform(Vec3::new(1.0, 2.0, 3.0)),
            0.7,
            &SurfaceQuadrature::product(8, 16).unwrap(),
            GradientMode::Analytic,
            &FluidParams::default(),
        )
        .unwrap();
        assert_eq!(m.force, Vec3::zeros());
    }

    #[test]
    fn stokeslet_traction_balances_point_force() {
        // A Stokeslet of strength f at the origin: the fluid outside any sphere
        // around it feels the force f, so ∮σn over the outward sphere equals −f.
        let fluid = FluidParams::new(2.5).unwrap();
        let f = Vec3::new(0.3, -1.0, 0.4);
        let flow = Stokeslet { f, fluid };
        let m = traction_on_sphere(
            &flow,
            1.3,
            &SurfaceQuadrature::product(12, 24).unwrap(),
            GradientMode::FiniteDifference { step: 1e-6 },
            &fluid,
        )
        .unwrap();
        assert!((m.force + f).norm() < 1e-8 * f.norm(), "{:?}", m.force);
        assert!(m.torque.norm() < 1e-9);
    }

    #[test]
    fn missing_capabilities_are_reported() {
        let flow = Stokeslet { f: Vec3::x(), fluid: FluidParams::default() };
        assert!(matches!(flow.gradient(&Vec3::x()), Err(Error::Unsupported(_))));
    }
}
