//! Singular Stokes solutions for spherical micro-swimmers, their
//! method-of-reflections superposition in dilute suspensions, and the
//! active-stress effective model those suspensions homogenize to.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: Oseen tensor and its derivatives.
//! * [`quadrature`]: Gauss rules on intervals, spheres, balls and boxes.
//! * [`flow`]: the [`flow::FlowField`] evaluator trait and surface traction moments.
//! * [`swimmer`]: the single-swimmer solution, its pressure, dipole expansion and
//!   the passive strain solution.
//! * [`density`]: orientation densities on a containment domain and their samplers.
//! * [`suspension`]: sampled configurations, separation diagnostics, the
//!   superposed field and its boundary error.
//! * [`effective`]: active stress, the effective Stokes solve and its Einstein
//!   correction, energy balance terms.
//! * [`fokker_planck`]: stationary orientation laws in a frozen strain.
//! * [`stats`]: empirical moments of configurations against the continuum stress.
//! * [`io`]: CSV tables and TOML snapshots.
//! * [`experiments`]: the reproducible experiment runner behind the command-line tool.

pub mod error;
pub mod fit;
pub mod flow;
pub mod fokker_planck;
pub mod io;
pub mod kernels;
pub mod density;
pub mod effective;
pub mod experiments;
pub mod quadrature;
pub mod stats;
pub mod suspension;
pub mod swimmer;

pub use error::{Error, Result};
pub use flow::FlowField;
pub use kernels::{FluidParams, Mat3, UnitVec3, Vec3};
pub use swimmer::SwimmerParams;
