//! Steady periodic hydroelastic waves with vorticity.
//!
//! The crate computes the laminar (flat-surface) flows beneath an elastic
//! plate, decides whether small-amplitude periodic waves bifurcate from them,
//! locates the minimal bifurcation wavelength by Sturm–Liouville shooting,
//! and traces the local bifurcating branch of the discretized height-function
//! problem. Solutions can be mapped back to velocity, pressure and surface
//! elevation and checked against the Euler, stream-function and
//! height-function formulations.
//!
//! Module map:
//!
//! * [`vorticity`]: the vorticity function and its antiderivative.
//! * [`laminar`]: the laminar flow and the two solvability conditions.
//! * [`sturm`]: shooting, the Wronskian and the bifurcation point.
//! * [`oracles`]: closed forms used as independent references.
//! * [`spectral`] and [`surface`]: periodic spectral calculus, the plate
//!   operator and the nonlocal boundary operators.
//! * [`continuation`]: the discrete bifurcation problem, its linearization,
//!   and Newton continuation along the branch.
//! * [`reconstruct`]: physical fields and residual checks.
//! * [`cli`]: the command-line front end.

pub mod cli;
pub mod continuation;
pub mod error;
pub mod export;
pub mod laminar;
pub mod numerics;
pub mod oracles;
pub mod reconstruct;
pub mod spectral;
pub mod sturm;
pub mod surface;
pub mod vorticity;

pub use error::{Error, Result};
pub use laminar::{LaminarFlow, PhysicalParams};
pub use sturm::{BifurcationPoint, ShootResult};
pub use vorticity::VorticityProfile;
