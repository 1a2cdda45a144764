//! Geodesics on a slightly deformed sphere, viewed as slowly precessing
//! great-circle "coils".
//!
//! The crate is organised bottom-up:
//!
//! * [`surface`]: implicit surfaces `phi(x) = 0` (quartic-deformed sphere,
//!   ellipsoid) with gradient, Hessian and projection helpers.
//! * [`ode`]: an embedded Dormand-Prince 5(4) integrator with a per-step
//!   repair hook.
//! * [`geodesic`]: the exact constrained geodesic flow and loop normals.
//! * [`averaged`]: the averaged angular-momentum system, its Hamiltonian and
//!   the phase-average oracle.
//! * [`stationary`]: stationary points of the averaged flow and their
//!   stability.
//! * [`separatrix`]: separatrix tracing and the projective quotient of the net.
//! * [`atlas`]: Type I to IV classification of deformation triples.
//! * [`render`]: deterministic SVG figures on the projective disk.
//! * [`export`]: CSV/JSON file formats.

pub mod atlas;
pub mod averaged;
pub mod error;
pub mod export;
pub mod geodesic;
pub mod ode;
pub mod render;
pub mod separatrix;
pub mod stationary;
pub mod surface;

/// Cartesian 3-vector used for positions, velocities and angular momenta.
pub type Real3 = nalgebra::Vector3<f64>;

pub use atlas::{boundary_residuals, classify_type, sample_region_map, RegionSample, TopType};
pub use averaged::{
    average_over_phase, averaged_rhs, frame_vectors, hamiltonian, integrate_averaged, oscillatory_rhs, AveragedModel,
    AveragedTrajectory, Frame,
};
pub use error::{Error, Result};
pub use geodesic::{
    angular_momentum, geodesic_rhs, integrate_geodesic, loop_normals, momentum_rhs_exact, LoopNormal, PhaseState,
    Trajectory,
};
pub use separatrix::{quotient_antipodal, trace_separatrices, verify_type, SeparatrixGraph, Space};
pub use stationary::{
    classify_stability, enumerate_stationary, jacobian_restricted, Family, Stability, StabilityMethod, StationaryPoint,
};
pub use surface::{EpsilonTriple, SurfaceSpec};
