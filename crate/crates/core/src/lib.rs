//! Symmetry reduction for mechanical systems on principal bundles.
//!
//! The crate evaluates the bundle geometry of a gauge-fixed system (projectors,
//! Faddeev-Popov matrix, mechanical connection, curvature, horizontal metric),
//! integrates the reduced Wong equations, solves for relative equilibria, and
//! instantiates the pipeline for a Coulomb-gauge su(2) field on a small
//! periodic lattice.

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod geometry;
pub mod lie;
pub mod lattice;
pub mod linalg;
pub mod lm;
pub mod so3;
pub mod system;

pub use error::{Error, Result};
pub use geometry::GeometryAtPoint;
pub use lie::LieAlgebraSpec;
pub use linalg::Tensor3;
pub use system::{MechanicalSystem, PointOnSigma};
