//! Nearest-neighbor and clique-count functionals on sampled manifolds,
//! their limiting constants, and a harness that checks the associated
//! limit theorems by simulation.

pub mod constants;
pub mod error;
pub mod estimators;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod pointprocess;
pub mod rng;
pub mod spatial;

pub use error::{Error, Result};
pub use functionals::{FunctionalKind, PointFunctional};
pub use geometry::{Density, PointCloud};
pub use spatial::SpatialIndex;
