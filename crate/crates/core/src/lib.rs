//! Robust action governor toolkit.

pub mod error;
pub mod geometry;
pub mod governor;
pub mod learn;
pub mod linalg;
pub mod msd;
pub mod optim;
pub mod pwa;
pub mod safe_set;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations used by the MSD benchmark and the CLI.
pub type Polyhedron = geometry::HPolyhedron<f64>;
pub type Polygon = geometry::PolyUnion<f64>;
pub type Model = pwa::PwaModel<f64>;
pub type SafeSet = safe_set::SafeSetIterate<f64>;
pub type ActionGovernor = governor::Governor<f64>;
pub type QNetwork = learn::Mlp<f64>;
