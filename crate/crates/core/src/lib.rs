pub mod bergman;
pub mod biquat;
pub mod decomposition;
pub mod error;
pub mod geom;
pub mod grid;
pub mod integral;
pub mod jets;
mod lattice;
pub mod rng;
pub mod snapshot;

pub use biquat::{Biquaternion, Complex, ZeroDivisorClass};
pub use error::{Result, VekuaError};
pub use geom::Point;
pub use grid::{BiquatField, DomainGrid, DomainSpec, ScalarField, SurfaceMesh};
pub use lattice::newtonian_self_integral;
