//! Radial extremals of doubly critical quasi-linear equations with a Hardy
//! potential, and the numerical checks that go with them.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod convolution;
pub mod energy;
pub mod error;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod radial;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Exponents, ProblemParams, Variant};
pub use radial::{RadialGrid, RadialProfile};
