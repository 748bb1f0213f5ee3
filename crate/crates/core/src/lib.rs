//! Online regression competitive with Sobolev benchmark classes, built on
//! Banach-space geometry.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod baselines;
pub mod bbk29;
pub mod kernel;
pub mod signals;
pub mod spaces;
pub(crate) mod optim;

pub use error::{Error, Result};
