//! Numerical core for continuous-time, input-constrained optimal tracking
//! with a single polynomial critic.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! evaluation: plant and reference models are opaque callables, the critic is
//! a weighted monomial basis, and the learning laws return weight derivatives
//! that the [`sim`] module integrates together with the augmented state.
//!
//! Module map:
//!
//! - [`dynamics`]: plants, references and the augmented error/reference system.
//! - [`critic`]: monomial regressor basis, its Jacobian and the value estimate.
//! - [`control`]: saturated control law, non-quadratic input penalty, running cost.
//! - [`learning`]: HJB residual and the three critic update laws.
//! - [`analysis`]: gain-matrix checks and ultimate-boundedness scaling factors.
//! - [`sim`]: dithering, RK4 and the coupled episode runner with its metrics.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod control;
pub mod critic;
pub mod dynamics;
mod error;
pub mod learning;
pub mod linalg;
pub mod sim;

pub use error::{Error, Result};
