//! Closed curves in hyperbolic space from finite-gap potentials.
//!
//! A closed unit-speed curve in H³ is encoded by its complex curvature `q`,
//! a periodic potential of the focusing NLS zero-curvature equation. This
//! crate integrates the extended frame, reads off monodromy spectral data,
//! applies simple-factor dressing, and runs a truncate–Newton–dress pipeline
//! that replaces a closed potential by nearby closed finite-gap potentials.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closing;
pub mod config;
pub mod dressing;
pub mod error;
pub mod frame;
pub mod io;
pub mod potential;
pub mod reconstruct;
pub mod sl2;
pub mod spectral;

pub use config::{Config, SignPolicy};
pub use error::{Error, Result};
pub use frame::{FrameResult, Integrator, Sheet};
pub use potential::Potential;
pub use sl2::{CPLine, H3Point, Mat2, C64};
