//! Rank-1 estimation in rotationally invariant noise: PCA-initialized AMP,
//! its state evolution, and the free-probability statistics both need.
// `!(x > 0.0)` style checks are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
mod fixed;
pub mod free_probability;
pub mod linalg;
pub mod random_matrix;
pub mod spectral;
pub mod denoisers;
pub mod amp_square;
pub mod amp_rect;
pub mod state_evolution;
pub mod verification;
pub mod harness;

pub use error::{Error, Result};
pub use free_probability::{CumulantSeries, Kind, MomentSequence, SpectrumModel};
