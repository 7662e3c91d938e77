//! Sparse recovery by nonconvex lp minimization, with the restricted
//! isometry based error bounds that certify it.
//!
//! * [`bounds`]: closed-form thresholds and constants.
//! * [`ric`]: exact and sampled restricted isometry constants.
//! * [`solver`]: IRLS with smoothing continuation and recovery certificates.
//! * [`lemmas`]: numeric checks of every inequality in the error-bound chain.
//! * [`harness`]: instance generation, Monte-Carlo driver and reports.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod io;
pub mod lemmas;
pub mod ric;
pub mod solver;

pub use error::{Error, Result};
