//! Max-min fairness for uplink cell-free massive MIMO.
//!
//! The crate is organized bottom-up:
//!
//! - [`network`]: geometry, three-slope path loss with shadowing, pilot
//!   assignment and MMSE estimation statistics.
//! - [`sinr`]: closed-form SINR structure terms, SINR / spectral-efficiency
//!   evaluation and the reduced posynomial coefficients.
//! - [`receiver`]: optimal unit-norm combining vectors through a sequence of
//!   Sherman-Morrison rank-one updates.
//! - [`apg`]: log-domain convex reformulation, log-sum-exp smoothing and the
//!   accelerated projected gradient power solver.
//! - [`oracle`]: exact bisection / fixed-point max-min power control used as
//!   a correctness and run-time baseline.
//! - [`solver`]: alternating receiver / power optimization.
//! - [`harness`]: experiment drivers and CSV emitters behind the `cellfree`
//!   binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apg;
pub mod error;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod receiver;
pub mod sinr;
pub mod solver;

mod csvio;

pub use error::{Error, Result};
