//! Finite-key rates for side-channel-secure and twin-field QKD.
//!
//! Failure probabilities are handled as `ln(1/eps)` throughout
//! ([`numerics::LogEps`]); the de Finetti penalty pushes them far below the
//! range of `f64`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference values in tests keep every digit the oracle printed.
#![cfg_attr(
    test,
    allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)
)]

pub mod budget;
pub mod channel;
pub mod cli;
pub mod concentration;
pub mod config;
pub mod definetti;
pub mod error;
pub mod npp;
pub mod numerics;
pub mod optimizer;
pub mod report;
pub mod result;
pub mod scs;

pub use budget::{BudgetSplit, EpsilonBudget, Mode};
pub use channel::GlobalParams;
pub use definetti::GMode;
pub use error::{Error, Result};
pub use numerics::LogEps;
pub use result::{Clamp, KeyRateResult, Protocol};
