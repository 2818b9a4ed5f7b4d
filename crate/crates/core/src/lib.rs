//! Profit and loss attribution for insurance portfolios.
//!
//! A revaluation surface `U(t_1, ..., t_m)` is split into one contribution per risk
//! factor by updating the factors one at a time along a partition (SU), and by the
//! limit of that procedure as the partition is refined (ISU).

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closedform;
pub mod decomposition;
pub mod revaluation;
pub mod scenario;
pub mod stochastics;
pub mod timepaths;
