// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod qot;
pub mod units;
pub mod telemetry;
pub mod characterization;
pub mod optimizer;
pub mod control;
pub mod orchestrator;
