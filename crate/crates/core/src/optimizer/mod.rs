//! Line configuration search for a high, flat end-of-line GSNR, and
//! lightpath design against the resulting QoT estimate.

mod lightpath;
mod line;

pub use lightpath::{block_gsnr, design_lightpaths, pair_transceiver_snr, DesignRequest, LightpathDesign, PortCandidate};
pub use line::{
    default_bounds, evaluate, optimize_line, optimize_with_bounds, Evaluation, OptimizationResult, OptimizeOptions,
};

use thiserror::Error;

use crate::qot::QotError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no feasible slot for demand {demand}: best shortfall {shortfall_db:.2} dB")]
    NoFeasibleSlot { demand: String, shortfall_db: f64 },
    #[error("no free port for demand {demand} at {node} supporting {format}")]
    NoPort { demand: String, node: String, format: String },
    #[error(transparent)]
    Qot(#[from] QotError),
}
