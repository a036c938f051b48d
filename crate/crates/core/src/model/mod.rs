//! Domain types shared by every other module: the spectrum grid, fiber and
//! amplifier elements, transceiver ports, data centers and the scenario file.

mod grid;
mod line;
mod scenario;

pub use grid::{carrier_frequency, BerCurve, Channel, ChannelRole, ModulationFormat, SpectrumGrid};
pub use line::{
    total_length, EndpointInstruments, Edfa, FiberSpan, Instruments, LineElement, LineSystem,
    LumpedLoss, PublicAmp, PublicLineInfo, PublicSpan,
};
pub use scenario::{
    validate_scenario, DataCenter, Dataset, Demand, Disaster, Node, Operator, Parameters,
    PortConfig, PowerState, Scenario, TransceiverPort, WorkflowDurations,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("invariant error: {0}")]
    Invariant(String),
    #[error("slot {slot} out of range for grid {grid} with {count} slots")]
    SlotOutOfRange { grid: String, slot: usize, count: usize },
}

pub(crate) fn invariant(msg: impl Into<String>) -> ModelError {
    ModelError::Invariant(msg.into())
}
