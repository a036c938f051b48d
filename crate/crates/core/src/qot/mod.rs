//! GN-model physics: ASE and NLI accumulation along a line, GSNR
//! combination, and GSNR to pre-FEC BER mapping.

mod config;
mod formulas;
mod propagate;

pub use config::{psd_matched_launch, AmpSetting, ChannelPlan, LineConfig, TrafficChannel, LOADING_SYMBOL_RATE_GBD};
pub use formulas::{
    ase_power, ber_for_curve, ber_from_gsnr, combine_snr_db, combine_with_transceiver, effective_length,
    nli_psd_per_span, required_gsnr, MIN_DISPERSION_PS2_PER_KM,
};
pub use propagate::{
    amp_channel_gain_db, amp_slot_gain_db, propagate_gsnr, walk, AmpIo, GsnrRecord, GsnrSpectrum, Walk,
    WalkPoint, GSNR_CAP_DB, LOS_THRESHOLD_DBM, REF_BANDWIDTH_HZ,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QotError {
    #[error("model domain error: {0}")]
    ModelDomain(String),
    #[error("loss of signal at {element}: {power_dbm:.2} dBm in slot {slot}")]
    LossOfSignal { element: String, slot: usize, power_dbm: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fec limit {0} cannot be bracketed by the BER curve")]
    NonBracketable(f64),
}
