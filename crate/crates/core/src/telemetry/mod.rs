//! Synthetic observables: DLM power profiles, endpoint OSA spectra,
//! amplifier power monitors and VOA sweeps. This is the only module that
//! reads hidden ground-truth fields; its outputs carry samples, never the
//! parameters that produced them.

mod dlm;
mod noise;
mod osa;
mod voa;

pub use dlm::{simulate_dlm_capture, PowerProfile, ProfileSample};
pub use noise::{clipped_normal, seeded_rng};
pub use osa::{read_amp_power_monitors, simulate_osa_spectrum, AmpPowerReading, OsaSlot, OsaSpectrum};
pub use voa::{simulate_voa_sweep, trx_snr_at, VoaPoint, VoaSweepRecord, DEFAULT_KNEE_DBM, SATURATED_BER};

use thiserror::Error;

use crate::qot::QotError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("sample spacing must be positive, got {0} km")]
    InvalidSpacing(f64),
    #[error("no channel occupies slot {0}")]
    ChannelAbsent(usize),
    #[error("no OSA installed at {0}")]
    NoOsa(String),
    #[error("{0} is not an endpoint of the line")]
    UnknownEnd(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Qot(#[from] QotError),
}
