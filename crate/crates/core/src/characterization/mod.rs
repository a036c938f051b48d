//! Estimators that recover line and transceiver parameters from telemetry
//! alone: DLM profile segmentation, OLS noise-figure/ripple calibration,
//! VOA-sweep transceiver noise fitting, and assembly of an estimated line.
//!
//! Every entry point takes telemetry records, configurations the operator
//! set, and `PublicLineInfo`; none accepts a ground-truth `LineSystem`.

mod dlm;
mod lsq;
mod ols;
mod profile;
mod trx;
mod twin;

pub use dlm::{
    analyze_dlm_profile, LinkEstimate, LossEvent, DETECTION_WINDOW, MERGE_DISTANCE_KM, MIN_PROFILE_SAMPLES,
};
pub use ols::{calibrate_ols, ols_probe_configs, AmpCalibration, OlsEstimate, OlsProbe, NF_BOUNDS_DB};
pub use profile::{compare_profiles, ProfileDelta};
pub use trx::{fit_transceiver_noise, TrxEstimate, MIN_SWEEP_POINTS};
pub use twin::assemble_twin;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharacterizationError {
    #[error("profile has {got} samples, at least {need} required")]
    ProfileTooShort { got: usize, need: usize },
    #[error("detection threshold {threshold} dB is below 3x the noise level ({noise_sigma} dB)")]
    ThresholdBelowNoise { threshold: f64, noise_sigma: f64 },
    #[error("{got} probes supplied, at least {need} required")]
    InsufficientProbes { got: usize, need: usize },
    #[error("probe set is rank deficient: {0}")]
    RankDeficient(String),
    #[error("sweep has {usable} usable points, at least {need} required")]
    InsufficientPoints { usable: usize, need: usize },
    #[error("sweep attenuations are not strictly increasing")]
    NonMonotoneSweep,
    #[error("profiles cover different lengths: {before} km vs {after} km")]
    LengthMismatch { before: f64, after: f64 },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}
