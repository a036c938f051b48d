use serde::{Deserialize, Serialize};

use super::{clipped_normal, seeded_rng, TelemetryError};
use crate::model::{ModulationFormat, TransceiverPort};
use crate::qot::{ber_from_gsnr, combine_with_transceiver};

const VOA_STREAM: u64 = 0x766f61;
/// Received power below which receiver noise grows 1 dB per dB.
pub const DEFAULT_KNEE_DBM: f64 = -15.0;
pub const SATURATED_BER: f64 = 0.5 - 1e-9;

/// Receiver-noise model: flat at `snr0_db` above the knee, falling with
/// slope 1 below it.
pub fn trx_snr_at(snr0_db: f64, knee_dbm: f64, rx_dbm: f64) -> f64 {
    snr0_db - (knee_dbm - rx_dbm).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoaPoint {
    pub attenuation_db: f64,
    pub ber: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoaSweepRecord {
    pub port_id: String,
    pub format: ModulationFormat,
    /// Received power with the VOA at 0 dB.
    pub rx_power_dbm: f64,
    /// SNR of the signal entering the VOA.
    pub input_snr_db: f64,
    pub seed: u64,
    pub points: Vec<VoaPoint>,
}

/// Loopback BER sweep of one port: the VOA lowers received power, which
/// exposes the receiver noise knee. BER carries log-normal counting noise
/// with log-standard-deviation `counting_noise`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_voa_sweep(
    port: &TransceiverPort,
    format: &ModulationFormat,
    attenuations_db: &[f64],
    input_snr_db: f64,
    rx_power_dbm: f64,
    counting_noise: f64,
    seed: u64,
) -> Result<VoaSweepRecord, TelemetryError> {
    if attenuations_db.is_empty() {
        return Err(TelemetryError::InvalidSweep("no attenuation points".into()));
    }
    if attenuations_db.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TelemetryError::InvalidSweep("attenuations must be strictly increasing".into()));
    }
    let mut rng = seeded_rng(seed, VOA_STREAM);
    let points = attenuations_db
        .iter()
        .map(|&a| {
            let trx = trx_snr_at(port.snr_trx_true_db, DEFAULT_KNEE_DBM, rx_power_dbm - a);
            let snr = combine_with_transceiver(input_snr_db, trx);
            let noise = if counting_noise > 0.0 { clipped_normal(&mut rng, counting_noise) } else { 0.0 };
            let ber = ber_from_gsnr(format, snr) * noise.exp();
            let saturated = !(ber < SATURATED_BER);
            VoaPoint { attenuation_db: a, ber: if saturated { SATURATED_BER } else { ber }, saturated }
        })
        .collect();
    Ok(VoaSweepRecord {
        port_id: port.id.clone(),
        format: format.clone(),
        rx_power_dbm,
        input_snr_db,
        seed,
        points,
    })
}
