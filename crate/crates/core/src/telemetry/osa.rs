use serde::{Deserialize, Serialize};

use super::{clipped_normal, seeded_rng, TelemetryError};
use crate::model::{LineSystem, SpectrumGrid};
use crate::qot::{walk, ChannelPlan, LineConfig, REF_BANDWIDTH_HZ};
use crate::units::{db_to_lin, ghz_to_hz, lin_to_db, w_to_dbm};

const OSA_STREAM: u64 = 0x6f7361;
const MONITOR_STREAM: u64 = 0x6d6f6e;

/// One OSA reading per grid slot, both in the 12.5 GHz reference bandwidth:
/// `power_dbm` at the slot center and `floor_dbm` in the guard band beside
/// the channel, where only ASE is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsaSlot {
    pub slot_index: usize,
    pub power_dbm: f64,
    pub floor_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsaSpectrum {
    /// Endpoint node where the spectrum was captured.
    pub capture_point: String,
    pub noise_sigma_db: f64,
    pub seed: u64,
    pub slots: Vec<OsaSlot>,
}

impl OsaSpectrum {
    /// Signal PSD at each slot center times the reference bandwidth (dBm),
    /// after subtracting the ASE floor.
    pub fn signal_ref_dbm(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| lin_to_db((db_to_lin(s.power_dbm) - db_to_lin(s.floor_dbm)).max(1e-30)))
            .collect()
    }

    /// Per-slot OSNR (dB, ref bandwidth).
    pub fn osnr_db(&self) -> Vec<f64> {
        self.signal_ref_dbm()
            .iter()
            .zip(&self.slots)
            .map(|(s, o)| s - o.floor_dbm)
            .collect()
    }
}

/// Captures the spectrum at `end` (a line endpoint with an OSA). The far
/// end sees the preamp output; the near end sees the launched comb.
#[allow(clippy::too_many_arguments)]
pub fn simulate_osa_spectrum(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
    end: &str,
    noise_sigma_db: f64,
    seed: u64,
) -> Result<OsaSpectrum, TelemetryError> {
    let idx = line.endpoint_index(end).ok_or_else(|| TelemetryError::UnknownEnd(end.to_string()))?;
    if !line.endpoint_instruments[idx].osa {
        return Err(TelemetryError::NoOsa(end.to_string()));
    }
    let w = walk(line, grid, config, plan)?;
    let state = if idx == 1 { &w.end } else { &w.points[0] };
    let mut signal_psd = vec![0.0; grid.slot_count];
    for (ch, sig) in plan.channels.iter().zip(&state.signal_w) {
        for s in ch.slots() {
            signal_psd[s] = sig / ghz_to_hz(ch.symbol_rate_gbd);
        }
    }
    let mut rng = seeded_rng(seed, OSA_STREAM);
    let mut noise = || if noise_sigma_db > 0.0 { clipped_normal(&mut rng, noise_sigma_db) } else { 0.0 };
    let slots = (0..grid.slot_count)
        .map(|s| {
            let ase = state.ase_psd[s] * REF_BANDWIDTH_HZ;
            let power = signal_psd[s] * REF_BANDWIDTH_HZ + ase;
            OsaSlot {
                slot_index: s,
                power_dbm: w_to_dbm(power) + noise(),
                floor_dbm: w_to_dbm(ase.max(1e-30)) + noise(),
            }
        })
        .collect();
    Ok(OsaSpectrum { capture_point: end.to_string(), noise_sigma_db, seed, slots })
}

/// Built-in amplifier power meter reading of total signal power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpPowerReading {
    pub amp_id: String,
    pub input_dbm: f64,
    pub output_dbm: f64,
    pub noise_sigma_db: f64,
}

pub fn read_amp_power_monitors(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
    noise_sigma_db: f64,
    seed: u64,
) -> Result<Vec<AmpPowerReading>, TelemetryError> {
    let w = walk(line, grid, config, plan)?;
    let mut rng = seeded_rng(seed, MONITOR_STREAM);
    let mut noise = || if noise_sigma_db > 0.0 { clipped_normal(&mut rng, noise_sigma_db) } else { 0.0 };
    Ok(w.amp_io
        .iter()
        .map(|io| AmpPowerReading {
            amp_id: io.id.clone(),
            input_dbm: w_to_dbm(io.input_w) + noise(),
            output_dbm: w_to_dbm(io.output_w) + noise(),
            noise_sigma_db,
        })
        .collect())
}
