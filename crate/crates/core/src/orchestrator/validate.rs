use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::model::{LineSystem, ModulationFormat, PortConfig, SpectrumGrid, TransceiverPort};
use crate::optimizer::{pair_transceiver_snr, LightpathDesign};
use crate::qot::{ber_from_gsnr, combine_snr_db, walk, ChannelPlan, LineConfig, TrafficChannel};
use crate::telemetry::{clipped_normal, seeded_rng};

const VALIDATION_STREAM: u64 = 0x76616c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightpathValidation {
    pub demand_id: String,
    pub slot_index: usize,
    pub format: String,
    pub required_gsnr_db: f64,
    pub model_gsnr_db: f64,
    pub predicted_gsnr_db: f64,
    pub measured_gsnr_db: f64,
    /// Measured minus predicted.
    pub delta_db: f64,
    pub measured_ber: f64,
}

pub fn traffic_channels(designs: &[LightpathDesign]) -> Vec<TrafficChannel> {
    designs
        .iter()
        .map(|d| TrafficChannel {
            slot_index: d.slot_index,
            slot_width: d.slot_width,
            symbol_rate_gbd: d.symbol_rate_gbd,
            format: d.format.clone(),
            launch_power_dbm: d.launch_power_dbm,
        })
        .collect()
}

/// End-of-line GSNR of every design's channel on `line` with all designs
/// lit, combined with the pair noise from `snr_of(port)`.
pub fn lit_gsnr(
    designs: &[LightpathDesign],
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    snr_of: impl Fn(&str) -> Option<f64>,
) -> Result<Vec<f64>, OrchestratorError> {
    let plan = ChannelPlan::with_traffic(grid, config, &traffic_channels(designs))?;
    let w = walk(line, grid, config, &plan)?;
    let spectrum = w.end.spectrum(&plan);
    designs
        .iter()
        .map(|d| {
            let rec = spectrum
                .record_for_slot(d.slot_index)
                .ok_or_else(|| OrchestratorError::Invalid(format!("{}: channel missing", d.demand_id)))?;
            let tx = snr_of(&d.tx_port).ok_or_else(|| OrchestratorError::Invalid(format!("unknown port {}", d.tx_port)))?;
            let rx = snr_of(&d.rx_port).ok_or_else(|| OrchestratorError::Invalid(format!("unknown port {}", d.rx_port)))?;
            Ok(combine_snr_db(&[rec.gsnr_db, pair_transceiver_snr(tx, rx)]))
        })
        .collect()
}

/// "Measures" each provisioned lightpath: ground-truth GSNR with the real
/// transceivers, plus clipped Gaussian measurement noise.
#[allow(clippy::too_many_arguments)]
pub fn validate_designs(
    designs: &[LightpathDesign],
    provisioned: &BTreeMap<String, PortConfig>,
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    ports: &[TransceiverPort],
    formats: &[ModulationFormat],
    noise_sigma_db: f64,
    seed: u64,
) -> Result<Vec<LightpathValidation>, OrchestratorError> {
    for d in designs {
        for p in [&d.tx_port, &d.rx_port] {
            if provisioned.get(p).is_none_or(|c| c.slot_index != d.slot_index || c.format != d.format) {
                return Err(OrchestratorError::Unprovisioned(d.demand_id.clone()));
            }
        }
    }
    let truth = lit_gsnr(designs, line, grid, config, |id| {
        ports.iter().find(|p| p.id == id).map(|p| p.snr_trx_true_db)
    })?;
    let mut rng = seeded_rng(seed, VALIDATION_STREAM);
    designs
        .iter()
        .zip(truth)
        .map(|(d, t)| {
            let noise = if noise_sigma_db > 0.0 { clipped_normal(&mut rng, noise_sigma_db) } else { 0.0 };
            let measured = t + noise;
            let format = formats
                .iter()
                .find(|f| f.id == d.format)
                .ok_or_else(|| OrchestratorError::Invalid(format!("unknown format {}", d.format)))?;
            Ok(LightpathValidation {
                demand_id: d.demand_id.clone(),
                slot_index: d.slot_index,
                format: d.format.clone(),
                required_gsnr_db: d.required_gsnr_db,
                model_gsnr_db: d.model_gsnr_db,
                predicted_gsnr_db: d.predicted_gsnr_db,
                measured_gsnr_db: measured,
                delta_db: measured - d.predicted_gsnr_db,
                measured_ber: ber_from_gsnr(format, measured),
            })
        })
        .collect()
}

