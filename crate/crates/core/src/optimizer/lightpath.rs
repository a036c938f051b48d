use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::model::{Demand, ModulationFormat, SpectrumGrid};
use crate::qot::{combine_snr_db, psd_matched_launch, required_gsnr, GsnrSpectrum, LineConfig};
use crate::units::{db_to_lin, lin_to_db};

/// A transponder port available for design, with its estimated
/// back-to-back SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortCandidate {
    pub port_id: String,
    pub node: String,
    pub supported_formats: Vec<String>,
    pub snr_trx_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightpathDesign {
    pub demand_id: String,
    pub tx_port: String,
    pub rx_port: String,
    pub slot_index: usize,
    pub slot_width: usize,
    pub format: String,
    pub symbol_rate_gbd: f64,
    pub launch_power_dbm: f64,
    /// Line estimate combined with transceiver noise.
    pub model_gsnr_db: f64,
    /// Committed QoT: the model value less the design margin.
    pub predicted_gsnr_db: f64,
    pub required_gsnr_db: f64,
    /// Model GSNR above the requirement.
    pub margin_db: f64,
}

pub struct DesignRequest<'a> {
    pub demands: &'a [Demand],
    pub formats: &'a [ModulationFormat],
    pub ports: &'a [PortCandidate],
    pub grid: &'a SpectrumGrid,
    /// End-of-line GSNR per slot on the fully loaded line.
    pub spectrum: &'a GsnrSpectrum,
    pub config: &'a LineConfig,
    /// Slots that may carry traffic.
    pub available: &'a [bool],
    pub margin_db: f64,
    pub fec_limit: f64,
}

/// GSNR over a block of slots: the inverse of the mean inverse SNR, which is
/// what a PSD-matched channel spanning them sees.
pub fn block_gsnr(spectrum: &GsnrSpectrum, first: usize, width: usize) -> Option<f64> {
    let mut inv = 0.0;
    for s in first..first + width {
        inv += db_to_lin(-spectrum.record_for_slot(s)?.gsnr_db);
    }
    Some(-lin_to_db(inv / width as f64))
}

/// Noise of a transmitter/receiver pair from per-port back-to-back
/// estimates, each port taken to contribute half of its own loopback noise.
pub fn pair_transceiver_snr(tx_db: f64, rx_db: f64) -> f64 {
    let half = lin_to_db(2.0);
    combine_snr_db(&[tx_db + half, rx_db + half])
}

/// Assigns each demand a port pair and the lowest free slot block whose
/// model GSNR clears the requirement by the margin. Demands go in order of
/// descending net rate, then id; ports prefer the fewest supported formats,
/// then id.
pub fn design_lightpaths(req: &DesignRequest) -> Result<Vec<LightpathDesign>, OptimizeError> {
    if req.available.len() != req.grid.slot_count {
        return Err(OptimizeError::Invalid("availability mask does not match the grid".into()));
    }
    let format_of = |id: &str| {
        req.formats
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| OptimizeError::Invalid(format!("unknown format '{id}'")))
    };
    let mut order: Vec<(&Demand, &ModulationFormat)> =
        req.demands.iter().map(|d| format_of(&d.format).map(|f| (d, f))).collect::<Result<_, _>>()?;
    order.sort_by(|a, b| b.1.net_rate_gbps.total_cmp(&a.1.net_rate_gbps).then_with(|| a.0.id.cmp(&b.0.id)));

    let mut ports: Vec<&PortCandidate> = req.ports.iter().collect();
    ports.sort_by(|a, b| a.supported_formats.len().cmp(&b.supported_formats.len()).then_with(|| a.port_id.cmp(&b.port_id)));
    let mut used_ports = BTreeSet::new();
    let mut free = req.available.to_vec();
    let mut designs = Vec::new();

    for (demand, format) in order {
        let mut pick = |node: &str| -> Result<&PortCandidate, OptimizeError> {
            let p = ports
                .iter()
                .find(|p| p.node == node && !used_ports.contains(&p.port_id) && p.supported_formats.contains(&format.id))
                .ok_or_else(|| OptimizeError::NoPort {
                    demand: demand.id.clone(),
                    node: node.to_string(),
                    format: format.id.clone(),
                })?;
            used_ports.insert(p.port_id.clone());
            Ok(*p)
        };
        let tx = pick(&demand.src_node)?;
        let rx = pick(&demand.dst_node)?;
        let trx = pair_transceiver_snr(tx.snr_trx_db, rx.snr_trx_db);
        let required = required_gsnr(format, req.fec_limit)?;
        let width = req.grid.slots_for(format.symbol_rate_gbd);
        let mut best_shortfall = f64::NEG_INFINITY;
        let mut chosen = None;
        for first in 0..=req.grid.slot_count.saturating_sub(width) {
            if !free[first..first + width].iter().all(|f| *f) {
                continue;
            }
            let Some(line) = block_gsnr(req.spectrum, first, width) else { continue };
            let model = combine_snr_db(&[line, trx]);
            let slack = model - required - req.margin_db;
            if slack >= 0.0 {
                chosen = Some((first, model));
                break;
            }
            best_shortfall = best_shortfall.max(slack);
        }
        let Some((first, model)) = chosen else {
            return Err(OptimizeError::NoFeasibleSlot {
                demand: demand.id.clone(),
                shortfall_db: if best_shortfall.is_finite() { -best_shortfall } else { f64::INFINITY },
            });
        };
        free[first..first + width].iter_mut().for_each(|f| *f = false);
        designs.push(LightpathDesign {
            demand_id: demand.id.clone(),
            tx_port: tx.port_id.clone(),
            rx_port: rx.port_id.clone(),
            slot_index: first,
            slot_width: width,
            format: format.id.clone(),
            symbol_rate_gbd: format.symbol_rate_gbd,
            launch_power_dbm: psd_matched_launch(req.config, first, width, format.symbol_rate_gbd),
            model_gsnr_db: model,
            predicted_gsnr_db: model - req.margin_db,
            required_gsnr_db: required,
            margin_db: model - required,
        });
    }
    Ok(designs)
}
