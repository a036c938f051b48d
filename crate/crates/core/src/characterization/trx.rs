use serde::{Deserialize, Serialize};

use super::CharacterizationError;
use crate::qot::{ber_from_gsnr, combine_with_transceiver};
use crate::telemetry::{trx_snr_at, VoaSweepRecord};

pub const MIN_SWEEP_POINTS: usize = 5;
const SNR_GRID: (f64, f64, f64) = (0.0, 40.0, 0.25);
const KNEE_STEP: f64 = 0.5;
const REFINE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrxEstimate {
    pub port_id: String,
    pub snr_trx_db: f64,
    pub knee_dbm: f64,
    /// RMS error in log10(BER).
    pub residual: f64,
    pub points_used: usize,
}

/// Fits (snr_trx, knee) of the receiver-noise model to a VOA sweep by
/// least squares in log10(BER): a coarse grid, then a compass search with
/// halving steps.
pub fn fit_transceiver_noise(sweep: &VoaSweepRecord) -> Result<TrxEstimate, CharacterizationError> {
    if sweep.points.windows(2).any(|w| !(w[1].attenuation_db > w[0].attenuation_db)) {
        return Err(CharacterizationError::NonMonotoneSweep);
    }
    let usable: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .filter(|p| !p.saturated && p.ber > 0.0)
        .map(|p| (sweep.rx_power_dbm - p.attenuation_db, p.ber.log10()))
        .collect();
    if usable.len() < MIN_SWEEP_POINTS {
        return Err(CharacterizationError::InsufficientPoints { usable: usable.len(), need: MIN_SWEEP_POINTS });
    }
    let cost = |snr: f64, knee: f64| -> f64 {
        usable
            .iter()
            .map(|(rx, lb)| {
                let eff = combine_with_transceiver(sweep.input_snr_db, trx_snr_at(snr, knee, *rx));
                let model = ber_from_gsnr(&sweep.format, eff).max(1e-300).log10();
                (lb - model).powi(2)
            })
            .sum()
    };

    let rx_min = usable.iter().map(|u| u.0).fold(f64::INFINITY, f64::min);
    let rx_max = usable.iter().map(|u| u.0).fold(f64::NEG_INFINITY, f64::max);
    let knee_lo = (rx_min - 10.0).floor();
    let knee_hi = (rx_max + 5.0).ceil();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let n_snr = ((SNR_GRID.1 - SNR_GRID.0) / SNR_GRID.2).round() as usize;
    let n_knee = ((knee_hi - knee_lo) / KNEE_STEP).round() as usize;
    for i in 0..=n_snr {
        let snr = SNR_GRID.0 + i as f64 * SNR_GRID.2;
        for j in 0..=n_knee {
            let knee = knee_lo + j as f64 * KNEE_STEP;
            let c = cost(snr, knee);
            if c < best.0 {
                best = (c, snr, knee);
            }
        }
    }

    let (mut c, mut snr, mut knee) = best;
    let mut step = (SNR_GRID.2, KNEE_STEP);
    while step.0 > REFINE_TOL || step.1 > REFINE_TOL {
        let mut moved = false;
        for (ds, dk) in [(step.0, 0.0), (-step.0, 0.0), (0.0, step.1), (0.0, -step.1)] {
            let trial = cost(snr + ds, knee + dk);
            if trial < c {
                c = trial;
                snr += ds;
                knee += dk;
                moved = true;
                break;
            }
        }
        if !moved {
            step = (step.0 * 0.5, step.1 * 0.5);
        }
    }

    Ok(TrxEstimate {
        port_id: sweep.port_id.clone(),
        snr_trx_db: snr,
        knee_dbm: knee,
        residual: (c / usable.len() as f64).sqrt(),
        points_used: usable.len(),
    })
}
