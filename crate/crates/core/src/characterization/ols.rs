use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::solve;
use super::CharacterizationError;
use crate::model::{PublicLineInfo, SpectrumGrid};
use crate::qot::{ChannelPlan, LineConfig};
use crate::telemetry::{AmpPowerReading, OsaSpectrum};
use crate::units::{db_to_lin, dbm_to_w, ghz_to_hz, lin_to_db, w_to_dbm, PLANCK};

pub const NF_BOUNDS_DB: [f64; 2] = [3.0, 12.0];
/// Relative singular-value floor below which the probe set is degenerate.
const RANK_RCOND: f64 = 1e-6;
const PROBE_ISOLATION_DB: f64 = 6.0;
const SHAPE_PASSES: usize = 30;
const SHAPE_TOL_DB: f64 = 1e-7;
/// Scales the first-pass scatter to cover variance added by later passes.
const SHRINK_INFLATION: f64 = 4.0;
const SHAPE_DEGREE: usize = 8;
const PROBE_TILT_DB: f64 = 1.0;

/// One calibration measurement: the settings applied, the comb launched,
/// the far-end spectrum and every amplifier's power monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsProbe {
    pub config: LineConfig,
    pub plan: ChannelPlan,
    pub spectrum: OsaSpectrum,
    pub readings: Vec<AmpPowerReading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpCalibration {
    pub amp_id: String,
    pub noise_figure_db: f64,
    pub ripple_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsEstimate {
    pub amps: Vec<AmpCalibration>,
    /// Summed ripple of all amplifiers, the quantity the end spectrum
    /// actually constrains.
    pub aggregate_ripple_db: Vec<f64>,
    /// Span losses from consecutive power monitors.
    pub span_loss_db: Vec<f64>,
    /// RMS of the ASE-to-signal fit in dB.
    pub residual_db: f64,
    pub probe_count: usize,
}

/// Probe settings: the base config; for each amplifier, its input lowered
/// by the isolation step (previous gain or launch down, its own gain up by
/// the same amount) so its ASE dominates the received floor; then
/// alternating +/-1 dB tilt patterns.
pub fn ols_probe_configs(info: &PublicLineInfo, base: &LineConfig, count: usize) -> Vec<LineConfig> {
    let mut out = vec![base.clone()];
    for (k, amp) in info.amps.iter().enumerate() {
        let mut c = base.clone();
        let up = amp.gain_range_db[1] - c.amps[k].gain_db;
        let down = match k {
            0 => f64::INFINITY,
            _ => c.amps[k - 1].gain_db - info.amps[k - 1].gain_range_db[0],
        };
        let step = PROBE_ISOLATION_DB.min(up).min(down).max(0.0);
        c.amps[k].gain_db += step;
        if k == 0 {
            c.launch_dbm.iter_mut().for_each(|p| *p -= step);
        } else {
            c.amps[k - 1].gain_db -= step;
        }
        out.push(c);
    }
    let mut sign = 1.0;
    while out.len() < count {
        let mut c = base.clone();
        for (k, a) in c.amps.iter_mut().enumerate() {
            a.tilt_db += if k % 2 == 0 { sign } else { -sign } * PROBE_TILT_DB;
        }
        sign = -sign;
        out.push(c);
    }
    out.truncate(count);
    out
}

/// Configured gain of `amp` at `slot`, excluding ripple.
fn set_gain(config: &LineConfig, grid: &SpectrumGrid, amp: usize, slot: usize) -> f64 {
    let a = config.amps[amp];
    a.gain_db + a.tilt_db * grid.normalized_frequency(slot as f64)
}

/// Summed ripple of all amplifiers: per-probe deviation of the received
/// signal spectrum from the configured gain/tilt model, made zero-mean and
/// averaged over probes.
fn aggregate_ripple(grid: &SpectrumGrid, probes: &[OlsProbe]) -> Vec<f64> {
    let n_slots = grid.slot_count;
    let mut aggregate = vec![0.0; n_slots];
    for probe in probes {
        let measured = probe.spectrum.signal_ref_dbm();
        let dev: Vec<f64> = (0..n_slots)
            .map(|s| {
                let ch = &probe.plan.channels[s];
                let launch = ch.launch_power_dbm - lin_to_db(ghz_to_hz(ch.symbol_rate_gbd));
                let gains: f64 = (0..probe.config.amps.len()).map(|i| set_gain(&probe.config, grid, i, s)).sum();
                measured[s] - launch - gains
            })
            .collect();
        let mean = dev.iter().sum::<f64>() / n_slots as f64;
        for (a, d) in aggregate.iter_mut().zip(&dev) {
            *a += (d - mean) / probes.len() as f64;
        }
    }
    aggregate
}

/// ASE-to-signal coefficients per (probe, slot) row and amplifier, each
/// row divided by its measured ratio so the target is all ones.
///
/// The signal entering each amplifier is modeled from the launch and the
/// configured gains; the unknown span losses ahead of amp `i` enter as one
/// level offset per amplifier, shared by all probes and fitted to every
/// input and output monitor reading of that amplifier.
fn design_matrix(grid: &SpectrumGrid, probes: &[OlsProbe], ripple: &[Vec<f64>]) -> DMatrix<f64> {
    let n_slots = grid.slot_count;
    let n_amps = ripple.len();
    // chains[p][i][s]: lossless modeled power of slot s entering amp i.
    let mut chains = Vec::with_capacity(probes.len());
    let mut offsets = vec![0.0; n_amps];
    for probe in probes {
        let mut power: Vec<f64> = probe.plan.channels.iter().map(|c| dbm_to_w(c.launch_power_dbm)).collect();
        let mut chain = Vec::with_capacity(n_amps);
        for i in 0..n_amps {
            let total_in: f64 = power.iter().sum();
            chain.push(power.clone());
            for (s, pw) in power.iter_mut().enumerate() {
                *pw *= db_to_lin(set_gain(&probe.config, grid, i, s) + ripple[i][s]);
            }
            let total_out: f64 = power.iter().sum();
            let r = &probe.readings[i];
            offsets[i] += (r.input_dbm - w_to_dbm(total_in) + r.output_dbm - w_to_dbm(total_out))
                / (2 * probes.len()) as f64;
        }
        chains.push(chain);
    }
    let mut a = DMatrix::zeros(probes.len() * n_slots, n_amps);
    for (p, probe) in probes.iter().enumerate() {
        let signal = probe.spectrum.signal_ref_dbm();
        for i in 0..n_amps {
            let level = db_to_lin(offsets[i]);
            for s in 0..n_slots {
                let rs = ghz_to_hz(probe.plan.channels[s].symbol_rate_gbd);
                let g = db_to_lin(set_gain(&probe.config, grid, i, s) + ripple[i][s]);
                let y = db_to_lin(probe.spectrum.slots[s].floor_dbm - signal[s]);
                let s_in = chains[p][i][s] * level / rs;
                a[(p * n_slots + s, i)] = PLANCK * grid.slot_hz(s) * (1.0 - 1.0 / g) / s_in / y;
            }
        }
    }
    a
}

/// Least-squares projection of a per-slot curve onto Legendre polynomials
/// of degree 1..=SHAPE_DEGREE over the normalized band.
fn smooth(grid: &SpectrumGrid, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let basis = |s: usize, d: usize| {
        let x = 2.0 * grid.normalized_frequency(s as f64);
        let (mut p0, mut p1) = (1.0, x);
        if d == 0 {
            return p0;
        }
        for k in 1..d {
            let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let m = DMatrix::from_fn(n, SHAPE_DEGREE + 1, basis);
    let b = DVector::from_column_slice(values);
    match solve(m.clone(), b, 1e-12) {
        Some(coef) => {
            let fit = m * coef;
            let mean = fit.iter().sum::<f64>() / n as f64;
            fit.iter().map(|v| v - mean).collect()
        }
        None => values.to_vec(),
    }
}

/// Per-amp ripple from the cumulative ripple entering each amplifier;
/// the last amplifier takes whatever the aggregate leaves.
fn ripple_from_cumulative(cumulative: &[Vec<f64>], aggregate: &[f64]) -> Vec<Vec<f64>> {
    let n = cumulative.len();
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { &cumulative[i + 1] } else { aggregate };
            next.iter().zip(&cumulative[i]).map(|(a, b)| a - b).collect()
        })
        .collect()
}

/// Recovers per-amplifier noise figure and ripple from probe telemetry.
///
/// Per slot, the far-end ASE-to-signal ratio equals
/// `sum_i NF_i * h nu (1 - 1/g_i) / S_in_i`, with `S_in_i` the signal PSD
/// entering amp `i`: its input monitor total spread by the modeled
/// spectral shape. Noise figures come from one weighted least-squares fit
/// over all probes and slots. Solving the same equations slot by slot then
/// exposes how far each amplifier's true input shape departs from the
/// model, which updates the cumulative ripple ahead of it. The two steps
/// alternate until the shapes stop moving.
pub fn calibrate_ols(
    info: &PublicLineInfo,
    grid: &SpectrumGrid,
    probes: &[OlsProbe],
) -> Result<OlsEstimate, CharacterizationError> {
    let n_amps = info.amps.len();
    let need = n_amps + 2;
    if probes.len() < need {
        return Err(CharacterizationError::InsufficientProbes { got: probes.len(), need });
    }
    let n_slots = grid.slot_count;
    for (p, probe) in probes.iter().enumerate() {
        if probe.config.amps.len() != n_amps || probe.readings.len() != n_amps {
            return Err(CharacterizationError::Inconsistent(format!(
                "probe {p}: expected {n_amps} amp settings and readings"
            )));
        }
        if probe.spectrum.slots.len() != n_slots {
            return Err(CharacterizationError::Inconsistent(format!("probe {p}: spectrum size")));
        }
        if probe.plan.channels.len() != n_slots || probe.plan.channels.iter().any(|c| c.slot_width != 1) {
            return Err(CharacterizationError::Inconsistent(format!(
                "probe {p}: calibration needs one single-slot channel per slot"
            )));
        }
    }

    let aggregate = aggregate_ripple(grid, probes);
    let prior: Vec<Vec<f64>> = (0..n_amps)
        .map(|i| aggregate.iter().map(|r| r * i as f64 / n_amps as f64).collect())
        .collect();
    let mut cumulative = prior.clone();
    // Per-slot scatter of the first shape update around its smooth fit.
    let mut scatter = vec![0.0; n_amps];
    let rank_error = || {
        CharacterizationError::RankDeficient(format!(
            "{} probes do not separate {} amplifier noise figures",
            probes.len(),
            n_amps
        ))
    };
    let ones = DVector::from_element(probes.len() * n_slots, 1.0);
    let mut ripple;
    let mut a;
    let mut nf;
    let mut pass = 0;
    loop {
        ripple = ripple_from_cumulative(&cumulative, &aggregate);
        a = design_matrix(grid, probes, &ripple);
        nf = solve(a.clone(), ones.clone(), RANK_RCOND).ok_or_else(rank_error)?;
        pass += 1;
        if pass > SHAPE_PASSES {
            break;
        }
        let mut largest: f64 = 0.0;
        for i in 1..n_amps {
            let corr: Vec<f64> = (0..n_slots)
                .map(|s| {
                    let rows = DMatrix::from_fn(probes.len(), n_amps, |p, j| a[(p * n_slots + s, j)]);
                    solve(rows, DVector::from_element(probes.len(), 1.0), 1e-12)
                        .map(|w| w[i] / nf[i])
                        .filter(|k| *k > 0.0)
                        .map_or(0.0, |k| (-lin_to_db(k)).clamp(-1.0, 1.0))
                })
                .collect();
            let raw = corr;
            let corr = smooth(grid, &raw);
            if pass == 1 {
                let mean = raw.iter().sum::<f64>() / n_slots as f64;
                let dof = n_slots.saturating_sub(SHAPE_DEGREE + 1).max(1) as f64;
                scatter[i] = raw.iter().zip(&corr).map(|(r, c)| (r - mean - c).powi(2)).sum::<f64>() / dof;
            }
            for (c, d) in cumulative[i].iter_mut().zip(&corr) {
                *c += d;
                largest = largest.max(d.abs());
            }
        }
        if largest < SHAPE_TOL_DB {
            break;
        }
    }
    // Shrink each shape toward the equal split by its estimated signal share.
    let mut shrunk = false;
    for i in 1..n_amps {
        let d: Vec<f64> = cumulative[i].iter().zip(&prior[i]).map(|(c, p)| c - p).collect();
        let power = d.iter().map(|x| x * x).sum::<f64>() / n_slots as f64;
        if power <= 0.0 {
            continue;
        }
        let noise = SHRINK_INFLATION * scatter[i] * (SHAPE_DEGREE + 1) as f64 / n_slots as f64;
        let k = ((power - noise) / power).clamp(0.0, 1.0);
        if k < 1.0 {
            shrunk = true;
            for ((c, p), x) in cumulative[i].iter_mut().zip(&prior[i]).zip(&d) {
                *c = p + k * x;
            }
        }
    }
    if shrunk {
        ripple = ripple_from_cumulative(&cumulative, &aggregate);
        a = design_matrix(grid, probes, &ripple);
        nf = solve(a.clone(), ones.clone(), RANK_RCOND).ok_or_else(rank_error)?;
    }
    let fitted = &a * &nf;
    let residual = (fitted.iter().map(|f| lin_to_db(f.max(1e-30)).powi(2)).sum::<f64>() / fitted.len() as f64).sqrt();
    let mut span_loss = vec![0.0; n_amps.saturating_sub(1)];
    for probe in probes {
        for (i, l) in span_loss.iter_mut().enumerate() {
            *l += (probe.readings[i].output_dbm - probe.readings[i + 1].input_dbm) / probes.len() as f64;
        }
    }

    Ok(OlsEstimate {
        amps: info
            .amps
            .iter()
            .enumerate()
            .map(|(i, amp)| AmpCalibration {
                amp_id: amp.id.clone(),
                noise_figure_db: lin_to_db(nf[i].max(1e-30)).clamp(NF_BOUNDS_DB[0], NF_BOUNDS_DB[1]),
                ripple_db: ripple[i].clone(),
            })
            .collect(),
        aggregate_ripple_db: aggregate,
        span_loss_db: span_loss,
        residual_db: residual,
        probe_count: probes.len(),
    })
}
