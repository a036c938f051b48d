use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::model::{LineSystem, SpectrumGrid};
use crate::qot::{walk, AmpSetting, ChannelPlan, GsnrSpectrum, LineConfig, QotError};
use crate::units::w_to_dbm;

/// Objective assigned to configs that lose the signal somewhere.
const LOS_OBJECTIVE: f64 = -1000.0;
/// Objective penalty per dB of amplifier output above its limit.
const OUTPUT_PENALTY: f64 = 10.0;
const SCAN_HALF_POINTS: i32 = 4;
const GOLDEN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Weight of the GSNR spread in `J = min - w * (max - min)`.
    pub flatness_weight: f64,
    /// Stop once a full sweep improves `J` by less than this (dB).
    pub tolerance_db: f64,
    pub max_sweeps: usize,
    /// Amplifier outputs are kept this far below their limit.
    pub output_headroom_db: f64,
    pub launch_offset_range_dbm: [f64; 2],
    pub tilt_range_db: [f64; 2],
    /// Initial scan step for gains and the launch offset; tilts use half.
    pub scan_step_db: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            flatness_weight: 0.5,
            tolerance_db: 0.01,
            max_sweeps: 200,
            output_headroom_db: 0.5,
            launch_offset_range_dbm: [-30.0, 0.0],
            tilt_range_db: [-3.0, 3.0],
            scan_step_db: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub config: LineConfig,
    pub end_spectrum: GsnrSpectrum,
    pub objective_db: f64,
    pub iterations: usize,
    pub flatness_db: f64,
    /// Objective after each sweep, starting with the initial config.
    pub history: Vec<f64>,
}

/// One objective evaluation of a config on the fully loaded line.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// `None` when the config loses the signal.
    pub spectrum: Option<GsnrSpectrum>,
    /// Worst amplifier output excess over `limit - headroom` (dB, >= 0).
    pub output_excess_db: f64,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.spectrum.is_some() && self.output_excess_db <= 1e-9
    }
}

/// Variable vector: launch offset, launch tilt, then gain and tilt per amp.
fn to_config(grid: &SpectrumGrid, x: &[f64]) -> LineConfig {
    let mut config = LineConfig {
        amps: x[2..].chunks(2).map(|c| AmpSetting { gain_db: c[0], tilt_db: c[1] }).collect(),
        launch_dbm: Vec::new(),
    };
    config.set_launch_profile(grid, x[0], x[1]);
    config
}

fn to_vector(grid: &SpectrumGrid, config: &LineConfig) -> Vec<f64> {
    let (offset, tilt) = config.launch_profile(grid);
    let mut x = vec![offset, tilt];
    for a in &config.amps {
        x.extend([a.gain_db, a.tilt_db]);
    }
    x
}

/// Scores `config` with every slot carrying a loading channel.
pub fn evaluate(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    flatness_weight: f64,
    headroom_db: f64,
) -> Result<Evaluation, QotError> {
    let plan = ChannelPlan::loaded(grid, config);
    match walk(line, grid, config, &plan) {
        Ok(w) => {
            let excess = w
                .amp_io
                .iter()
                .zip(line.amps())
                .map(|(io, amp)| w_to_dbm(io.output_w) - (amp.max_total_output_dbm - headroom_db))
                .fold(0.0, f64::max);
            let spectrum = w.end.spectrum(&plan);
            let (lo, hi) = (spectrum.min_gsnr(), spectrum.max_gsnr());
            Ok(Evaluation {
                objective: lo - flatness_weight * (hi - lo) - OUTPUT_PENALTY * excess,
                spectrum: Some(spectrum),
                output_excess_db: excess,
            })
        }
        Err(QotError::LossOfSignal { power_dbm, .. }) => Ok(Evaluation {
            objective: LOS_OBJECTIVE + power_dbm.max(-300.0),
            spectrum: None,
            output_excess_db: 0.0,
        }),
        Err(e) => Err(e),
    }
}

/// Box bounds of the variable vector for `line`.
pub fn default_bounds(line: &LineSystem, options: &OptimizeOptions) -> Vec<[f64; 2]> {
    let mut b = vec![options.launch_offset_range_dbm, options.tilt_range_db];
    for amp in line.amps() {
        b.push(amp.gain_range_db);
        b.push(options.tilt_range_db);
    }
    b
}

/// Maximizes the flatness-weighted minimum end-of-line GSNR of `line`
/// (normally the twin assembled from estimates) starting at `initial`.
pub fn optimize_line(
    line: &LineSystem,
    grid: &SpectrumGrid,
    initial: &LineConfig,
    options: &OptimizeOptions,
) -> Result<OptimizationResult, OptimizeError> {
    optimize_with_bounds(line, grid, initial, options, &default_bounds(line, options))
}

/// Coordinate descent: each variable in turn gets a 9-point scan around
/// its value, then a golden-section search between the best scan point's
/// neighbours. A move is kept only if it improves `J`, so the objective
/// never decreases. Ties keep the lower value, which favours lower gain.
pub fn optimize_with_bounds(
    line: &LineSystem,
    grid: &SpectrumGrid,
    initial: &LineConfig,
    options: &OptimizeOptions,
    bounds: &[[f64; 2]],
) -> Result<OptimizationResult, OptimizeError> {
    if initial.amps.len() != line.amp_count() || initial.launch_dbm.len() != grid.slot_count {
        return Err(OptimizeError::Invalid("initial config does not match the line".into()));
    }
    if bounds.len() != 2 + 2 * line.amp_count() {
        return Err(OptimizeError::Invalid(format!("{} bounds for {} variables", bounds.len(), 2 + 2 * line.amp_count())));
    }
    if let Some(b) = bounds.iter().find(|b| !(b[0] <= b[1])) {
        return Err(OptimizeError::Infeasible(format!("empty range [{}, {}]", b[0], b[1])));
    }
    let score = |x: &[f64]| -> Result<f64, QotError> {
        evaluate(line, grid, &to_config(grid, x), options.flatness_weight, options.output_headroom_db)
            .map(|e| e.objective)
    };

    let mut x: Vec<f64> = to_vector(grid, initial)
        .iter()
        .zip(bounds)
        .map(|(v, b)| v.clamp(b[0], b[1]))
        .collect();
    let mut j = score(&x)?;
    let mut history = vec![j];
    let mut sweeps = 0;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let start = j;
        for i in 0..x.len() {
            let [lo, hi] = bounds[i];
            if hi - lo < 1e-12 {
                continue;
            }
            let step = if i % 2 == 0 { options.scan_step_db } else { options.scan_step_db / 2.0 };
            let mut probe = x.clone();
            let mut at = |v: f64| -> Result<f64, QotError> {
                probe[i] = v;
                score(&probe)
            };
            let points: Vec<f64> = (-SCAN_HALF_POINTS..=SCAN_HALF_POINTS)
                .map(|k| (x[i] + step * k as f64).clamp(lo, hi))
                .collect();
            let mut best = (x[i], j);
            let mut best_k = None;
            for (k, v) in points.iter().enumerate() {
                let f = at(*v)?;
                if f > best.1 + 1e-12 {
                    best = (*v, f);
                    best_k = Some(k);
                }
            }
            let k = best_k.unwrap_or(SCAN_HALF_POINTS as usize);
            let a = points[k.saturating_sub(1)];
            let b = points[(k + 1).min(points.len() - 1)];
            let (gv, gf) = golden_max(a, b, &mut at)?;
            if gf > best.1 + 1e-12 {
                best = (gv, gf);
            }
            if best.1 > j + 1e-12 {
                x[i] = best.0;
                j = best.1;
            }
        }
        history.push(j);
        if j - start < options.tolerance_db {
            break;
        }
    }

    let config = to_config(grid, &x);
    let eval = evaluate(line, grid, &config, options.flatness_weight, options.output_headroom_db)?;
    // Headroom is a soft target; only the hard limit makes a result infeasible.
    let over = eval.output_excess_db - options.output_headroom_db;
    let spectrum = match (&eval.spectrum, over) {
        (Some(s), e) if e <= 1e-9 => s.clone(),
        (None, _) => {
            return Err(OptimizeError::Infeasible(format!(
                "signal is lost within the gain ranges of line {}",
                line.id
            )))
        }
        (Some(_), e) => {
            return Err(OptimizeError::Infeasible(format!(
                "amplifier output exceeds its limit by {e:.2} dB at best"
            )))
        }
    };
    Ok(OptimizationResult {
        flatness_db: spectrum.flatness(),
        objective_db: j,
        iterations: sweeps,
        history,
        end_spectrum: spectrum,
        config,
    })
}

fn golden_max(
    mut a: f64,
    mut b: f64,
    f: &mut impl FnMut(f64) -> Result<f64, QotError>,
) -> Result<(f64, f64), QotError> {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}
