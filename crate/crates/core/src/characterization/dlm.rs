use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::{line_fit, median, solve};
use super::CharacterizationError;
use crate::telemetry::PowerProfile;

/// Samples on each side of the windowed mean-difference detector.
pub const DETECTION_WINDOW: usize = 10;
/// Step candidates closer than this are treated as one event.
pub const MERGE_DISTANCE_KM: f64 = 0.5;
pub const MIN_PROFILE_SAMPLES: usize = 100;
const MAX_PASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEvent {
    /// Distance from the start of the profile.
    pub position_km: f64,
    pub loss_db: f64,
}

/// Line structure recovered from a DLM profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    pub slot_index: usize,
    pub total_length_km: f64,
    /// Amplifier positions between spans.
    pub span_boundaries_km: Vec<f64>,
    pub span_attenuation_db_per_km: Vec<f64>,
    /// Net power step at each boundary.
    pub amp_steps_db: Vec<f64>,
    pub lumped_losses: Vec<LossEvent>,
    /// Fitted power at the first fiber input.
    pub launch_power_dbm: f64,
    pub residual_db: f64,
}

impl LinkEstimate {
    pub fn span_starts_km(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.span_boundaries_km.iter().copied()).collect()
    }

    pub fn span_lengths_km(&self) -> Vec<f64> {
        let starts = self.span_starts_km();
        let ends = self.span_boundaries_km.iter().copied().chain(std::iter::once(self.total_length_km));
        starts.iter().zip(ends).map(|(s, e)| e - s).collect()
    }

    /// Index of the span containing `position_km`.
    pub fn span_of(&self, position_km: f64) -> usize {
        self.span_boundaries_km.iter().filter(|b| position_km >= **b).count()
    }
}

/// Mean of the `w` samples from `k` minus the mean of the `w` before it,
/// defined for `w <= k <= n - w`.
fn window_diff(x: &[f64], w: usize) -> Vec<Option<f64>> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|k| {
            (k >= w && k + w <= n).then(|| ((prefix[k + w] - prefix[k]) - (prefix[k] - prefix[k - w])) / w as f64)
        })
        .collect()
}

/// Peak index of every run of same-sign values beyond `threshold`.
fn candidates(d: &[Option<f64>], offset: f64, threshold: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run: Option<(usize, f64, f64)> = None;
    for (k, v) in d.iter().enumerate() {
        let v = v.map(|v| v - offset).filter(|v| v.abs() > threshold);
        match (v, run) {
            (Some(v), Some((pk, pv, sign))) if v.signum() == sign => {
                if v.abs() > pv.abs() {
                    run = Some((k, v, sign));
                } else {
                    run = Some((pk, pv, sign));
                }
            }
            (Some(v), prev) => {
                if let Some((pk, _, _)) = prev {
                    out.push(pk);
                }
                run = Some((k, v, v.signum()));
            }
            (None, prev) => {
                if let Some((pk, _, _)) = prev {
                    out.push(pk);
                }
                run = None;
            }
        }
    }
    if let Some((pk, _, _)) = run {
        out.push(pk);
    }
    out
}


/// Independent line fit on `[a, b)`.
fn segment_fit(z: &[f64], x: &[f64], a: usize, b: usize) -> (f64, f64, f64) {
    let (c, s) = line_fit(&z[a..b], &x[a..b]);
    let sse = (a..b).map(|i| (x[i] - c - s * z[i]).powi(2)).sum();
    (c, s, sse)
}

fn piecewise_fit(z: &[f64], x: &[f64], steps: &[usize]) -> Vec<f64> {
    let mut values = vec![0.0; x.len()];
    let bounds: Vec<usize> = std::iter::once(0).chain(steps.iter().copied()).chain([x.len()]).collect();
    for w in bounds.windows(2) {
        let (c, s, _) = segment_fit(z, x, w[0], w[1]);
        for i in w[0]..w[1] {
            values[i] = c + s * z[i];
        }
    }
    values
}

/// Jump of the piecewise fit at each step.
fn jumps(z: &[f64], x: &[f64], steps: &[usize]) -> Vec<f64> {
    let bounds: Vec<usize> = std::iter::once(0).chain(steps.iter().copied()).chain([x.len()]).collect();
    let lines: Vec<(f64, f64)> = bounds
        .windows(2)
        .map(|w| {
            let (c, s, _) = segment_fit(z, x, w[0], w[1]);
            (c, s)
        })
        .collect();
    steps
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let at = 0.5 * (z[k - 1] + z[k]);
            (lines[j + 1].0 + lines[j + 1].1 * at) - (lines[j].0 + lines[j].1 * at)
        })
        .collect()
}

/// Moves each step within its window to the position minimizing the SSE
/// of the two adjacent segments.
fn refine(z: &[f64], x: &[f64], steps: &mut [usize], w: usize) {
    let n = x.len();
    for j in 0..steps.len() {
        let prev = if j == 0 { 0 } else { steps[j - 1] };
        let next = if j + 1 == steps.len() { n } else { steps[j + 1] };
        let lo = steps[j].saturating_sub(w).max(prev + 1);
        let hi = (steps[j] + w).min(next - 1);
        let mut best = (f64::INFINITY, steps[j]);
        for k in lo..=hi {
            let sse = segment_fit(z, x, prev, k).2 + segment_fit(z, x, k, next).2;
            if sse < best.0 - 1e-12 {
                best = (sse, k);
            }
        }
        steps[j] = best.1;
    }
}

/// Drops the smaller-jump member of any pair of steps closer than the
/// merge distance, so the survivor carries the net change.
fn merge(z: &[f64], x: &[f64], steps: &mut Vec<usize>) {
    loop {
        let js = jumps(z, x, steps);
        let pair = steps.windows(2).position(|p| z[p[1]] - z[p[0]] < MERGE_DISTANCE_KM);
        match pair {
            Some(j) => {
                let drop = if js[j].abs() < js[j + 1].abs() { j } else { j + 1 };
                steps.remove(drop);
            }
            None => return,
        }
    }
}

struct SpanFit {
    intercept: f64,
    slope: f64,
    losses: Vec<(usize, f64)>,
}

/// Joint fit of one span: intercept, slope, and a downward jump at each
/// loss index.
fn fit_span(z: &[f64], x: &[f64], a: usize, b: usize, losses: &[usize]) -> SpanFit {
    let rows = b - a;
    let cols = 2 + losses.len();
    let start = z[a];
    let mut m = DMatrix::zeros(rows, cols);
    for (r, i) in (a..b).enumerate() {
        m[(r, 0)] = 1.0;
        m[(r, 1)] = z[i] - start;
        for (c, &k) in losses.iter().enumerate() {
            if i >= k {
                m[(r, 2 + c)] = -1.0;
            }
        }
    }
    let rhs = DVector::from_iterator(rows, x[a..b].iter().copied());
    let sol = solve(m, rhs, 1e-12).unwrap_or_else(|| DVector::zeros(cols));
    SpanFit {
        intercept: sol[0],
        slope: sol[1],
        losses: losses.iter().enumerate().map(|(c, &k)| (k, sol[2 + c])).collect(),
    }
}

/// Segments a DLM power profile into spans, amplifier steps and lumped
/// losses.
///
/// Step candidates come from a detrended windowed mean difference, then
/// from the residual of a piecewise-linear fit until no new step appears.
/// Each step is refined to the least-squares position, steps within the
/// merge distance are merged, and each span gets a joint fit of
/// attenuation and loss magnitudes. Losses below `threshold_db` are
/// dropped. Event positions are the first sample past the step.
pub fn analyze_dlm_profile(profile: &PowerProfile, threshold_db: f64) -> Result<LinkEstimate, CharacterizationError> {
    let n = profile.samples.len();
    if n < MIN_PROFILE_SAMPLES {
        return Err(CharacterizationError::ProfileTooShort { got: n, need: MIN_PROFILE_SAMPLES });
    }
    if threshold_db < 3.0 * profile.noise_sigma_db - 1e-12 {
        return Err(CharacterizationError::ThresholdBelowNoise {
            threshold: threshold_db,
            noise_sigma: profile.noise_sigma_db,
        });
    }
    let z: Vec<f64> = profile.samples.iter().map(|s| s.position_km).collect();
    let x: Vec<f64> = profile.samples.iter().map(|s| s.power_dbm).collect();
    let w = DETECTION_WINDOW;
    let spacing = profile.spacing_km();
    let merge_samples = (MERGE_DISTANCE_KM / spacing).round() as usize;

    let mut diffs: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let trend = median(&mut diffs) * w as f64;
    let mut steps = candidates(&window_diff(&x, w), trend, threshold_db);

    for _ in 0..MAX_PASSES {
        let fit = piecewise_fit(&z, &x, &steps);
        let residual: Vec<f64> = x.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let fresh: Vec<usize> = candidates(&window_diff(&residual, w), 0.0, threshold_db)
            .into_iter()
            .filter(|k| steps.iter().all(|s| s.abs_diff(*k) > merge_samples))
            .collect();
        if fresh.is_empty() {
            break;
        }
        steps.extend(fresh);
        steps.sort_unstable();
        steps.dedup();
    }
    steps.retain(|&k| k > 0 && k < n);
    refine(&z, &x, &mut steps, w);
    merge(&z, &x, &mut steps);
    refine(&z, &x, &mut steps, w);

    let js = jumps(&z, &x, &steps);
    let boundaries: Vec<usize> = steps.iter().zip(&js).filter(|(_, j)| **j > 0.0).map(|(k, _)| *k).collect();
    let mut loss_idx: Vec<usize> = steps.iter().zip(&js).filter(|(_, j)| **j <= 0.0).map(|(k, _)| *k).collect();

    let span_bounds: Vec<usize> = std::iter::once(0).chain(boundaries.iter().copied()).chain([n]).collect();
    let fits = loop {
        let fits: Vec<SpanFit> = span_bounds
            .windows(2)
            .map(|b| {
                let inside: Vec<usize> = loss_idx.iter().copied().filter(|k| *k > b[0] && *k < b[1]).collect();
                fit_span(&z, &x, b[0], b[1], &inside)
            })
            .collect();
        let weak: Vec<usize> = fits
            .iter()
            .flat_map(|f| f.losses.iter())
            .filter(|(_, j)| *j < threshold_db)
            .map(|(k, _)| *k)
            .collect();
        if weak.is_empty() {
            break fits;
        }
        loss_idx.retain(|k| !weak.contains(k));
    };

    let mut sse = 0.0;
    let mut amp_steps = Vec::new();
    for (s, f) in fits.iter().enumerate() {
        let (a, b) = (span_bounds[s], span_bounds[s + 1]);
        for i in a..b {
            let lumped: f64 = f.losses.iter().filter(|(k, _)| i >= *k).map(|(_, j)| j).sum();
            let model = f.intercept + f.slope * (z[i] - z[a]) - lumped;
            sse += (x[i] - model).powi(2);
        }
        if s + 1 < fits.len() {
            let total: f64 = f.losses.iter().map(|(_, j)| j).sum();
            let end = f.intercept + f.slope * (z[b] - z[a]) - total;
            amp_steps.push(fits[s + 1].intercept - end);
        }
    }

    Ok(LinkEstimate {
        slot_index: profile.slot_index,
        total_length_km: profile.total_length_km(),
        span_boundaries_km: boundaries.iter().map(|k| z[*k]).collect(),
        span_attenuation_db_per_km: fits.iter().map(|f| -f.slope).collect(),
        amp_steps_db: amp_steps,
        lumped_losses: fits
            .iter()
            .flat_map(|f| f.losses.iter().map(|(k, j)| LossEvent { position_km: z[*k], loss_db: *j }))
            .collect(),
        launch_power_dbm: fits[0].intercept,
        residual_db: (sse / n as f64).sqrt(),
    })
}
