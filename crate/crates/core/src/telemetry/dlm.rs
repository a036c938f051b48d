use serde::{Deserialize, Serialize};

use super::{clipped_normal, seeded_rng, TelemetryError};
use crate::model::{LineElement, LineSystem, SpectrumGrid};
use crate::qot::{amp_channel_gain_db, ChannelPlan, LineConfig};

const DLM_STREAM: u64 = 0x646c6d;
/// Positions closer than this to a step count as past it.
const STEP_TOLERANCE_KM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub position_km: f64,
    pub power_dbm: f64,
}

/// Channel power versus distance along the fibers of a line, starting at
/// the booster output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub slot_index: usize,
    pub noise_sigma_db: f64,
    pub seed: u64,
    pub samples: Vec<ProfileSample>,
}

impl PowerProfile {
    pub fn total_length_km(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.position_km)
    }

    pub fn spacing_km(&self) -> f64 {
        match self.samples.len() {
            0 | 1 => 0.0,
            n => self.total_length_km() / (n - 1) as f64,
        }
    }

    /// Linear interpolation at `position_km`, clamped to the ends.
    pub fn interpolate(&self, position_km: f64) -> f64 {
        let s = &self.samples;
        if position_km <= s[0].position_km {
            return s[0].power_dbm;
        }
        let i = s.partition_point(|p| p.position_km < position_km);
        if i >= s.len() {
            return s[s.len() - 1].power_dbm;
        }
        let (a, b) = (s[i - 1], s[i]);
        let t = (position_km - a.position_km) / (b.position_km - a.position_km);
        a.power_dbm + t * (b.power_dbm - a.power_dbm)
    }
}

struct Segment {
    start_km: f64,
    length_km: f64,
    input_dbm: f64,
    attenuation: f64,
    /// (position within span, loss), sorted by position.
    losses: Vec<(f64, f64)>,
}

impl Segment {
    fn power_at(&self, local_km: f64) -> f64 {
        let lumped: f64 = self
            .losses
            .iter()
            .filter(|(p, _)| local_km >= p - STEP_TOLERANCE_KM)
            .map(|(_, l)| l)
            .sum();
        self.input_dbm - self.attenuation * local_km - lumped
    }
}

fn segments(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
    slot: usize,
) -> Result<Vec<Segment>, TelemetryError> {
    let channel = plan.channel_at(slot).ok_or(TelemetryError::ChannelAbsent(slot))?;
    let mut power = channel.launch_power_dbm;
    let mut settings = config.amps.iter();
    let mut start = 0.0;
    let mut out = Vec::new();
    for element in &line.elements {
        match element {
            LineElement::Amp(amp) => {
                let setting = settings.next().ok_or_else(|| {
                    crate::qot::QotError::InvalidConfig("fewer amp settings than amplifiers".into())
                })?;
                power += amp_channel_gain_db(amp, setting, grid, channel);
            }
            LineElement::Span(span) => {
                let mut losses: Vec<(f64, f64)> =
                    span.lumped_losses.iter().map(|l| (l.position_km, l.loss_db)).collect();
                losses.sort_by(|a, b| a.0.total_cmp(&b.0));
                let seg = Segment {
                    start_km: start,
                    length_km: span.length_km,
                    input_dbm: power,
                    attenuation: span.attenuation_db_per_km,
                    losses,
                };
                power = seg.power_at(span.length_km);
                start += span.length_km;
                out.push(seg);
            }
        }
    }
    Ok(out)
}

fn noiseless_power(segs: &[Segment], position_km: f64) -> f64 {
    let last = segs.len() - 1;
    let k = segs
        .iter()
        .position(|s| position_km < s.start_km + s.length_km - STEP_TOLERANCE_KM)
        .unwrap_or(last);
    let seg = &segs[k];
    seg.power_at((position_km - seg.start_km).min(seg.length_km))
}

/// Samples the power of the channel occupying `slot` every `spacing_km`
/// (adjusted so samples land on both ends) with clipped Gaussian noise.
/// Steps are right-continuous: a sample on an amplifier or lumped loss
/// sees the power after it.
#[allow(clippy::too_many_arguments)]
pub fn simulate_dlm_capture(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
    slot: usize,
    spacing_km: f64,
    noise_sigma_db: f64,
    seed: u64,
) -> Result<PowerProfile, TelemetryError> {
    if !(spacing_km.is_finite() && spacing_km > 0.0) {
        return Err(TelemetryError::InvalidSpacing(spacing_km));
    }
    let segs = segments(line, grid, config, plan, slot)?;
    if segs.is_empty() {
        return Err(TelemetryError::Qot(crate::qot::QotError::InvalidConfig("line has no spans".into())));
    }
    let total = line.total_length_km();
    let n = ((total / spacing_km).round() as usize).max(1);
    let mut rng = seeded_rng(seed, DLM_STREAM);
    let samples = (0..=n)
        .map(|i| {
            let z = if i == n { total } else { i as f64 * total / n as f64 };
            let noise = if noise_sigma_db > 0.0 { clipped_normal(&mut rng, noise_sigma_db) } else { 0.0 };
            ProfileSample { position_km: z, power_dbm: noiseless_power(&segs, z) + noise }
        })
        .collect();
    Ok(PowerProfile { slot_index: slot, noise_sigma_db, seed, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edfa, FiberSpan};

    fn two_span(loss: Option<(f64, f64)>) -> (LineSystem, SpectrumGrid, LineConfig, ChannelPlan) {
        let grid = SpectrumGrid::c_band("c");
        let mut first = FiberSpan::smf(56.0);
        if let Some((p, l)) = loss {
            first = first.with_lumped_loss(p, l);
        }
        let mut booster = Edfa::new("boost", 0.0, 5.0);
        booster.gain_range_db = [0.0, 20.0];
        let line = LineSystem::from_parts(
            "l",
            "o",
            ["a", "b"],
            "c",
            booster,
            vec![first, FiberSpan::smf(56.0)],
            vec![Edfa::new("ila", 11.2, 5.0)],
            Edfa::new("pre", 11.2, 5.0),
        );
        let cfg = LineConfig::from_line(&line, &grid, 0.0);
        let plan = ChannelPlan::loaded(&grid, &cfg);
        (line, grid, cfg, plan)
    }

    fn at(p: &PowerProfile, z: f64) -> f64 {
        p.samples.iter().find(|s| (s.position_km - z).abs() < 1e-9).unwrap().power_dbm
    }

    #[test]
    fn noiseless_piecewise_construction() {
        let (line, grid, cfg, plan) = two_span(None);
        let p = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.0, 7).unwrap();
        assert_eq!(p.samples.len(), 1121);
        assert!((at(&p, 0.0) - 0.0).abs() < 1e-12);
        assert!((at(&p, 55.9) - (-11.18)).abs() < 1e-9);
        assert!((at(&p, 56.0) - 0.0).abs() < 1e-9);
        assert!((at(&p, 112.0) + 11.2).abs() < 1e-9);
    }

    #[test]
    fn lumped_loss_is_a_step() {
        let (line, grid, cfg, plan) = two_span(Some((30.0, 3.0)));
        let p = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.0, 7).unwrap();
        assert!((at(&p, 29.9) + 5.98).abs() < 1e-9);
        assert!((at(&p, 30.0) + 9.0).abs() < 1e-9);
        // The ILA restores its fixed gain, so the deficit carries to the end.
        assert!((at(&p, 112.0) + 14.2).abs() < 1e-9);
    }

    #[test]
    fn seeded_noise_is_deterministic_and_bounded() {
        let (line, grid, cfg, plan) = two_span(None);
        let a = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.2, 7).unwrap();
        let b = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.2, 7).unwrap();
        let clean = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.0, 7).unwrap();
        assert_eq!(a, b);
        for (n, c) in a.samples.iter().zip(&clean.samples) {
            assert!((n.power_dbm - c.power_dbm).abs() <= 0.6 + 1e-12);
        }
    }

    #[test]
    fn guards() {
        let (line, grid, cfg, mut plan) = two_span(None);
        assert!(matches!(
            simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.0, 0.0, 7),
            Err(TelemetryError::InvalidSpacing(_))
        ));
        plan.channels.retain(|c| c.slot_index != 10);
        assert!(matches!(
            simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.0, 7),
            Err(TelemetryError::ChannelAbsent(10))
        ));
    }

    #[test]
    fn interpolation() {
        let (line, grid, cfg, plan) = two_span(None);
        let p = simulate_dlm_capture(&line, &grid, &cfg, &plan, 10, 0.1, 0.0, 7).unwrap();
        assert!((p.interpolate(10.05) + 2.01).abs() < 1e-9);
        assert!((p.spacing_km() - 0.1).abs() < 1e-12);
    }
}
