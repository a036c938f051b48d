use serde::{Deserialize, Serialize};

use super::{nli_psd_per_span, AmpSetting, ChannelPlan, LineConfig, QotError};
use crate::model::{Channel, Edfa, LineElement, LineSystem, SpectrumGrid};
use crate::units::{db_to_lin, dbm_to_w, ghz_to_hz, lin_to_db, w_to_dbm, PLANCK};

/// 0.1 nm reference bandwidth for ASE/OSNR accounting.
pub const REF_BANDWIDTH_HZ: f64 = 12.5e9;
/// Noise-free points report this instead of +inf.
pub const GSNR_CAP_DB: f64 = 60.0;
pub const LOS_THRESHOLD_DBM: f64 = -50.0;

/// Gain an amplifier applies at `slot`: setting, tilt, then ripple.
pub fn amp_slot_gain_db(amp: &Edfa, setting: &AmpSetting, grid: &SpectrumGrid, slot: usize) -> f64 {
    setting.gain_db + setting.tilt_db * grid.normalized_frequency(slot as f64) + amp.ripple(slot)
}

/// Gain seen by a channel: the dB mean over the slots it occupies.
pub fn amp_channel_gain_db(amp: &Edfa, setting: &AmpSetting, grid: &SpectrumGrid, channel: &Channel) -> f64 {
    let slots = channel.slots();
    let n = slots.len() as f64;
    slots.map(|s| amp_slot_gain_db(amp, setting, grid, s)).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsnrRecord {
    pub slot_index: usize,
    pub slot_width: usize,
    pub gsnr_db: f64,
    pub snr_ase_db: f64,
    pub snr_nli_db: f64,
}

impl GsnrRecord {
    /// d(GSNR dB)/d(launch dB) when every channel moves together: ASE
    /// inverse-SNR falls with launch, NLI inverse-SNR rises with its square.
    pub fn launch_sensitivity(&self) -> f64 {
        let ase = db_to_lin(-self.snr_ase_db);
        let nli = db_to_lin(-self.snr_nli_db);
        (ase - 2.0 * nli) / (ase + nli)
    }
}

/// Per-channel GSNR at one point of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsnrSpectrum {
    /// Number of line elements traversed (0 = before the booster).
    pub reference_point: usize,
    pub label: String,
    pub records: Vec<GsnrRecord>,
}

impl GsnrSpectrum {
    pub fn min_gsnr(&self) -> f64 {
        self.records.iter().map(|r| r.gsnr_db).fold(f64::INFINITY, f64::min)
    }

    pub fn max_gsnr(&self) -> f64 {
        self.records.iter().map(|r| r.gsnr_db).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spread max - min in dB.
    pub fn flatness(&self) -> f64 {
        self.max_gsnr() - self.min_gsnr()
    }

    pub fn record_for_slot(&self, slot: usize) -> Option<&GsnrRecord> {
        self.records
            .iter()
            .find(|r| (r.slot_index..r.slot_index + r.slot_width).contains(&slot))
    }
}

/// Signal and noise state at a point of the walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPoint {
    pub reference_point: usize,
    pub label: String,
    /// Per channel, in plan order.
    pub signal_w: Vec<f64>,
    /// Per slot.
    pub ase_psd: Vec<f64>,
    pub nli_psd: Vec<f64>,
}

fn capped_db(lin: f64) -> f64 {
    if lin.is_finite() {
        lin_to_db(lin).min(GSNR_CAP_DB)
    } else {
        GSNR_CAP_DB
    }
}

impl WalkPoint {
    fn band_mean(psd: &[f64], ch: &Channel) -> f64 {
        ch.slots().map(|s| psd[s]).sum::<f64>() / ch.slot_width as f64
    }

    /// ASE power in the channel's symbol-rate bandwidth.
    pub fn channel_ase_w(&self, ch: &Channel) -> f64 {
        Self::band_mean(&self.ase_psd, ch) * ghz_to_hz(ch.symbol_rate_gbd)
    }

    pub fn channel_nli_w(&self, ch: &Channel) -> f64 {
        Self::band_mean(&self.nli_psd, ch) * ghz_to_hz(ch.symbol_rate_gbd)
    }

    pub fn total_signal_w(&self) -> f64 {
        self.signal_w.iter().sum()
    }

    pub fn spectrum(&self, plan: &ChannelPlan) -> GsnrSpectrum {
        let records = plan
            .channels
            .iter()
            .zip(&self.signal_w)
            .map(|(ch, sig)| {
                let ase = self.channel_ase_w(ch);
                let nli = self.channel_nli_w(ch);
                GsnrRecord {
                    slot_index: ch.slot_index,
                    slot_width: ch.slot_width,
                    gsnr_db: capped_db(sig / (ase + nli)),
                    snr_ase_db: capped_db(sig / ase),
                    snr_nli_db: capped_db(sig / nli),
                }
            })
            .collect();
        GsnrSpectrum {
            reference_point: self.reference_point,
            label: self.label.clone(),
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpIo {
    pub id: String,
    pub element_index: usize,
    pub input_w: f64,
    pub output_w: f64,
}

/// Full result of walking a channel plan through a line.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    /// Launch point followed by one point per amplifier output.
    pub points: Vec<WalkPoint>,
    pub amp_io: Vec<AmpIo>,
    /// State after the last element.
    pub end: WalkPoint,
}

/// Walks every element in order, tracking signal per channel and ASE/NLI
/// PSD per slot. Spans add NLI from the mean PSD at their input, then
/// attenuate signal and noise alike.
pub fn walk(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
) -> Result<Walk, QotError> {
    if config.amps.len() != line.amp_count() {
        return Err(QotError::InvalidConfig(format!(
            "{} amp settings for {} amplifiers",
            config.amps.len(),
            line.amp_count()
        )));
    }
    if config.launch_dbm.len() != grid.slot_count {
        return Err(QotError::InvalidConfig(format!(
            "{} launch values for {} slots",
            config.launch_dbm.len(),
            grid.slot_count
        )));
    }
    plan.validate(grid)?;
    let n_slots = grid.slot_count;
    let bandwidth = grid.total_bandwidth_hz();
    let slot_hz: Vec<f64> = (0..n_slots).map(|s| grid.slot_hz(s)).collect();

    let mut state = WalkPoint {
        reference_point: 0,
        label: "launch".into(),
        signal_w: plan.channels.iter().map(|c| dbm_to_w(c.launch_power_dbm)).collect(),
        ase_psd: vec![0.0; n_slots],
        nli_psd: vec![0.0; n_slots],
    };
    let mut points = vec![state.clone()];
    let mut amp_io = Vec::new();
    let mut settings = config.amps.iter();

    for (index, element) in line.elements.iter().enumerate() {
        match element {
            LineElement::Amp(amp) => {
                let setting = settings.next().expect("setting count checked");
                for (ch, sig) in plan.channels.iter().zip(&state.signal_w) {
                    let dbm = w_to_dbm(*sig);
                    if !(dbm >= LOS_THRESHOLD_DBM) {
                        return Err(QotError::LossOfSignal {
                            element: amp.id.clone(),
                            slot: ch.slot_index,
                            power_dbm: dbm,
                        });
                    }
                }
                let input_w = state.total_signal_w();
                for (ch, sig) in plan.channels.iter().zip(state.signal_w.iter_mut()) {
                    *sig *= db_to_lin(amp_channel_gain_db(amp, setting, grid, ch));
                }
                let nf = db_to_lin(amp.noise_figure_db);
                for (s, f) in slot_hz.iter().enumerate() {
                    let g = db_to_lin(amp_slot_gain_db(amp, setting, grid, s));
                    state.ase_psd[s] = state.ase_psd[s] * g + nf * PLANCK * f * (g - 1.0).max(0.0);
                    state.nli_psd[s] *= g;
                }
                amp_io.push(AmpIo {
                    id: amp.id.clone(),
                    element_index: index,
                    input_w,
                    output_w: state.total_signal_w(),
                });
                state.reference_point = index + 1;
                state.label = amp.id.clone();
                points.push(state.clone());
            }
            LineElement::Span(span) => {
                let wdm_psd = state.total_signal_w() / bandwidth;
                let nli = nli_psd_per_span(span, wdm_psd, bandwidth)?;
                let loss = db_to_lin(-span.total_loss_db());
                for v in state.nli_psd.iter_mut() {
                    *v = (*v + nli) * loss;
                }
                for v in state.ase_psd.iter_mut() {
                    *v *= loss;
                }
                for v in state.signal_w.iter_mut() {
                    *v *= loss;
                }
                state.reference_point = index + 1;
                state.label = format!("span-{index}");
            }
        }
    }
    Ok(Walk { points, amp_io, end: state })
}

/// Accumulated GSNR before the booster and after every amplifier.
pub fn propagate_gsnr(
    line: &LineSystem,
    grid: &SpectrumGrid,
    config: &LineConfig,
    plan: &ChannelPlan,
) -> Result<Vec<GsnrSpectrum>, QotError> {
    let w = walk(line, grid, config, plan)?;
    Ok(w.points.iter().map(|p| p.spectrum(plan)).collect())
}
