use serde::{Deserialize, Serialize};

use super::QotError;
use crate::model::{Channel, ChannelRole, LineSystem, SpectrumGrid};
use crate::units::{db_to_lin, lin_to_db};

/// Equivalent symbol rate of a 50 GHz ASE loading channel.
pub const LOADING_SYMBOL_RATE_GBD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpSetting {
    pub gain_db: f64,
    pub tilt_db: f64,
}

/// Operating point of a line: per-amplifier gain/tilt and, per slot, the
/// launch power before the booster of a 50 GHz loading channel. Channels
/// of other widths launch at the same power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineConfig {
    pub amps: Vec<AmpSetting>,
    pub launch_dbm: Vec<f64>,
}

impl LineConfig {
    /// Current amplifier settings of `line` with a flat launch.
    pub fn from_line(line: &LineSystem, grid: &SpectrumGrid, launch_dbm: f64) -> Self {
        Self {
            amps: line
                .amps()
                .map(|a| AmpSetting { gain_db: a.gain_db, tilt_db: a.tilt_db })
                .collect(),
            launch_dbm: vec![launch_dbm; grid.slot_count],
        }
    }

    /// Launch profile `offset + tilt * f` with `f` the normalized frequency.
    pub fn set_launch_profile(&mut self, grid: &SpectrumGrid, offset_dbm: f64, tilt_db: f64) {
        self.launch_dbm = (0..grid.slot_count)
            .map(|s| offset_dbm + tilt_db * grid.normalized_frequency(s as f64))
            .collect();
    }

    /// Least-squares (offset, tilt) of the launch profile.
    pub fn launch_profile(&self, grid: &SpectrumGrid) -> (f64, f64) {
        let n = self.launch_dbm.len() as f64;
        let offset = self.launch_dbm.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (s, p) in self.launch_dbm.iter().enumerate() {
            let f = grid.normalized_frequency(s as f64);
            sxy += f * (p - offset);
            sxx += f * f;
        }
        (offset, if sxx > 0.0 { sxy / sxx } else { 0.0 })
    }

    /// Shape checks, gain ranges and the booster output limit.
    pub fn validate(&self, line: &LineSystem, grid: &SpectrumGrid) -> Result<(), QotError> {
        if self.amps.len() != line.amp_count() {
            return Err(QotError::InvalidConfig(format!(
                "{} amp settings for {} amplifiers",
                self.amps.len(),
                line.amp_count()
            )));
        }
        if self.launch_dbm.len() != grid.slot_count {
            return Err(QotError::InvalidConfig(format!(
                "{} launch values for {} slots",
                self.launch_dbm.len(),
                grid.slot_count
            )));
        }
        for (setting, amp) in self.amps.iter().zip(line.amps()) {
            let [lo, hi] = amp.gain_range_db;
            if setting.gain_db < lo - 1e-9 || setting.gain_db > hi + 1e-9 {
                return Err(QotError::InvalidConfig(format!(
                    "amp {}: gain {:.3} dB outside [{lo}, {hi}]",
                    amp.id, setting.gain_db
                )));
            }
        }
        if let Some((setting, booster)) = self.amps.first().zip(line.amps().next()) {
            let total: f64 = self
                .launch_dbm
                .iter()
                .enumerate()
                .map(|(s, p)| {
                    db_to_lin(p + setting.gain_db + setting.tilt_db * grid.normalized_frequency(s as f64))
                })
                .sum();
            let total_dbm = lin_to_db(total);
            if total_dbm > booster.max_total_output_dbm + 1e-9 {
                return Err(QotError::InvalidConfig(format!(
                    "booster {} output {total_dbm:.2} dBm above {} dBm",
                    booster.id, booster.max_total_output_dbm
                )));
            }
        }
        Ok(())
    }
}

/// Launch power (dBm) of a channel of `symbol_rate_gbd` over `width` slots
/// at the PSD the config assigns to those slots.
pub fn psd_matched_launch(config: &LineConfig, first: usize, width: usize, symbol_rate_gbd: f64) -> f64 {
    let slots = &config.launch_dbm[first..first + width];
    let mean_lin = slots.iter().map(|p| db_to_lin(*p)).sum::<f64>() / width as f64;
    lin_to_db(mean_lin) + lin_to_db(symbol_rate_gbd / LOADING_SYMBOL_RATE_GBD)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficChannel {
    pub slot_index: usize,
    pub slot_width: usize,
    pub symbol_rate_gbd: f64,
    pub format: String,
    pub launch_power_dbm: f64,
}

/// Channels present on the line, sorted by slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub channels: Vec<Channel>,
}

impl ChannelPlan {
    /// One 50 GHz loading channel in every slot.
    pub fn loaded(grid: &SpectrumGrid, config: &LineConfig) -> Self {
        Self {
            channels: (0..grid.slot_count)
                .map(|s| Channel {
                    slot_index: s,
                    slot_width: 1,
                    symbol_rate_gbd: LOADING_SYMBOL_RATE_GBD,
                    role: ChannelRole::Dummy,
                    format: None,
                    launch_power_dbm: config.launch_dbm[s],
                })
                .collect(),
        }
    }

    /// Traffic channels with loading channels in every remaining slot.
    pub fn with_traffic(
        grid: &SpectrumGrid,
        config: &LineConfig,
        traffic: &[TrafficChannel],
    ) -> Result<Self, QotError> {
        let mut taken = vec![false; grid.slot_count];
        let mut channels = Vec::new();
        for t in traffic {
            let ch = Channel {
                slot_index: t.slot_index,
                slot_width: t.slot_width,
                symbol_rate_gbd: t.symbol_rate_gbd,
                role: ChannelRole::Traffic,
                format: Some(t.format.clone()),
                launch_power_dbm: t.launch_power_dbm,
            };
            ch.validate(grid).map_err(|e| QotError::InvalidConfig(e.to_string()))?;
            for s in ch.slots() {
                if std::mem::replace(&mut taken[s], true) {
                    return Err(QotError::InvalidConfig(format!("slot {s} assigned twice")));
                }
            }
            channels.push(ch);
        }
        for s in (0..grid.slot_count).filter(|s| !taken[*s]) {
            channels.push(Channel {
                slot_index: s,
                slot_width: 1,
                symbol_rate_gbd: LOADING_SYMBOL_RATE_GBD,
                role: ChannelRole::Dummy,
                format: None,
                launch_power_dbm: config.launch_dbm[s],
            });
        }
        channels.sort_by_key(|c| c.slot_index);
        Ok(Self { channels })
    }

    pub fn channel_at(&self, slot: usize) -> Option<&Channel> {
        self.channels.iter().find(|c| c.slots().contains(&slot))
    }

    pub fn validate(&self, grid: &SpectrumGrid) -> Result<(), QotError> {
        let mut taken = vec![false; grid.slot_count];
        for ch in &self.channels {
            ch.validate(grid).map_err(|e| QotError::InvalidConfig(e.to_string()))?;
            for s in ch.slots() {
                if std::mem::replace(&mut taken[s], true) {
                    return Err(QotError::InvalidConfig(format!("slot {s} assigned twice")));
                }
            }
        }
        Ok(())
    }
}
