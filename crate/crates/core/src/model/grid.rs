use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{invariant, ModelError};
use crate::units::ghz_to_hz;

/// Fixed-grid spectrum: slot `i` is centered at `anchor + i * spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGrid {
    pub id: String,
    /// Center of slot 0.
    pub anchor_thz: f64,
    pub slot_spacing_ghz: f64,
    pub slot_count: usize,
}

impl SpectrumGrid {
    /// 48 x 100 GHz slots starting at 191.35 THz.
    pub fn c_band(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            anchor_thz: 191.35,
            slot_spacing_ghz: 100.0,
            slot_count: 48,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.anchor_thz.is_finite() && self.anchor_thz > 0.0) {
            return Err(invariant(format!("grid {}: anchor must be positive", self.id)));
        }
        if !(self.slot_spacing_ghz.is_finite() && self.slot_spacing_ghz > 0.0) {
            return Err(invariant(format!("grid {}: slot spacing must be positive", self.id)));
        }
        if self.slot_count == 0 {
            return Err(invariant(format!("grid {}: slot_count must be at least 1", self.id)));
        }
        Ok(())
    }

    pub fn carrier_thz(&self, slot: usize) -> Result<f64, ModelError> {
        if slot >= self.slot_count {
            return Err(ModelError::SlotOutOfRange {
                grid: self.id.clone(),
                slot,
                count: self.slot_count,
            });
        }
        Ok(self.anchor_thz + slot as f64 * self.slot_spacing_ghz * 1e-3)
    }

    /// Carrier of slot `slot` in Hz; the caller guarantees the slot is in range.
    pub fn slot_hz(&self, slot: usize) -> f64 {
        self.anchor_thz * 1e12 + slot as f64 * self.spacing_hz()
    }

    /// Center frequency of a channel spanning `width` slots from `first`.
    pub fn center_hz(&self, first: usize, width: usize) -> f64 {
        self.anchor_thz * 1e12 + self.center_position(first, width) * self.spacing_hz()
    }

    pub fn center_position(&self, first: usize, width: usize) -> f64 {
        first as f64 + (width.max(1) - 1) as f64 / 2.0
    }

    pub fn spacing_hz(&self) -> f64 {
        ghz_to_hz(self.slot_spacing_ghz)
    }

    /// Bandwidth covered by the whole grid.
    pub fn total_bandwidth_hz(&self) -> f64 {
        self.slot_count as f64 * self.spacing_hz()
    }

    /// Zero-mean normalized frequency in [-0.5, 0.5] for a position given in
    /// slot units. Tilts are specified edge to edge on this axis.
    pub fn normalized_frequency(&self, position: f64) -> f64 {
        if self.slot_count < 2 {
            return 0.0;
        }
        position / (self.slot_count - 1) as f64 - 0.5
    }

    /// Number of slots a signal of `symbol_rate_gbd` needs.
    pub fn slots_for(&self, symbol_rate_gbd: f64) -> usize {
        ((symbol_rate_gbd / self.slot_spacing_ghz) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Carrier frequency (THz) of `slot`.
pub fn carrier_frequency(grid: &SpectrumGrid, slot: usize) -> Result<f64, ModelError> {
    grid.carrier_thz(slot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    Traffic,
    Dummy,
    Probe,
}

/// A signal placed on the grid. Channels wider than one slot (for example a
/// 130 GBd carrier on a 100 GHz grid) occupy `slot_width` adjacent slots and
/// sit at the center of that block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub slot_index: usize,
    #[serde(default = "one")]
    pub slot_width: usize,
    pub symbol_rate_gbd: f64,
    pub role: ChannelRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    pub launch_power_dbm: f64,
}

fn one() -> usize {
    1
}

impl Channel {
    pub fn slots(&self) -> std::ops::Range<usize> {
        self.slot_index..self.slot_index + self.slot_width
    }

    pub fn validate(&self, grid: &SpectrumGrid) -> Result<(), ModelError> {
        if !(self.symbol_rate_gbd.is_finite() && self.symbol_rate_gbd > 0.0) {
            return Err(invariant(format!("channel at slot {}: symbol rate must be positive", self.slot_index)));
        }
        if self.slot_width == 0 || self.slot_index + self.slot_width > grid.slot_count {
            return Err(ModelError::SlotOutOfRange {
                grid: grid.id.clone(),
                slot: self.slot_index + self.slot_width.max(1) - 1,
                count: grid.slot_count,
            });
        }
        if self.symbol_rate_gbd > grid.slot_spacing_ghz * self.slot_width as f64 + 1e-9 {
            return Err(invariant(format!(
                "channel at slot {}: {} GBd does not fit in {} slot(s) of {} GHz",
                self.slot_index, self.symbol_rate_gbd, self.slot_width, grid.slot_spacing_ghz
            )));
        }
        if self.role == ChannelRole::Dummy && self.format.is_some() {
            return Err(invariant(format!("dummy channel at slot {} carries a format", self.slot_index)));
        }
        Ok(())
    }
}

/// BER curve family used to map GSNR to pre-FEC BER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BerCurve {
    #[serde(rename = "dp-qpsk")]
    DpQpsk,
    #[serde(rename = "dp-16qam")]
    Dp16Qam,
}

impl BerCurve {
    pub fn id(self) -> &'static str {
        match self {
            BerCurve::DpQpsk => "dp-qpsk",
            BerCurve::Dp16Qam => "dp-16qam",
        }
    }
}

impl fmt::Display for BerCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BerCurve {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dp-qpsk" => Ok(BerCurve::DpQpsk),
            "dp-16qam" => Ok(BerCurve::Dp16Qam),
            other => Err(ModelError::Schema(format!("unknown ber_curve id '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationFormat {
    pub id: String,
    pub bits_per_symbol_per_pol: f64,
    pub ber_curve: BerCurve,
    pub net_rate_gbps: f64,
    pub symbol_rate_gbd: f64,
}

impl ModulationFormat {
    /// 400G: dual-polarization 16QAM at 63.1 GBd.
    pub fn dp16qam_400g() -> Self {
        Self {
            id: "400g".into(),
            bits_per_symbol_per_pol: 4.0,
            ber_curve: BerCurve::Dp16Qam,
            net_rate_gbps: 400.0,
            symbol_rate_gbd: 63.1,
        }
    }

    /// 800G: dual-polarization 16QAM at 130 GBd.
    pub fn dp16qam_800g() -> Self {
        Self {
            id: "800g".into(),
            bits_per_symbol_per_pol: 4.0,
            ber_curve: BerCurve::Dp16Qam,
            net_rate_gbps: 800.0,
            symbol_rate_gbd: 130.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.net_rate_gbps.is_finite() && self.net_rate_gbps > 0.0) {
            return Err(invariant(format!("format {}: net rate must be positive", self.id)));
        }
        if !(self.symbol_rate_gbd.is_finite() && self.symbol_rate_gbd > 0.0) {
            return Err(invariant(format!("format {}: symbol rate must be positive", self.id)));
        }
        if !(self.bits_per_symbol_per_pol > 0.0) {
            return Err(invariant(format!("format {}: bits per symbol must be positive", self.id)));
        }
        Ok(())
    }
}
