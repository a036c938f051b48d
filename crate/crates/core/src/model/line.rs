use serde::{Deserialize, Serialize};

use super::{invariant, ModelError, SpectrumGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumpedLoss {
    /// Distance from the span input.
    pub position_km: f64,
    pub loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpan {
    pub length_km: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation_db_per_km: f64,
    /// |beta2|; the fiber is assumed to be in the anomalous regime.
    #[serde(default = "default_beta2")]
    pub dispersion_ps2_per_km: f64,
    #[serde(default = "default_gamma")]
    pub gamma_per_w_km: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lumped_losses: Vec<LumpedLoss>,
}

fn default_attenuation() -> f64 {
    0.20
}
fn default_beta2() -> f64 {
    21.7
}
fn default_gamma() -> f64 {
    1.3
}

impl FiberSpan {
    /// Standard single-mode fiber of the given length.
    pub fn smf(length_km: f64) -> Self {
        Self {
            length_km,
            attenuation_db_per_km: default_attenuation(),
            dispersion_ps2_per_km: default_beta2(),
            gamma_per_w_km: default_gamma(),
            lumped_losses: Vec::new(),
        }
    }

    pub fn with_lumped_loss(mut self, position_km: f64, loss_db: f64) -> Self {
        self.lumped_losses.push(LumpedLoss { position_km, loss_db });
        self
    }

    /// Distributed plus lumped loss.
    pub fn total_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
            + self.lumped_losses.iter().map(|l| l.loss_db).sum::<f64>()
    }

    pub fn validate(&self, index: usize) -> Result<(), ModelError> {
        if !(self.length_km.is_finite() && self.length_km > 0.0) {
            return Err(invariant(format!("span {index}: length must be positive")));
        }
        if !(self.attenuation_db_per_km.is_finite() && self.attenuation_db_per_km > 0.0) {
            return Err(invariant(format!("span {index}: attenuation must be positive")));
        }
        if !(self.dispersion_ps2_per_km.is_finite() && self.dispersion_ps2_per_km >= 0.0) {
            return Err(invariant(format!("span {index}: dispersion must be non-negative")));
        }
        if !(self.gamma_per_w_km.is_finite() && self.gamma_per_w_km >= 0.0) {
            return Err(invariant(format!("span {index}: gamma must be non-negative")));
        }
        for l in &self.lumped_losses {
            if !(0.0..=self.length_km).contains(&l.position_km) {
                return Err(invariant(format!(
                    "span {index}: lumped loss at {} km outside [0, {}]",
                    l.position_km, self.length_km
                )));
            }
            if !(l.loss_db.is_finite() && l.loss_db >= 0.0) {
                return Err(invariant(format!("span {index}: lumped loss must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edfa {
    pub id: String,
    pub gain_db: f64,
    /// Edge-to-edge gain tilt, linear in frequency across the grid.
    #[serde(default)]
    pub tilt_db: f64,
    pub noise_figure_db: f64,
    /// Per-slot deviation from the flat+tilt gain. Empty means no ripple.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gain_ripple_db: Vec<f64>,
    pub gain_range_db: [f64; 2],
    pub max_total_output_dbm: f64,
}

impl Edfa {
    pub fn new(id: impl Into<String>, gain_db: f64, noise_figure_db: f64) -> Self {
        Self {
            id: id.into(),
            gain_db,
            tilt_db: 0.0,
            noise_figure_db,
            gain_ripple_db: Vec::new(),
            gain_range_db: [0.0, 30.0],
            max_total_output_dbm: 25.0,
        }
    }

    pub fn ripple(&self, slot: usize) -> f64 {
        self.gain_ripple_db.get(slot).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, grid: &SpectrumGrid) -> Result<(), ModelError> {
        let [lo, hi] = self.gain_range_db;
        if !(lo <= hi) {
            return Err(invariant(format!("amp {}: empty gain range", self.id)));
        }
        if !(self.gain_db >= lo - 1e-9 && self.gain_db <= hi + 1e-9) {
            return Err(invariant(format!(
                "amp {}: gain {} dB outside range [{lo}, {hi}]",
                self.id, self.gain_db
            )));
        }
        if !(self.noise_figure_db >= 3.0) {
            return Err(invariant(format!(
                "amp {}: noise figure {} dB below the 3 dB quantum limit",
                self.id, self.noise_figure_db
            )));
        }
        if !self.gain_ripple_db.is_empty() {
            if self.gain_ripple_db.len() != grid.slot_count {
                return Err(invariant(format!(
                    "amp {}: ripple has {} entries for {} slots",
                    self.id,
                    self.gain_ripple_db.len(),
                    grid.slot_count
                )));
            }
            let mean = self.gain_ripple_db.iter().sum::<f64>() / self.gain_ripple_db.len() as f64;
            if mean.abs() > 1e-6 {
                return Err(invariant(format!("amp {}: ripple mean {mean} is not zero", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LineElement {
    Span(FiberSpan),
    Amp(Edfa),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instruments {
    #[serde(default)]
    pub osa: bool,
    #[serde(default)]
    pub ase_source: bool,
}

/// Instruments at `[near end, far end]`, aligned with `LineSystem::endpoints`.
pub type EndpointInstruments = [Instruments; 2];

/// Booster, spans separated by in-line amplifiers, preamplifier; signals
/// travel from `endpoints[0]` to `endpoints[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSystem {
    pub id: String,
    pub owner: String,
    pub endpoints: [String; 2],
    pub grid: String,
    pub elements: Vec<LineElement>,
    #[serde(default)]
    pub endpoint_instruments: EndpointInstruments,
}

impl LineSystem {
    /// Builds `booster, span, ila, span, ..., span, preamp`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        id: impl Into<String>,
        owner: impl Into<String>,
        endpoints: [&str; 2],
        grid: impl Into<String>,
        booster: Edfa,
        spans: Vec<FiberSpan>,
        ilas: Vec<Edfa>,
        preamp: Edfa,
    ) -> Self {
        let mut elements = vec![LineElement::Amp(booster)];
        let mut ilas = ilas.into_iter();
        let n = spans.len();
        for (i, span) in spans.into_iter().enumerate() {
            elements.push(LineElement::Span(span));
            if i + 1 < n {
                if let Some(a) = ilas.next() {
                    elements.push(LineElement::Amp(a));
                }
            }
        }
        elements.extend(ilas.map(LineElement::Amp));
        elements.push(LineElement::Amp(preamp));
        Self {
            id: id.into(),
            owner: owner.into(),
            endpoints: endpoints.map(String::from),
            grid: grid.into(),
            elements,
            endpoint_instruments: [Instruments { osa: true, ase_source: true }; 2],
        }
    }

    pub fn spans(&self) -> impl Iterator<Item = &FiberSpan> {
        self.elements.iter().filter_map(|e| match e {
            LineElement::Span(s) => Some(s),
            _ => None,
        })
    }

    pub fn amps(&self) -> impl Iterator<Item = &Edfa> {
        self.elements.iter().filter_map(|e| match e {
            LineElement::Amp(a) => Some(a),
            _ => None,
        })
    }

    pub fn amps_mut(&mut self) -> impl Iterator<Item = &mut Edfa> {
        self.elements.iter_mut().filter_map(|e| match e {
            LineElement::Amp(a) => Some(a),
            _ => None,
        })
    }

    pub fn spans_mut(&mut self) -> impl Iterator<Item = &mut FiberSpan> {
        self.elements.iter_mut().filter_map(|e| match e {
            LineElement::Span(s) => Some(s),
            _ => None,
        })
    }

    pub fn amp_count(&self) -> usize {
        self.amps().count()
    }

    pub fn span_count(&self) -> usize {
        self.spans().count()
    }

    pub fn total_length_km(&self) -> f64 {
        self.spans().map(|s| s.length_km).sum()
    }

    pub fn endpoint_index(&self, node: &str) -> Option<usize> {
        self.endpoints.iter().position(|e| e == node)
    }

    /// Checks the element ordering and every element invariant.
    pub fn validate(&self, grid: &SpectrumGrid) -> Result<(), ModelError> {
        let spans = self.span_count();
        let amps = self.amp_count();
        if spans == 0 {
            return Err(invariant(format!("line {}: no fiber spans", self.id)));
        }
        if !matches!(self.elements.first(), Some(LineElement::Amp(_)))
            || !matches!(self.elements.last(), Some(LineElement::Amp(_)))
        {
            return Err(invariant(format!(
                "line {}: must start with a booster and end with a preamp",
                self.id
            )));
        }
        let ilas = amps - 2;
        if ilas + 1 != spans {
            return Err(invariant(format!(
                "line {}: {ilas} in-line amplifiers for {spans} spans (expected {})",
                self.id,
                spans - 1
            )));
        }
        let alternating = self.elements.windows(2).all(|w| {
            matches!(
                (&w[0], &w[1]),
                (LineElement::Amp(_), LineElement::Span(_)) | (LineElement::Span(_), LineElement::Amp(_))
            )
        });
        if !alternating {
            return Err(invariant(format!("line {}: spans and amplifiers must alternate", self.id)));
        }
        let mut ids = std::collections::BTreeSet::new();
        for a in self.amps() {
            a.validate(grid)?;
            if !ids.insert(a.id.as_str()) {
                return Err(invariant(format!("line {}: duplicate amp id {}", self.id, a.id)));
            }
        }
        for (i, s) in self.spans().enumerate() {
            s.validate(i)?;
        }
        Ok(())
    }

    /// The parts of the line an operator may know without field access.
    pub fn public_info(&self) -> PublicLineInfo {
        PublicLineInfo {
            id: self.id.clone(),
            grid: self.grid.clone(),
            endpoints: self.endpoints.clone(),
            amps: self
                .amps()
                .map(|a| PublicAmp {
                    id: a.id.clone(),
                    gain_db: a.gain_db,
                    tilt_db: a.tilt_db,
                    gain_range_db: a.gain_range_db,
                    max_total_output_dbm: a.max_total_output_dbm,
                })
                .collect(),
            spans: self
                .spans()
                .map(|s| PublicSpan {
                    dispersion_ps2_per_km: s.dispersion_ps2_per_km,
                    gamma_per_w_km: s.gamma_per_w_km,
                })
                .collect(),
            endpoint_instruments: self.endpoint_instruments,
        }
    }
}

/// Sum of span lengths in km.
pub fn total_length(line: &LineSystem) -> f64 {
    line.total_length_km()
}

/// Equipment data sheet view of a line: amplifier settings and limits plus
/// fiber-type constants. Noise figures, ripple, span lengths, attenuation and
/// lumped losses are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicLineInfo {
    pub id: String,
    pub grid: String,
    pub endpoints: [String; 2],
    pub amps: Vec<PublicAmp>,
    pub spans: Vec<PublicSpan>,
    pub endpoint_instruments: EndpointInstruments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicAmp {
    pub id: String,
    pub gain_db: f64,
    pub tilt_db: f64,
    pub gain_range_db: [f64; 2],
    pub max_total_output_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicSpan {
    pub dispersion_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
}
