use super::{CharacterizationError, LinkEstimate, OlsEstimate};
use crate::model::{Edfa, FiberSpan, LineElement, LineSystem, LumpedLoss, PublicLineInfo, SpectrumGrid};

/// Builds the estimated line: span structure from DLM, noise figures and
/// ripple from OLS calibration, settings and fiber constants from the
/// public data sheet.
pub fn assemble_twin(
    info: &PublicLineInfo,
    grid: &SpectrumGrid,
    link: &LinkEstimate,
    ols: &OlsEstimate,
    owner: &str,
) -> Result<LineSystem, CharacterizationError> {
    let lengths = link.span_lengths_km();
    if lengths.len() != info.spans.len() {
        return Err(CharacterizationError::Inconsistent(format!(
            "DLM found {} spans, the line has {}",
            lengths.len(),
            info.spans.len()
        )));
    }
    if ols.amps.len() != info.amps.len() {
        return Err(CharacterizationError::Inconsistent(format!(
            "calibration covers {} amplifiers, the line has {}",
            ols.amps.len(),
            info.amps.len()
        )));
    }
    let starts = link.span_starts_km();
    let amp = |i: usize| {
        let public = &info.amps[i];
        let cal = &ols.amps[i];
        let mean = cal.ripple_db.iter().sum::<f64>() / grid.slot_count.max(1) as f64;
        Edfa {
            id: public.id.clone(),
            gain_db: public.gain_db,
            tilt_db: public.tilt_db,
            noise_figure_db: cal.noise_figure_db,
            gain_ripple_db: cal.ripple_db.iter().map(|r| r - mean).collect(),
            gain_range_db: public.gain_range_db,
            max_total_output_dbm: public.max_total_output_dbm,
        }
    };
    let mut elements = vec![LineElement::Amp(amp(0))];
    for (s, public) in info.spans.iter().enumerate() {
        let attenuation = link.span_attenuation_db_per_km[s].max(1e-6);
        elements.push(LineElement::Span(FiberSpan {
            length_km: lengths[s],
            attenuation_db_per_km: attenuation,
            dispersion_ps2_per_km: public.dispersion_ps2_per_km,
            gamma_per_w_km: public.gamma_per_w_km,
            lumped_losses: link
                .lumped_losses
                .iter()
                .filter(|l| link.span_of(l.position_km) == s)
                .map(|l| LumpedLoss {
                    position_km: (l.position_km - starts[s]).clamp(0.0, lengths[s]),
                    loss_db: l.loss_db,
                })
                .collect(),
        }));
        elements.push(LineElement::Amp(amp(s + 1)));
    }
    let line = LineSystem {
        id: info.id.clone(),
        owner: owner.to_string(),
        endpoints: info.endpoints.clone(),
        grid: info.grid.clone(),
        elements,
        endpoint_instruments: info.endpoint_instruments,
    };
    line.validate(grid).map_err(|e| CharacterizationError::Inconsistent(e.to_string()))?;
    Ok(line)
}
