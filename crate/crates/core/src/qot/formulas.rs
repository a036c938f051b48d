use statrs::function::erf::erfc;

use super::QotError;
use crate::model::{BerCurve, FiberSpan, ModulationFormat};
use crate::units::{db_per_km_to_neper, db_to_lin, lin_to_db, ps2_to_s2, PLANCK};

/// Dispersion below this is treated as the zero-dispersion singularity.
pub const MIN_DISPERSION_PS2_PER_KM: f64 = 0.1;

/// Nonlinear effective length (km).
pub fn effective_length(attenuation_db_per_km: f64, length_km: f64) -> f64 {
    let alpha = db_per_km_to_neper(attenuation_db_per_km);
    let x = alpha * length_km;
    if x.abs() < 1e-12 {
        return length_km;
    }
    -(-x).exp_m1() / alpha
}

/// ASE power (W) an amplifier adds in `ref_bandwidth_hz` around `carrier_hz`.
pub fn ase_power(gain_db: f64, noise_figure_db: f64, carrier_hz: f64, ref_bandwidth_hz: f64) -> f64 {
    let g = db_to_lin(gain_db);
    db_to_lin(noise_figure_db) * PLANCK * carrier_hz * (g - 1.0).max(0.0) * ref_bandwidth_hz
}

/// Incoherent GN-model NLI PSD (W/Hz) generated in one span by a uniform,
/// fully loaded WDM comb of PSD `wdm_psd` (W/Hz) over `total_bandwidth_hz`.
/// Referenced to the span input.
pub fn nli_psd_per_span(span: &FiberSpan, wdm_psd: f64, total_bandwidth_hz: f64) -> Result<f64, QotError> {
    if span.dispersion_ps2_per_km.abs() < MIN_DISPERSION_PS2_PER_KM {
        return Err(QotError::ModelDomain(format!(
            "|beta2| = {} ps^2/km is below {MIN_DISPERSION_PS2_PER_KM}",
            span.dispersion_ps2_per_km
        )));
    }
    let alpha = db_per_km_to_neper(span.attenuation_db_per_km);
    if !(alpha > 0.0) {
        return Err(QotError::ModelDomain("fiber attenuation must be positive".into()));
    }
    let beta2 = ps2_to_s2(span.dispersion_ps2_per_km.abs());
    let l_eff = effective_length(span.attenuation_db_per_km, span.length_km);
    let l_eff_a = 1.0 / alpha;
    let gamma = span.gamma_per_w_km;
    let pi = std::f64::consts::PI;
    let arg = pi * pi / 2.0 * beta2 * l_eff_a * total_bandwidth_hz * total_bandwidth_hz;
    Ok(8.0 / 27.0 * gamma * gamma * l_eff * l_eff * wdm_psd.powi(3) * arg.asinh() / (pi * beta2 * l_eff_a))
}

/// Inverse-SNR sum of independent noise contributions, in dB.
pub fn combine_snr_db(snrs_db: &[f64]) -> f64 {
    let inv: f64 = snrs_db.iter().map(|s| 1.0 / db_to_lin(*s)).sum();
    lin_to_db(1.0 / inv)
}

/// Folds transceiver noise into a line GSNR.
pub fn combine_with_transceiver(gsnr_db: f64, snr_trx_db: f64) -> f64 {
    combine_snr_db(&[gsnr_db, snr_trx_db])
}

pub fn ber_for_curve(curve: BerCurve, gsnr_db: f64) -> f64 {
    let snr = db_to_lin(gsnr_db);
    match curve {
        BerCurve::DpQpsk => 0.5 * erfc((snr / 2.0).sqrt()),
        BerCurve::Dp16Qam => 3.0 / 8.0 * erfc((snr / 10.0).sqrt()),
    }
}

/// Pre-FEC BER for a GSNR taken over the symbol-rate bandwidth.
pub fn ber_from_gsnr(format: &ModulationFormat, gsnr_db: f64) -> f64 {
    ber_for_curve(format.ber_curve, gsnr_db)
}

/// Smallest GSNR (dB) whose BER meets `fec_limit`, by bisection.
pub fn required_gsnr(format: &ModulationFormat, fec_limit: f64) -> Result<f64, QotError> {
    if !(fec_limit > 0.0 && fec_limit < 0.5) {
        return Err(QotError::NonBracketable(fec_limit));
    }
    let (mut lo, mut hi) = (-20.0, 60.0);
    let ber = |db: f64| ber_from_gsnr(format, db);
    if !(ber(lo) > fec_limit && ber(hi) < fec_limit) {
        return Err(QotError::NonBracketable(fec_limit));
    }
    // BER is strictly decreasing in GSNR.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber(mid) > fec_limit {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
