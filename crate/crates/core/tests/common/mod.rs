//! Independent reference implementations used by the integration and
//! acceptance tests. The functions in this file do not call the library's
//! physics; the formulas are written out again from their textbook form.
//! `trials` drives the library's telemetry-to-estimate pipelines on
//! synthetic lines with known truth.

#![allow(dead_code)]

pub mod capability;
pub mod flatness;
pub mod trials;

use resilink_core::model::{LineElement, LineSystem, SpectrumGrid};
use resilink_core::qot::LineConfig;

pub const H_PLANCK: f64 = 6.626_070_15e-34;

pub fn lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// erfc by composite Simpson quadrature of 2/sqrt(pi) * exp(-t^2) on
/// [x, x + 12]; the tail beyond is below 1e-60 of the value for x >= 0.
pub fn erfc(x: f64) -> f64 {
    assert!(x >= 0.0);
    let n = 60_000;
    let (a, b) = (x, x + 12.0);
    let h = (b - a) / n as f64;
    let f = |t: f64| (-(t * t - x * x)).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    // Factor exp(-x^2) out of the integrand to keep it O(1).
    2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * s * h / 3.0
}

pub fn ber_16qam(snr_db: f64) -> f64 {
    0.375 * erfc((lin(snr_db) / 10.0).sqrt())
}

pub fn ber_qpsk(snr_db: f64) -> f64 {
    0.5 * erfc((lin(snr_db) / 2.0).sqrt())
}

/// Field attenuation (1/km) from dB/km.
pub fn alpha(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0
}

pub fn effective_length(db_per_km: f64, length_km: f64) -> f64 {
    let a = alpha(db_per_km);
    if a == 0.0 {
        length_km
    } else {
        (1.0 - (-a * length_km).exp()) / a
    }
}

pub fn ase_power(gain_db: f64, nf_db: f64, carrier_hz: f64, bandwidth_hz: f64) -> f64 {
    lin(nf_db) * H_PLANCK * carrier_hz * (lin(gain_db) - 1.0) * bandwidth_hz
}

/// GN closed form in SI units (m, s, W).
pub fn g_nli(db_per_km: f64, length_km: f64, beta2_ps2_km: f64, gamma_w_km: f64, g_wdm: f64, b_wdm: f64) -> f64 {
    let a_m = alpha(db_per_km) / 1e3;
    let l_eff = effective_length(db_per_km, length_km) * 1e3;
    let l_eff_a = 1.0 / a_m;
    let beta2 = beta2_ps2_km.abs() * 1e-24 / 1e3;
    let gamma = gamma_w_km / 1e3;
    let pi = std::f64::consts::PI;
    8.0 / 27.0 * gamma * gamma * l_eff * l_eff * g_wdm.powi(3) * (pi * pi / 2.0 * beta2 * l_eff_a * b_wdm * b_wdm).asinh()
        / (pi * beta2 * l_eff_a)
}

pub fn combine(snrs_db: &[f64]) -> f64 {
    db(1.0 / snrs_db.iter().map(|s| 1.0 / lin(*s)).sum::<f64>())
}

/// Smallest SNR meeting `ber_limit` for a decreasing BER curve, bisected
/// to 1e-9 dB.
pub fn required_snr(ber: impl Fn(f64) -> f64, ber_limit: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 40.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ber(mid) > ber_limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// End-of-line GSNR per slot of a line fully loaded with one 50 GBd
/// channel per slot, re-derived from the model description: launch,
/// then per span NLI from the span-input mean PSD and loss, per amplifier
/// gain `g + tilt * f + ripple` with ASE `NF h f (G - 1)` per Hz.
pub fn loaded_end_gsnr(line: &LineSystem, grid: &SpectrumGrid, config: &LineConfig) -> Vec<f64> {
    let n = grid.slot_count;
    let spacing = grid.slot_spacing_ghz * 1e9;
    let b_wdm = spacing * n as f64;
    let freq = |s: usize| (grid.anchor_thz * 1e12) + spacing * s as f64;
    let fnorm = |s: usize| if n > 1 { s as f64 / (n - 1) as f64 - 0.5 } else { 0.0 };
    let mut sig: Vec<f64> = config.launch_dbm.iter().map(|p| 1e-3 * lin(*p)).collect();
    let mut ase = vec![0.0; n];
    let mut nli = vec![0.0; n];
    let mut k = 0;
    for e in &line.elements {
        match e {
            LineElement::Span(sp) => {
                let g_wdm = sig.iter().sum::<f64>() / b_wdm;
                let add = g_nli(sp.attenuation_db_per_km, sp.length_km, sp.dispersion_ps2_per_km, sp.gamma_per_w_km, g_wdm, b_wdm);
                let loss_db = sp.attenuation_db_per_km * sp.length_km
                    + sp.lumped_losses.iter().map(|l| l.loss_db).sum::<f64>();
                let t = lin(-loss_db);
                for s in 0..n {
                    sig[s] *= t;
                    ase[s] *= t;
                    nli[s] = (nli[s] + add) * t;
                }
            }
            LineElement::Amp(a) => {
                let set = config.amps[k];
                k += 1;
                for s in 0..n {
                    let ripple = a.gain_ripple_db.get(s).copied().unwrap_or(0.0);
                    let g = lin(set.gain_db + set.tilt_db * fnorm(s) + ripple);
                    sig[s] *= g;
                    nli[s] *= g;
                    ase[s] = ase[s] * g + lin(a.noise_figure_db) * H_PLANCK * freq(s) * (g - 1.0).max(0.0);
                }
            }
        }
    }
    (0..n).map(|s| db(sig[s] / ((ase[s] + nli[s]) * 50e9)).min(60.0)).collect()
}
