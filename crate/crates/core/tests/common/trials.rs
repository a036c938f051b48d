//! Seeded synthetic experiments: ground truth in, estimates out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilink_core::characterization::{analyze_dlm_profile, calibrate_ols, ols_probe_configs, LinkEstimate, OlsEstimate, OlsProbe};
use resilink_core::model::{Edfa, FiberSpan, LineElement, LineSystem, LumpedLoss, Scenario, SpectrumGrid};
use resilink_core::qot::{ChannelPlan, LineConfig};
use resilink_core::telemetry::{read_amp_power_monitors, simulate_dlm_capture, simulate_osa_spectrum};

pub const DLM_SIGMA_DB: f64 = 0.2;
pub const DLM_THRESHOLD_DB: f64 = 0.6;
pub const DLM_SPACING_KM: f64 = 0.1;

pub fn field_line() -> (LineSystem, SpectrumGrid) {
    let s = Scenario::field_trial();
    (s.line("longhaul").unwrap().clone(), s.grids[0].clone())
}

/// Puts a lumped loss at `position_km` from the line start.
pub fn with_loss(line: &LineSystem, position_km: f64, loss_db: f64) -> LineSystem {
    let mut line = line.clone();
    let mut start = 0.0;
    for sp in line.spans_mut() {
        if position_km < start + sp.length_km {
            sp.lumped_losses.push(LumpedLoss { position_km: position_km - start, loss_db });
            break;
        }
        start += sp.length_km;
    }
    line
}

pub fn dlm_estimate(line: &LineSystem, grid: &SpectrumGrid, sigma: f64, seed: u64) -> LinkEstimate {
    let config = LineConfig::from_line(line, grid, 0.0);
    let plan = ChannelPlan::loaded(grid, &config);
    let p = simulate_dlm_capture(line, grid, &config, &plan, 20, DLM_SPACING_KM, sigma, seed).unwrap();
    analyze_dlm_profile(&p, DLM_THRESHOLD_DB).unwrap()
}

/// One 3 dB loss at a seeded uniform position on the field-trial line.
/// Returns the true position and the estimate.
pub fn dlm_lumped_trial(seed: u64, sigma: f64) -> (f64, LinkEstimate) {
    let (line, grid) = field_line();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = rng.random_range(0.0..line.total_length_km());
    (pos, dlm_estimate(&with_loss(&line, pos, 3.0), &grid, sigma, seed))
}

/// Field-trial line with the four in-line amplifiers' NF set to `nf_db`.
pub fn ols_line(nf_db: [f64; 4]) -> (LineSystem, SpectrumGrid) {
    let (mut line, grid) = field_line();
    let n = line.amp_count();
    for (i, amp) in line.amps_mut().enumerate() {
        if i > 0 && i + 1 < n {
            amp.noise_figure_db = nf_db[i - 1];
        }
    }
    (line, grid)
}

pub fn ols_estimate(line: &LineSystem, grid: &SpectrumGrid, probes: usize, sigma: f64, seed: u64) -> OlsEstimate {
    let base = LineConfig::from_line(line, grid, -15.0);
    let probes: Vec<OlsProbe> = ols_probe_configs(&line.public_info(), &base, probes)
        .into_iter()
        .enumerate()
        .map(|(k, config)| {
            let plan = ChannelPlan::loaded(grid, &config);
            let s = seed.wrapping_mul(1000).wrapping_add(k as u64);
            OlsProbe {
                spectrum: simulate_osa_spectrum(line, grid, &config, &plan, &line.endpoints[1], sigma, s).unwrap(),
                readings: read_amp_power_monitors(line, grid, &config, &plan, sigma, s).unwrap(),
                config,
                plan,
            }
        })
        .collect();
    calibrate_ols(&line.public_info(), grid, &probes).unwrap()
}

/// Four ILA noise figures drawn uniformly from [4.5, 6.5] dB.
pub fn random_nf(seed: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e66);
    [0; 4].map(|_| rng.random_range(4.5..6.5))
}

/// Random line on the 48-slot grid: 1 to 6 spans of 40 to 100 km, each
/// followed by an amplifier within 2 dB of the span loss, with per-slot
/// ripple, tilt and optional lumped losses. Flat launch of -4 to 3 dBm.
pub fn random_line(seed: u64) -> (LineSystem, LineConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = SpectrumGrid::c_band("c");
    let mut elements = vec![LineElement::Amp(Edfa::new("boost", rng.random_range(4.0..8.0), rng.random_range(5.0..6.5)))];
    for i in 0..rng.random_range(1..7) {
        let length_km = rng.random_range(40.0..100.0);
        let mut sp = FiberSpan {
            length_km,
            attenuation_db_per_km: rng.random_range(0.18..0.25),
            dispersion_ps2_per_km: rng.random_range(15.0..25.0),
            gamma_per_w_km: rng.random_range(1.0..1.6),
            lumped_losses: Vec::new(),
        };
        if rng.random_bool(0.5) {
            sp.lumped_losses.push(LumpedLoss {
                position_km: rng.random_range(0.1..0.9) * length_km,
                loss_db: rng.random_range(0.5..3.0),
            });
        }
        let gain = (sp.total_loss_db() + rng.random_range(-2.0..2.0)).max(1.0);
        let mut amp = Edfa::new(format!("amp-{i}"), gain, rng.random_range(4.0..7.0));
        amp.tilt_db = rng.random_range(-1.0..1.0);
        amp.gain_ripple_db = (0..grid.slot_count).map(|_| rng.random_range(-0.3..0.3)).collect();
        amp.gain_range_db = [0.0, 40.0];
        elements.push(LineElement::Span(sp));
        elements.push(LineElement::Amp(amp));
    }
    let line = LineSystem {
        id: "rand".into(),
        owner: "o".into(),
        endpoints: ["a".into(), "b".into()],
        grid: "c".into(),
        elements,
        endpoint_instruments: Default::default(),
    };
    let config = LineConfig::from_line(&line, &grid, rng.random_range(-4.0..3.0));
    (line, config)
}

/// Largest violation of accumulated-GSNR monotonicity and of the cubic
/// NLI law (+1 dB launch gives -2 dB SNR_NLI at every point past the
/// first span) on a line from [`random_line`].
pub fn gn_invariant_errors(line: &LineSystem, config: &LineConfig) -> (f64, f64) {
    use resilink_core::qot::propagate_gsnr;
    let grid = SpectrumGrid::c_band("c");
    let base = propagate_gsnr(line, &grid, config, &ChannelPlan::loaded(&grid, config)).unwrap();
    let mut rise: f64 = 0.0;
    for w in base.windows(2) {
        for (a, b) in w[0].records.iter().zip(&w[1].records) {
            rise = rise.max(b.gsnr_db - a.gsnr_db);
        }
    }
    let mut up = config.clone();
    up.launch_dbm.iter_mut().for_each(|p| *p += 1.0);
    let more = propagate_gsnr(line, &grid, &up, &ChannelPlan::loaded(&grid, &up)).unwrap();
    let mut cubic: f64 = 0.0;
    for (a, b) in base.iter().zip(&more).skip(2) {
        for (ra, rb) in a.records.iter().zip(&b.records) {
            cubic = cubic.max((rb.snr_nli_db - ra.snr_nli_db + 2.0).abs());
        }
    }
    (rise, cubic)
}
