//! Flatness objective and the exhaustive grid reference for a reduced
//! two-amplifier line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilink_core::model::{Edfa, FiberSpan, LineSystem, Scenario, SpectrumGrid};
use resilink_core::optimizer::{optimize_line, optimize_with_bounds, OptimizeOptions};
use resilink_core::qot::{AmpSetting, LineConfig};

use super::loaded_end_gsnr;

pub const WEIGHT: f64 = 0.5;

pub fn objective(gsnr: &[f64]) -> f64 {
    let lo = gsnr.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gsnr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo - WEIGHT * (hi - lo)
}

pub fn spread(gsnr: &[f64]) -> f64 {
    gsnr.iter().copied().fold(f64::NEG_INFINITY, f64::max) - gsnr.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn rippled(id: &str, gain: f64, nf: f64, rng: &mut ChaCha8Rng) -> Edfa {
    let mut a = Edfa::new(id, gain, nf);
    let (amp, cycles, phase, slope) =
        (rng.random_range(0.05..0.2), rng.random_range(0.5..2.5), rng.random_range(0.0..6.3), rng.random_range(-0.8..0.8));
    let raw: Vec<f64> = (0..48)
        .map(|s| amp * (std::f64::consts::TAU * cycles * s as f64 / 48.0 + phase).sin() + slope * (s as f64 / 47.0 - 0.5))
        .collect();
    let mean = raw.iter().sum::<f64>() / 48.0;
    a.gain_ripple_db = raw.into_iter().map(|r| r - mean).collect();
    a.max_total_output_dbm = 40.0;
    a
}

pub fn reduced_line(seed: u64) -> LineSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LineSystem::from_parts(
        "reduced",
        "op",
        ["a", "b"],
        "c",
        rippled("boost", 15.0, 5.5, &mut rng),
        vec![FiberSpan::smf(80.0)],
        Vec::new(),
        rippled("pre", 16.0, 5.0, &mut rng),
    )
}

pub fn config(grid: &SpectrumGrid, offset: f64, launch_tilt: f64, pre_tilt: f64) -> LineConfig {
    let mut c = LineConfig {
        amps: vec![AmpSetting { gain_db: 15.0, tilt_db: 0.0 }, AmpSetting { gain_db: 16.0, tilt_db: pre_tilt }],
        launch_dbm: Vec::new(),
    };
    c.set_launch_profile(grid, offset, launch_tilt);
    c
}

/// Exhaustive 0.25 dB grid over launch offset, launch tilt and preamp tilt
/// with both gains and the booster tilt held.
pub fn grid_oracle(line: &LineSystem, grid: &SpectrumGrid) -> f64 {
    let steps = |lo: f64, hi: f64| {
        let n = ((hi - lo) / 0.25).round() as usize;
        (0..=n).map(move |k| lo + 0.25 * k as f64)
    };
    let mut best = f64::NEG_INFINITY;
    for o in steps(-10.0, 4.0) {
        for lt in steps(-3.0, 3.0) {
            for pt in steps(-3.0, 3.0) {
                best = best.max(objective(&loaded_end_gsnr(line, grid, &config(grid, o, lt, pt))));
            }
        }
    }
    best
}

/// Optimizer and grid objectives on the reduced line of `seed`.
pub fn reduced_line_comparison(seed: u64) -> (f64, f64) {
    let grid = SpectrumGrid::c_band("c");
    let line = reduced_line(seed);
    let options = OptimizeOptions { flatness_weight: WEIGHT, output_headroom_db: 0.0, ..Default::default() };
    let bounds = vec![[-10.0, 4.0], [-3.0, 3.0], [15.0, 15.0], [0.0, 0.0], [16.0, 16.0], [-3.0, 3.0]];
    let res = optimize_with_bounds(&line, &grid, &config(&grid, -5.0, 0.0, 0.0), &options, &bounds).unwrap();
    (objective(&loaded_end_gsnr(&line, &grid, &res.config)), grid_oracle(&line, &grid))
}

/// End-of-line GSNR spread of a field-trial line re-rippled from `seed`,
/// before (flat launch, current settings) and after optimization.
pub fn seeded_spread(seed: u64) -> (f64, f64) {
    let s = Scenario::field_trial();
    let grid = s.grids[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let mut line = s.line("longhaul").unwrap().clone();
    for amp in line.amps_mut() {
        let fresh = rippled(&amp.id, amp.gain_db, amp.noise_figure_db, &mut rng);
        amp.gain_ripple_db = fresh.gain_ripple_db;
        amp.tilt_db = rng.random_range(-0.5..0.5);
    }
    let flat = LineConfig::from_line(&line, &grid, -2.0);
    let before = spread(&loaded_end_gsnr(&line, &grid, &flat));
    let res = optimize_line(&line, &grid, &flat, &OptimizeOptions::default()).unwrap();
    (before, spread(&loaded_end_gsnr(&line, &grid, &res.config)))
}
