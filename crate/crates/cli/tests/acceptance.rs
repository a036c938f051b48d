//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::capability::{post_release_trials, random_run};
use common::flatness::{reduced_line_comparison, seeded_spread, spread};
use common::trials::{
    dlm_estimate, dlm_lumped_trial, field_line, gn_invariant_errors, ols_estimate, ols_line, random_line, random_nf,
    with_loss, DLM_SIGMA_DB,
};
use common::{ber_16qam, ber_qpsk, combine, g_nli, loaded_end_gsnr};
use resilink_core::characterization::fit_transceiver_noise;
use resilink_core::control::ControlPlane;
use resilink_core::model::{BerCurve, FiberSpan, ModulationFormat, Scenario};
use resilink_core::orchestrator::{run_recovery, RecoveryOutcome, StepId};
use resilink_core::qot::{
    ase_power, ber_from_gsnr, combine_with_transceiver, effective_length, nli_psd_per_span, LOADING_SYMBOL_RATE_GBD,
};
use resilink_core::telemetry::simulate_voa_sweep;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn cli_run(out: &Path, extra: &[&str]) -> std::process::Output {
    let s = scenario_path("field_trial.json");
    Command::new(env!("CARGO_BIN_EXE_resilink"))
        .args(["run", "--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .expect("resilink runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_timing() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let out = cli_run(dir.path(), &[]);
    let wall = t.elapsed().as_secs_f64();
    ensure!(out.status.code() == Some(0), "exit {:?}", out.status.code());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let steps = report["steps"].as_array().unwrap();
    let minutes: f64 = steps.iter().map(|s| s["duration_min"].as_f64().unwrap()).sum();
    let hours = report["total_duration_hours"].as_f64().unwrap();
    let published = [30.0, 20.0, 40.0, 150.0, 60.0, 60.0, 2.0, 10.0];
    let planned: Vec<f64> = steps.iter().map(|s| s["planned_duration_min"].as_f64().unwrap()).collect();
    ensure!(planned == published, "planned step durations {planned:?}");
    ensure!((minutes - 372.0).abs() < 1e-9, "total {minutes} min");
    ensure!((5.5..=6.5).contains(&hours), "{hours} h");
    ensure!(wall < 60.0, "wall clock {wall:.1} s");
    Ok(format!("372 min ({hours:.2} h), wall clock {wall:.2} s"))
}

fn c2_channel_plan() -> Verdict {
    let s = Scenario::field_trial();
    ensure!(s.grids[0].slot_count == 48 && s.grids[0].slot_spacing_ghz == 100.0, "grid {:?}", s.grids[0]);
    let dir = tempfile::tempdir().unwrap();
    ensure!(cli_run(dir.path(), &[]).status.code() == Some(0), "run failed");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let designs = report["designs"].as_array().unwrap();
    let count = |fmt: &str, gbd: f64| {
        designs.iter().filter(|d| d["format"] == fmt && (d["symbol_rate_gbd"].as_f64().unwrap() - gbd).abs() < 1e-9).count()
    };
    let (n800, n400) = (count("800g", 130.0), count("400g", 63.1));
    ensure!(designs.len() == 6 && n800 == 2 && n400 == 4, "{n800}x800G + {n400}x400G of {}", designs.len());
    let mut occupied = std::collections::BTreeMap::new();
    for d in designs {
        let first = d["slot_index"].as_u64().unwrap() as usize;
        for s in first..first + d["slot_width"].as_u64().unwrap() as usize {
            occupied.insert(s, d["demand_id"].as_str().unwrap().to_string());
        }
    }
    let (header, rows) = read_csv(&dir.path().join("received_spectrum.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (slot, role, demand) = (col("slot_index"), col("role"), col("demand_id"));
    ensure!(rows.len() == 48, "{} spectrum rows", rows.len());
    for r in &rows {
        let s: usize = r[slot].parse().unwrap();
        match occupied.get(&s) {
            Some(id) => ensure!(r[role] == "traffic" && &r[demand] == id, "slot {s}: {:?}", r),
            None => ensure!(r[role] == "dummy", "slot {s}: {:?}", r),
        }
    }
    ensure!(LOADING_SYMBOL_RATE_GBD == 50.0, "loading channels at {LOADING_SYMBOL_RATE_GBD} GBd");
    Ok(format!("2x800G (130 GBd) + 4x400G (63.1 GBd), {} traffic slots, {} dummies", occupied.len(), 48 - occupied.len()))
}

fn c3_margin() -> Verdict {
    let s = Scenario::field_trial();
    ensure!((s.parameters.design_margin_db - 1.0).abs() < 1e-12, "design margin {}", s.parameters.design_margin_db);
    let mut deltas = Vec::new();
    for seed in 0..100 {
        let r = run_recovery(&s, seed);
        ensure!(r.outcome == RecoveryOutcome::Succeeded, "seed {seed}: {:?} {:?}", r.outcome, r.failure);
        for lp in &r.lightpaths {
            let d = lp.measured_gsnr_db - lp.predicted_gsnr_db;
            ensure!((d - lp.delta_db).abs() < 1e-9, "seed {seed}: reported delta {} vs {d}", lp.delta_db);
            deltas.push(d);
        }
    }
    let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let med = median(deltas.clone());
    ensure!(min >= -0.2, "min delta {min:.3} dB");
    ensure!((0.0..=1.5).contains(&med), "median delta {med:.3} dB");
    Ok(format!("{} lightpaths over 100 seeds: min {min:.3} dB, median {med:.3} dB", deltas.len()))
}

fn c4_flattening() -> Verdict {
    let mut worst_gain = f64::INFINITY;
    for seed in 0..8 {
        let (before, after) = seeded_spread(seed);
        ensure!(after < before, "seeded line {seed}: spread {before:.3} -> {after:.3} dB");
        worst_gain = worst_gain.min(before - after);
    }
    let s = Scenario::field_trial();
    let r = run_recovery(&s, s.seed);
    let opt = r.optimization.ok_or("no optimization in the default run")?;
    let (line, grid) = field_line();
    let default_spread = spread(&loaded_end_gsnr(&line, &grid, &opt.config));
    ensure!(default_spread <= 1.0, "default scenario spread {default_spread:.3} dB");
    let mut worst_gap: f64 = 0.0;
    for seed in [1, 2, 3] {
        let (got, want) = reduced_line_comparison(seed);
        worst_gap = worst_gap.max((got - want).abs());
        ensure!((got - want).abs() <= 0.25, "2-amp line {seed}: optimizer {got:.3} vs grid {want:.3}");
    }
    Ok(format!(
        "8/8 seeded lines flatter (least gain {worst_gain:.2} dB), default spread {default_spread:.3} dB, grid gap {worst_gap:.3} dB"
    ))
}

fn c5_dlm() -> Verdict {
    let mut located = 0;
    for seed in 0..100 {
        let (pos, est) = dlm_lumped_trial(seed, DLM_SIGMA_DB);
        located += usize::from(
            est.lumped_losses.len() == 1
                && (est.lumped_losses[0].position_km - pos).abs() <= 1.0
                && (est.lumped_losses[0].loss_db - 3.0).abs() <= 0.5,
        );
    }
    let (line, grid) = field_line();
    let clean = (0..100).filter(|seed| dlm_estimate(&line, &grid, DLM_SIGMA_DB, 1000 + seed).lumped_losses.is_empty()).count();
    let exact = dlm_estimate(&with_loss(&line, 150.3, 3.0), &grid, 0.0, 0);
    ensure!(exact.lumped_losses.len() == 1, "noiseless events {:?}", exact.lumped_losses);
    let e = &exact.lumped_losses[0];
    ensure!((e.position_km - 150.3).abs() <= 0.01 && (e.loss_db - 3.0).abs() <= 0.01, "noiseless event {e:?}");
    ensure!(located >= 95, "{located}/100 losses localized");
    ensure!(clean >= 99, "{clean}/100 clean profiles without false events");
    Ok(format!("{located}/100 localized, {clean}/100 clean, noiseless exact"))
}

fn c6_ols() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (line, grid) = ols_line(random_nf(seed));
        let est = ols_estimate(&line, &grid, 8, 0.1, seed);
        for (e, amp) in est.amps.iter().zip(line.amps()) {
            worst = worst.max((e.noise_figure_db - amp.noise_figure_db).abs());
        }
    }
    let (line, grid) = ols_line(random_nf(0));
    let clean = ols_estimate(&line, &grid, 8, 0.0, 0);
    let clean_err = clean.amps.iter().zip(line.amps()).map(|(e, a)| (e.noise_figure_db - a.noise_figure_db).abs()).fold(0.0, f64::max);
    ensure!(worst <= 0.5, "worst NF error {worst:.3} dB");
    ensure!(clean_err <= 0.01, "noiseless NF error {clean_err:.4} dB");
    Ok(format!("worst NF error {worst:.3} dB over 100 seeds, noiseless {clean_err:.1e} dB"))
}

fn c7_transceiver() -> Verdict {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/voa_sweep_seed7.json");
    let golden: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let truth = golden["truth_snr_trx_db"].as_f64().unwrap();
    let points = golden["points"].as_array().unwrap();
    let att: Vec<f64> = points.iter().map(|p| p["attenuation_db"].as_f64().unwrap()).collect();
    let mut port = Scenario::field_trial().transceivers[0].clone();
    port.snr_trx_true_db = truth;
    let sweep = |noise: f64| {
        simulate_voa_sweep(
            &port,
            &ModulationFormat::dp16qam_400g(),
            &att,
            golden["input_snr_db"].as_f64().unwrap(),
            golden["rx_power_dbm"].as_f64().unwrap(),
            noise,
            golden["seed"].as_u64().unwrap(),
        )
        .unwrap()
    };
    let mut noisy = sweep(golden["counting_noise"].as_f64().unwrap());
    for (p, g) in noisy.points.iter_mut().zip(points) {
        p.ber = g["ber_seed7"].as_f64().unwrap();
    }
    let fit = fit_transceiver_noise(&noisy).map_err(|e| e.to_string())?;
    let clean = fit_transceiver_noise(&sweep(0.0)).map_err(|e| e.to_string())?;
    ensure!((fit.snr_trx_db - truth).abs() <= 0.3, "golden fit {:.3} dB", fit.snr_trx_db);
    ensure!((clean.snr_trx_db - truth).abs() <= 0.05, "noiseless fit {:.3} dB", clean.snr_trx_db);
    Ok(format!("golden {:.3} dB, noiseless {:.4} dB (truth {truth} dB)", fit.snr_trx_db, clean.snr_trx_db))
}

fn c8_qot() -> Verdict {
    let mut worst: f64 = 0.0;
    for (g, nf, f) in [(11.2, 5.0, 193.1), (20.0, 5.5, 191.35), (25.0, 7.0, 196.05), (0.5, 3.5, 194.4)] {
        worst = worst.max(rel(ase_power(g, nf, f * 1e12, 12.5e9), common::ase_power(g, nf, f * 1e12, 12.5e9)));
    }
    for (a, l) in [(0.2, 56.0), (0.25, 100.0), (0.17, 120.0), (0.3, 1.0)] {
        worst = worst.max(rel(effective_length(a, l), common::effective_length(a, l)));
    }
    for (l, a, b2, gm, gw, bw) in [(56.0, 0.2, 21.7, 1.3, 1e-14, 4.8e12), (100.0, 0.22, 20.0, 1.2, 3e-14, 4e12), (40.0, 0.18, -26.0, 0.8, 2e-14, 6e12)] {
        let sp = FiberSpan { length_km: l, attenuation_db_per_km: a, dispersion_ps2_per_km: b2, gamma_per_w_km: gm, lumped_losses: vec![] };
        worst = worst.max(rel(nli_psd_per_span(&sp, gw, bw).unwrap(), g_nli(a, l, b2, gm, gw, bw)));
    }
    for (x, y) in [(20.0, 25.0), (18.0, 18.0), (30.0, 15.0), (-3.0, 4.0)] {
        worst = worst.max(rel(combine_with_transceiver(x, y), combine(&[x, y])));
    }
    let qam = ModulationFormat::dp16qam_400g();
    let mut qpsk = qam.clone();
    qpsk.ber_curve = BerCurve::DpQpsk;
    for s in [6.0, 10.0, 14.0, 17.0, 20.0] {
        worst = worst.max(rel(ber_from_gsnr(&qam, s), ber_16qam(s)));
        worst = worst.max(rel(ber_from_gsnr(&qpsk, s), ber_qpsk(s)));
    }
    ensure!(worst < 1e-6, "worst fixture relative error {worst:e}");
    let (line, grid) = field_line();
    let walk_err = {
        use resilink_core::qot::{propagate_gsnr, ChannelPlan, LineConfig};
        let c = LineConfig::from_line(&line, &grid, 0.0);
        let end = propagate_gsnr(&line, &grid, &c, &ChannelPlan::loaded(&grid, &c)).unwrap().pop().unwrap();
        end.records.iter().zip(loaded_end_gsnr(&line, &grid, &c)).map(|(r, w)| rel(r.gsnr_db, w)).fold(0.0, f64::max)
    };
    ensure!(walk_err < 1e-6, "field-trial walk relative error {walk_err:e}");
    let (mut rise, mut cubic): (f64, f64) = (0.0, 0.0);
    for seed in 0..1000 {
        let (line, config) = random_line(seed);
        let (r, c) = gn_invariant_errors(&line, &config);
        rise = rise.max(r);
        cubic = cubic.max(c);
    }
    ensure!(rise <= 1e-9, "accumulated GSNR rose by {rise:e} dB");
    ensure!(cubic < 1e-9, "cubic law off by {cubic:e} dB");
    Ok(format!("fixtures within {worst:.1e}, walk {walk_err:.1e}; 1000 random lines: monotone, cubic within {cubic:.1e} dB"))
}

fn c9_isolation() -> Verdict {
    let (cp, tally) = random_run(2024, 10_000);
    let accepted: usize = tally.accepted.values().sum();
    let (attempts, leaked) = post_release_trials(200, 9);
    ensure!(leaked == 0, "{leaked}/{attempts} post-release operations accepted");
    let jsonl = cp.audit_jsonl();
    let records = ControlPlane::parse_audit(&jsonl).map_err(|e| e.to_string())?;
    let again = ControlPlane::replay(cp.inventory().clone(), &records)?;
    ensure!(again.canonical_json() == cp.canonical_json(), "replayed state differs");
    ensure!(again.audit_jsonl() == jsonl, "replayed audit log differs");
    Ok(format!(
        "10000 ops ({accepted} accepted, all justified), {attempts}/{attempts} post-release denied, replay byte-exact"
    ))
}

fn with_fuel(hours: f64) -> Scenario {
    let mut s = Scenario::field_trial();
    s.disaster.fuel_hours = hours;
    s.disaster.fuel_override = true;
    s
}

fn c10_deadline() -> Verdict {
    let ok = run_recovery(&with_fuel(8.0), 7);
    ensure!(ok.outcome == RecoveryOutcome::Succeeded, "8 h: {:?}", ok.outcome);
    let short = run_recovery(&with_fuel(6.0), 7);
    ensure!(
        short.outcome == RecoveryOutcome::DeadlineExceeded && short.failing_step == Some(StepId::DlmValidate),
        "6 h: {:?} at {:?}",
        short.outcome,
        short.failing_step
    );
    // 6.2 h is exactly the 372 min the workflow needs; exhaustion at the
    // moment the last step ends still interrupts it.
    let edge = run_recovery(&with_fuel(6.2), 7);
    ensure!(
        edge.outcome == RecoveryOutcome::DeadlineExceeded && edge.failing_step == Some(StepId::Migrate),
        "6.2 h: {:?} at {:?}",
        edge.outcome,
        edge.failing_step
    );
    let spare = run_recovery(&with_fuel(6.2 + 1.0 / 3600.0), 7);
    ensure!(spare.outcome == RecoveryOutcome::Succeeded, "6.2 h + 1 s: {:?}", spare.outcome);
    Ok("8 h succeeded; 6 h stopped in dlm_validate; 6.2 h stopped in migrate; 6.2 h + 1 s succeeded".into())
}

fn c11_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ensure!(cli_run(d.path(), &["--seed", "11"]).status.code() == Some(0), "run failed");
    }
    let mut files: Vec<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    ensure!(files.iter().filter(|n| n.ends_with(".csv")).count() == 4, "outputs {files:?}");
    for f in &files {
        ensure!(fs::read(a.path().join(f)).unwrap() == fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    Ok(format!("report.json, 4 CSVs and {} artifacts byte-identical", files.len() - 5))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("end-to-end timing", c1_timing),
        ("channel plan", c2_channel_plan),
        ("conservative margin", c3_margin),
        ("flattening", c4_flattening),
        ("DLM estimator", c5_dlm),
        ("OLS calibration", c6_ols),
        ("transceiver fit", c7_transceiver),
        ("QoT oracle equivalence", c8_qot),
        ("isolation and safety", c9_isolation),
        ("deadline logic", c10_deadline),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {why} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
