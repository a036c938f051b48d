mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};
use resilink_core::model::{validate_scenario, Scenario};
use resilink_core::optimizer::OptimizeError;
use resilink_core::orchestrator::{
    act_calibrate, act_dlm_validate, act_migrate, act_optimize, execute_step, planned_start_ms,
    run_recovery_with_artifacts, ArtifactStore, Context, OrchestratorError, RecoveryOutcome, RecoveryReport, StepId,
    LIGHTPATHS_FILE, MIGRATION_FILE, OLS_FILE, OPTIMIZATION_FILE,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DEADLINE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Recovery workflow runner for borrowed optical line systems.
#[derive(Debug, Parser)]
#[command(name = "resilink", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for artifacts, report and figures.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for all simulated measurements (default: the scenario's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generator fuel at the affected site, in hours. Lifts the 8 to 24 h
    /// envelope check.
    #[arg(long, global = true)]
    fuel_hours: Option<f64>,
    /// Also draw each figure as SVG.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Whole workflow: report.json, figures and every artifact.
    Run,
    /// Transceiver sweeps, DLM capture and analysis, OLS probe telemetry.
    Characterize,
    /// Amplifier noise figure and ripple from the OLS probes.
    Calibrate,
    /// Twin assembly, line optimization and DLM validation.
    Optimize,
    /// Lightpath design, leasing, port configuration and validation.
    Provision,
    /// Database migration over the provisioned capacity.
    Migrate,
    /// Report and figures from the artifacts in --out.
    Report,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Step(OrchestratorError),
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        CliError::Step(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESILINK_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Step(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                OrchestratorError::Optimize(OptimizeError::Invalid(_)) => EXIT_USAGE,
                OrchestratorError::Infeasible(_) | OrchestratorError::Optimize(_) => EXIT_INFEASIBLE,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let path = cli.scenario.as_ref().ok_or_else(|| CliError::Usage("--scenario is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut scenario = validate_scenario(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(h) = cli.fuel_hours {
        scenario.disaster.fuel_hours = h;
        scenario.disaster.fuel_override = true;
        scenario.validate().map_err(|e| CliError::Usage(format!("--fuel-hours: {e}")))?;
    }
    Ok(scenario)
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let scenario = load_scenario(cli)?;
    let out = cli.out.as_ref().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let seed = cli.seed.unwrap_or(scenario.seed);
    let store = ArtifactStore::new(out);

    if let Cmd::Run = cli.command {
        let (report, art) = run_recovery_with_artifacts(&scenario, seed);
        store.save(&art)?;
        return finish(out, &report, cli.svg);
    }
    if let Cmd::Report = cli.command {
        let report = store.report(&scenario, seed)?;
        return finish(out, &report, cli.svg);
    }

    let ctx = Context::new(&scenario, seed)?;
    let mut art = store.load()?;
    let at = |step| planned_start_ms(&scenario, step);
    let written: &[&str] = match cli.command {
        Cmd::Characterize => {
            for step in [StepId::TrxCharacterization, StepId::DlmMeasure, StepId::DlmAnalyze, StepId::OlsMeasure] {
                execute_step(&ctx, step, &mut art, at(step))?;
            }
            &["trx_estimates.json", "link_estimate.json", "ols_probes.json"]
        }
        Cmd::Calibrate => {
            act_calibrate(&ctx, &mut art)?;
            &[OLS_FILE]
        }
        Cmd::Optimize => {
            act_optimize(&ctx, &mut art)?;
            act_dlm_validate(&ctx, &mut art)?;
            &[OPTIMIZATION_FILE]
        }
        Cmd::Provision => {
            execute_step(&ctx, StepId::TrxConfigure, &mut art, at(StepId::TrxConfigure))?;
            &[LIGHTPATHS_FILE]
        }
        Cmd::Migrate => {
            act_migrate(&ctx, &mut art, at(StepId::Migrate))?;
            &[MIGRATION_FILE]
        }
        Cmd::Run | Cmd::Report => unreachable!("handled above"),
    };
    store.save(&art)?;
    for f in written {
        println!("wrote {}", out.join(f).display());
    }
    Ok(EXIT_OK)
}

/// Writes report.json and the figures, prints a summary, and maps the
/// outcome to the exit code.
fn finish(out: &Path, report: &RecoveryReport, svg: bool) -> Result<u8, CliError> {
    let write = |name: &str, text: &str| {
        fs::write(out.join(name), text).map_err(|e| CliError::Usage(format!("{}: {e}", out.join(name).display())))
    };
    write("report.json", &report.to_canonical_json())?;
    let mut warnings = 0;
    for (name, table) in report.figures.entries() {
        match table {
            Some(t) => {
                write(&format!("{name}.csv"), &t.to_csv())?;
                if svg {
                    write(&format!("{name}.svg"), &svg::figure(name, t))?;
                }
                info!("wrote {name}");
            }
            None => {
                warn!("figure {name} skipped: its report section is incomplete");
                warnings += 1;
            }
        }
    }
    println!(
        "outcome: {}  total: {:.2} h  lightpaths: {}  warnings: {}",
        report.outcome.as_str(),
        report.total_duration_hours,
        report.lightpaths.len(),
        warnings
    );
    if let (Some(step), Some(why)) = (report.failing_step, &report.failure) {
        println!("stopped at {}: {why}", step.as_str());
    }
    Ok(match report.outcome {
        RecoveryOutcome::Succeeded | RecoveryOutcome::Incomplete => EXIT_OK,
        RecoveryOutcome::DeadlineExceeded => EXIT_DEADLINE,
        RecoveryOutcome::Infeasible => EXIT_INFEASIBLE,
    })
}
