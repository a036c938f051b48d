use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::clock::{fuel_check, hours_to_ms, minutes_to_ms, FuelStatus, MS_PER_MIN};
use super::report::{build_report, RecoveryOutcome, RecoveryReport};
use super::workflow::*;
use super::OrchestratorError;
use crate::model::{PowerState, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    TrxCharacterization,
    DlmMeasure,
    DlmAnalyze,
    OlsMeasure,
    OlsAnalyze,
    DlmValidate,
    TrxConfigure,
    Migrate,
}

impl StepId {
    pub const ALL: [StepId; 8] = [
        StepId::TrxCharacterization,
        StepId::DlmMeasure,
        StepId::DlmAnalyze,
        StepId::OlsMeasure,
        StepId::OlsAnalyze,
        StepId::DlmValidate,
        StepId::TrxConfigure,
        StepId::Migrate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepId::TrxCharacterization => "trx_characterization",
            StepId::DlmMeasure => "dlm_measure",
            StepId::DlmAnalyze => "dlm_analyze",
            StepId::OlsMeasure => "ols_measure",
            StepId::OlsAnalyze => "ols_analyze",
            StepId::DlmValidate => "dlm_validate",
            StepId::TrxConfigure => "trx_configure",
            StepId::Migrate => "migrate",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn planned_duration_ms(self, scenario: &Scenario) -> u64 {
        minutes_to_ms(scenario.workflow_durations.as_array()[self.index()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Completed,
    /// Fuel ran out before the step finished.
    Interrupted,
    Failed,
    NotStarted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub id: StepId,
    pub status: StepStatus,
    pub planned_duration_min: f64,
    pub started_at_ms: u64,
    pub ended_at_ms: u64,
    pub duration_ms: u64,
    pub started_at_min: f64,
    pub ended_at_min: f64,
    pub duration_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl StepRecord {
    fn new(id: StepId, scenario: &Scenario, status: StepStatus, start: u64, end: u64, detail: Option<String>) -> Self {
        let min = |ms: u64| ms as f64 / MS_PER_MIN as f64;
        Self {
            id,
            status,
            planned_duration_min: scenario.workflow_durations.as_array()[id.index()],
            started_at_ms: start,
            ended_at_ms: end,
            duration_ms: end - start,
            started_at_min: min(start),
            ended_at_min: min(end),
            duration_min: min(end - start),
            detail,
        }
    }
}

/// What running one step's work produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepExec {
    /// Work finished; the step lasts at least this long.
    Done { min_duration_ms: u64 },
    /// Work not available (for example, an artifact not produced yet).
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub steps: Vec<StepRecord>,
    pub outcome: RecoveryOutcome,
    pub failing_step: Option<StepId>,
    pub failure: Option<String>,
    /// Field time at which the affected site loses power, if it ever does.
    pub fuel_deadline_ms: Option<u64>,
    pub total_ms: u64,
}

/// Start of `step` when every earlier step takes its planned duration.
pub fn planned_start_ms(scenario: &Scenario, step: StepId) -> u64 {
    StepId::ALL[..step.index()].iter().map(|s| s.planned_duration_ms(scenario)).sum()
}

/// Drives the eight steps in order on the field clock. `exec` does a step's
/// work at the given start time. Fuel is checked at every step end: a step
/// that would end at or after exhaustion is interrupted at the exhaustion
/// time and the rest never start.
pub fn run_timeline(
    scenario: &Scenario,
    artifacts: &mut Artifacts,
    mut exec: impl FnMut(StepId, &mut Artifacts, u64) -> Result<StepExec, OrchestratorError>,
) -> Timeline {
    let site = scenario.affected_data_center();
    let fuel_hours = scenario.disaster.fuel_hours;
    let fuel_deadline_ms = site.and_then(|dc| match dc.power_state {
        PowerState::Grid => None,
        PowerState::Down => Some(0),
        PowerState::Generator => Some(hours_to_ms(fuel_hours)),
    });
    let mut steps = Vec::new();
    let mut now = 0u64;
    let mut outcome = RecoveryOutcome::Succeeded;
    let mut failing_step = None;
    let mut failure = None;

    for id in StepId::ALL {
        if outcome != RecoveryOutcome::Succeeded {
            steps.push(StepRecord::new(id, scenario, StepStatus::NotStarted, now, now, None));
            continue;
        }
        let planned = id.planned_duration_ms(scenario);
        let mut scratch = artifacts.clone();
        match exec(id, &mut scratch, now) {
            Err(e) => {
                let end = fuel_deadline_ms.map_or(now + planned, |d| (now + planned).min(d.max(now)));
                warn!("step {} failed: {e}", id.as_str());
                steps.push(StepRecord::new(id, scenario, StepStatus::Failed, now, end, Some(e.to_string())));
                outcome = RecoveryOutcome::Infeasible;
                failing_step = Some(id);
                failure = Some(e.to_string());
                *artifacts = scratch;
                now = end;
            }
            Ok(StepExec::Skipped) => {
                steps.push(StepRecord::new(id, scenario, StepStatus::NotStarted, now, now, None));
                outcome = RecoveryOutcome::Incomplete;
            }
            Ok(StepExec::Done { min_duration_ms }) => {
                let end = now + planned.max(min_duration_ms);
                let exhausted = site.is_some_and(|dc| fuel_check(end, fuel_hours, dc) == FuelStatus::Exhausted);
                if exhausted {
                    let at = fuel_deadline_ms.unwrap_or(end).clamp(now, end);
                    let msg = format!(
                        "fuel exhausted at {:.2} h during {}",
                        at as f64 / super::clock::MS_PER_HOUR as f64,
                        id.as_str()
                    );
                    warn!("{msg}");
                    steps.push(StepRecord::new(id, scenario, StepStatus::Interrupted, now, at, Some(msg.clone())));
                    outcome = RecoveryOutcome::DeadlineExceeded;
                    failing_step = Some(id);
                    failure = Some(msg);
                    now = at;
                } else {
                    info!("step {} done at {:.1} min", id.as_str(), end as f64 / MS_PER_MIN as f64);
                    steps.push(StepRecord::new(id, scenario, StepStatus::Completed, now, end, None));
                    *artifacts = scratch;
                    now = end;
                }
            }
        }
    }
    Timeline { steps, outcome, failing_step, failure, fuel_deadline_ms, total_ms: now }
}

/// Runs the work of one step against `artifacts`.
pub fn execute_step(ctx: &Context, id: StepId, art: &mut Artifacts, now_ms: u64) -> Result<StepExec, OrchestratorError> {
    match id {
        StepId::TrxCharacterization => act_trx_characterization(ctx, art, now_ms)?,
        StepId::DlmMeasure => act_dlm_measure(ctx, art)?,
        StepId::DlmAnalyze => act_dlm_analyze(ctx, art)?,
        StepId::OlsMeasure => act_ols_measure(ctx, art)?,
        StepId::OlsAnalyze => {
            act_calibrate(ctx, art)?;
            act_optimize(ctx, art)?;
        }
        StepId::DlmValidate => act_dlm_validate(ctx, art)?,
        StepId::TrxConfigure => act_provision(ctx, art, now_ms)?,
        StepId::Migrate => {
            act_migrate(ctx, art, now_ms)?;
            let m = art.migration.as_ref().expect("set by act_migrate");
            return Ok(StepExec::Done { min_duration_ms: m.ended_at_ms - m.started_at_ms });
        }
    }
    Ok(StepExec::Done { min_duration_ms: 0 })
}

/// Runs the whole workflow, returning the report and every artifact.
pub fn run_recovery_with_artifacts(scenario: &Scenario, seed: u64) -> (RecoveryReport, Artifacts) {
    let mut art = Artifacts::default();
    let ctx = match Context::new(scenario, seed) {
        Ok(c) => c,
        Err(e) => {
            let mut tl = run_timeline(scenario, &mut art, |_, _, _| Err(e.clone()));
            tl.failure = Some(e.to_string());
            return (build_report(scenario, seed, &tl, &art), art);
        }
    };
    let tl = run_timeline(scenario, &mut art, |id, a, now| execute_step(&ctx, id, a, now));
    info!("recovery {:?} after {:.2} h", tl.outcome, tl.total_ms as f64 / super::clock::MS_PER_HOUR as f64);
    (build_report(scenario, seed, &tl, &art), art)
}

/// Runs the whole workflow. Failures are encoded in the report's outcome.
pub fn run_recovery(scenario: &Scenario, seed: u64) -> RecoveryReport {
    run_recovery_with_artifacts(scenario, seed).0
}
