use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::report::{build_report, RecoveryReport};
use super::timeline::{run_timeline, StepExec, StepId};
use super::workflow::Artifacts;
use super::OrchestratorError;
use crate::control::ControlPlane;
use crate::model::Scenario;

pub const TRX_FILE: &str = "trx_estimates.json";
pub const LINK_FILE: &str = "link_estimate.json";
pub const PROBES_FILE: &str = "ols_probes.json";
pub const OLS_FILE: &str = "ols_estimate.json";
pub const OPTIMIZATION_FILE: &str = "optimization.json";
pub const LIGHTPATHS_FILE: &str = "lightpaths.json";
pub const MIGRATION_FILE: &str = "migration.json";
pub const AUDIT_FILE: &str = "control_audit.jsonl";

/// Step outputs persisted as JSON files in one directory, so each stage
/// can run in its own process.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> OrchestratorError {
    OrchestratorError::Invalid(format!("{}: {e}", path.display()))
}

impl ArtifactStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write<T: Serialize>(&self, name: &str, value: &Option<T>) -> Result<(), OrchestratorError> {
        let Some(v) = value else { return Ok(()) };
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(v).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    fn read<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, OrchestratorError> {
        let path = self.dir.join(name);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| io_err(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    /// Writes every artifact that is present; absent ones are left alone.
    pub fn save(&self, art: &Artifacts) -> Result<(), OrchestratorError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        self.write(TRX_FILE, &art.trx_estimates)?;
        self.write(LINK_FILE, &art.link)?;
        self.write(PROBES_FILE, &art.ols_probes)?;
        self.write(OLS_FILE, &art.ols_estimate)?;
        self.write(OPTIMIZATION_FILE, &art.optimization)?;
        self.write(LIGHTPATHS_FILE, &art.provision)?;
        self.write(MIGRATION_FILE, &art.migration)?;
        if !art.control_audit.is_empty() {
            let path = self.dir.join(AUDIT_FILE);
            let mut text = String::new();
            for r in &art.control_audit {
                text.push_str(&serde_json::to_string(r).map_err(|e| io_err(&path, e))?);
                text.push('\n');
            }
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }

    pub fn load(&self) -> Result<Artifacts, OrchestratorError> {
        let audit_path = self.dir.join(AUDIT_FILE);
        let control_audit = match fs::read_to_string(&audit_path) {
            Ok(text) => ControlPlane::parse_audit(&text).map_err(|e| io_err(&audit_path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&audit_path, e)),
        };
        Ok(Artifacts {
            trx_estimates: self.read(TRX_FILE)?,
            link: self.read(LINK_FILE)?,
            ols_probes: self.read(PROBES_FILE)?,
            ols_estimate: self.read(OLS_FILE)?,
            optimization: self.read(OPTIMIZATION_FILE)?,
            provision: self.read(LIGHTPATHS_FILE)?,
            migration: self.read(MIGRATION_FILE)?,
            control_audit,
        })
    }

    /// Report over whatever the stored artifacts cover. Steps whose outputs
    /// are missing are reported as not started.
    pub fn report(&self, scenario: &Scenario, seed: u64) -> Result<RecoveryReport, OrchestratorError> {
        let mut art = self.load()?;
        let tl = run_timeline(scenario, &mut art, |id, a, _| {
            let done = match id {
                StepId::TrxCharacterization => a.trx_estimates.is_some(),
                StepId::DlmMeasure => a.link.is_some(),
                StepId::DlmAnalyze => a.link.as_ref().is_some_and(|l| l.estimate.is_some()),
                StepId::OlsMeasure => a.ols_probes.is_some(),
                StepId::OlsAnalyze => a.ols_estimate.is_some() && a.optimization.is_some(),
                StepId::DlmValidate => a.optimization.as_ref().is_some_and(|o| o.profile_after.is_some()),
                StepId::TrxConfigure => a.provision.is_some(),
                StepId::Migrate => {
                    return Ok(match &a.migration {
                        Some(m) => StepExec::Done { min_duration_ms: m.ended_at_ms - m.started_at_ms },
                        None => StepExec::Skipped,
                    })
                }
            };
            Ok(if done { StepExec::Done { min_duration_ms: 0 } } else { StepExec::Skipped })
        });
        Ok(build_report(scenario, seed, &tl, &art))
    }
}
