//! The recovery workflow on a simulated field clock: characterization,
//! calibration and optimization, validation, lightpath provisioning and
//! database migration, racing the backup generator's fuel.

mod clock;
mod report;
mod store;
mod timeline;
mod validate;
mod workflow;

pub use clock::{
    fuel_check, hours_to_ms, migrate_dataset, minutes_to_ms, FuelStatus, MigrationJob, MigrationSummary, SimClock,
    MS_PER_HOUR, MS_PER_MIN,
};
pub use report::{
    build_report, canonical_json, format_number, Cell, Figures, OptimizationSummary, RecoveryOutcome, RecoveryReport, Table,
};
pub use store::{
    ArtifactStore, AUDIT_FILE, LIGHTPATHS_FILE, LINK_FILE, MIGRATION_FILE, OLS_FILE, OPTIMIZATION_FILE, PROBES_FILE, TRX_FILE,
};
pub use timeline::{
    execute_step, planned_start_ms, run_recovery, run_recovery_with_artifacts, run_timeline, StepExec, StepId, StepRecord,
    StepStatus, Timeline,
};
pub use validate::{lit_gsnr, traffic_channels, validate_designs, LightpathValidation};
pub use workflow::{
    act_calibrate, act_dlm_analyze, act_dlm_measure, act_dlm_validate, act_migrate, act_ols_measure, act_optimize,
    act_provision, act_trx_characterization, sub_seed, Artifacts, Context, LinkArtifact, OptimizationArtifact,
    ProvisionArtifact,
};

use thiserror::Error;

use crate::characterization::CharacterizationError;
use crate::control::ControlError;
use crate::model::ModelError;
use crate::optimizer::OptimizeError;
use crate::qot::QotError;
use crate::telemetry::TelemetryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("design {0} is not provisioned")]
    Unprovisioned(String),
    #[error("missing artifact {0}")]
    MissingArtifact(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qot(#[from] QotError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Characterization(#[from] CharacterizationError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("control plane: {0}")]
    Control(#[from] ControlError),
}
