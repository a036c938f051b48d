use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::model::{DataCenter, PowerState};

pub const MS_PER_MIN: u64 = 60_000;
pub const MS_PER_HOUR: u64 = 3_600_000;

pub fn minutes_to_ms(min: f64) -> u64 {
    (min * MS_PER_MIN as f64).round().max(0.0) as u64
}

pub fn hours_to_ms(h: f64) -> u64 {
    (h * MS_PER_HOUR as f64).round().max(0.0) as u64
}

/// Simulated field time in whole milliseconds. It only moves forward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    now_ms: u64,
}

impl SimClock {
    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn hours(&self) -> f64 {
        self.now_ms as f64 / MS_PER_HOUR as f64
    }

    pub fn advance(&mut self, ms: u64) {
        self.now_ms += ms;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelStatus {
    Ok,
    Exhausted,
}

/// Generator fuel at `elapsed_ms` into the outage. Exhaustion is inclusive
/// of the deadline itself. Sites on grid power never run out; sites already
/// down have nothing left.
pub fn fuel_check(elapsed_ms: u64, fuel_hours: f64, dc: &DataCenter) -> FuelStatus {
    match dc.power_state {
        PowerState::Grid => FuelStatus::Ok,
        PowerState::Down => FuelStatus::Exhausted,
        PowerState::Generator if elapsed_ms >= hours_to_ms(fuel_hours) => FuelStatus::Exhausted,
        PowerState::Generator => FuelStatus::Ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationJob {
    pub dataset_id: String,
    pub size_gb: f64,
    /// Sum of provisioned net rates.
    pub capacity_gbps: f64,
    pub utilization: f64,
    pub setup_overhead_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationSummary {
    pub dataset_id: String,
    pub bytes: u64,
    pub capacity_gbps: f64,
    pub utilization: f64,
    pub setup_overhead_min: f64,
    pub transfer_s: f64,
    pub duration_min: f64,
    pub started_at_ms: u64,
    pub ended_at_ms: u64,
}

/// Moves a dataset over the provisioned capacity: setup overhead plus
/// `size * 8 / (capacity * utilization)` of transfer. Advances the clock.
pub fn migrate_dataset(job: &MigrationJob, clock: &mut SimClock) -> Result<MigrationSummary, OrchestratorError> {
    if !(job.capacity_gbps > 0.0) {
        return Err(OrchestratorError::Invalid("migration needs positive capacity".into()));
    }
    if !(job.utilization > 0.0 && job.utilization <= 1.0) {
        return Err(OrchestratorError::Invalid(format!("utilization {} outside (0, 1]", job.utilization)));
    }
    if !(job.size_gb >= 0.0) || !(job.setup_overhead_min >= 0.0) {
        return Err(OrchestratorError::Invalid("negative size or setup".into()));
    }
    let transfer_s = job.size_gb * 8.0 / (job.capacity_gbps * job.utilization);
    let duration_min = job.setup_overhead_min + transfer_s / 60.0;
    let started = clock.now_ms();
    clock.advance(minutes_to_ms(duration_min));
    Ok(MigrationSummary {
        dataset_id: job.dataset_id.clone(),
        bytes: (job.size_gb * 1e9).round() as u64,
        capacity_gbps: job.capacity_gbps,
        utilization: job.utilization,
        setup_overhead_min: job.setup_overhead_min,
        transfer_s,
        duration_min,
        started_at_ms: started,
        ended_at_ms: clock.now_ms(),
    })
}
