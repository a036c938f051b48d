use serde::{Deserialize, Serialize};

use super::CharacterizationError;
use crate::telemetry::PowerProfile;

/// Per-position `after - before` difference on the `before` sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDelta {
    pub positions_km: Vec<f64>,
    pub delta_db: Vec<f64>,
    pub max_abs_db: f64,
    pub mean_db: f64,
}

pub fn compare_profiles(before: &PowerProfile, after: &PowerProfile) -> Result<ProfileDelta, CharacterizationError> {
    let (lb, la) = (before.total_length_km(), after.total_length_km());
    if before.samples.is_empty() || after.samples.is_empty() || (lb - la).abs() > 1e-6 {
        return Err(CharacterizationError::LengthMismatch { before: lb, after: la });
    }
    let positions_km: Vec<f64> = before.samples.iter().map(|s| s.position_km).collect();
    let delta_db: Vec<f64> = before
        .samples
        .iter()
        .map(|s| after.interpolate(s.position_km) - s.power_dbm)
        .collect();
    let max_abs_db = delta_db.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mean_db = delta_db.iter().sum::<f64>() / delta_db.len() as f64;
    Ok(ProfileDelta { positions_km, delta_db, max_abs_db, mean_db })
}
