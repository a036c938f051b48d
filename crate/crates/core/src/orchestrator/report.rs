use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::clock::{MigrationSummary, MS_PER_HOUR, MS_PER_MIN};
use super::timeline::{StepId, StepRecord, Timeline};
use super::validate::LightpathValidation;
use super::workflow::Artifacts;
use crate::characterization::{LinkEstimate, OlsEstimate, TrxEstimate};
use crate::model::{Scenario, SpectrumGrid};
use crate::optimizer::LightpathDesign;
use crate::qot::LineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryOutcome {
    Succeeded,
    DeadlineExceeded,
    Infeasible,
    /// Built from a partial set of artifacts.
    Incomplete,
}

impl RecoveryOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryOutcome::Succeeded => "succeeded",
            RecoveryOutcome::DeadlineExceeded => "deadline_exceeded",
            RecoveryOutcome::Infeasible => "infeasible",
            RecoveryOutcome::Incomplete => "incomplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

/// A figure dataset with fixed column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Num(x) => format_number(*x),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Numeric values of one column; text cells are skipped.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .filter_map(|r| match &r[i] {
                    Cell::Int(v) => Some(*v as f64),
                    Cell::Num(v) => Some(*v),
                    Cell::Text(_) => None,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Figures {
    pub launch_power: Option<Table>,
    pub accumulated_gsnr: Option<Table>,
    pub dlm_profile_before_after: Option<Table>,
    pub received_spectrum: Option<Table>,
}

impl Figures {
    /// `(name, table)` for every figure, present or not.
    pub fn entries(&self) -> [(&'static str, Option<&Table>); 4] {
        [
            ("launch_power", self.launch_power.as_ref()),
            ("accumulated_gsnr", self.accumulated_gsnr.as_ref()),
            ("dlm_profile_before_after", self.dlm_profile_before_after.as_ref()),
            ("received_spectrum", self.received_spectrum.as_ref()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub objective_before_db: f64,
    pub objective_after_db: f64,
    pub flatness_before_db: f64,
    pub flatness_after_db: f64,
    pub min_gsnr_after_db: f64,
    pub iterations: usize,
    pub config: LineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dlm_delta_max_abs_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub seed: u64,
    pub outcome: RecoveryOutcome,
    pub failing_step: Option<StepId>,
    pub failure: Option<String>,
    pub steps: Vec<StepRecord>,
    pub total_duration_ms: u64,
    pub total_duration_min: f64,
    pub total_duration_hours: f64,
    pub fuel_deadline_hours: Option<f64>,
    pub trx_estimates: Option<Vec<TrxEstimate>>,
    pub link_estimate: Option<LinkEstimate>,
    pub ols_estimate: Option<OlsEstimate>,
    pub optimization: Option<OptimizationSummary>,
    pub designs: Vec<LightpathDesign>,
    pub lightpaths: Vec<LightpathValidation>,
    pub migration: Option<MigrationSummary>,
    pub figures: Figures,
}

impl RecoveryReport {
    pub fn to_canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report serializes"))
    }
}

pub fn build_report(scenario: &Scenario, seed: u64, tl: &Timeline, art: &Artifacts) -> RecoveryReport {
    let optimization = art.optimization.as_ref().map(|o| OptimizationSummary {
        objective_before_db: o.objective_before_db,
        objective_after_db: o.result.objective_db,
        flatness_before_db: o.flatness_before_db,
        flatness_after_db: o.result.flatness_db,
        min_gsnr_after_db: o.result.end_spectrum.min_gsnr(),
        iterations: o.result.iterations,
        config: o.result.config.clone(),
        dlm_delta_max_abs_db: o.profile_delta.as_ref().map(|d| d.max_abs_db),
    });
    let grid = scenario
        .demands
        .first()
        .and_then(|d| scenario.line_between(&d.src_node, &d.dst_node))
        .and_then(|l| scenario.grid(&l.grid));
    RecoveryReport {
        seed,
        outcome: tl.outcome,
        failing_step: tl.failing_step,
        failure: tl.failure.clone(),
        steps: tl.steps.clone(),
        total_duration_ms: tl.total_ms,
        total_duration_min: tl.total_ms as f64 / MS_PER_MIN as f64,
        total_duration_hours: tl.total_ms as f64 / MS_PER_HOUR as f64,
        fuel_deadline_hours: tl.fuel_deadline_ms.map(|d| d as f64 / MS_PER_HOUR as f64),
        trx_estimates: art.trx_estimates.clone(),
        link_estimate: art.link.as_ref().and_then(|l| l.estimate.clone()),
        ols_estimate: art.ols_estimate.clone(),
        optimization,
        designs: art.provision.as_ref().map(|p| p.designs.clone()).unwrap_or_default(),
        lightpaths: art.provision.as_ref().map(|p| p.validations.clone()).unwrap_or_default(),
        migration: art.migration.clone(),
        figures: grid.map(|g| figures(g, art)).unwrap_or_default(),
    }
}

fn frequency_thz(grid: &SpectrumGrid, slot: usize) -> Cell {
    Cell::Num(grid.carrier_thz(slot).unwrap_or(f64::NAN))
}

fn figures(grid: &SpectrumGrid, art: &Artifacts) -> Figures {
    let mut f = Figures::default();
    if let Some(opt) = &art.optimization {
        let mut t = Table::new(&["slot_index", "frequency_thz", "initial_dbm", "optimized_dbm"]);
        for (s, (a, b)) in opt.initial_config.launch_dbm.iter().zip(&opt.result.config.launch_dbm).enumerate() {
            t.rows.push(vec![Cell::Int(s as i64), frequency_thz(grid, s), Cell::Num(*a), Cell::Num(*b)]);
        }
        f.launch_power = Some(t);

        let mut t = Table::new(&["point_index", "point", "slot_index", "gsnr_db"]);
        for (i, spectrum) in opt.accumulated.iter().enumerate() {
            for r in &spectrum.records {
                t.rows.push(vec![
                    Cell::Int(i as i64),
                    Cell::Text(spectrum.label.clone()),
                    Cell::Int(r.slot_index as i64),
                    Cell::Num(r.gsnr_db),
                ]);
            }
        }
        f.accumulated_gsnr = Some(t);

        if let (Some(link), Some(after)) = (&art.link, &opt.profile_after) {
            let mut t = Table::new(&["position_km", "power_dbm_before", "power_dbm_after"]);
            for s in &link.profile.samples {
                t.rows.push(vec![
                    Cell::Num(s.position_km),
                    Cell::Num(s.power_dbm),
                    Cell::Num(after.interpolate(s.position_km)),
                ]);
            }
            f.dlm_profile_before_after = Some(t);
        }
    }
    if let Some(prov) = &art.provision {
        let mut t = Table::new(&["slot_index", "frequency_thz", "power_dbm", "floor_dbm", "role", "demand_id"]);
        for s in &prov.received_spectrum.slots {
            let design = prov
                .designs
                .iter()
                .find(|d| (d.slot_index..d.slot_index + d.slot_width).contains(&s.slot_index));
            t.rows.push(vec![
                Cell::Int(s.slot_index as i64),
                frequency_thz(grid, s.slot_index),
                Cell::Num(s.power_dbm),
                Cell::Num(s.floor_dbm),
                Cell::Text(if design.is_some() { "traffic" } else { "dummy" }.into()),
                Cell::Text(design.map_or(String::new(), |d| d.demand_id.clone())),
            ]);
        }
        f.received_spectrum = Some(t);
    }
    f
}

/// Six significant digits in lowercase scientific notation; negative zero
/// prints as zero.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0.00000e0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.5e}")
}

/// JSON with object keys sorted, two-space indentation, and every float
/// printed by [`format_number`]. Non-finite floats become `null`.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                match n.as_f64() {
                    Some(x) if x.is_finite() => out.push_str(&format_number(x)),
                    _ => out.push_str("null"),
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}
