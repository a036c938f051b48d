use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{invariant, Edfa, FiberSpan, LineSystem, LumpedLoss, ModelError, ModulationFormat, SpectrumGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operator {
    pub id: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub site: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortConfig {
    pub slot_index: usize,
    pub format: String,
    pub launch_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransceiverPort {
    pub id: String,
    pub owner: String,
    pub node: String,
    pub line_system: String,
    pub supported_formats: Vec<String>,
    /// Ground truth back-to-back SNR. Only telemetry simulation reads it.
    pub snr_trx_true_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delegation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PortConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    Grid,
    Generator,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub id: String,
    pub size_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenter {
    pub id: String,
    pub operator: String,
    pub site: String,
    pub power_state: PowerState,
    pub fuel_hours_remaining: f64,
    #[serde(default)]
    pub datasets: Vec<Dataset>,
    #[serde(default)]
    pub compute_vcpu: u32,
    #[serde(default)]
    pub compute_storage_gb: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disaster {
    pub affected_site: String,
    pub outage_duration_hours: f64,
    pub fuel_hours: f64,
    /// Allows fuel budgets outside the 8 to 24 hour envelope.
    #[serde(default)]
    pub fuel_override: bool,
}

/// Field time of each recovery step, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkflowDurations {
    pub trx_characterization_min: f64,
    pub dlm_measure_min: f64,
    pub dlm_analyze_min: f64,
    pub ols_measure_min: f64,
    pub ols_analyze_min: f64,
    pub dlm_validate_min: f64,
    pub trx_configure_min: f64,
    pub migrate_min: f64,
}

impl Default for WorkflowDurations {
    fn default() -> Self {
        Self {
            trx_characterization_min: 30.0,
            dlm_measure_min: 20.0,
            dlm_analyze_min: 40.0,
            ols_measure_min: 150.0,
            ols_analyze_min: 60.0,
            dlm_validate_min: 60.0,
            trx_configure_min: 2.0,
            migrate_min: 10.0,
        }
    }
}

impl WorkflowDurations {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.trx_characterization_min,
            self.dlm_measure_min,
            self.dlm_analyze_min,
            self.ols_measure_min,
            self.ols_analyze_min,
            self.dlm_validate_min,
            self.trx_configure_min,
            self.migrate_min,
        ]
    }
}

/// A lightpath the affected operator needs between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    pub id: String,
    pub format: String,
    pub src_node: String,
    pub dst_node: String,
}

/// Engineering knobs of the recovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parameters {
    pub design_margin_db: f64,
    pub fec_limit: f64,
    pub probe_count: usize,
    pub flatness_weight: f64,
    /// Launch power per 50 GHz loading channel before the booster, initial config.
    pub initial_launch_dbm: f64,
    pub dlm_probe_slot: usize,
    pub dlm_sample_spacing_km: f64,
    pub dlm_noise_sigma_db: f64,
    pub detection_threshold_db: f64,
    pub osa_noise_sigma_db: f64,
    pub monitor_noise_sigma_db: f64,
    pub voa_attenuations_db: Vec<f64>,
    pub voa_counting_noise: f64,
    pub voa_input_snr_db: f64,
    pub voa_rx_power_dbm: f64,
    pub validation_noise_sigma_db: f64,
    pub migration_utilization: f64,
    pub migration_setup_min: f64,
    pub lease_duration_hours: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            design_margin_db: 1.0,
            fec_limit: 2.0e-2,
            probe_count: 8,
            flatness_weight: 0.5,
            initial_launch_dbm: -15.0,
            dlm_probe_slot: 24,
            dlm_sample_spacing_km: 0.1,
            dlm_noise_sigma_db: 0.2,
            detection_threshold_db: 0.6,
            osa_noise_sigma_db: 0.1,
            monitor_noise_sigma_db: 0.1,
            voa_attenuations_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            voa_counting_noise: 0.05,
            voa_input_snr_db: 35.0,
            voa_rx_power_dbm: 0.0,
            validation_noise_sigma_db: 0.2,
            migration_utilization: 0.8,
            migration_setup_min: 9.5,
            lease_duration_hours: 24.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub operators: Vec<Operator>,
    pub nodes: Vec<Node>,
    pub line_systems: Vec<LineSystem>,
    pub grids: Vec<SpectrumGrid>,
    pub transceivers: Vec<TransceiverPort>,
    pub data_centers: Vec<DataCenter>,
    pub disaster: Disaster,
    #[serde(default)]
    pub workflow_durations: WorkflowDurations,
    pub seed: u64,
    #[serde(default = "default_formats")]
    pub formats: Vec<ModulationFormat>,
    #[serde(default)]
    pub demands: Vec<Demand>,
    #[serde(default)]
    pub parameters: Parameters,
}

fn default_formats() -> Vec<ModulationFormat> {
    vec![ModulationFormat::dp16qam_400g(), ModulationFormat::dp16qam_800g()]
}

/// Parses and validates a scenario document.
pub fn validate_scenario(document: &str) -> Result<Scenario, ModelError> {
    let scenario: Scenario =
        serde_json::from_str(document).map_err(|e| ModelError::Schema(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

fn unique<'a>(kind: &str, ids: impl Iterator<Item = &'a str>) -> Result<BTreeSet<&'a str>, ModelError> {
    let mut set = BTreeSet::new();
    for id in ids {
        if !set.insert(id) {
            return Err(invariant(format!("duplicate {kind} id '{id}'")));
        }
    }
    Ok(set)
}

fn dangling(kind: &str, id: &str, from: &str) -> ModelError {
    ModelError::Reference(format!("{from} references unknown {kind} '{id}'"))
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn grid(&self, id: &str) -> Option<&SpectrumGrid> {
        self.grids.iter().find(|g| g.id == id)
    }

    pub fn line(&self, id: &str) -> Option<&LineSystem> {
        self.line_systems.iter().find(|l| l.id == id)
    }

    pub fn port(&self, id: &str) -> Option<&TransceiverPort> {
        self.transceivers.iter().find(|p| p.id == id)
    }

    pub fn format(&self, id: &str) -> Option<&ModulationFormat> {
        self.formats.iter().find(|f| f.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn operator_by_token(&self, token: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.token == token)
    }

    /// The line system carrying traffic from `src` to `dst`.
    pub fn line_between(&self, src: &str, dst: &str) -> Option<&LineSystem> {
        self.line_systems
            .iter()
            .find(|l| l.endpoints[0] == src && l.endpoints[1] == dst)
    }

    /// Data center running on backup power at the disaster site.
    pub fn affected_data_center(&self) -> Option<&DataCenter> {
        self.data_centers
            .iter()
            .find(|d| d.site == self.disaster.affected_site)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let operators = unique("operator", self.operators.iter().map(|o| o.id.as_str()))?;
        unique("token", self.operators.iter().map(|o| o.token.as_str()))?;
        let nodes = unique("node", self.nodes.iter().map(|n| n.id.as_str()))?;
        let sites: BTreeSet<&str> = self.nodes.iter().map(|n| n.site.as_str()).collect();
        unique("grid", self.grids.iter().map(|g| g.id.as_str()))?;
        unique("line system", self.line_systems.iter().map(|l| l.id.as_str()))?;
        unique("transceiver", self.transceivers.iter().map(|p| p.id.as_str()))?;
        unique("data center", self.data_centers.iter().map(|d| d.id.as_str()))?;
        let formats = unique("format", self.formats.iter().map(|f| f.id.as_str()))?;
        unique("demand", self.demands.iter().map(|d| d.id.as_str()))?;

        for g in &self.grids {
            g.validate()?;
        }
        for f in &self.formats {
            f.validate()?;
        }
        for l in &self.line_systems {
            let grid = self.grid(&l.grid).ok_or_else(|| dangling("grid", &l.grid, &l.id))?;
            if !operators.contains(l.owner.as_str()) {
                return Err(dangling("operator", &l.owner, &l.id));
            }
            for e in &l.endpoints {
                if !nodes.contains(e.as_str()) {
                    return Err(dangling("node", e, &l.id));
                }
            }
            l.validate(grid)?;
        }
        for p in &self.transceivers {
            if !operators.contains(p.owner.as_str()) {
                return Err(dangling("operator", &p.owner, &p.id));
            }
            if !nodes.contains(p.node.as_str()) {
                return Err(dangling("node", &p.node, &p.id));
            }
            let line = self
                .line(&p.line_system)
                .ok_or_else(|| dangling("line system", &p.line_system, &p.id))?;
            if line.endpoint_index(&p.node).is_none() {
                return Err(invariant(format!(
                    "port {} at node {} is not on an endpoint of line {}",
                    p.id, p.node, line.id
                )));
            }
            for f in &p.supported_formats {
                if !formats.contains(f.as_str()) {
                    return Err(dangling("format", f, &p.id));
                }
            }
            if !p.snr_trx_true_db.is_finite() {
                return Err(invariant(format!("port {}: transceiver SNR must be finite", p.id)));
            }
            if let Some(c) = &p.config {
                if !p.supported_formats.contains(&c.format) {
                    return Err(invariant(format!("port {}: configured format unsupported", p.id)));
                }
                let grid = self.grid(&line.grid).expect("checked above");
                grid.carrier_thz(c.slot_index)?;
            }
        }
        for d in &self.data_centers {
            if !operators.contains(d.operator.as_str()) {
                return Err(dangling("operator", &d.operator, &d.id));
            }
            if !sites.contains(d.site.as_str()) {
                return Err(dangling("site", &d.site, &d.id));
            }
            if !(d.fuel_hours_remaining >= 0.0) {
                return Err(invariant(format!("data center {}: negative fuel", d.id)));
            }
            if d.power_state == PowerState::Generator && d.fuel_hours_remaining <= 0.0 {
                return Err(invariant(format!(
                    "data center {}: on generator power with no fuel",
                    d.id
                )));
            }
            for ds in &d.datasets {
                if !(ds.size_gb >= 0.0) {
                    return Err(invariant(format!("dataset {}: negative size", ds.id)));
                }
            }
        }
        let dis = &self.disaster;
        if !sites.contains(dis.affected_site.as_str()) {
            return Err(dangling("site", &dis.affected_site, "disaster"));
        }
        if !(dis.fuel_hours > 0.0) || !(dis.outage_duration_hours >= 0.0) {
            return Err(invariant("disaster: fuel and outage durations must be positive"));
        }
        if !dis.fuel_override && !(8.0..=24.0).contains(&dis.fuel_hours) {
            return Err(invariant(format!(
                "disaster: fuel budget {} h outside [8, 24] h without override",
                dis.fuel_hours
            )));
        }
        if self.workflow_durations.as_array().iter().any(|m| !(*m >= 0.0)) {
            return Err(invariant("workflow durations must be non-negative"));
        }
        for d in &self.demands {
            if !formats.contains(d.format.as_str()) {
                return Err(dangling("format", &d.format, &d.id));
            }
            for n in [&d.src_node, &d.dst_node] {
                if !nodes.contains(n.as_str()) {
                    return Err(dangling("node", n, &d.id));
                }
            }
            if self.line_between(&d.src_node, &d.dst_node).is_none() {
                return Err(ModelError::Reference(format!(
                    "demand {}: no line system from {} to {}",
                    d.id, d.src_node, d.dst_node
                )));
            }
        }
        let p = &self.parameters;
        if !(p.migration_utilization > 0.0 && p.migration_utilization <= 1.0) {
            return Err(invariant("migration utilization must be in (0, 1]"));
        }
        if !(p.fec_limit > 0.0 && p.fec_limit < 0.5) {
            return Err(invariant("fec limit must be in (0, 0.5)"));
        }
        if !(p.design_margin_db >= 0.0) || !(p.flatness_weight >= 0.0) {
            return Err(invariant("margin and flatness weight must be non-negative"));
        }
        if !(p.dlm_sample_spacing_km > 0.0) {
            return Err(invariant("DLM sample spacing must be positive"));
        }
        Ok(())
    }

    /// The long-haul field trial: 5 x 56 km spans with 4 in-line amplifiers
    /// borrowed from operator B, six transponder pairs and a 25 GB database on
    /// backup power at the disaster site.
    pub fn field_trial() -> Self {
        let grid = SpectrumGrid::c_band("c-band");
        let n = grid.slot_count;
        // Sinusoidal ripple plus a linear gain slope (dB edge to edge).
        let ripple = |amplitude: f64, cycles: f64, phase: f64, slope: f64| -> Vec<f64> {
            let raw: Vec<f64> = (0..n)
                .map(|s| {
                    amplitude * (std::f64::consts::TAU * cycles * s as f64 / n as f64 + phase).sin()
                        + slope * grid.normalized_frequency(s as f64)
                })
                .collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            raw.into_iter().map(|r| r - mean).collect()
        };
        let amp = |id: &str, gain: f64, nf: f64, range: [f64; 2], rip: Vec<f64>| Edfa {
            id: id.into(),
            gain_db: gain,
            tilt_db: 0.0,
            noise_figure_db: nf,
            gain_ripple_db: rip,
            gain_range_db: range,
            max_total_output_dbm: 23.0,
        };
        let booster = amp("boost-x", 15.0, 5.5, [10.0, 25.0], ripple(0.12, 1.3, 0.4, 0.5));
        let ilas = vec![
            amp("ila-1", 11.2, 5.0, [5.0, 20.0], ripple(0.15, 1.1, 1.9, 0.4)),
            amp("ila-2", 11.2, 5.5, [5.0, 20.0], ripple(0.10, 2.2, 0.7, 0.6)),
            amp("ila-3", 11.2, 6.0, [5.0, 20.0], ripple(0.14, 0.8, 2.8, 0.3)),
            amp("ila-4", 11.2, 5.2, [5.0, 20.0], ripple(0.12, 1.7, 4.1, 0.5)),
        ];
        let preamp = amp("pre-y", 11.2, 5.0, [5.0, 20.0], ripple(0.08, 1.5, 5.3, 0.4));
        let longhaul = LineSystem::from_parts(
            "longhaul",
            "op-b",
            ["node-x", "node-y"],
            "c-band",
            booster,
            (0..5).map(|_| FiberSpan::smf(56.0)).collect(),
            ilas,
            preamp,
        );
        let metro = LineSystem::from_parts(
            "metro",
            "op-b",
            ["node-y", "node-m"],
            "c-band",
            amp("boost-y", 12.0, 5.5, [10.0, 25.0], Vec::new()),
            vec![FiberSpan::smf(50.0)],
            Vec::new(),
            amp("pre-m", 10.0, 5.0, [5.0, 20.0], Vec::new()),
        );

        let mut transceivers = Vec::new();
        let port = |id: String, owner: &str, node: &str, formats: &[&str], snr: f64| TransceiverPort {
            id,
            owner: owner.into(),
            node: node.into(),
            line_system: "longhaul".into(),
            supported_formats: formats.iter().map(|f| f.to_string()).collect(),
            snr_trx_true_db: snr,
            delegation: None,
            config: None,
        };
        for (side, owner, node) in [("a", "op-a", "node-x"), ("b", "op-b", "node-y")] {
            let offset = if side == "a" { 0.0 } else { 0.3 };
            for i in 0..2 {
                transceivers.push(port(
                    format!("{side}-800-{}", i + 1),
                    owner,
                    node,
                    &["800g", "400g"],
                    ((192.0 + 10.0 * offset + 4.0 * i as f64).round()) / 10.0,
                ));
            }
            for i in 0..4 {
                transceivers.push(port(
                    format!("{side}-400-{}", i + 1),
                    owner,
                    node,
                    &["400g"],
                    ((220.0 + 10.0 * offset + 5.0 * i as f64).round()) / 10.0,
                ));
            }
        }

        let mut demands = Vec::new();
        for (fmt, count) in [("800g", 2), ("400g", 4)] {
            for i in 0..count {
                demands.push(Demand {
                    id: format!("lp-{fmt}-{}", i + 1),
                    format: fmt.into(),
                    src_node: "node-x".into(),
                    dst_node: "node-y".into(),
                });
            }
        }

        Self {
            operators: ["a", "b", "c"]
                .iter()
                .map(|o| Operator { id: format!("op-{o}"), token: format!("token-{o}") })
                .collect(),
            nodes: vec![
                Node { id: "node-x".into(), site: "suburb-x".into() },
                Node { id: "node-y".into(), site: "suburb-y".into() },
                Node { id: "node-m".into(), site: "suburb-y-metro".into() },
            ],
            line_systems: vec![longhaul, metro],
            grids: vec![grid],
            transceivers,
            data_centers: vec![
                DataCenter {
                    id: "dc-x".into(),
                    operator: "op-a".into(),
                    site: "suburb-x".into(),
                    power_state: PowerState::Generator,
                    fuel_hours_remaining: 8.0,
                    datasets: vec![Dataset { id: "db-main".into(), size_gb: 25.0 }],
                    compute_vcpu: 32,
                    compute_storage_gb: 500,
                },
                DataCenter {
                    id: "dc-y".into(),
                    operator: "op-b".into(),
                    site: "suburb-y".into(),
                    power_state: PowerState::Grid,
                    fuel_hours_remaining: 0.0,
                    datasets: Vec::new(),
                    compute_vcpu: 64,
                    compute_storage_gb: 2000,
                },
            ],
            disaster: Disaster {
                affected_site: "suburb-x".into(),
                outage_duration_hours: 24.0,
                fuel_hours: 8.0,
                fuel_override: false,
            },
            workflow_durations: WorkflowDurations::default(),
            seed: 7,
            formats: default_formats(),
            demands,
            parameters: Parameters::default(),
        }
    }

    /// The field trial with a 10 dB loss in the middle of the third span,
    /// in-line and preamplifier gains limited to 9..12 dB and their total
    /// output to 10 dBm. No line setting recovers enough GSNR for the
    /// demands.
    pub fn impaired_trial() -> Self {
        let mut s = Self::field_trial();
        let line = s.line_systems.iter_mut().find(|l| l.id == "longhaul").expect("field trial has longhaul");
        if let Some(span) = line.spans_mut().nth(2) {
            span.lumped_losses.push(LumpedLoss { position_km: span.length_km / 2.0, loss_db: 10.0 });
        }
        for amp in line.amps_mut().skip(1) {
            amp.gain_range_db = [9.0, 12.0];
            amp.max_total_output_dbm = 10.0;
        }
        s
    }
}
