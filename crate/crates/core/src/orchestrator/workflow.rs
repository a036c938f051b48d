use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::clock::{migrate_dataset, MigrationJob, MigrationSummary, SimClock};
use super::validate::{lit_gsnr, traffic_channels, validate_designs, LightpathValidation};
use super::OrchestratorError;
use crate::characterization::{
    analyze_dlm_profile, assemble_twin, calibrate_ols, compare_profiles, fit_transceiver_noise, ols_probe_configs,
    LinkEstimate, OlsEstimate, OlsProbe, ProfileDelta, TrxEstimate,
};
use crate::control::{AuditRecord, Command, ControlPlane, Inventory, Outcome, Resource, Verb};
use crate::model::{LineSystem, PortConfig, Scenario, SpectrumGrid, TransceiverPort};
use crate::optimizer::{
    design_lightpaths, evaluate, optimize_line, DesignRequest, LightpathDesign, OptimizationResult, OptimizeOptions,
    PortCandidate,
};
use crate::qot::{propagate_gsnr, ChannelPlan, GsnrSpectrum, LineConfig};
use crate::telemetry::{
    read_amp_power_monitors, simulate_dlm_capture, simulate_osa_spectrum, simulate_voa_sweep, OsaSpectrum,
    PowerProfile,
};

/// Derives an independent seed for one measurement from the run seed.
pub fn sub_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Who is involved in the recovery and on which line.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub seed: u64,
    pub line: &'a LineSystem,
    pub grid: &'a SpectrumGrid,
    /// Operator hit by the disaster, borrowing resources.
    pub tenant: String,
    /// Owner of the borrowed line.
    pub lessor: String,
}

impl<'a> Context<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Result<Self, OrchestratorError> {
        let first = scenario.demands.first().ok_or_else(|| OrchestratorError::Invalid("scenario has no demands".into()))?;
        let line = scenario
            .line_between(&first.src_node, &first.dst_node)
            .ok_or_else(|| OrchestratorError::Invalid(format!("no line between {} and {}", first.src_node, first.dst_node)))?;
        let grid = scenario.grid(&line.grid).ok_or_else(|| OrchestratorError::Invalid(format!("grid {}", line.grid)))?;
        let tenant = scenario
            .affected_data_center()
            .map(|d| d.operator.clone())
            .ok_or_else(|| OrchestratorError::Invalid("no data center at the affected site".into()))?;
        Ok(Self { scenario, seed, line, grid, tenant, lessor: line.owner.clone() })
    }

    fn token(&self, operator: &str) -> Result<&str, OrchestratorError> {
        self.scenario
            .operators
            .iter()
            .find(|o| o.id == operator)
            .map(|o| o.token.as_str())
            .ok_or_else(|| OrchestratorError::Invalid(format!("operator {operator}")))
    }

    fn line_ports(&self) -> Vec<&'a TransceiverPort> {
        let mut ports: Vec<_> = self.scenario.transceivers.iter().filter(|p| p.line_system == self.line.id).collect();
        ports.sort_by(|a, b| a.id.cmp(&b.id));
        ports
    }

    pub fn initial_config(&self) -> LineConfig {
        LineConfig::from_line(self.line, self.grid, self.scenario.parameters.initial_launch_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkArtifact {
    pub profile: PowerProfile,
    pub estimate: Option<LinkEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationArtifact {
    pub twin: LineSystem,
    pub initial_config: LineConfig,
    pub objective_before_db: f64,
    pub flatness_before_db: f64,
    pub result: OptimizationResult,
    /// Twin GSNR before the booster and after every amplifier.
    pub accumulated: Vec<GsnrSpectrum>,
    pub profile_after: Option<PowerProfile>,
    pub profile_delta: Option<ProfileDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionArtifact {
    pub designs: Vec<LightpathDesign>,
    pub validations: Vec<LightpathValidation>,
    pub received_spectrum: OsaSpectrum,
}

/// Everything the workflow has produced so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub trx_estimates: Option<Vec<TrxEstimate>>,
    pub link: Option<LinkArtifact>,
    pub ols_probes: Option<Vec<OlsProbe>>,
    pub ols_estimate: Option<OlsEstimate>,
    pub optimization: Option<OptimizationArtifact>,
    pub provision: Option<ProvisionArtifact>,
    pub migration: Option<MigrationSummary>,
    pub control_audit: Vec<AuditRecord>,
}

fn need<'a, T>(x: &'a Option<T>, name: &'static str) -> Result<&'a T, OrchestratorError> {
    x.as_ref().ok_or_else(|| OrchestratorError::MissingArtifact(name.into()))
}

/// Control plane rebuilt from the audit log, clock moved to `now_ms`.
fn control_plane(ctx: &Context, art: &Artifacts, now_ms: u64) -> Result<ControlPlane, OrchestratorError> {
    let mut cp = ControlPlane::replay(Inventory::from_scenario(ctx.scenario), &art.control_audit)
        .map_err(OrchestratorError::Invalid)?;
    if now_ms > cp.clock_ms() {
        cp.execute_admin(Command::AdvanceClock { to_ms: now_ms })?;
    }
    Ok(cp)
}

fn lease_id(o: Outcome) -> Result<String, OrchestratorError> {
    match o {
        Outcome::Lease(l) => Ok(l.id),
        other => Err(OrchestratorError::Invalid(format!("unexpected control-plane reply {other:?}"))),
    }
}

fn lease_ms(ctx: &Context) -> u64 {
    super::clock::hours_to_ms(ctx.scenario.parameters.lease_duration_hours)
}

/// Leases the lessor's ports on the line and compute at its data center,
/// has them delegated, then fits every port's noise from a VOA sweep read
/// through the tenant's capabilities.
pub fn act_trx_characterization(ctx: &Context, art: &mut Artifacts, now_ms: u64) -> Result<(), OrchestratorError> {
    let mut cp = control_plane(ctx, art, now_ms)?;
    let tenant_token = ctx.token(&ctx.tenant)?;
    let lessor_token = ctx.token(&ctx.lessor)?;
    let ports = ctx.line_ports();
    let mut resources: Vec<Resource> =
        ports.iter().filter(|p| p.owner == ctx.lessor).map(|p| Resource::Port { id: p.id.clone() }).collect();
    let size: f64 = ctx.scenario.affected_data_center().map_or(0.0, |d| d.datasets.iter().map(|x| x.size_gb).sum());
    if let Some(dc) = ctx.scenario.data_centers.iter().find(|d| d.operator == ctx.lessor) {
        resources.push(Resource::Compute {
            data_center: dc.id.clone(),
            vcpu: dc.compute_vcpu.min(16),
            storage_gb: ((2.0 * size).ceil() as u32).min(dc.compute_storage_gb),
        });
    }
    let id = lease_id(cp.execute(
        tenant_token,
        Command::RequestLease { lessor: ctx.lessor.clone(), resources, duration_ms: lease_ms(ctx) },
    )?)?;
    cp.execute(lessor_token, Command::GrantLease { lease: id })?;
    for p in ports.iter().filter(|p| p.owner == ctx.lessor) {
        cp.execute(
            lessor_token,
            Command::DelegatePort {
                port: p.id.clone(),
                tenant: ctx.tenant.clone(),
                verbs: BTreeSet::from([Verb::ReadState, Verb::Configure, Verb::ReadTelemetry]),
            },
        )?;
    }
    let session = cp.authenticate(tenant_token)?;
    let params = &ctx.scenario.parameters;
    let mut estimates = Vec::new();
    for (k, port) in ports.iter().enumerate() {
        if !session.allows(&format!("port:{}", port.id), Verb::ReadTelemetry) {
            return Err(OrchestratorError::Invalid(format!("no telemetry access to port {}", port.id)));
        }
        let format = port
            .supported_formats
            .iter()
            .filter_map(|f| ctx.scenario.format(f))
            .min_by(|a, b| a.net_rate_gbps.total_cmp(&b.net_rate_gbps))
            .ok_or_else(|| OrchestratorError::Invalid(format!("port {} has no known format", port.id)))?;
        let sweep = simulate_voa_sweep(
            port,
            format,
            &params.voa_attenuations_db,
            params.voa_input_snr_db,
            params.voa_rx_power_dbm,
            params.voa_counting_noise,
            sub_seed(ctx.seed, "voa", k as u64),
        )?;
        let est = fit_transceiver_noise(&sweep)?;
        debug!("port {}: snr_trx {:.2} dB", port.id, est.snr_trx_db);
        estimates.push(est);
    }
    art.control_audit = cp.audit().to_vec();
    art.trx_estimates = Some(estimates);
    Ok(())
}

pub fn act_dlm_measure(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let p = &ctx.scenario.parameters;
    let config = ctx.initial_config();
    let plan = ChannelPlan::loaded(ctx.grid, &config);
    let profile = simulate_dlm_capture(
        ctx.line,
        ctx.grid,
        &config,
        &plan,
        p.dlm_probe_slot,
        p.dlm_sample_spacing_km,
        p.dlm_noise_sigma_db,
        sub_seed(ctx.seed, "dlm-before", 0),
    )?;
    art.link = Some(LinkArtifact { profile, estimate: None });
    Ok(())
}

pub fn act_dlm_analyze(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let link = art.link.as_mut().ok_or(OrchestratorError::MissingArtifact("link_estimate.json".into()))?;
    let est = analyze_dlm_profile(&link.profile, ctx.scenario.parameters.detection_threshold_db)?;
    info!("DLM: {} spans, {} lumped losses", est.span_boundaries_km.len() + 1, est.lumped_losses.len());
    link.estimate = Some(est);
    Ok(())
}

pub fn act_ols_measure(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let p = &ctx.scenario.parameters;
    let far = &ctx.line.endpoints[1];
    let probes = ols_probe_configs(&ctx.line.public_info(), &ctx.initial_config(), p.probe_count)
        .into_iter()
        .enumerate()
        .map(|(k, config)| {
            let plan = ChannelPlan::loaded(ctx.grid, &config);
            let k = k as u64;
            Ok(OlsProbe {
                spectrum: simulate_osa_spectrum(
                    ctx.line,
                    ctx.grid,
                    &config,
                    &plan,
                    far,
                    p.osa_noise_sigma_db,
                    sub_seed(ctx.seed, "osa", k),
                )?,
                readings: read_amp_power_monitors(
                    ctx.line,
                    ctx.grid,
                    &config,
                    &plan,
                    p.monitor_noise_sigma_db,
                    sub_seed(ctx.seed, "monitor", k),
                )?,
                config,
                plan,
            })
        })
        .collect::<Result<Vec<_>, OrchestratorError>>()?;
    art.ols_probes = Some(probes);
    Ok(())
}

pub fn act_calibrate(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let probes = need(&art.ols_probes, "ols_probes.json")?;
    let est = calibrate_ols(&ctx.line.public_info(), ctx.grid, probes)?;
    info!("OLS: residual {:.4} dB over {} probes", est.residual_db, est.probe_count);
    art.ols_estimate = Some(est);
    Ok(())
}

pub fn act_optimize(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let link = need(&art.link, "link_estimate.json")?;
    let link_est = link.estimate.as_ref().ok_or(OrchestratorError::MissingArtifact("link_estimate.json".into()))?;
    let ols = need(&art.ols_estimate, "ols_estimate.json")?;
    let twin = assemble_twin(&ctx.line.public_info(), ctx.grid, link_est, ols, &ctx.line.owner)?;
    let options = OptimizeOptions { flatness_weight: ctx.scenario.parameters.flatness_weight, ..Default::default() };
    let initial = ctx.initial_config();
    let before = evaluate(&twin, ctx.grid, &initial, options.flatness_weight, options.output_headroom_db)?;
    let flatness_before = before.spectrum.as_ref().map_or(f64::NAN, |s| s.flatness());
    let result = optimize_line(&twin, ctx.grid, &initial, &options)?;
    info!(
        "optimizer: flatness {:.2} -> {:.2} dB after {} sweeps",
        flatness_before, result.flatness_db, result.iterations
    );
    let accumulated = propagate_gsnr(&twin, ctx.grid, &result.config, &ChannelPlan::loaded(ctx.grid, &result.config))?;
    art.optimization = Some(OptimizationArtifact {
        twin,
        initial_config: initial,
        objective_before_db: before.objective,
        flatness_before_db: flatness_before,
        result,
        accumulated,
        profile_after: None,
        profile_delta: None,
    });
    Ok(())
}

pub fn act_dlm_validate(ctx: &Context, art: &mut Artifacts) -> Result<(), OrchestratorError> {
    let before = &need(&art.link, "link_estimate.json")?.profile;
    let opt = art.optimization.as_mut().ok_or(OrchestratorError::MissingArtifact("optimization.json".into()))?;
    let p = &ctx.scenario.parameters;
    let config = &opt.result.config;
    let after = simulate_dlm_capture(
        ctx.line,
        ctx.grid,
        config,
        &ChannelPlan::loaded(ctx.grid, config),
        p.dlm_probe_slot,
        p.dlm_sample_spacing_km,
        p.dlm_noise_sigma_db,
        sub_seed(ctx.seed, "dlm-after", 0),
    )?;
    opt.profile_delta = Some(compare_profiles(before, &after)?);
    opt.profile_after = Some(after);
    Ok(())
}

/// Designs the lightpaths on the twin, leases their slots, configures both
/// ends through the control plane and measures the result.
pub fn act_provision(ctx: &Context, art: &mut Artifacts, now_ms: u64) -> Result<(), OrchestratorError> {
    let trx = need(&art.trx_estimates, "trx_estimates.json")?;
    let opt = need(&art.optimization, "optimization.json")?;
    let p = &ctx.scenario.parameters;
    let snr: BTreeMap<&str, f64> = trx.iter().map(|t| (t.port_id.as_str(), t.snr_trx_db)).collect();
    let candidates: Vec<PortCandidate> = ctx
        .line_ports()
        .into_iter()
        .filter_map(|port| {
            snr.get(port.id.as_str()).map(|s| PortCandidate {
                port_id: port.id.clone(),
                node: port.node.clone(),
                supported_formats: port.supported_formats.clone(),
                snr_trx_db: *s,
            })
        })
        .collect();
    let config = &opt.result.config;
    let available = vec![true; ctx.grid.slot_count];
    let mut designs = design_lightpaths(&DesignRequest {
        demands: &ctx.scenario.demands,
        formats: &ctx.scenario.formats,
        ports: &candidates,
        grid: ctx.grid,
        spectrum: &opt.result.end_spectrum,
        config,
        available: &available,
        margin_db: p.design_margin_db,
        fec_limit: p.fec_limit,
    })?;
    // Re-predict with the actual channel plan lit on the twin.
    let lit = lit_gsnr(&designs, &opt.twin, ctx.grid, config, |id| snr.get(id).copied())?;
    for (d, model) in designs.iter_mut().zip(lit) {
        d.model_gsnr_db = model;
        d.predicted_gsnr_db = model - p.design_margin_db;
        d.margin_db = model - d.required_gsnr_db;
        if d.predicted_gsnr_db < d.required_gsnr_db {
            return Err(OrchestratorError::Optimize(crate::optimizer::OptimizeError::NoFeasibleSlot {
                demand: d.demand_id.clone(),
                shortfall_db: d.required_gsnr_db - d.predicted_gsnr_db,
            }));
        }
    }

    let mut cp = control_plane(ctx, art, now_ms)?;
    let tenant_token = ctx.token(&ctx.tenant)?;
    let slots: BTreeSet<usize> = designs.iter().flat_map(|d| d.slot_index..d.slot_index + d.slot_width).collect();
    let id = lease_id(cp.execute(
        tenant_token,
        Command::RequestLease {
            lessor: ctx.lessor.clone(),
            resources: slots.iter().map(|i| Resource::Slot { line: ctx.line.id.clone(), index: *i }).collect(),
            duration_ms: lease_ms(ctx),
        },
    )?)?;
    cp.execute(ctx.token(&ctx.lessor)?, Command::GrantLease { lease: id })?;
    for d in &designs {
        let config = PortConfig { slot_index: d.slot_index, format: d.format.clone(), launch_power_dbm: d.launch_power_dbm };
        for port in [&d.tx_port, &d.rx_port] {
            cp.execute(tenant_token, Command::ConfigurePort { port: port.clone(), config: config.clone() })?;
        }
    }
    let validations = validate_designs(
        &designs,
        cp.port_configs(),
        ctx.line,
        ctx.grid,
        config,
        &ctx.scenario.transceivers,
        &ctx.scenario.formats,
        p.validation_noise_sigma_db,
        sub_seed(ctx.seed, "validate", 0),
    )?;
    if let Some(v) = validations.iter().find(|v| v.measured_gsnr_db < v.required_gsnr_db) {
        return Err(OrchestratorError::Infeasible(format!(
            "{} measured {:.2} dB, below the required {:.2} dB",
            v.demand_id, v.measured_gsnr_db, v.required_gsnr_db
        )));
    }
    let plan = ChannelPlan::with_traffic(ctx.grid, config, &traffic_channels(&designs))?;
    let received = simulate_osa_spectrum(
        ctx.line,
        ctx.grid,
        config,
        &plan,
        &ctx.line.endpoints[1],
        p.osa_noise_sigma_db,
        sub_seed(ctx.seed, "osa-validate", 0),
    )?;
    art.control_audit = cp.audit().to_vec();
    art.provision = Some(ProvisionArtifact { designs, validations, received_spectrum: received });
    Ok(())
}

/// Migrates the affected site's datasets over the provisioned capacity.
pub fn act_migrate(ctx: &Context, art: &mut Artifacts, now_ms: u64) -> Result<(), OrchestratorError> {
    let prov = need(&art.provision, "lightpaths.json")?;
    let capacity: f64 = prov
        .designs
        .iter()
        .map(|d| ctx.scenario.format(&d.format).map_or(0.0, |f| f.net_rate_gbps))
        .sum();
    let dc = ctx.scenario.affected_data_center().ok_or_else(|| OrchestratorError::Invalid("no affected site".into()))?;
    let p = &ctx.scenario.parameters;
    let job = MigrationJob {
        dataset_id: dc.datasets.iter().map(|d| d.id.as_str()).collect::<Vec<_>>().join("+"),
        size_gb: dc.datasets.iter().map(|d| d.size_gb).sum(),
        capacity_gbps: capacity,
        utilization: p.migration_utilization,
        setup_overhead_min: p.migration_setup_min,
    };
    let mut clock = SimClock::default();
    clock.advance(now_ms);
    art.migration = Some(migrate_dataset(&job, &mut clock)?);
    Ok(())
}
