use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{err, ControlError, ErrorCode};
use crate::model::{PortConfig, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    ReadState,
    Configure,
    ReadTelemetry,
}

const ALL_VERBS: [Verb; 3] = [Verb::ReadState, Verb::Configure, Verb::ReadTelemetry];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resource {
    Slot { line: String, index: usize },
    Port { id: String },
    Compute { data_center: String, vcpu: u32, storage_gb: u32 },
}

impl Resource {
    /// Capability key. Compute leases of one data center share a key.
    pub fn key(&self) -> String {
        match self {
            Resource::Slot { line, index } => slot_key(line, *index),
            Resource::Port { id } => port_key(id),
            Resource::Compute { data_center, .. } => format!("compute:{data_center}"),
        }
    }
}

fn slot_key(line: &str, index: usize) -> String {
    format!("slot:{line}:{index}")
}

fn port_key(id: &str) -> String {
    format!("port:{id}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineInventory {
    pub owner: String,
    pub slot_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortInventory {
    pub owner: String,
    pub node: String,
    pub line: String,
    pub supported_formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeCapacity {
    pub operator: String,
    pub vcpu: u32,
    pub storage_gb: u32,
}

/// Everything the control plane manages, with owners. Fixed for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    /// Operator id to token.
    pub operators: BTreeMap<String, String>,
    pub lines: BTreeMap<String, LineInventory>,
    pub ports: BTreeMap<String, PortInventory>,
    pub compute: BTreeMap<String, ComputeCapacity>,
    /// Slots each format occupies.
    pub format_widths: BTreeMap<String, usize>,
}

impl Inventory {
    pub fn from_scenario(s: &Scenario) -> Self {
        let grid_slots = |id: &str| s.grid(id).map_or(0, |g| g.slot_count);
        Self {
            operators: s.operators.iter().map(|o| (o.id.clone(), o.token.clone())).collect(),
            lines: s
                .line_systems
                .iter()
                .map(|l| (l.id.clone(), LineInventory { owner: l.owner.clone(), slot_count: grid_slots(&l.grid) }))
                .collect(),
            ports: s
                .transceivers
                .iter()
                .map(|p| {
                    (
                        p.id.clone(),
                        PortInventory {
                            owner: p.owner.clone(),
                            node: p.node.clone(),
                            line: p.line_system.clone(),
                            supported_formats: p.supported_formats.clone(),
                        },
                    )
                })
                .collect(),
            compute: s
                .data_centers
                .iter()
                .map(|d| {
                    (
                        d.id.clone(),
                        ComputeCapacity { operator: d.operator.clone(), vcpu: d.compute_vcpu, storage_gb: d.compute_storage_gb },
                    )
                })
                .collect(),
            format_widths: s
                .formats
                .iter()
                .map(|f| {
                    let width = s.grids.first().map_or(1, |g| g.slots_for(f.symbol_rate_gbd));
                    (f.id.clone(), width)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaseState {
    Requested,
    Granted,
    Active,
    Released,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lease {
    pub id: String,
    pub lessor: String,
    pub lessee: String,
    pub resources: Vec<Resource>,
    pub state: LeaseState,
    /// Every state the lease has been in, in order.
    pub history: Vec<LeaseState>,
    pub duration_ms: u64,
    pub expires_at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelegationContext {
    pub id: String,
    pub port: String,
    pub owner: String,
    pub tenant: String,
    pub lease: String,
    pub verbs: BTreeSet<Verb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSession {
    pub operator: String,
    pub token: String,
    pub capabilities: BTreeSet<(String, Verb)>,
}

impl OperatorSession {
    pub fn allows(&self, key: &str, verb: Verb) -> bool {
        self.capabilities.contains(&(key.to_string(), verb))
    }
}

/// State-changing operations. Clock and token commands are administrative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "kebab-case")]
pub enum Command {
    RequestLease { lessor: String, resources: Vec<Resource>, duration_ms: u64 },
    GrantLease { lease: String },
    ReleaseLease { lease: String },
    DelegatePort { port: String, tenant: String, verbs: BTreeSet<Verb> },
    ConfigurePort { port: String, config: PortConfig },
    AdvanceClock { to_ms: u64 },
    RevokeToken { operator: String },
}

impl Command {
    fn is_admin(&self) -> bool {
        matches!(self, Command::AdvanceClock { .. } | Command::RevokeToken { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    Lease(Lease),
    Delegation(DelegationContext),
    Ack { port: String },
    Clock { now_ms: u64, expired: Vec<String> },
    Revoked { operator: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub at_ms: u64,
    /// `None` for administrative commands.
    pub actor: Option<String>,
    pub command: Command,
    /// "ok" or the error code.
    pub outcome: String,
}

/// The single authoritative control plane of a scenario. Every mutation
/// goes through [`ControlPlane::execute`] or [`ControlPlane::execute_admin`]
/// and is appended to the audit log, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlane {
    inventory: Inventory,
    revoked: BTreeSet<String>,
    leases: BTreeMap<String, Lease>,
    delegations: BTreeMap<String, DelegationContext>,
    port_configs: BTreeMap<String, PortConfig>,
    clock_ms: u64,
    next_lease: u64,
    next_context: u64,
    #[serde(skip)]
    audit: Vec<AuditRecord>,
}

impl ControlPlane {
    pub fn new(inventory: Inventory) -> Self {
        Self {
            inventory,
            revoked: BTreeSet::new(),
            leases: BTreeMap::new(),
            delegations: BTreeMap::new(),
            port_configs: BTreeMap::new(),
            clock_ms: 0,
            next_lease: 1,
            next_context: 1,
            audit: Vec::new(),
        }
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn leases(&self) -> &BTreeMap<String, Lease> {
        &self.leases
    }

    pub fn delegations(&self) -> &BTreeMap<String, DelegationContext> {
        &self.delegations
    }

    pub fn port_configs(&self) -> &BTreeMap<String, PortConfig> {
        &self.port_configs
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    /// State without the audit log, as canonical JSON.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("control state serializes")
    }

    pub fn audit_jsonl(&self) -> String {
        self.audit.iter().map(|r| serde_json::to_string(r).expect("audit record serializes") + "\n").collect()
    }

    /// Owner of the resource behind a capability key.
    pub fn owner_of(&self, key: &str) -> Option<&str> {
        let (kind, rest) = key.split_once(':')?;
        match kind {
            "slot" => {
                let (line, _) = rest.rsplit_once(':')?;
                self.inventory.lines.get(line).map(|l| l.owner.as_str())
            }
            "port" => self.inventory.ports.get(rest).map(|p| p.owner.as_str()),
            "compute" => self.inventory.compute.get(rest).map(|c| c.operator.as_str()),
            _ => None,
        }
    }

    fn operator_for(&self, token: &str) -> Result<String, ControlError> {
        let op = self
            .inventory
            .operators
            .iter()
            .find(|(_, t)| t.as_str() == token)
            .map(|(id, _)| id.clone());
        match op {
            Some(op) if !self.revoked.contains(&op) => Ok(op),
            Some(_) => err(ErrorCode::Auth, "token revoked"),
            None => err(ErrorCode::Auth, "unknown token"),
        }
    }

    pub fn authenticate(&self, token: &str) -> Result<OperatorSession, ControlError> {
        let operator = self.operator_for(token)?;
        Ok(OperatorSession { capabilities: self.capabilities(&operator), operator, token: token.to_string() })
    }

    fn active_leases(&self) -> impl Iterator<Item = &Lease> {
        self.leases.values().filter(|l| l.state == LeaseState::Active)
    }

    fn delegation_for_port(&self, port: &str) -> Option<&DelegationContext> {
        self.delegations.values().find(|c| c.port == port)
    }

    /// Capabilities from ownership, active leases and delegations. Owners
    /// keep read access to what they lease out but give up configuration of
    /// leased slots and of delegated ports.
    pub fn capabilities(&self, operator: &str) -> BTreeSet<(String, Verb)> {
        let mut caps = BTreeSet::new();
        let leased_out: BTreeSet<String> = self
            .active_leases()
            .filter(|l| l.lessor == operator)
            .flat_map(|l| l.resources.iter().filter(|r| matches!(r, Resource::Slot { .. })).map(|r| r.key()))
            .collect();
        let mut owned = |key: String, configurable: bool| {
            for v in ALL_VERBS {
                if v != Verb::Configure || configurable {
                    caps.insert((key.clone(), v));
                }
            }
        };
        for (id, line) in &self.inventory.lines {
            if line.owner == operator {
                for i in 0..line.slot_count {
                    let key = slot_key(id, i);
                    let free = !leased_out.contains(&key);
                    owned(key, free);
                }
            }
        }
        for (id, port) in &self.inventory.ports {
            if port.owner == operator {
                owned(port_key(id), self.delegation_for_port(id).is_none());
            }
        }
        for (id, dc) in &self.inventory.compute {
            if dc.operator == operator {
                owned(format!("compute:{id}"), true);
            }
        }
        for lease in self.active_leases().filter(|l| l.lessee == operator) {
            for r in &lease.resources {
                caps.insert((r.key(), Verb::ReadState));
                if !matches!(r, Resource::Port { .. }) {
                    caps.insert((r.key(), Verb::Configure));
                }
            }
        }
        for ctx in self.delegations.values().filter(|c| c.tenant == operator) {
            for v in &ctx.verbs {
                caps.insert((port_key(&ctx.port), *v));
            }
        }
        caps
    }

    /// Runs an operator command on behalf of `token`.
    pub fn execute(&mut self, token: &str, command: Command) -> Result<Outcome, ControlError> {
        let actor = match self.operator_for(token) {
            Ok(a) => a,
            Err(e) => {
                self.record(None, command, Err(&e));
                return Err(e);
            }
        };
        let result = if command.is_admin() {
            err(ErrorCode::Denied, "administrative command")
        } else {
            self.apply(Some(&actor), &command)
        };
        self.record(Some(actor), command, result.as_ref().map(|_| ()));
        result
    }

    /// Runs a clock or token command on behalf of the platform.
    pub fn execute_admin(&mut self, command: Command) -> Result<Outcome, ControlError> {
        let result =
            if command.is_admin() { self.apply(None, &command) } else { err(ErrorCode::Invalid, "not an administrative command") };
        self.record(None, command, result.as_ref().map(|_| ()));
        result
    }

    fn record(&mut self, actor: Option<String>, command: Command, result: Result<(), &ControlError>) {
        self.audit.push(AuditRecord {
            seq: self.audit.len() as u64 + 1,
            at_ms: self.clock_ms,
            actor,
            command,
            outcome: match result {
                Ok(()) => "ok".into(),
                Err(e) => e.code.as_str().into(),
            },
        });
    }

    /// Rebuilds a control plane from `inventory` and an audit log. Fails if
    /// any record's outcome does not reproduce.
    pub fn replay(inventory: Inventory, records: &[AuditRecord]) -> Result<Self, String> {
        let mut cp = Self::new(inventory);
        for r in records {
            let result = match &r.actor {
                // Failed logins carry no actor and change nothing.
                None if r.outcome == ErrorCode::Auth.as_str() => err(ErrorCode::Auth, "unknown or revoked token"),
                None if r.command.is_admin() => cp.apply(None, &r.command),
                None => err(ErrorCode::Invalid, "not an administrative command"),
                Some(_) if r.command.is_admin() => err(ErrorCode::Denied, "administrative command"),
                Some(actor) => cp.apply(Some(actor), &r.command),
            };
            let outcome = match &result {
                Ok(_) => "ok".to_string(),
                Err(e) => e.code.as_str().to_string(),
            };
            if outcome != r.outcome {
                return Err(format!("record {}: replay gave {outcome}, log has {}", r.seq, r.outcome));
            }
            cp.record(r.actor.clone(), r.command.clone(), result.as_ref().map(|_| ()));
        }
        Ok(cp)
    }

    pub fn parse_audit(jsonl: &str) -> Result<Vec<AuditRecord>, String> {
        jsonl
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect()
    }

    fn apply(&mut self, actor: Option<&str>, command: &Command) -> Result<Outcome, ControlError> {
        match (actor, command) {
            (Some(a), Command::RequestLease { lessor, resources, duration_ms }) => {
                self.request_lease(a, lessor, resources, *duration_ms)
            }
            (Some(a), Command::GrantLease { lease }) => self.grant_lease(a, lease),
            (Some(a), Command::ReleaseLease { lease }) => self.release_lease(a, lease),
            (Some(a), Command::DelegatePort { port, tenant, verbs }) => self.delegate_port(a, port, tenant, verbs),
            (Some(a), Command::ConfigurePort { port, config }) => self.configure_port(a, port, config),
            (None, Command::AdvanceClock { to_ms }) => self.advance_clock(*to_ms),
            (None, Command::RevokeToken { operator }) => {
                if !self.inventory.operators.contains_key(operator) {
                    return err(ErrorCode::NotFound, format!("operator {operator}"));
                }
                self.revoked.insert(operator.clone());
                Ok(Outcome::Revoked { operator: operator.clone() })
            }
            _ => err(ErrorCode::Invalid, "command not allowed for this caller"),
        }
    }

    fn check_resource(&self, r: &Resource) -> Result<(), ControlError> {
        let known = match r {
            Resource::Slot { line, index } => self.inventory.lines.get(line).is_some_and(|l| *index < l.slot_count),
            Resource::Port { id } => self.inventory.ports.contains_key(id),
            Resource::Compute { data_center, .. } => self.inventory.compute.contains_key(data_center),
        };
        if known {
            Ok(())
        } else {
            err(ErrorCode::NotFound, format!("resource {}", r.key()))
        }
    }

    /// Exclusivity against active leases; compute is checked by capacity.
    fn check_available(&self, resources: &[Resource], skip: Option<&str>) -> Result<(), ControlError> {
        let active: Vec<&Lease> = self.active_leases().filter(|l| Some(l.id.as_str()) != skip).collect();
        for r in resources {
            match r {
                Resource::Compute { data_center, vcpu, storage_gb } => {
                    let (mut used_cpu, mut used_gb) = (*vcpu as u64, *storage_gb as u64);
                    for l in &active {
                        for x in &l.resources {
                            if let Resource::Compute { data_center: d, vcpu: c, storage_gb: g } = x {
                                if d == data_center {
                                    used_cpu += *c as u64;
                                    used_gb += *g as u64;
                                }
                            }
                        }
                    }
                    let cap = &self.inventory.compute[data_center];
                    if used_cpu > cap.vcpu as u64 || used_gb > cap.storage_gb as u64 {
                        return err(ErrorCode::Conflict, format!("{} capacity exhausted", r.key()));
                    }
                }
                _ => {
                    let key = r.key();
                    if let Some(l) = active.iter().find(|l| l.resources.iter().any(|x| x.key() == key)) {
                        return err(ErrorCode::Conflict, format!("{key} already in active lease {}", l.id));
                    }
                }
            }
        }
        Ok(())
    }

    fn request_lease(
        &mut self,
        actor: &str,
        lessor: &str,
        resources: &[Resource],
        duration_ms: u64,
    ) -> Result<Outcome, ControlError> {
        if !self.inventory.operators.contains_key(lessor) {
            return err(ErrorCode::NotFound, format!("operator {lessor}"));
        }
        if lessor == actor {
            return err(ErrorCode::Invalid, "cannot lease from oneself");
        }
        if resources.is_empty() || duration_ms == 0 {
            return err(ErrorCode::Invalid, "lease needs resources and a positive duration");
        }
        let mut keys = BTreeSet::new();
        for r in resources {
            self.check_resource(r)?;
            if !keys.insert(r.key()) {
                return err(ErrorCode::Invalid, format!("{} listed twice", r.key()));
            }
            if self.owner_of(&r.key()) != Some(lessor) {
                return err(ErrorCode::Denied, format!("{} is not owned by {lessor}", r.key()));
            }
        }
        self.check_available(resources, None)?;
        let id = format!("lease-{:04}", self.next_lease);
        self.next_lease += 1;
        let lease = Lease {
            id: id.clone(),
            lessor: lessor.to_string(),
            lessee: actor.to_string(),
            resources: resources.to_vec(),
            state: LeaseState::Requested,
            history: vec![LeaseState::Requested],
            duration_ms,
            expires_at_ms: None,
        };
        self.leases.insert(id, lease.clone());
        Ok(Outcome::Lease(lease))
    }

    fn grant_lease(&mut self, actor: &str, id: &str) -> Result<Outcome, ControlError> {
        let lease = self.leases.get(id).ok_or_else(|| ControlError::new(ErrorCode::NotFound, format!("lease {id}")))?;
        if lease.lessor != actor {
            return err(ErrorCode::Denied, format!("{actor} does not own the resources of {id}"));
        }
        if lease.state != LeaseState::Requested {
            return err(ErrorCode::Invalid, format!("lease {id} is not pending"));
        }
        let resources = lease.resources.clone();
        self.check_available(&resources, Some(id))?;
        let now = self.clock_ms;
        let lease = self.leases.get_mut(id).expect("checked");
        lease.history.extend([LeaseState::Granted, LeaseState::Active]);
        lease.state = LeaseState::Active;
        lease.expires_at_ms = Some(now.saturating_add(lease.duration_ms));
        Ok(Outcome::Lease(lease.clone()))
    }

    fn end_lease(&mut self, id: &str, state: LeaseState) -> Lease {
        let lease = self.leases.get_mut(id).expect("lease exists");
        lease.state = state;
        lease.history.push(state);
        let lease = lease.clone();
        self.delegations.retain(|_, c| c.lease != id);
        lease
    }

    fn release_lease(&mut self, actor: &str, id: &str) -> Result<Outcome, ControlError> {
        let lease = self.leases.get(id).ok_or_else(|| ControlError::new(ErrorCode::NotFound, format!("lease {id}")))?;
        if lease.lessor != actor && lease.lessee != actor {
            return err(ErrorCode::Denied, format!("{actor} is not a party to {id}"));
        }
        if lease.state != LeaseState::Active {
            return err(ErrorCode::Invalid, format!("lease {id} is not active"));
        }
        Ok(Outcome::Lease(self.end_lease(id, LeaseState::Released)))
    }

    fn advance_clock(&mut self, to_ms: u64) -> Result<Outcome, ControlError> {
        if to_ms < self.clock_ms {
            return err(ErrorCode::Invalid, "clock cannot move backwards");
        }
        self.clock_ms = to_ms;
        let due: Vec<String> = self
            .active_leases()
            .filter(|l| l.expires_at_ms.is_some_and(|t| t <= to_ms))
            .map(|l| l.id.clone())
            .collect();
        for id in &due {
            self.end_lease(id, LeaseState::Expired);
        }
        Ok(Outcome::Clock { now_ms: to_ms, expired: due })
    }

    fn delegate_port(
        &mut self,
        actor: &str,
        port: &str,
        tenant: &str,
        verbs: &BTreeSet<Verb>,
    ) -> Result<Outcome, ControlError> {
        let inv = self.inventory.ports.get(port).ok_or_else(|| ControlError::new(ErrorCode::NotFound, format!("port {port}")))?;
        if inv.owner != actor {
            return err(ErrorCode::Denied, format!("{actor} does not own port {port}"));
        }
        if !self.inventory.operators.contains_key(tenant) {
            return err(ErrorCode::NotFound, format!("operator {tenant}"));
        }
        if tenant == inv.owner {
            return err(ErrorCode::Invalid, "tenant must differ from the owner");
        }
        if verbs.is_empty() {
            return err(ErrorCode::Invalid, "no verbs delegated");
        }
        if let Some(c) = self.delegation_for_port(port) {
            return err(ErrorCode::Conflict, format!("port {port} already delegated in {}", c.id));
        }
        let key = port_key(port);
        let lease = self
            .active_leases()
            .find(|l| l.lessee == tenant && l.resources.iter().any(|r| r.key() == key))
            .map(|l| l.id.clone())
            .ok_or_else(|| ControlError::new(ErrorCode::Denied, format!("no active lease of {port} to {tenant}")))?;
        let ctx = DelegationContext {
            id: format!("ctx-{:04}", self.next_context),
            port: port.to_string(),
            owner: actor.to_string(),
            tenant: tenant.to_string(),
            lease,
            verbs: verbs.clone(),
        };
        self.next_context += 1;
        self.delegations.insert(ctx.id.clone(), ctx.clone());
        Ok(Outcome::Delegation(ctx))
    }

    fn configure_port(&mut self, actor: &str, port: &str, config: &PortConfig) -> Result<Outcome, ControlError> {
        let inv = self.inventory.ports.get(port).ok_or_else(|| ControlError::new(ErrorCode::NotFound, format!("port {port}")))?;
        let caps = self.capabilities(actor);
        if !caps.contains(&(port_key(port), Verb::Configure)) {
            return err(ErrorCode::Denied, format!("{actor} may not configure port {port}"));
        }
        if !inv.supported_formats.contains(&config.format) {
            return err(ErrorCode::Invalid, format!("port {port} does not support {}", config.format));
        }
        let width = *self
            .inventory
            .format_widths
            .get(&config.format)
            .ok_or_else(|| ControlError::new(ErrorCode::Invalid, format!("unknown format {}", config.format)))?;
        let slots = self.inventory.lines.get(&inv.line).map_or(0, |l| l.slot_count);
        if config.slot_index + width > slots || !config.launch_power_dbm.is_finite() {
            return err(ErrorCode::Invalid, format!("config does not fit line {}", inv.line));
        }
        let range = config.slot_index..config.slot_index + width;
        for s in range.clone() {
            if !caps.contains(&(slot_key(&inv.line, s), Verb::Configure)) {
                return err(ErrorCode::Denied, format!("{actor} may not use slot {s} of {}", inv.line));
            }
        }
        for (other, cfg) in &self.port_configs {
            if other == port {
                continue;
            }
            let o = &self.inventory.ports[other];
            if o.line != inv.line || o.node != inv.node {
                continue;
            }
            let w = self.inventory.format_widths.get(&cfg.format).copied().unwrap_or(1);
            if cfg.slot_index < range.end && range.start < cfg.slot_index + w {
                return err(ErrorCode::Conflict, format!("slot {} occupied by port {other}", config.slot_index));
            }
        }
        self.port_configs.insert(port.to_string(), config.clone());
        Ok(Outcome::Ack { port: port.to_string() })
    }
}
