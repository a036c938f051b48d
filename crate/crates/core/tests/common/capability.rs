//! Shadow of the control plane's authorization rules, kept from the
//! outside: it only sees commands and their accepted outcomes, and says
//! whether a capability justified each accepted mutation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilink_core::control::{Command, ControlPlane, Inventory, Outcome, Resource, Verb};
use resilink_core::model::{PortConfig, Scenario};

#[derive(Debug, Clone, PartialEq)]
enum State {
    Requested,
    Active,
    Ended,
}

#[derive(Debug, Clone)]
struct ShadowLease {
    lessor: String,
    lessee: String,
    keys: Vec<String>,
    duration_ms: u64,
    state: State,
    expires_at_ms: u64,
}

#[derive(Debug, Clone)]
struct ShadowDelegation {
    tenant: String,
    lease: String,
    verbs: BTreeSet<Verb>,
}

#[derive(Debug, Clone)]
pub struct Shadow {
    inv: Inventory,
    leases: BTreeMap<String, ShadowLease>,
    delegations: BTreeMap<String, ShadowDelegation>,
    revoked: BTreeSet<String>,
    clock_ms: u64,
}

fn key(r: &Resource) -> String {
    match r {
        Resource::Slot { line, index } => format!("slot:{line}:{index}"),
        Resource::Port { id } => format!("port:{id}"),
        Resource::Compute { data_center, .. } => format!("compute:{data_center}"),
    }
}

impl Shadow {
    pub fn new(inv: Inventory) -> Self {
        Self { inv, leases: BTreeMap::new(), delegations: BTreeMap::new(), revoked: BTreeSet::new(), clock_ms: 0 }
    }

    pub fn operator_for(&self, token: &str) -> Option<String> {
        self.inv.operators.iter().find(|(_, t)| t.as_str() == token).map(|(o, _)| o.clone())
    }

    pub fn is_revoked(&self, op: &str) -> bool {
        self.revoked.contains(op)
    }

    fn owner(&self, k: &str) -> Option<&str> {
        let (kind, rest) = k.split_once(':')?;
        match kind {
            "slot" => self.inv.lines.get(rest.rsplit_once(':')?.0).map(|l| l.owner.as_str()),
            "port" => self.inv.ports.get(rest).map(|p| p.owner.as_str()),
            "compute" => self.inv.compute.get(rest).map(|c| c.operator.as_str()),
            _ => None,
        }
    }

    fn active(&self) -> impl Iterator<Item = (&String, &ShadowLease)> {
        self.leases.iter().filter(|(_, l)| l.state == State::Active)
    }

    fn exclusive_conflict(&self, keys: &[String], skip: &str) -> bool {
        keys.iter()
            .filter(|k| !k.starts_with("compute:"))
            .any(|k| self.active().any(|(id, l)| id != skip && l.keys.contains(k)))
    }

    /// Ids of the active leases.
    pub fn active_lease_ids(&self) -> Vec<String> {
        self.active().map(|(id, _)| id.clone()).collect()
    }

    /// (lessor, lessee) of a known lease.
    pub fn parties(&self, id: &str) -> Option<(String, String)> {
        self.leases.get(id).map(|l| (l.lessor.clone(), l.lessee.clone()))
    }

    /// Lessee of the active lease covering `port`, if any.
    pub fn port_lessee(&self, port: &str) -> Option<String> {
        let k = format!("port:{port}");
        self.active().find(|(_, l)| l.keys.contains(&k)).map(|(_, l)| l.lessee.clone())
    }

    pub fn all_lease_ids(&self) -> Vec<String> {
        self.leases.keys().cloned().collect()
    }

    fn may_configure_port(&self, actor: &str, port: &str) -> bool {
        let Some(p) = self.inv.ports.get(port) else { return false };
        let delegation = self.delegations.get(port);
        (p.owner == actor && delegation.is_none())
            || delegation.is_some_and(|d| d.tenant == actor && d.verbs.contains(&Verb::Configure))
    }

    fn may_use_slot(&self, actor: &str, line: &str, index: usize) -> bool {
        let k = format!("slot:{line}:{index}");
        let owner = self.inv.lines.get(line).is_some_and(|l| l.owner == actor);
        let leased_out = self.active().any(|(_, l)| l.lessor == actor && l.keys.contains(&k));
        let leased_in = self.active().any(|(_, l)| l.lessee == actor && l.keys.contains(&k));
        (owner && !leased_out) || leased_in
    }

    /// Why an accepted operator command was allowed, or why it should not
    /// have been.
    pub fn justify(&self, actor: &str, cmd: &Command) -> Result<(), String> {
        if self.revoked.contains(actor) {
            return Err(format!("{actor} is revoked"));
        }
        match cmd {
            Command::RequestLease { lessor, resources, .. } => {
                if lessor == actor {
                    return Err("self lease".into());
                }
                let keys: Vec<String> = resources.iter().map(key).collect();
                if let Some(k) = keys.iter().find(|k| self.owner(k) != Some(lessor.as_str())) {
                    return Err(format!("{k} not owned by {lessor}"));
                }
                if self.exclusive_conflict(&keys, "") {
                    return Err("resource already leased".into());
                }
                Ok(())
            }
            Command::GrantLease { lease } => {
                let l = self.leases.get(lease).ok_or("unknown lease")?;
                if l.lessor != actor {
                    return Err(format!("{actor} granted a lease of {}", l.lessor));
                }
                if l.state != State::Requested {
                    return Err("grant of a non-pending lease".into());
                }
                if self.exclusive_conflict(&l.keys, lease) {
                    return Err("grant overlaps an active lease".into());
                }
                Ok(())
            }
            Command::ReleaseLease { lease } => {
                let l = self.leases.get(lease).ok_or("unknown lease")?;
                if l.lessor != actor && l.lessee != actor {
                    return Err(format!("{actor} released a lease it is not party to"));
                }
                if l.state != State::Active {
                    return Err("release of an inactive lease".into());
                }
                Ok(())
            }
            Command::DelegatePort { port, tenant, .. } => {
                if self.owner(&format!("port:{port}")) != Some(actor) {
                    return Err(format!("{actor} delegated {port} it does not own"));
                }
                if self.delegations.contains_key(port) {
                    return Err(format!("{port} delegated twice"));
                }
                let k = format!("port:{port}");
                if !self.active().any(|(_, l)| &l.lessee == tenant && l.keys.contains(&k)) {
                    return Err(format!("{port} delegated without an active lease to {tenant}"));
                }
                Ok(())
            }
            Command::ConfigurePort { port, config } => {
                if !self.may_configure_port(actor, port) {
                    return Err(format!("{actor} configured {port} without the capability"));
                }
                let line = &self.inv.ports[port].line;
                let width = self.inv.format_widths.get(&config.format).copied().ok_or("unknown format")?;
                for s in config.slot_index..config.slot_index + width {
                    if !self.may_use_slot(actor, line, s) {
                        return Err(format!("{actor} used slot {s} of {line} without the capability"));
                    }
                }
                Ok(())
            }
            Command::AdvanceClock { .. } | Command::RevokeToken { .. } => Err("administrative command from an operator".into()),
        }
    }

    fn end(&mut self, id: &str) {
        if let Some(l) = self.leases.get_mut(id) {
            l.state = State::Ended;
        }
        self.delegations.retain(|_, d| d.lease != id);
    }

    /// Folds an accepted command into the shadow state.
    pub fn accept(&mut self, actor: Option<&str>, cmd: &Command, outcome: &Outcome) {
        match (cmd, outcome) {
            (Command::RequestLease { lessor, resources, duration_ms }, Outcome::Lease(l)) => {
                self.leases.insert(
                    l.id.clone(),
                    ShadowLease {
                        lessor: lessor.clone(),
                        lessee: actor.expect("operator command").to_string(),
                        keys: resources.iter().map(key).collect(),
                        duration_ms: *duration_ms,
                        state: State::Requested,
                        expires_at_ms: 0,
                    },
                );
            }
            (Command::GrantLease { lease }, _) => {
                let now = self.clock_ms;
                let l = self.leases.get_mut(lease).expect("granted lease exists");
                l.state = State::Active;
                l.expires_at_ms = now.saturating_add(l.duration_ms);
            }
            (Command::ReleaseLease { lease }, _) => self.end(lease),
            (Command::DelegatePort { port, tenant, verbs }, Outcome::Delegation(d)) => {
                self.delegations.insert(
                    port.clone(),
                    ShadowDelegation { tenant: tenant.clone(), lease: d.lease.clone(), verbs: verbs.clone() },
                );
            }
            (Command::AdvanceClock { to_ms }, _) => {
                self.clock_ms = *to_ms;
                let due: Vec<String> =
                    self.active().filter(|(_, l)| l.expires_at_ms <= *to_ms).map(|(id, _)| id.clone()).collect();
                for id in due {
                    self.end(&id);
                }
            }
            (Command::RevokeToken { operator }, _) => {
                self.revoked.insert(operator.clone());
            }
            _ => {}
        }
    }
}

pub const TOKENS: [&str; 3] = ["token-a", "token-b", "token-c"];
pub const OPERATORS: [&str; 3] = ["op-a", "op-b", "op-c"];

pub fn inventory() -> Inventory {
    Inventory::from_scenario(&Scenario::field_trial())
}

fn verbs(rng: &mut ChaCha8Rng) -> std::collections::BTreeSet<Verb> {
    let all = [Verb::ReadState, Verb::Configure, Verb::ReadTelemetry];
    let mut v: std::collections::BTreeSet<Verb> = all.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    if v.is_empty() && rng.random_bool(0.9) {
        v.insert(Verb::Configure);
    }
    v
}

fn resource(inv: &Inventory, rng: &mut ChaCha8Rng) -> Resource {
    match rng.random_range(0..10) {
        0..=5 => {
            let lines: Vec<&String> = inv.lines.keys().collect();
            Resource::Slot { line: (*lines.choose(rng).unwrap()).clone(), index: rng.random_range(0..50) }
        }
        6..=8 => Resource::Port { id: inv.ports.keys().collect::<Vec<_>>().choose(rng).unwrap().to_string() },
        _ => Resource::Compute {
            data_center: inv.compute.keys().collect::<Vec<_>>().choose(rng).unwrap().to_string(),
            vcpu: rng.random_range(1..40),
            storage_gb: rng.random_range(1..1500),
        },
    }
}

fn token_of(op: &str) -> &'static str {
    TOKENS[OPERATORS.iter().position(|o| *o == op).expect("known operator")]
}

/// A random operator command and the token sending it, biased toward
/// commands from a plausible party so that many are accepted.
fn command(inv: &Inventory, shadow: &Shadow, rng: &mut ChaCha8Rng) -> (&'static str, Command) {
    let any_token = |rng: &mut ChaCha8Rng| *TOKENS.choose(rng).unwrap();
    let lease = |rng: &mut ChaCha8Rng| {
        let ids = shadow.all_lease_ids();
        if ids.is_empty() || rng.random_bool(0.05) {
            "lease-9999".to_string()
        } else {
            ids[ids.len() - 1 - rng.random_range(0..ids.len().min(6))].clone()
        }
    };
    let port = |rng: &mut ChaCha8Rng| inv.ports.keys().collect::<Vec<_>>().choose(rng).unwrap().to_string();
    match rng.random_range(0..100) {
        0..=24 => {
            let n = rng.random_range(1..6);
            let base = rng.random_range(0..48);
            let mut resources: Vec<Resource> = (0..n)
                .map(|k| {
                    if rng.random_bool(0.7) {
                        Resource::Slot { line: "longhaul".into(), index: (base + k) % 48 }
                    } else {
                        resource(inv, rng)
                    }
                })
                .collect();
            if rng.random_bool(0.3) {
                resources.push(Resource::Port { id: format!("b-{}", ["800-1", "800-2", "400-1", "400-2"].choose(rng).unwrap()) });
            }
            let lessor = if rng.random_bool(0.8) { "op-b" } else { *OPERATORS.choose(rng).unwrap() };
            let token = if rng.random_bool(0.8) { *["token-a", "token-c"].choose(rng).unwrap() } else { any_token(rng) };
            (token, Command::RequestLease { lessor: lessor.into(), resources, duration_ms: rng.random_range(0..400_000) })
        }
        25..=47 => {
            let id = lease(rng);
            let grant = rng.random_bool(0.6);
            let token = match shadow.parties(&id) {
                Some((lessor, _)) if grant && rng.random_bool(0.85) => token_of(&lessor),
                Some((lessor, lessee)) if !grant && rng.random_bool(0.85) => {
                    token_of(if rng.random_bool(0.5) { &lessor } else { &lessee })
                }
                _ => any_token(rng),
            };
            (token, if grant { Command::GrantLease { lease: id } } else { Command::ReleaseLease { lease: id } })
        }
        48..=62 => {
            let p = if rng.random_bool(0.7) { format!("b-{}", ["800-1", "800-2", "400-1", "400-2"].choose(rng).unwrap()) } else { port(rng) };
            let owner = inv.ports[&p].owner.clone();
            let tenant = match shadow.port_lessee(&p) {
                Some(t) if rng.random_bool(0.8) => t,
                _ => OPERATORS.choose(rng).unwrap().to_string(),
            };
            let token = if rng.random_bool(0.85) { token_of(&owner) } else { any_token(rng) };
            (token, Command::DelegatePort { port: p, tenant, verbs: verbs(rng) })
        }
        _ => (
            any_token(rng),
            Command::ConfigurePort {
                port: port(rng),
                config: PortConfig {
                    slot_index: rng.random_range(0..48),
                    format: ["400g", "800g"].choose(rng).unwrap().to_string(),
                    launch_power_dbm: rng.random_range(-3.0..3.0),
                },
            },
        ),
    }
}

#[derive(Default, Debug)]
pub struct Tally {
    pub accepted: BTreeMap<&'static str, usize>,
    pub rejected: usize,
}

fn kind(cmd: &Command) -> &'static str {
    match cmd {
        Command::RequestLease { .. } => "request",
        Command::GrantLease { .. } => "grant",
        Command::ReleaseLease { .. } => "release",
        Command::DelegatePort { .. } => "delegate",
        Command::ConfigurePort { .. } => "configure",
        Command::AdvanceClock { .. } => "clock",
        Command::RevokeToken { .. } => "revoke",
    }
}

/// Runs `ops` random operations over the three field-trial operators and
/// checks every accepted mutation against the shadow. Panics on the first
/// unjustified acceptance.
pub fn random_run(seed: u64, ops: usize) -> (ControlPlane, Tally) {
    let inv = inventory();
    let mut cp = ControlPlane::new(inv.clone());
    let mut shadow = Shadow::new(inv.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..ops {
        let roll = rng.random_range(0..1000);
        if roll < 60 {
            let cmd = Command::AdvanceClock { to_ms: cp.clock_ms() + rng.random_range(0..60_000) };
            let out = cp.execute_admin(cmd.clone()).expect("forward clock moves are accepted");
            shadow.accept(None, &cmd, &out);
            continue;
        }
        if roll == 999 && rng.random_bool(0.05) {
            let cmd = Command::RevokeToken { operator: OPERATORS.choose(&mut rng).unwrap().to_string() };
            let out = cp.execute_admin(cmd.clone()).unwrap();
            shadow.accept(None, &cmd, &out);
            continue;
        }
        let (token, cmd) = command(&inv, &shadow, &mut rng);
        let token = if roll < 70 { "forged" } else { token };
        match cp.execute(token, cmd.clone()) {
            Ok(out) => {
                let actor = shadow.operator_for(token).expect("accepted command has a known token");
                if let Err(why) = shadow.justify(&actor, &cmd) {
                    panic!("seed {seed}: accepted {cmd:?} from {actor} without justification: {why}");
                }
                shadow.accept(Some(&actor), &cmd, &out);
                *tally.accepted.entry(kind(&cmd)).or_default() += 1;
            }
            Err(_) => tally.rejected += 1,
        }
    }
    (cp, tally)
}

fn lease_of(out: Outcome) -> String {
    match out {
        Outcome::Lease(l) => l.id,
        o => panic!("{o:?}"),
    }
}

/// Leases slots and a delegated port to op-a, ends the lease (tenant
/// release, owner release or expiry, in turn) and has op-a retry its
/// operations on the former resources. Returns (attempts, accepted).
pub fn post_release_trials(trials: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut attempts, mut accepted) = (0, 0);
    for trial in 0..trials {
        let mut cp = ControlPlane::new(inventory());
        let first = rng.random_range(0..40);
        let width = rng.random_range(2..8);
        let port = ["b-800-1", "b-800-2"].choose(&mut rng).unwrap().to_string();
        let mut resources: Vec<Resource> = (first..first + width).map(|i| Resource::Slot { line: "longhaul".into(), index: i }).collect();
        resources.push(Resource::Port { id: port.clone() });
        let id = lease_of(
            cp.execute("token-a", Command::RequestLease { lessor: "op-b".into(), resources, duration_ms: 3_600_000 }).unwrap(),
        );
        cp.execute("token-b", Command::GrantLease { lease: id.clone() }).unwrap();
        cp.execute("token-b", Command::DelegatePort { port: port.clone(), tenant: "op-a".into(), verbs: [Verb::Configure, Verb::ReadTelemetry].into() })
            .unwrap();
        let cfg = |slot: usize| PortConfig { slot_index: slot, format: "400g".into(), launch_power_dbm: 0.0 };
        cp.execute("token-a", Command::ConfigurePort { port: port.clone(), config: cfg(first) }).unwrap();

        match trial % 3 {
            0 => cp.execute("token-a", Command::ReleaseLease { lease: id.clone() }).map(|_| ()).unwrap(),
            1 => cp.execute("token-b", Command::ReleaseLease { lease: id.clone() }).map(|_| ()).unwrap(),
            _ => cp.execute_admin(Command::AdvanceClock { to_ms: 3_600_000 }).map(|_| ()).unwrap(),
        }

        let tenant_ops = vec![
            Command::ConfigurePort { port: port.clone(), config: cfg(first) },
            Command::ConfigurePort { port: port.clone(), config: cfg(first + width - 1) },
            Command::ConfigurePort { port: "a-400-1".into(), config: cfg(first + rng.random_range(0..width)) },
            Command::ReleaseLease { lease: id.clone() },
            Command::GrantLease { lease: id.clone() },
            Command::DelegatePort { port: port.clone(), tenant: "op-c".into(), verbs: [Verb::Configure].into() },
        ];
        for op in tenant_ops {
            attempts += 1;
            accepted += usize::from(cp.execute("token-a", op).is_ok());
        }
        let session = cp.authenticate("token-a").unwrap();
        let keys = [format!("port:{port}")].into_iter().chain((first..first + width).map(|i| format!("slot:longhaul:{i}")));
        for k in keys {
            attempts += 1;
            accepted += usize::from(session.allows(&k, Verb::Configure) || session.allows(&k, Verb::ReadTelemetry));
        }
    }
    (attempts, accepted)
}
