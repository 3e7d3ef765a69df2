//! Shared oracles for the integration and acceptance tests. Every expected
//! value here is computed from raw inputs, not from the simulator's own
//! bookkeeping.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ponedge::config::ScenarioConfig;
use ponedge::orchestration::{
    offload, place, score_best_delay, score_cpu_greedy, score_multi_objective, score_trade_off,
    BrokerState, Directory, OffloadPolicy, OffloadRequest, PlacementContext, PlacementPolicy,
    PlacementState, PolicyConfig,
};
use ponedge::engine::SimTime;
use ponedge::topology::{ComputeSpec, LinkParams, LinkTable, NodeId, NodeKind, Topology, TopologyConfig};
use ponedge::virtualization::{AppId, Cluster, ContainerSpec, InstanceId, InstanceState};
use ponedge::workload::{DeploymentRequest, Pattern};
use ponedge::Simulation;

/// Parameters of the uncontended single-user path device, ONT, OLT, VM.
#[derive(Clone, Debug)]
pub struct PathCase {
    pub device_ont: LinkParams,
    pub ont_olt: LinkParams,
    pub olt_vm: LinkParams,
    pub olt_broker: LinkParams,
    pub hypervisor_latency_s: f64,
    pub vm_mips: f64,
    pub length_mi: f64,
    pub request_kb: f64,
    pub response_kb: f64,
    pub control_kb: f64,
    pub lookup_s: f64,
}

impl PathCase {
    pub fn random(rng: &mut impl Rng) -> Self {
        let link = |rng: &mut dyn rand::RngCore| {
            LinkParams::new(rng.random_range(0.0..0.005), rng.random_range(50.0..10_000.0))
        };
        Self {
            device_ont: link(rng),
            ont_olt: link(rng),
            olt_vm: link(rng),
            olt_broker: link(rng),
            hypervisor_latency_s: rng.random_range(0.0..0.001),
            vm_mips: rng.random_range(5_000.0..120_000.0),
            length_mi: rng.random_range(0.0..10_000.0),
            request_kb: rng.random_range(0.0..2_000.0),
            response_kb: rng.random_range(0.0..2_000.0),
            control_kb: rng.random_range(0.1..4.0),
            lookup_s: rng.random_range(0.0..0.005),
        }
    }

    /// Hand-derived end-to-end latency of one task.
    pub fn closed_form(&self) -> f64 {
        let leg = |mb: f64, links: &[&LinkParams]| {
            let bw = links.iter().map(|l| l.bandwidth_mbps).fold(f64::INFINITY, f64::min);
            let lat: f64 = links.iter().map(|l| l.latency_s).sum();
            let drain = if mb > 0.0 { mb * 8.0 / bw } else { 0.0 };
            drain + lat
        };
        let broker = [&self.device_ont, &self.ont_olt, &self.olt_broker];
        let host = [&self.device_ont, &self.ont_olt, &self.olt_vm];
        let ctrl = self.control_kb / 1000.0;
        leg(ctrl, &broker)
            + self.lookup_s
            + leg(ctrl, &broker)
            + leg(self.request_kb / 1000.0, &host)
            + self.length_mi / self.vm_mips
            + 2.0 * self.hypervisor_latency_s
            + leg(self.response_kb / 1000.0, &host)
    }

    /// One OLT, one VM, one ONT, one periodic user at 1 task/min.
    pub fn scenario(&self, minutes: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset("S1").expect("preset");
        cfg.duration_s = minutes * 60.0;
        cfg.keep_task_records = true;
        cfg.policy.broker_lookup_latency_s = self.lookup_s;
        cfg.policy.control_message_kb = self.control_kb;
        let t = &mut cfg.topology;
        t.olts = 1;
        t.vms_per_olt = 1;
        t.onts = Some(1);
        t.olt = ComputeSpec::new(2, self.vm_mips, 16_384.0, 128_000.0);
        t.vm = ComputeSpec::new(2, self.vm_mips, 8_192.0, 64_000.0);
        t.links = LinkTable {
            device_ont: self.device_ont.clone(),
            ont_olt: self.ont_olt.clone(),
            olt_vm: self.olt_vm.clone(),
            olt_broker: self.olt_broker.clone(),
            hypervisor: LinkParams::new(self.hypervisor_latency_s, 10_000.0),
            ..LinkTable::default()
        };
        let app = &mut cfg.applications[0];
        app.users = 1;
        app.task_rate_per_min = 1.0;
        app.pattern = Pattern::Periodic { period_s: None };
        app.task_length_mi = self.length_mi;
        app.request_kb = self.request_kb;
        app.response_kb = self.response_kb;
        app.max_latency_s = 10.0;
        app.container.replicas = 1;
        cfg
    }
}

/// Largest absolute error between simulated and closed-form latency over
/// `cases` random paths, and the number of tasks compared.
pub fn single_task_max_error(cases: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for k in 0..cases {
        let case = PathCase::random(&mut rng);
        let out = Simulation::new(&case.scenario(3.0), k as u64)
            .and_then(Simulation::run)
            .expect("run");
        let expected = case.closed_form();
        for r in out.metrics.records.as_deref().unwrap_or(&[]) {
            if let Some(lat) = r.latency_s() {
                worst = worst.max((lat - expected).abs());
                compared += 1;
            }
        }
    }
    (worst, compared)
}

/// A random small topology with a partly loaded cluster.
pub struct RandomState {
    pub topo: Topology,
    pub cluster: Cluster,
    pub directory: Directory,
    /// RAM and storage admitted per host, tracked independently.
    pub used: HashMap<NodeId, (f64, f64, u32)>,
    /// Work dispatched per host, tracked independently.
    pub pending: HashMap<NodeId, f64>,
    pub now: SimTime,
}

fn rand_spec(rng: &mut impl Rng) -> ComputeSpec {
    ComputeSpec::new(
        rng.random_range(1..=8),
        rng.random_range(5_000.0..100_000.0),
        rng.random_range(1_000.0..8_000.0),
        rng.random_range(2_000.0..20_000.0),
    )
}

fn rand_container(rng: &mut impl Rng, app: u16) -> ContainerSpec {
    ContainerSpec {
        app: AppId(app),
        ram_mb: rng.random_range(100.0..2_500.0),
        storage_mb: rng.random_range(100.0..6_000.0),
        image_size_mb: 10.0,
        shared: true,
        replica_count: 1,
    }
}

impl RandomState {
    pub fn new(rng: &mut impl Rng) -> Self {
        let olts = rng.random_range(1..=2);
        let vms_per_olt = rng.random_range(1..=3);
        let onts = rng.random_range(1..=4);
        let vm = rand_spec(rng);
        let mut olt = vm.clone();
        olt.cores = vm.cores * vms_per_olt;
        let cfg = TopologyConfig {
            olts,
            vms_per_olt,
            onts: Some(onts),
            cloud: ComputeSpec::new(8, 100_000.0, 65_536.0, 1_000_000.0),
            olt,
            vm,
            ont: rand_spec(rng),
            links: LinkTable::default(),
            cloud_hosts_containers: false,
        };
        let devices: Vec<Option<u32>> = (0..rng.random_range(1..=6))
            .map(|_| Some(rng.random_range(0..onts)))
            .collect();
        let topo = Topology::build(&cfg, &devices).expect("topology");
        let mut cluster = Cluster::new(&topo, None);
        let mut directory = Directory::default();
        let mut used: HashMap<NodeId, (f64, f64, u32)> = HashMap::new();
        let mut pending: HashMap<NodeId, f64> = HashMap::new();
        let hosts = topo.execution_hosts(true);
        let mut running = Vec::new();
        for _ in 0..rng.random_range(0..8) {
            let host = hosts[rng.random_range(0..hosts.len())];
            let app = rng.random_range(0..2);
            let spec = rand_container(rng, app);
            let (ram, storage) = (spec.ram_mb, spec.storage_mb);
            if let Ok(id) = cluster.admit_container(spec.clone(), host, topo.devices().to_vec()) {
                let e = used.entry(host).or_default();
                e.0 += ram;
                e.1 += storage;
                e.2 += 1;
                if rng.random_bool(0.8) {
                    cluster.mark_running(id);
                    directory.insert(spec.app, id, None);
                    running.push(id);
                }
            }
        }
        for _ in 0..rng.random_range(0..10) {
            if running.is_empty() {
                break;
            }
            let id = running[rng.random_range(0..running.len())];
            let len = rng.random_range(0.0..20_000.0);
            cluster.dispatch(id, len);
            *pending.entry(cluster.instance(id).host).or_default() += len;
            if rng.random_bool(0.5) {
                cluster.execute(id, len, 0.0, SimTime::ZERO).expect("running");
            }
        }
        let now = SimTime::from_secs(rng.random_range(0.0..0.3));
        Self {
            topo,
            cluster,
            directory,
            used,
            pending,
            now,
        }
    }

    fn spec(&self, n: NodeId) -> &ComputeSpec {
        self.topo.compute(n).expect("compute node")
    }

    fn count(&self, n: NodeId) -> u32 {
        self.used.get(&n).map_or(0, |u| u.2)
    }

    fn fits(&self, n: NodeId, c: &ContainerSpec) -> bool {
        let s = self.spec(n);
        let (ram, storage, _) = self.used.get(&n).copied().unwrap_or_default();
        s.ram_mb - ram >= c.ram_mb && s.storage_mb - storage >= c.storage_mb
    }

    fn busy_cores(&self, n: NodeId) -> u32 {
        let h = self.cluster.host(n).expect("host");
        h.busy_until.iter().filter(|&&b| b > self.now.secs()).count() as u32
    }

    fn cg(&self, n: NodeId) -> f64 {
        self.count(n) as f64 / self.spec(n).cores as f64
    }

    fn to(&self, n: NodeId, len: f64, p: &PolicyConfig) -> f64 {
        let t = p.trade_off_weights.weight(self.topo.kind(n));
        (2.0 * self.count(n) as f64 + 1.0) * t * len / self.spec(n).mips_per_core
    }

    fn mo(&self, n: NodeId, p: &PolicyConfig, mips_max: f64) -> f64 {
        let s = self.spec(n);
        let (ram, storage, c) = self.used.get(&n).copied().unwrap_or_default();
        let w = &p.resource_weights;
        let t = p.multi_objective_weights.weight(self.topo.kind(n));
        w.ram * (s.ram_mb - ram) / s.ram_mb
            + w.storage * (s.storage_mb - storage) / s.storage_mb
            + w.cores * (s.cores - self.busy_cores(n)) as f64 / s.cores as f64
            + w.mips * s.mips_per_core / mips_max
            - c as f64
            - t
    }

    fn delay(&self, device: NodeId, host: NodeId, len: f64) -> f64 {
        let s = self.spec(host);
        let lat = latency_by_hand(&self.topo, device, host);
        let q = self.pending.get(&host).copied().unwrap_or(0.0);
        lat + (q / s.mips_per_core + len / s.mips_per_core) / s.cores as f64
    }
}

/// Latency summed link by link up to the lowest common ancestor.
pub fn latency_by_hand(topo: &Topology, a: NodeId, b: NodeId) -> f64 {
    let chain = |mut n: NodeId| {
        let mut v = vec![n];
        while let Some(p) = topo.node(n).parent {
            v.push(p);
            n = p;
        }
        v
    };
    let (ca, cb) = (chain(a), chain(b));
    let common = ca.iter().find(|n| cb.contains(n)).copied().expect("tree");
    let up = |c: &[NodeId]| -> f64 {
        c.iter()
            .take_while(|&&n| n != common)
            .map(|&n| topo.link(topo.node(n).uplink.expect("uplink")).latency_s)
            .sum()
    };
    up(&ca) + up(&cb)
}

/// Checks the score functions and the placement and offloading decisions
/// on `states` random states. Returns the first mismatch.
pub fn equation_oracles(states: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0usize;
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    for k in 0..states {
        let s = RandomState::new(&mut rng);
        let mut policy = PolicyConfig::default();
        policy.trade_off_weights.olt = rng.random_range(0.1..3.0);
        policy.trade_off_weights.ont = rng.random_range(0.1..3.0);
        policy.multi_objective_weights.olt = rng.random_range(0.0..1.0);
        policy.multi_objective_weights.ont = rng.random_range(0.0..1.0);
        policy.resource_weights.ram = rng.random_range(0.0..2.0);
        policy.resource_weights.cores = rng.random_range(0.0..2.0);
        let far_edge = rng.random_bool(0.5);
        let hosts = s.topo.execution_hosts(far_edge);
        let len = rng.random_range(1.0..10_000.0);
        let mips_max = hosts
            .iter()
            .map(|&n| s.spec(n).mips_per_core)
            .fold(0.0, f64::max);

        for &n in &hosts {
            let h = s.cluster.host(n).expect("host");
            let t_to = policy.trade_off_weights.weight(h.kind);
            let t_mo = policy.multi_objective_weights.weight(h.kind);
            let got = [
                score_cpu_greedy(h),
                score_trade_off(h, len, t_to),
                score_multi_objective(h, &policy.resource_weights, t_mo, h.busy_cores(s.now), mips_max),
            ];
            let want = [s.cg(n), s.to(n, len, &policy), s.mo(n, &policy, mips_max)];
            for (g, w) in got.iter().zip(want) {
                if !rel(*g, w) {
                    return Err(format!("state {k}: score on {n}: {g} vs {w}"));
                }
            }
            for &d in s.topo.devices() {
                let g = score_best_delay(&s.topo, &s.cluster, d, n, len);
                let w = s.delay(d, n, len);
                if !rel(g, w) {
                    return Err(format!("state {k}: delay {d}->{n}: {g} vs {w}"));
                }
            }
            checks += 4;
        }

        let container = rand_container(&mut rng, 0);
        let req = DeploymentRequest {
            app: AppId(0),
            spec: container.clone(),
            task_length_mi: len,
            subscribers: s.topo.devices().to_vec(),
            owner: None,
        };
        let ctx = PlacementContext {
            topo: &s.topo,
            cluster: &s.cluster,
            now: s.now,
            far_edge,
        };
        let feasible: Vec<NodeId> = hosts.iter().copied().filter(|&n| s.fits(n, &container)).collect();
        for name in ["round_robin", "cpu_greedy", "trade_off", "multi_objective"] {
            policy.placement = format!("{name}:standard").parse::<PlacementPolicy>().expect("policy");
            let got = place(&req, &policy, &ctx, &mut PlacementState::default()).ok();
            let want = enumerate_standard(&s, name, &feasible, len, &policy);
            if got != want {
                return Err(format!("state {k}: {name} placed {got:?}, enumeration {want:?}"));
            }
            checks += 1;
        }
        for variant in ["latency", "rate"] {
            policy.placement = format!("cpu_greedy:{variant}").parse().expect("policy");
            let got = place(&req, &policy, &ctx, &mut PlacementState::default()).ok();
            let want = enumerate_two_level(&s, variant, &req, far_edge);
            if got != want {
                return Err(format!("state {k}: cpu_greedy:{variant} placed {got:?}, enumeration {want:?}"));
            }
            checks += 1;
        }

        for &device in s.topo.devices() {
            for name in ["round_robin", "best_latency", "best_delay"] {
                let pol: OffloadPolicy = format!("{name}:dynamic").parse().expect("policy");
                let r = OffloadRequest {
                    device,
                    app: AppId(0),
                    length_mi: len,
                };
                let got = offload(&r, &s.directory, &mut BrokerState::default(), pol, &s.topo, &s.cluster);
                let want = enumerate_offload(&s, name, device, len);
                if got != want {
                    return Err(format!("state {k}: {name} from {device}: {got:?} vs {want:?}"));
                }
                checks += 1;
            }
        }
    }
    Ok(checks)
}

fn enumerate_standard(
    s: &RandomState,
    name: &str,
    feasible: &[NodeId],
    len: f64,
    p: &PolicyConfig,
) -> Option<NodeId> {
    if feasible.is_empty() {
        return None;
    }
    let mips_max = feasible.iter().map(|&n| s.spec(n).mips_per_core).fold(0.0, f64::max);
    let mut best = feasible[0];
    for &n in &feasible[1..] {
        let better = match name {
            "round_robin" => false,
            "cpu_greedy" => {
                let (a, b) = (s.cg(n), s.cg(best));
                a < b || (a == b && s.spec(n).cores > s.spec(best).cores)
            }
            "trade_off" => s.to(n, len, p) < s.to(best, len, p),
            _ => s.mo(n, p, mips_max) > s.mo(best, p, mips_max),
        };
        if better {
            best = n;
        }
    }
    Some(best)
}

fn members(topo: &Topology, host: NodeId) -> Vec<NodeId> {
    if topo.kind(host) == NodeKind::Olt {
        topo.vms_of(host).to_vec()
    } else {
        vec![host]
    }
}

fn enumerate_two_level(s: &RandomState, variant: &str, req: &DeploymentRequest, far_edge: bool) -> Option<NodeId> {
    let mut hosts: Vec<NodeId> = s.topo.olts().to_vec();
    if far_edge {
        hosts.extend_from_slice(s.topo.onts());
    }
    let scoped: Vec<(NodeId, Vec<NodeId>)> = hosts
        .into_iter()
        .map(|h| {
            let nodes: Vec<NodeId> = members(&s.topo, h).into_iter().filter(|&n| s.fits(n, &req.spec)).collect();
            (h, nodes)
        })
        .filter(|(_, nodes)| !nodes.is_empty())
        .collect();
    if scoped.is_empty() {
        return None;
    }
    let copies_on = |h: NodeId| -> Vec<NodeId> {
        let m = members(&s.topo, h);
        s.cluster
            .instances()
            .iter()
            .filter(|i| i.app() == req.app && m.contains(&i.host))
            .map(|i| i.host)
            .collect()
    };
    let olt_of = |n: NodeId| {
        let mut c = n;
        loop {
            if s.topo.kind(c) == NodeKind::Olt {
                return Some(c);
            }
            c = s.topo.node(c).parent?;
        }
    };
    let key = |h: NodeId| -> (f64, usize) {
        let copies = copies_on(h);
        match variant {
            "latency" => {
                let local: Vec<NodeId> = req
                    .subscribers
                    .iter()
                    .copied()
                    .filter(|&d| olt_of(d) == olt_of(h))
                    .collect();
                if local.is_empty() {
                    return (f64::INFINITY, copies.len());
                }
                let sources = if copies.is_empty() { vec![h] } else { copies.clone() };
                let mut sum = 0.0;
                for &a in &sources {
                    for &d in &local {
                        sum += latency_by_hand(&s.topo, a, d);
                    }
                }
                (sum / (sources.len() * local.len()) as f64, copies.len())
            }
            _ => {
                let devices = s.topo.devices_below(h).len();
                let ratio = if devices == 0 {
                    f64::INFINITY
                } else {
                    copies.len() as f64 / devices as f64
                };
                (ratio, copies.len())
            }
        }
    };
    let keys: Vec<(NodeId, f64, usize)> = scoped.iter().map(|(h, _)| (*h, key(*h).0, key(*h).1)).collect();
    let best = keys.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
    let tol = if variant == "latency" { 1e-12 } else { 0.0 };
    let host = keys
        .iter()
        .filter(|k| k.1 <= best + tol || (best.is_infinite() && k.1.is_infinite()))
        .min_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|k| k.0)?;
    let nodes = &scoped.iter().find(|(h, _)| *h == host)?.1;
    let mut best_node = nodes[0];
    for &n in &nodes[1..] {
        let (a, b) = (s.cg(n), s.cg(best_node));
        if a < b || (a == b && s.spec(n).cores > s.spec(best_node).cores) {
            best_node = n;
        }
    }
    Some(best_node)
}

fn enumerate_offload(s: &RandomState, name: &str, device: NodeId, len: f64) -> Option<InstanceId> {
    let all: Vec<&ponedge::virtualization::ContainerInstance> = s
        .cluster
        .instances()
        .iter()
        .filter(|i| i.app() == AppId(0) && i.state == InstanceState::Running)
        .collect();
    if all.is_empty() {
        return None;
    }
    let olt_of = |n: NodeId| s.topo.olt_of(n);
    let local: Vec<_> = all.iter().copied().filter(|i| olt_of(i.host) == olt_of(device)).collect();
    let cands = if local.is_empty() { all } else { local };
    let pick = match name {
        "round_robin" => cands[0],
        "best_latency" => {
            let lat = |i: &ponedge::virtualization::ContainerInstance| latency_by_hand(&s.topo, device, i.host);
            let best = cands.iter().map(|i| lat(i)).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .copied()
                .filter(|i| lat(i) <= best + 1e-12)
                .min_by_key(|i| (i.assigned_task_count, i.id))?
        }
        _ => cands
            .iter()
            .copied()
            .min_by(|a, b| {
                s.delay(device, a.host, len)
                    .total_cmp(&s.delay(device, b.host, len))
                    .then(a.assigned_task_count.cmp(&b.assigned_task_count))
                    .then(a.id.cmp(&b.id))
            })?,
    };
    Some(pick.id)
}

/// Knobs of a randomized mini-scenario.
#[derive(Clone, Debug)]
pub struct MiniParams {
    pub olts: u32,
    pub vms_per_olt: u32,
    /// Users per preset application (0 drops the app).
    pub users: [u32; 5],
    pub replicas: u32,
    pub private_first_app: bool,
    pub bursty: bool,
    pub idle_phases: bool,
    pub queue_cap: Option<u32>,
    pub placement: usize,
    pub offloading: usize,
    pub far_edge: bool,
    pub duration_s: f64,
    pub seed: u64,
}

impl MiniParams {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut users = [0; 5];
        for u in &mut users {
            *u = rng.random_range(0..=3);
        }
        users[rng.random_range(0..5)] += 1;
        Self {
            olts: rng.random_range(1..=2),
            vms_per_olt: rng.random_range(1..=2),
            users,
            replicas: rng.random_range(1..=3),
            private_first_app: rng.random_bool(0.2),
            bursty: rng.random_bool(0.3),
            idle_phases: rng.random_bool(0.3),
            queue_cap: rng.random_bool(0.3).then(|| rng.random_range(1..=3)),
            placement: rng.random_range(0..12),
            offloading: rng.random_range(0..6),
            far_edge: rng.random_bool(0.5),
            duration_s: rng.random_range(1.0..20.0),
            seed: rng.random(),
        }
    }

    pub fn scenario(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset("mixed").expect("preset");
        cfg.seed = self.seed;
        cfg.duration_s = self.duration_s;
        cfg.keep_task_records = true;
        cfg.max_queued_tasks = self.queue_cap;
        cfg.deployment_model = if self.far_edge {
            ponedge::DeploymentModel::FarEdgePlusEdge
        } else {
            ponedge::DeploymentModel::EdgeOnly
        };
        cfg.policy.placement = PlacementPolicy::all()[self.placement];
        cfg.policy.offloading = OffloadPolicy::all()[self.offloading];
        cfg.topology.olts = self.olts;
        cfg.topology.vms_per_olt = self.vms_per_olt;
        cfg.topology.olt.cores = self.vms_per_olt * cfg.topology.vm.cores;
        let mut apps = Vec::new();
        for (i, mut app) in cfg.applications.drain(..).enumerate() {
            if self.users[i] == 0 {
                continue;
            }
            app.users = self.users[i];
            app.container.replicas = self.replicas;
            if self.bursty {
                app.pattern = Pattern::Bursty {
                    burst_size: 3,
                    burst_interval_s: 2.0,
                };
            }
            if self.idle_phases {
                app.activity.active_s = Some(3.0);
                app.activity.idle_s = 2.0;
            }
            apps.push(app);
        }
        if self.private_first_app {
            apps[0].container.shared = false;
        }
        cfg.applications = apps;
        cfg
    }
}

/// Steps a run checking link capacity and node resources at every event,
/// then checks task accounting and trace order at the horizon.
pub fn check_conservation(cfg: &ScenarioConfig) -> Result<u64, String> {
    let mut sim = Simulation::new(cfg, cfg.seed).map_err(|e| e.to_string())?;
    sim.deploy().map_err(|e| e.to_string())?;
    sim.start_workload().map_err(|e| e.to_string())?;
    let mut steps = 0u64;
    loop {
        if !sim.network().capacity_respected() {
            return Err(format!("link over capacity at {}", sim.now().secs()));
        }
        if !sim.cluster().resources_conserved() {
            return Err(format!("node resources not conserved at {}", sim.now().secs()));
        }
        if !sim.step().map_err(|e| e.to_string())? {
            break;
        }
        steps += 1;
    }
    let live = sim.tasks_in_flight() as u64;
    let out = sim.finish();
    let m = &out.metrics;
    let records = m.records.as_deref().unwrap_or(&[]);
    let (sub, done, failed, open) = (m.submitted(), m.completed(), m.failed(), m.in_flight());
    if sub != done + failed + open {
        return Err(format!("submitted {sub} != {done} + {failed} + {open}"));
    }
    if open != live {
        return Err(format!("in-flight {open} but {live} live tasks"));
    }
    if records.len() as u64 != sub {
        return Err(format!("{} records for {sub} submitted", records.len()));
    }
    let unresolved = records.iter().filter(|r| r.outcome.is_none()).count() as u64;
    if unresolved != open {
        return Err(format!("{unresolved} records without outcome, {open} in flight"));
    }
    for r in records {
        if !r.trace.is_monotone() {
            return Err(format!("trace of task {:?} not monotone: {:?}", r.id, r.trace));
        }
    }
    Ok(steps)
}
