//! Container placement: four scoring algorithms, each usable globally
//! (standard variant) or inside a host picked by proximity (latency
//! variant) or by replica/device proportion (rate variant).

use std::collections::HashMap;

use super::{PlacementAlgorithm, PlacementVariant, PolicyConfig, ResourceWeights, LATENCY_TIE_EPS};
use crate::engine::SimTime;
use crate::topology::{NodeId, NodeKind, Topology};
use crate::virtualization::{Cluster, HostState, InstanceState};
use crate::workload::DeploymentRequest;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("no feasible node for a container of app {0}")]
    NoFeasibleNode(u16),
}

/// Read-only view the placement decision is taken on.
pub struct PlacementContext<'a> {
    pub topo: &'a Topology,
    pub cluster: &'a Cluster,
    pub now: SimTime,
    pub far_edge: bool,
}

/// A candidate host of the two-level variants and the nodes it contributes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementScope {
    /// An OLT or an ONT.
    pub host: NodeId,
    /// The OLT's VMs, or the ONT itself; feasible nodes only.
    pub nodes: Vec<NodeId>,
}

/// `C_i / N_i`: containers per core.
pub fn score_cpu_greedy(h: &HostState) -> f64 {
    h.container_count as f64 / h.cores as f64
}

/// `(2 C_i + 1) * t_i * S_t / MIPS_i`.
pub fn score_trade_off(h: &HostState, task_length_mi: f64, t: f64) -> f64 {
    (2.0 * h.container_count as f64 + 1.0) * t * task_length_mi / h.mips_per_core
}

/// Weighted availability of RAM, storage, idle cores and per-core speed,
/// minus the container count and the topology weight. Per-core speed is
/// normalized by the fastest candidate (`mips_max`).
pub fn score_multi_objective(
    h: &HostState,
    w: &ResourceWeights,
    t: f64,
    busy_cores: u32,
    mips_max: f64,
) -> f64 {
    let ram = h.available_ram_mb / h.ram_total_mb;
    let storage = h.available_storage_mb / h.storage_total_mb;
    let cores = (h.cores - busy_cores.min(h.cores)) as f64 / h.cores as f64;
    let mips = h.mips_per_core / mips_max;
    w.ram * ram + w.storage * storage + w.cores * cores + w.mips * mips
        - h.container_count as f64
        - t
}

/// Round-robin cursors, one per placement scope.
#[derive(Clone, Debug, Default)]
pub struct PlacementState {
    cursors: HashMap<Option<NodeId>, usize>,
}

/// Chooses the node for one deployment request.
pub fn place(
    req: &DeploymentRequest,
    policy: &PolicyConfig,
    ctx: &PlacementContext<'_>,
    state: &mut PlacementState,
) -> Result<NodeId, PlacementError> {
    let fits = |n: &NodeId| ctx.cluster.host(*n).is_some_and(|h| h.fits(&req.spec));
    let fail = || PlacementError::NoFeasibleNode(req.app.0);

    let (scope_key, all) = match policy.placement.variant {
        PlacementVariant::Standard => (None, ctx.topo.execution_hosts(ctx.far_edge)),
        variant => {
            let scopes = candidate_scopes(ctx, &req.spec);
            if scopes.is_empty() {
                return Err(fail());
            }
            let host = match variant {
                PlacementVariant::LatencyBased => select_host_latency(ctx, req, &scopes),
                _ => select_host_rate(ctx, req, &scopes),
            };
            (Some(host), scope_members(ctx.topo, host))
        }
    };
    let feasible: Vec<NodeId> = all.iter().copied().filter(fits).collect();
    if feasible.is_empty() {
        return Err(fail());
    }
    let choice = match policy.placement.algorithm {
        PlacementAlgorithm::RoundRobin => {
            let cursor = state.cursors.entry(scope_key).or_insert(0);
            let n = all.len();
            let start = *cursor % n;
            let pos = (0..n)
                .map(|k| (start + k) % n)
                .find(|&p| fits(&all[p]))
                .expect("a feasible node exists");
            *cursor = pos + 1;
            all[pos]
        }
        algorithm => select_by_score(algorithm, &feasible, req, policy, ctx),
    };
    Ok(choice)
}

/// Applies a scoring algorithm over feasible nodes (sorted by id).
pub fn select_by_score(
    algorithm: PlacementAlgorithm,
    feasible: &[NodeId],
    req: &DeploymentRequest,
    policy: &PolicyConfig,
    ctx: &PlacementContext<'_>,
) -> NodeId {
    let host = |n: NodeId| ctx.cluster.host(n).expect("host");
    match algorithm {
        PlacementAlgorithm::RoundRobin => feasible[0],
        PlacementAlgorithm::CpuGreedy => *feasible
            .iter()
            .min_by(|&&a, &&b| {
                let (ha, hb) = (host(a), host(b));
                score_cpu_greedy(ha)
                    .total_cmp(&score_cpu_greedy(hb))
                    .then(hb.cores.cmp(&ha.cores))
                    .then(a.cmp(&b))
            })
            .unwrap(),
        PlacementAlgorithm::TradeOff => {
            let score = |n: NodeId| {
                let h = host(n);
                score_trade_off(h, req.task_length_mi, policy.trade_off_weights.weight(h.kind))
            };
            *feasible
                .iter()
                .min_by(|&&a, &&b| score(a).total_cmp(&score(b)).then(a.cmp(&b)))
                .unwrap()
        }
        PlacementAlgorithm::MultiObjective => {
            let mips_max = feasible
                .iter()
                .map(|&n| host(n).mips_per_core)
                .fold(0.0, f64::max);
            let score = |n: NodeId| {
                let h = host(n);
                score_multi_objective(
                    h,
                    &policy.resource_weights,
                    policy.multi_objective_weights.weight(h.kind),
                    h.busy_cores(ctx.now),
                    mips_max,
                )
            };
            *feasible
                .iter()
                .min_by(|&&a, &&b| score(b).total_cmp(&score(a)).then(a.cmp(&b)))
                .unwrap()
        }
    }
}

fn scope_members(topo: &Topology, host: NodeId) -> Vec<NodeId> {
    match topo.kind(host) {
        NodeKind::Olt => topo.vms_of(host).to_vec(),
        _ => vec![host],
    }
}

/// OLTs (and ONTs under far-edge deployment) with at least one feasible node.
pub fn candidate_scopes(
    ctx: &PlacementContext<'_>,
    spec: &crate::virtualization::ContainerSpec,
) -> Vec<PlacementScope> {
    let mut hosts: Vec<NodeId> = ctx.topo.olts().to_vec();
    if ctx.far_edge {
        hosts.extend_from_slice(ctx.topo.onts());
    }
    hosts
        .into_iter()
        .filter_map(|host| {
            let nodes: Vec<NodeId> = scope_members(ctx.topo, host)
                .into_iter()
                .filter(|n| ctx.cluster.host(*n).is_some_and(|h| h.fits(spec)))
                .collect();
            (!nodes.is_empty()).then_some(PlacementScope { host, nodes })
        })
        .collect()
}

fn same_app_on(ctx: &PlacementContext<'_>, req: &DeploymentRequest, host: NodeId) -> Vec<usize> {
    let members = scope_members(ctx.topo, host);
    ctx.cluster
        .instances()
        .iter()
        .enumerate()
        .filter(|(_, i)| {
            i.app() == req.app && i.state != InstanceState::Removed && members.contains(&i.host)
        })
        .map(|(k, _)| k)
        .collect()
}

/// Mean latency between this app's containers on `host` (the host itself
/// when it runs none yet) and the app's subscribers in the host's OLT
/// service area. Infinite when that area has no subscribers.
pub fn host_mean_latency(ctx: &PlacementContext<'_>, req: &DeploymentRequest, host: NodeId) -> f64 {
    let lat = |a: NodeId, b: NodeId| ctx.topo.path_latency(a, b).unwrap_or(f64::INFINITY);
    let area = ctx.topo.olt_of(host);
    let local: Vec<NodeId> = req
        .subscribers
        .iter()
        .copied()
        .filter(|&d| ctx.topo.olt_of(d) == area)
        .collect();
    if local.is_empty() {
        return f64::INFINITY;
    }
    let existing = same_app_on(ctx, req, host);
    let sources: Vec<NodeId> = if existing.is_empty() {
        vec![host]
    } else {
        existing.iter().map(|&k| ctx.cluster.instances()[k].host).collect()
    };
    let mut sum = 0.0;
    for &src in &sources {
        for &d in &local {
            sum += lat(src, d);
        }
    }
    sum / (sources.len() * local.len()) as f64
}

/// Lowest mean latency, then fewest same-app containers, then lowest id.
pub fn select_host_latency(
    ctx: &PlacementContext<'_>,
    req: &DeploymentRequest,
    scopes: &[PlacementScope],
) -> NodeId {
    let scored: Vec<(NodeId, f64, usize)> = scopes
        .iter()
        .map(|s| {
            (
                s.host,
                host_mean_latency(ctx, req, s.host),
                same_app_on(ctx, req, s.host).len(),
            )
        })
        .collect();
    let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    scored
        .iter()
        .filter(|s| s.1 <= best + LATENCY_TIE_EPS)
        .min_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|s| s.0)
        .unwrap_or(scopes[0].host)
}

/// Lowest copies/devices ratio; hosts without devices last; then fewest
/// copies, then lowest id.
pub fn select_host_rate(
    ctx: &PlacementContext<'_>,
    req: &DeploymentRequest,
    scopes: &[PlacementScope],
) -> NodeId {
    let key = |s: &PlacementScope| {
        let copies = same_app_on(ctx, req, s.host).len();
        let devices = ctx.topo.devices_below(s.host).len();
        let ratio = if devices == 0 {
            f64::INFINITY
        } else {
            copies as f64 / devices as f64
        };
        (devices == 0, ratio, copies, s.host)
    };
    scopes
        .iter()
        .map(key)
        .min_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        })
        .map(|k| k.3)
        .expect("at least one scope")
}
