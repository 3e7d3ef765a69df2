//! Broker-side task offloading: picks one running replica per task.

use std::collections::HashMap;

use super::{OffloadAlgorithm, OffloadMode, OffloadPolicy, LATENCY_TIE_EPS};
use crate::topology::{NodeId, Topology};
use crate::virtualization::{AppId, Cluster, InstanceId, InstanceState};

/// Running replicas known to the brokers.
#[derive(Clone, Debug, Default)]
pub struct Directory {
    shared: HashMap<AppId, Vec<InstanceId>>,
    private: HashMap<(AppId, NodeId), InstanceId>,
}

impl Directory {
    /// Registers a running instance. Private instances are keyed by owner.
    pub fn insert(&mut self, app: AppId, id: InstanceId, owner: Option<NodeId>) {
        match owner {
            Some(device) => {
                self.private.insert((app, device), id);
            }
            None => {
                let list = self.shared.entry(app).or_default();
                if let Err(pos) = list.binary_search(&id) {
                    list.insert(pos, id);
                }
            }
        }
    }

    pub fn remove(&mut self, app: AppId, id: InstanceId) {
        if let Some(list) = self.shared.get_mut(&app) {
            list.retain(|&i| i != id);
        }
        self.private.retain(|_, &mut i| i != id);
    }

    /// Shared replicas of `app`, ascending by id.
    pub fn replicas(&self, app: AppId) -> &[InstanceId] {
        self.shared.get(&app).map_or(&[], |v| v.as_slice())
    }

    pub fn private_of(&self, app: AppId, device: NodeId) -> Option<InstanceId> {
        self.private.get(&(app, device)).copied()
    }

    pub fn contains(&self, id: InstanceId) -> bool {
        self.shared.values().any(|v| v.contains(&id)) || self.private.values().any(|&i| i == id)
    }
}

/// Per-broker offloading memory: round-robin cursors and static bindings.
#[derive(Clone, Debug, Default)]
pub struct BrokerState {
    rr_cursors: HashMap<AppId, usize>,
    static_bindings: HashMap<NodeId, InstanceId>,
    /// Decisions computed (not served from a binding).
    pub recomputations: u64,
}

impl BrokerState {
    pub fn binding(&self, device: NodeId) -> Option<InstanceId> {
        self.static_bindings.get(&device).copied()
    }

    /// Drops every binding to `id`.
    pub fn invalidate(&mut self, id: InstanceId) {
        self.static_bindings.retain(|_, &mut i| i != id);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffloadRequest {
    pub device: NodeId,
    pub app: AppId,
    pub length_mi: f64,
}

/// Predicted delay of running a task of `length_mi` on `host` for a request
/// from `device`: network latency plus the host's outstanding work and the
/// new task, spread over its cores.
pub fn score_best_delay(
    topo: &Topology,
    cluster: &Cluster,
    device: NodeId,
    host: NodeId,
    length_mi: f64,
) -> f64 {
    let h = cluster.host(host).expect("instance host");
    let latency = topo.path_latency(device, host).unwrap_or(f64::INFINITY);
    latency + (h.pending_mi / h.mips_per_core + length_mi / h.mips_per_core) / h.cores as f64
}

/// Chooses the replica serving `req`, or `None` when none is running.
pub fn offload(
    req: &OffloadRequest,
    directory: &Directory,
    broker: &mut BrokerState,
    policy: OffloadPolicy,
    topo: &Topology,
    cluster: &Cluster,
) -> Option<InstanceId> {
    let running = |id: InstanceId| cluster.instance(id).state == InstanceState::Running;
    if let Some(id) = directory.private_of(req.app, req.device) {
        return running(id).then_some(id);
    }
    if policy.mode == OffloadMode::Static {
        if let Some(id) = broker.binding(req.device) {
            if running(id) && directory.contains(id) && cluster.instance(id).app() == req.app {
                return Some(id);
            }
            broker.static_bindings.remove(&req.device);
        }
    }
    let all = directory.replicas(req.app);
    if all.is_empty() {
        return None;
    }
    // A broker resolves within its own OLT domain and escalates to the
    // global directory only when the domain has no replica.
    let domain = topo.olt_of(req.device);
    let local: Vec<InstanceId> = all
        .iter()
        .copied()
        .filter(|&i| topo.olt_of(cluster.instance(i).host) == domain)
        .collect();
    let candidates: &[InstanceId] = if local.is_empty() { all } else { &local };
    broker.recomputations += 1;
    let choice = match policy.algorithm {
        OffloadAlgorithm::RoundRobin => {
            let cursor = broker.rr_cursors.entry(req.app).or_insert(0);
            let id = candidates[*cursor % candidates.len()];
            *cursor = (*cursor + 1) % candidates.len();
            id
        }
        OffloadAlgorithm::BestLatency => {
            let scored: Vec<(f64, u32, InstanceId)> = candidates
                .iter()
                .map(|&i| {
                    let inst = cluster.instance(i);
                    let lat = topo.path_latency(req.device, inst.host).unwrap_or(f64::INFINITY);
                    (lat, inst.assigned_task_count, i)
                })
                .collect();
            let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            scored
                .iter()
                .filter(|s| s.0 <= best + LATENCY_TIE_EPS)
                .min_by_key(|s| (s.1, s.2))
                .expect("non-empty")
                .2
        }
        OffloadAlgorithm::BestDelay => {
            candidates
                .iter()
                .map(|&i| {
                    let inst = cluster.instance(i);
                    let d = score_best_delay(topo, cluster, req.device, inst.host, req.length_mi);
                    (d, inst.assigned_task_count, i)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
                .expect("non-empty")
                .2
        }
    };
    if policy.mode == OffloadMode::Static {
        broker.static_bindings.insert(req.device, choice);
    }
    Some(choice)
}
