//! Container instances, per-host resource accounting and per-core
//! execution queues.
//!
//! A host is any node that may run containers: VMs on OLT servers, ONTs and
//! optionally the cloud. Containers on a VM pay a fixed hypervisor mediation
//! delay per task (request in, response out). Containers on ONTs run on the
//! physical device and pay nothing.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct ContainerSpec {
    pub app: AppId,
    pub ram_mb: f64,
    pub storage_mb: f64,
    pub image_size_mb: f64,
    pub shared: bool,
    pub replica_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceState {
    Transferring,
    Running,
    Removed,
}

#[derive(Clone, Debug)]
pub struct ContainerInstance {
    pub id: InstanceId,
    pub spec: ContainerSpec,
    pub host: NodeId,
    pub state: InstanceState,
    /// Tasks dispatched to this instance and not yet finished.
    pub assigned_task_count: u32,
    pub subscribers: Vec<NodeId>,
    removal_pending: bool,
}

impl ContainerInstance {
    pub fn app(&self) -> AppId {
        self.spec.app
    }

    pub fn removal_pending(&self) -> bool {
        self.removal_pending
    }
}

/// Mutable state of one execution host.
#[derive(Clone, Debug)]
pub struct HostState {
    pub node: NodeId,
    pub kind: NodeKind,
    pub cores: u32,
    pub mips_per_core: f64,
    pub ram_total_mb: f64,
    pub storage_total_mb: f64,
    pub available_ram_mb: f64,
    pub available_storage_mb: f64,
    pub container_count: u32,
    /// Per-core time at which the last queued task finishes.
    pub busy_until: Vec<f64>,
    /// Tasks waiting on or running on the cores.
    pub queued_tasks: u32,
    /// Total length of the tasks routed here and not yet finished.
    pub pending_mi: f64,
    pub pending_tasks: u32,
    pub busy_core_seconds: f64,
    pub active_watts: f64,
    pub idle_watts: f64,
    /// Per-task mediation delay, `2 x` hypervisor link latency on VMs.
    pub mediation_s: f64,
    pub mediation_energy_per_mb: f64,
}

impl HostState {
    pub fn new(topo: &Topology, node: NodeId) -> Option<Self> {
        let kind = topo.kind(node);
        if !kind.can_host() {
            return None;
        }
        let spec = topo.compute(node)?;
        let (mediation_s, mediation_energy_per_mb) = match topo.hypervisor_link(node) {
            Some(link) if kind == NodeKind::Vm => (2.0 * link.latency_s, link.energy_per_mb),
            _ => (0.0, 0.0),
        };
        Some(Self {
            node,
            kind,
            cores: spec.cores,
            mips_per_core: spec.mips_per_core,
            ram_total_mb: spec.ram_mb,
            storage_total_mb: spec.storage_mb,
            available_ram_mb: spec.ram_mb,
            available_storage_mb: spec.storage_mb,
            container_count: 0,
            busy_until: vec![0.0; spec.cores as usize],
            queued_tasks: 0,
            pending_mi: 0.0,
            pending_tasks: 0,
            busy_core_seconds: 0.0,
            active_watts: spec.active_watts,
            idle_watts: spec.idle_watts,
            mediation_s,
            mediation_energy_per_mb,
        })
    }

    pub fn fits(&self, spec: &ContainerSpec) -> bool {
        self.available_ram_mb >= spec.ram_mb && self.available_storage_mb >= spec.storage_mb
    }

    /// Cores with work scheduled past `now`.
    pub fn busy_cores(&self, now: SimTime) -> u32 {
        self.busy_until.iter().filter(|&&b| b > now.secs()).count() as u32
    }

    /// Core with the earliest `busy_until`, ties to the lowest index.
    fn least_loaded_core(&self) -> usize {
        let mut best = 0;
        for (i, &b) in self.busy_until.iter().enumerate() {
            if b < self.busy_until[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VirtError {
    #[error("host {host} lacks resources: needs {need_ram} MB RAM / {need_storage} MB storage, has {ram} / {storage}")]
    Insufficient {
        host: NodeId,
        need_ram: f64,
        need_storage: f64,
        ram: f64,
        storage: f64,
    },
    #[error("node {0} cannot host containers")]
    NotAHost(NodeId),
    #[error("instance {0:?} is not running")]
    NotRunning(InstanceId),
    #[error("host {0} queue is full")]
    QueueFull(NodeId),
}

/// Timing of one task execution on a host core.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Execution {
    pub core: usize,
    pub start: SimTime,
    pub service_s: f64,
    /// Time the task leaves the container, including mediation.
    pub finish: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Removal {
    Removed,
    Deferred,
}

/// All hosts and container instances of one run.
#[derive(Clone, Debug)]
pub struct Cluster {
    hosts: Vec<Option<HostState>>,
    instances: Vec<ContainerInstance>,
    max_queued_tasks: Option<u32>,
    mediation_energy_j: f64,
}

impl Cluster {
    pub fn new(topo: &Topology, max_queued_tasks: Option<u32>) -> Self {
        let hosts = topo
            .nodes()
            .iter()
            .map(|n| HostState::new(topo, n.id))
            .collect();
        Self {
            hosts,
            instances: Vec::new(),
            max_queued_tasks,
            mediation_energy_j: 0.0,
        }
    }

    pub fn host(&self, node: NodeId) -> Option<&HostState> {
        self.hosts.get(node.index())?.as_ref()
    }

    fn host_mut(&mut self, node: NodeId) -> Option<&mut HostState> {
        self.hosts.get_mut(node.index())?.as_mut()
    }

    pub fn hosts(&self) -> impl Iterator<Item = &HostState> {
        self.hosts.iter().flatten()
    }

    pub fn instance(&self, id: InstanceId) -> &ContainerInstance {
        &self.instances[id.0 as usize]
    }

    pub fn instances(&self) -> &[ContainerInstance] {
        &self.instances
    }

    /// Reserves resources on `host` and registers a transferring instance.
    pub fn admit_container(
        &mut self,
        spec: ContainerSpec,
        host: NodeId,
        subscribers: Vec<NodeId>,
    ) -> Result<InstanceId, VirtError> {
        let h = self.host_mut(host).ok_or(VirtError::NotAHost(host))?;
        if !h.fits(&spec) {
            return Err(VirtError::Insufficient {
                host,
                need_ram: spec.ram_mb,
                need_storage: spec.storage_mb,
                ram: h.available_ram_mb,
                storage: h.available_storage_mb,
            });
        }
        h.available_ram_mb -= spec.ram_mb;
        h.available_storage_mb -= spec.storage_mb;
        h.container_count += 1;
        let id = InstanceId(self.instances.len() as u32);
        self.instances.push(ContainerInstance {
            id,
            spec,
            host,
            state: InstanceState::Transferring,
            assigned_task_count: 0,
            subscribers,
            removal_pending: false,
        });
        Ok(id)
    }

    pub fn mark_running(&mut self, id: InstanceId) {
        let inst = &mut self.instances[id.0 as usize];
        if inst.state == InstanceState::Transferring {
            inst.state = InstanceState::Running;
        }
    }

    /// Records that a task of length `length_mi` has been routed to `id`.
    pub fn dispatch(&mut self, id: InstanceId, length_mi: f64) {
        let inst = &mut self.instances[id.0 as usize];
        inst.assigned_task_count += 1;
        let host = inst.host;
        let h = self.host_mut(host).expect("instance on a host");
        h.pending_mi += length_mi;
        h.pending_tasks += 1;
    }

    /// Reverts a dispatch for a task that never executed.
    pub fn abandon(&mut self, id: InstanceId, length_mi: f64) -> Option<Removal> {
        self.release(id, length_mi)
    }

    /// Queues a dispatched task on the least-loaded core of the instance's
    /// host. The core is busy for `length / mips`; the task leaves the
    /// container after that plus the host's mediation delay.
    pub fn execute(
        &mut self,
        id: InstanceId,
        length_mi: f64,
        payload_mb: f64,
        now: SimTime,
    ) -> Result<Execution, VirtError> {
        let inst = &self.instances[id.0 as usize];
        if inst.state != InstanceState::Running {
            return Err(VirtError::NotRunning(id));
        }
        let host = inst.host;
        let cap = self.max_queued_tasks;
        let h = self.hosts[host.index()].as_mut().expect("instance on a host");
        if let Some(cap) = cap {
            if h.queued_tasks >= cap {
                return Err(VirtError::QueueFull(host));
            }
        }
        let core = h.least_loaded_core();
        let start = h.busy_until[core].max(now.secs());
        let service_s = length_mi / h.mips_per_core;
        h.busy_until[core] = start + service_s;
        h.queued_tasks += 1;
        h.busy_core_seconds += service_s;
        let finish = start + service_s + h.mediation_s;
        self.mediation_energy_j += payload_mb * h.mediation_energy_per_mb;
        Ok(Execution {
            core,
            start: SimTime::from_secs(start),
            service_s,
            finish: SimTime::from_secs(finish),
        })
    }

    /// Completes an executed task. Returns `Some(Removal::Removed)` when
    /// this drained an instance whose removal was deferred.
    pub fn finish(&mut self, id: InstanceId, length_mi: f64) -> Option<Removal> {
        let host = self.instances[id.0 as usize].host;
        let h = self.host_mut(host).expect("instance on a host");
        h.queued_tasks -= 1;
        self.release(id, length_mi)
    }

    fn release(&mut self, id: InstanceId, length_mi: f64) -> Option<Removal> {
        let inst = &mut self.instances[id.0 as usize];
        inst.assigned_task_count -= 1;
        let host = inst.host;
        let drained = inst.assigned_task_count == 0 && inst.removal_pending;
        let h = self.host_mut(host).expect("instance on a host");
        h.pending_tasks -= 1;
        h.pending_mi -= length_mi;
        if h.pending_tasks == 0 {
            h.pending_mi = 0.0;
        }
        if drained {
            self.do_remove(id);
            return Some(Removal::Removed);
        }
        None
    }

    /// Removes an instance and credits its resources; deferred while tasks
    /// are still assigned to it.
    pub fn remove_container(&mut self, id: InstanceId) -> Removal {
        let inst = &mut self.instances[id.0 as usize];
        if inst.state == InstanceState::Removed {
            return Removal::Removed;
        }
        if inst.assigned_task_count > 0 {
            inst.removal_pending = true;
            return Removal::Deferred;
        }
        self.do_remove(id);
        Removal::Removed
    }

    fn do_remove(&mut self, id: InstanceId) {
        let inst = &mut self.instances[id.0 as usize];
        inst.state = InstanceState::Removed;
        inst.removal_pending = false;
        let (host, ram, storage) = (inst.host, inst.spec.ram_mb, inst.spec.storage_mb);
        let h = self.host_mut(host).expect("instance on a host");
        h.available_ram_mb += ram;
        h.available_storage_mb += storage;
        h.container_count -= 1;
    }

    /// Resource conservation on every host, per resource.
    pub fn resources_conserved(&self) -> bool {
        self.hosts().all(|h| {
            let resident = self
                .instances
                .iter()
                .filter(|i| i.host == h.node && i.state != InstanceState::Removed);
            let (mut ram, mut sto, mut n) = (0.0, 0.0, 0u32);
            for i in resident {
                ram += i.spec.ram_mb;
                sto += i.spec.storage_mb;
                n += 1;
            }
            let tol = 1e-6;
            (ram + h.available_ram_mb - h.ram_total_mb).abs() <= tol
                && (sto + h.available_storage_mb - h.storage_total_mb).abs() <= tol
                && h.available_ram_mb >= -tol
                && h.available_ram_mb <= h.ram_total_mb + tol
                && h.available_storage_mb >= -tol
                && n == h.container_count
        })
    }

    pub fn mediation_energy_j(&self) -> f64 {
        self.mediation_energy_j
    }
}
