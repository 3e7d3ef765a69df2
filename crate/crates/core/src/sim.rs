//! One simulation run: container placement phase, then the task workload.
//!
//! Task lifecycle: the device asks its OLT's broker (control round trip plus
//! lookup time), the broker picks a replica, the request travels to the
//! replica's host, runs on a core, and the response travels back. The task
//! is judged against its SLO when the response reaches the device.

use std::collections::HashMap;

use crate::config::ScenarioConfig;
use crate::engine::{Engine, EngineError, RandomStreams, SimTime};
use crate::metrics::{compute_energy_j, MetricsLedger, TaskRecord};
use crate::network::{Network, NetworkError, TransferKind, Wakeup};
use crate::orchestration::placement::PlacementState;
use crate::orchestration::{offload, place, BrokerState, Directory, OffloadRequest, PlacementContext};
use crate::topology::{NodeId, NodeKind, Topology, TopologyError};
use crate::virtualization::{AppId, Cluster, InstanceId, InstanceState, VirtError};
use crate::workload::{
    emit_container_requests, ArrivalProcess, Outcome, Task, TaskId, Trace, UserProfile,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("container: {0}")]
    Virt(#[from] VirtError),
}

/// What a network transfer carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tag {
    Image(InstanceId),
    PlacementUpdate,
    Query(u32),
    Reply(u32),
    Request(u32),
    Response(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ev {
    Arrival(u32),
    Drained { id: crate::network::TransferId, version: u32 },
    Delivered(crate::network::TransferId),
    Decide(u32),
    ExecDone(u32),
}

/// Counters beyond task outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub containers_placed: u32,
    pub containers_unplaced: u32,
    pub containers_on_onts: u32,
    pub tasks_on_onts: u64,
    pub tasks_on_vms: u64,
    pub tasks_on_cloud: u64,
    pub broker_recomputations: u64,
}

pub struct RunOutput {
    pub metrics: MetricsLedger,
    pub stats: RunStats,
    pub workload_start_s: f64,
    pub horizon_s: f64,
}

struct Slab {
    slots: Vec<Option<Task>>,
    free: Vec<u32>,
    live: usize,
}

impl Slab {
    fn insert(&mut self, t: Task) -> u32 {
        self.live += 1;
        match self.free.pop() {
            Some(i) => {
                self.slots[i as usize] = Some(t);
                i
            }
            None => {
                self.slots.push(Some(t));
                (self.slots.len() - 1) as u32
            }
        }
    }

    fn get(&mut self, i: u32) -> &mut Task {
        self.slots[i as usize].as_mut().expect("live task")
    }

    fn remove(&mut self, i: u32) -> Task {
        self.live -= 1;
        self.free.push(i);
        self.slots[i as usize].take().expect("live task")
    }
}

pub struct Simulation {
    cfg: ScenarioConfig,
    topo: Topology,
    cluster: Cluster,
    net: Network<Tag>,
    engine: Engine<Ev>,
    directory: Directory,
    brokers: HashMap<NodeId, BrokerState>,
    placement: PlacementState,
    arrivals: Vec<ArrivalProcess>,
    instance_owner: Vec<Option<NodeId>>,
    private_of: HashMap<NodeId, InstanceId>,
    tasks: Slab,
    metrics: MetricsLedger,
    stats: RunStats,
    streams: RandomStreams,
    wake: Vec<Wakeup>,
    next_task: u64,
    t0: f64,
    horizon: f64,
    workload_started: bool,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate()?;
        let plan = cfg.user_plan();
        let onts: Vec<Option<u32>> = plan.iter().map(|u| u.ont).collect();
        let topo = Topology::build(&cfg.topology, &onts)?;
        let cluster = Cluster::new(&topo, cfg.max_queued_tasks);
        let net = Network::new(&topo);
        let brokers = topo.brokers().iter().map(|&b| (b, BrokerState::default())).collect();
        let metrics = MetricsLedger::new(
            cfg.applications
                .iter()
                .map(|a| (a.name.clone(), a.max_latency_s)),
            cfg.keep_task_records,
        );
        Ok(Self {
            cfg: cfg.clone(),
            topo,
            cluster,
            net,
            engine: Engine::new(),
            directory: Directory::default(),
            brokers,
            placement: PlacementState::default(),
            arrivals: Vec::new(),
            instance_owner: Vec::new(),
            private_of: HashMap::new(),
            tasks: Slab {
                slots: Vec::new(),
                free: Vec::new(),
                live: 0,
            },
            metrics,
            stats: RunStats::default(),
            streams: RandomStreams::new(seed),
            wake: Vec::new(),
            next_task: 0,
            t0: 0.0,
            horizon: 0.0,
            workload_started: false,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn network(&self) -> &Network<Tag> {
        &self.net
    }

    pub fn metrics(&self) -> &MetricsLedger {
        &self.metrics
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn tasks_in_flight(&self) -> usize {
        self.tasks.live
    }

    pub fn workload_start(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Places every container and runs until all images have arrived.
    pub fn deploy(&mut self) -> Result<(), SimError> {
        let plan = self.cfg.user_plan();
        let mut subscribers = vec![Vec::new(); self.cfg.applications.len()];
        for (i, u) in plan.iter().enumerate() {
            subscribers[u.app.0 as usize].push(self.topo.devices()[i]);
        }
        let requests = emit_container_requests(&self.cfg.applications, &subscribers);
        let far_edge = self.cfg.deployment_model.far_edge();
        let now = self.engine.now();
        for req in &requests {
            let ctx = PlacementContext {
                topo: &self.topo,
                cluster: &self.cluster,
                now,
                far_edge,
            };
            let host = match place(req, &self.cfg.policy, &ctx, &mut self.placement) {
                Ok(h) => h,
                Err(_) => {
                    self.stats.containers_unplaced += 1;
                    continue;
                }
            };
            let id = self
                .cluster
                .admit_container(req.spec.clone(), host, req.subscribers.clone())?;
            self.instance_owner.push(req.owner);
            if let Some(owner) = req.owner {
                self.private_of.insert(owner, id);
            }
            self.stats.containers_placed += 1;
            if self.topo.kind(host) == NodeKind::Ont {
                self.stats.containers_on_onts += 1;
            }
            let cloud = self.topo.cloud();
            self.net.start(
                &self.topo,
                cloud,
                host,
                req.spec.image_size_mb,
                TransferKind::ContainerImage,
                Tag::Image(id),
                now,
            )?;
        }
        self.flush_wakeups()?;
        while let Some(ev) = self.engine.pop_until(SimTime::from_secs(f64::MAX)) {
            self.handle(ev.payload)?;
        }
        Ok(())
    }

    /// Starts user arrivals at the current time for the configured duration.
    pub fn start_workload(&mut self) -> Result<(), SimError> {
        self.t0 = self.engine.now().secs();
        self.horizon = self.t0 + self.cfg.duration_s;
        self.metrics.workload_start_s = self.t0;
        let plan = self.cfg.user_plan();
        for (i, u) in plan.iter().enumerate() {
            let app = &self.cfg.applications[u.app.0 as usize];
            let profile = UserProfile {
                device: self.topo.devices()[i],
                app: u.app,
                task_rate_per_min: app.task_rate_per_min,
                pattern: u.pattern.clone(),
                activity: u.activity.clone(),
            };
            let rng = self.streams.substream(RandomStreams::PROFILE, i as u32);
            let mut process = ArrivalProcess::new(profile, rng, self.cfg.duration_s);
            if let Some(t) = process.next_arrival() {
                self.engine
                    .schedule(SimTime::from_secs(self.t0 + t), Ev::Arrival(i as u32))?;
            }
            self.arrivals.push(process);
        }
        self.workload_started = true;
        Ok(())
    }

    /// Processes the next event up to the horizon. Returns `false` when none
    /// is left.
    pub fn step(&mut self) -> Result<bool, SimError> {
        match self.engine.pop_until(SimTime::from_secs(self.horizon)) {
            Some(ev) => {
                self.handle(ev.payload)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Full run: placement, workload, finalization.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        self.deploy()?;
        self.start_workload()?;
        while self.step()? {}
        Ok(self.finish())
    }

    /// Advances the clock to the horizon and closes the books. Tasks still
    /// in flight stay submitted without an outcome.
    pub fn finish(mut self) -> RunOutput {
        self.engine.advance_to(SimTime::from_secs(self.horizon));
        let span = self.horizon;
        let mut compute = 0.0;
        for h in self.cluster.hosts() {
            compute += compute_energy_j(h.busy_core_seconds, h.cores, span, h.active_watts, h.idle_watts);
        }
        self.metrics.energy.network_j = self.net.total_energy_j();
        self.metrics.energy.mediation_j = self.cluster.mediation_energy_j();
        self.metrics.energy.compute_j = compute;
        self.metrics.events_processed = self.engine.processed();
        self.stats.broker_recomputations = self.brokers.values().map(|b| b.recomputations).sum();
        if let Some(records) = self.metrics.records.as_mut() {
            for t in self.tasks.slots.iter().flatten() {
                records.push(record_of(t));
            }
            records.sort_by_key(|r| r.id.0);
        }
        RunOutput {
            metrics: self.metrics,
            stats: self.stats,
            workload_start_s: self.t0,
            horizon_s: self.horizon,
        }
    }

    fn flush_wakeups(&mut self) -> Result<(), SimError> {
        self.net.take_wakeups(&mut self.wake);
        for w in self.wake.drain(..) {
            match w {
                Wakeup::Drained { id, version, at } => {
                    self.engine.schedule(at, Ev::Drained { id, version })?;
                }
                Wakeup::Delivered { id, at } => {
                    self.engine.schedule(at, Ev::Delivered(id))?;
                }
            }
        }
        Ok(())
    }

    fn send(&mut self, src: NodeId, dst: NodeId, size_mb: f64, kind: TransferKind, tag: Tag) -> Result<(), SimError> {
        let now = self.engine.now();
        self.net.start(&self.topo, src, dst, size_mb, kind, tag, now)?;
        self.flush_wakeups()
    }

    fn handle(&mut self, ev: Ev) -> Result<(), SimError> {
        let now = self.engine.now();
        match ev {
            Ev::Arrival(user) => self.on_arrival(user),
            Ev::Drained { id, version } => {
                self.net.on_drained(id, version, now);
                self.flush_wakeups()
            }
            Ev::Delivered(id) => {
                let t = self.net.on_delivered(id).expect("delivered transfer");
                self.on_transfer(t.tag)
            }
            Ev::Decide(slot) => self.on_decide(slot),
            Ev::ExecDone(slot) => self.on_exec_done(slot),
        }
    }

    fn on_transfer(&mut self, tag: Tag) -> Result<(), SimError> {
        let now = self.engine.now();
        let ctrl_mb = self.cfg.policy.control_message_kb / 1000.0;
        match tag {
            Tag::Image(id) => {
                self.cluster.mark_running(id);
                let app = self.cluster.instance(id).app();
                let owner = self.instance_owner[id.0 as usize];
                self.directory.insert(app, id, owner);
                let host = self.cluster.instance(id).host;
                match self.topo.broker_of(host) {
                    Some(b) => self.send(host, b, ctrl_mb, TransferKind::Control, Tag::PlacementUpdate),
                    None => Ok(()),
                }
            }
            Tag::PlacementUpdate => Ok(()),
            Tag::Query(slot) => {
                let lookup = self.cfg.policy.broker_lookup_latency_s;
                self.engine.schedule(now.after(lookup), Ev::Decide(slot))?;
                Ok(())
            }
            Tag::Reply(slot) => {
                let task = self.tasks.get(slot);
                task.trace.broker_resolved = Some(now.secs());
                let (device, size) = (task.device, task.request_mb);
                let host = self.cluster.instance(task.instance.expect("bound")).host;
                self.send(device, host, size, TransferKind::TaskRequest, Tag::Request(slot))
            }
            Tag::Request(slot) => {
                let task = self.tasks.get(slot);
                task.trace.request_arrived = Some(now.secs());
                let inst = task.instance.expect("bound");
                let (len, payload) = (task.length_mi, task.request_mb + task.response_mb);
                match self.cluster.execute(inst, len, payload, now) {
                    Ok(exec) => {
                        let task = self.tasks.get(slot);
                        task.trace.execution_started = Some(exec.start.secs());
                        match self.topo.kind(self.cluster.instance(inst).host) {
                            NodeKind::Ont => self.stats.tasks_on_onts += 1,
                            NodeKind::Cloud => self.stats.tasks_on_cloud += 1,
                            _ => self.stats.tasks_on_vms += 1,
                        }
                        self.engine.schedule(exec.finish, Ev::ExecDone(slot))?;
                        Ok(())
                    }
                    Err(VirtError::QueueFull(_)) | Err(VirtError::NotRunning(_)) => {
                        self.cluster.abandon(inst, len);
                        self.reject(slot);
                        Ok(())
                    }
                    Err(e) => Err(e.into()),
                }
            }
            Tag::Response(slot) => {
                let mut task = self.tasks.remove(slot);
                task.trace.response_delivered = Some(now.secs());
                let outcome = task.judge(now);
                task.outcome = Some(outcome);
                self.metrics
                    .finish(task.app, outcome, Some(now.secs() - task.created_at.secs()));
                if self.metrics.records.is_some() {
                    let r = self.record(&task);
                    self.metrics.push_record(r);
                }
                Ok(())
            }
        }
    }

    fn on_arrival(&mut self, user: u32) -> Result<(), SimError> {
        let now = self.engine.now();
        let process = &mut self.arrivals[user as usize];
        let (device, app) = (process.profile().device, process.profile().app);
        if let Some(t) = process.next_arrival() {
            self.engine
                .schedule(SimTime::from_secs(self.t0 + t), Ev::Arrival(user))?;
        }
        match self.availability(device, app) {
            Availability::Running => {}
            Availability::Pending => {
                self.metrics.withhold(app);
                return Ok(());
            }
            Availability::Absent => {
                let slot = self.create_task(device, app, now);
                self.reject(slot);
                return Ok(());
            }
        }
        let slot = self.create_task(device, app, now);
        let broker = self.topo.broker_of(device).expect("device under an OLT");
        let ctrl_mb = self.cfg.policy.control_message_kb / 1000.0;
        self.send(device, broker, ctrl_mb, TransferKind::Control, Tag::Query(slot))
    }

    fn availability(&self, device: NodeId, app: AppId) -> Availability {
        let shared = self.cfg.applications[app.0 as usize].container.shared;
        let state_of = |id: InstanceId| self.cluster.instance(id).state;
        if !shared {
            return match self.private_of.get(&device) {
                Some(&id) if state_of(id) == InstanceState::Running => Availability::Running,
                Some(&id) if state_of(id) == InstanceState::Transferring => Availability::Pending,
                _ => Availability::Absent,
            };
        }
        if !self.directory.replicas(app).is_empty() {
            return Availability::Running;
        }
        let pending = self
            .cluster
            .instances()
            .iter()
            .any(|i| i.app() == app && i.state == InstanceState::Transferring);
        if pending {
            Availability::Pending
        } else {
            Availability::Absent
        }
    }

    fn create_task(&mut self, device: NodeId, app: AppId, now: SimTime) -> u32 {
        let spec = &self.cfg.applications[app.0 as usize];
        let id = TaskId(self.next_task);
        self.next_task += 1;
        self.metrics.submit(app);
        self.tasks.insert(Task {
            id,
            device,
            app,
            length_mi: spec.task_length_mi,
            request_mb: spec.request_kb / 1000.0,
            response_mb: spec.response_kb / 1000.0,
            created_at: now,
            max_latency_s: spec.max_latency_s,
            deadline: now.after(spec.max_latency_s),
            trace: Trace {
                submitted: Some(now.secs()),
                ..Trace::default()
            },
            instance: None,
            outcome: None,
        })
    }

    fn reject(&mut self, slot: u32) {
        let mut task = self.tasks.remove(slot);
        task.outcome = Some(Outcome::Rejected);
        self.metrics.finish(task.app, Outcome::Rejected, None);
        if self.metrics.records.is_some() {
            let r = self.record(&task);
            self.metrics.push_record(r);
        }
    }

    fn record(&self, task: &Task) -> TaskRecord {
        let mut r = record_of(task);
        r.host = task.instance.map(|i| self.cluster.instance(i).host);
        r
    }

    fn on_decide(&mut self, slot: u32) -> Result<(), SimError> {
        let task = self.tasks.get(slot);
        let req = OffloadRequest {
            device: task.device,
            app: task.app,
            length_mi: task.length_mi,
        };
        let broker_node = self.topo.broker_of(req.device).expect("device under an OLT");
        let broker = self.brokers.get_mut(&broker_node).expect("broker state");
        let choice = offload(
            &req,
            &self.directory,
            broker,
            self.cfg.policy.offloading,
            &self.topo,
            &self.cluster,
        );
        let Some(inst) = choice else {
            self.reject(slot);
            return Ok(());
        };
        self.cluster.dispatch(inst, req.length_mi);
        self.tasks.get(slot).instance = Some(inst);
        let ctrl_mb = self.cfg.policy.control_message_kb / 1000.0;
        self.send(broker_node, req.device, ctrl_mb, TransferKind::Control, Tag::Reply(slot))
    }

    fn on_exec_done(&mut self, slot: u32) -> Result<(), SimError> {
        let now = self.engine.now();
        let task = self.tasks.get(slot);
        task.trace.execution_finished = Some(now.secs());
        let inst = task.instance.expect("bound");
        let (len, device, size) = (task.length_mi, task.device, task.response_mb);
        let host = self.cluster.instance(inst).host;
        self.cluster.finish(inst, len);
        self.send(host, device, size, TransferKind::TaskResponse, Tag::Response(slot))
    }
}

enum Availability {
    Running,
    Pending,
    Absent,
}

fn record_of(t: &Task) -> TaskRecord {
    TaskRecord {
        id: t.id,
        app: t.app,
        device: t.device,
        created_at: t.created_at.secs(),
        trace: t.trace,
        outcome: t.outcome,
        host: None,
    }
}
