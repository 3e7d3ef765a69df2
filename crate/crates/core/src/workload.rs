//! Applications, user behaviour profiles, task arrivals and container
//! deployment requests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::topology::NodeId;
use crate::virtualization::{AppId, ContainerSpec, InstanceId};

pub mod presets;

/// Container footprint and replication of an application's service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContainerConfig {
    pub ram_mb: f64,
    pub storage_mb: f64,
    pub image_size_mb: f64,
    /// One instance serves all subscribers (`true`) or one per subscriber.
    pub shared: bool,
    /// Number of shared replicas; ignored for private containers.
    pub replicas: u32,
}

impl Default for ContainerConfig {
    fn default() -> Self {
        Self {
            ram_mb: 512.0,
            storage_mb: 1024.0,
            image_size_mb: 200.0,
            shared: true,
            replicas: 1,
        }
    }
}

/// Arrival pattern of a user profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pattern {
    /// Poisson arrivals at the application's task rate.
    #[default]
    Random,
    /// One task every `period_s` (default: `60 / task_rate_per_min`),
    /// starting at a random phase within the first period.
    Periodic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period_s: Option<f64>,
    },
    /// `burst_size` back-to-back tasks every `burst_interval_s`.
    Bursty {
        burst_size: u32,
        burst_interval_s: f64,
    },
}

/// Alternating active / idle phases of a user, starting at `start_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Activity {
    pub start_s: f64,
    /// Length of each active phase; always active when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_s: Option<f64>,
    pub idle_s: f64,
}

impl Default for Activity {
    fn default() -> Self {
        Self {
            start_s: 0.0,
            active_s: None,
            idle_s: 0.0,
        }
    }
}

impl Activity {
    /// Start and end of active window `m`, unbounded when always active.
    pub fn window(&self, m: u64) -> (f64, f64) {
        match self.active_s {
            None => (self.start_s, f64::INFINITY),
            Some(a) => {
                let s = self.start_s + m as f64 * (a + self.idle_s);
                (s, s + a)
            }
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        if t < self.start_s {
            return false;
        }
        match self.active_s {
            None => true,
            Some(a) => {
                let cycle = a + self.idle_s;
                if cycle <= 0.0 {
                    return true;
                }
                (t - self.start_s) % cycle < a
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationSpec {
    pub name: String,
    /// Auto-generated users, each with its own edge device.
    pub users: u32,
    pub task_rate_per_min: f64,
    /// Latency SLO in seconds.
    pub max_latency_s: f64,
    pub task_length_mi: f64,
    pub request_kb: f64,
    pub response_kb: f64,
    #[serde(default)]
    pub container: ContainerConfig,
    #[serde(default)]
    pub pattern: Pattern,
    #[serde(default)]
    pub activity: Activity,
}

impl ApplicationSpec {
    pub fn container_spec(&self, app: AppId) -> ContainerSpec {
        ContainerSpec {
            app,
            ram_mb: self.container.ram_mb,
            storage_mb: self.container.storage_mb,
            image_size_mb: self.container.image_size_mb,
            shared: self.container.shared,
            replica_count: self.container.replicas,
        }
    }
}

/// Additional, explicitly placed user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    /// Name of the application this user runs.
    pub app: String,
    /// ONT index the user's device attaches to; auto-assigned when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ont: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<Activity>,
}

/// Behaviour of one user, bound to its device.
#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub device: NodeId,
    pub app: AppId,
    pub task_rate_per_min: f64,
    pub pattern: Pattern,
    pub activity: Activity,
}

/// Stateful arrival generator of one profile. Times are relative to the
/// start of the workload phase and never reach `horizon_s`.
pub struct ArrivalProcess {
    profile: UserProfile,
    rng: ChaCha8Rng,
    horizon_s: f64,
    window: u64,
    /// Phase within the first period for periodic and bursty patterns.
    phase: f64,
    /// Next slot inside the current window (periodic / bursty).
    slot: u64,
    /// Arrivals left in the current burst.
    burst_left: u32,
    last: f64,
    started: bool,
}

impl ArrivalProcess {
    pub fn new(profile: UserProfile, mut rng: ChaCha8Rng, horizon_s: f64) -> Self {
        let phase = match &profile.pattern {
            Pattern::Random => 0.0,
            Pattern::Periodic { .. } | Pattern::Bursty { .. } => {
                rng.random::<f64>() * Self::spacing(&profile)
            }
        };
        Self {
            profile,
            rng,
            horizon_s,
            window: 0,
            phase,
            slot: 0,
            burst_left: 0,
            last: 0.0,
            started: false,
        }
    }

    pub fn profile(&self) -> &UserProfile {
        &self.profile
    }

    fn spacing(profile: &UserProfile) -> f64 {
        match profile.pattern {
            Pattern::Random => 60.0 / profile.task_rate_per_min,
            Pattern::Periodic { period_s } => {
                period_s.unwrap_or(60.0 / profile.task_rate_per_min)
            }
            Pattern::Bursty {
                burst_interval_s, ..
            } => burst_interval_s,
        }
    }

    /// Next arrival time, or `None` once the horizon is reached.
    pub fn next_arrival(&mut self) -> Option<f64> {
        let t = match self.profile.pattern {
            Pattern::Random => self.next_random(),
            Pattern::Periodic { .. } => self.next_slotted(1),
            Pattern::Bursty { burst_size, .. } => self.next_slotted(burst_size),
        }?;
        debug_assert!(!self.started || t >= self.last);
        self.started = true;
        self.last = t;
        Some(t)
    }

    fn next_random(&mut self) -> Option<f64> {
        let exp = Exp::new(self.profile.task_rate_per_min / 60.0).ok()?;
        let mut from = if self.started { self.last } else { self.profile.activity.start_s };
        loop {
            let (ws, we) = self.profile.activity.window(self.window);
            if ws >= self.horizon_s {
                return None;
            }
            let t = from.max(ws) + exp.sample(&mut self.rng);
            if t < we.min(self.horizon_s) {
                return Some(t);
            }
            if we >= self.horizon_s {
                return None;
            }
            self.window += 1;
            from = self.profile.activity.window(self.window).0;
        }
    }

    fn next_slotted(&mut self, per_slot: u32) -> Option<f64> {
        let spacing = Self::spacing(&self.profile);
        if self.burst_left > 0 {
            self.burst_left -= 1;
            return Some(self.last);
        }
        loop {
            let (ws, we) = self.profile.activity.window(self.window);
            if ws >= self.horizon_s {
                return None;
            }
            let active = we.min(self.horizon_s) - ws;
            let slots = (active / spacing).floor() as u64;
            if self.slot < slots {
                let t = ws + self.phase + self.slot as f64 * spacing;
                self.slot += 1;
                self.burst_left = per_slot.saturating_sub(1);
                return Some(t);
            }
            if we >= self.horizon_s {
                return None;
            }
            self.window += 1;
            self.slot = 0;
        }
    }
}

/// Request to deploy one container instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DeploymentRequest {
    pub app: AppId,
    pub spec: ContainerSpec,
    /// Representative task length used by placement scoring.
    pub task_length_mi: f64,
    /// Devices served by the instance.
    pub subscribers: Vec<NodeId>,
    /// Set for private containers: the one device they serve.
    pub owner: Option<NodeId>,
}

/// One request per shared replica, or one private instance per subscriber.
/// Applications are visited in order; within an application, replicas
/// (or subscribers) in order.
pub fn emit_container_requests(
    apps: &[ApplicationSpec],
    subscribers: &[Vec<NodeId>],
) -> Vec<DeploymentRequest> {
    let mut out = Vec::new();
    for (i, app) in apps.iter().enumerate() {
        let id = AppId(i as u16);
        let spec = app.container_spec(id);
        if app.container.shared {
            for _ in 0..app.container.replicas {
                out.push(DeploymentRequest {
                    app: id,
                    spec: spec.clone(),
                    task_length_mi: app.task_length_mi,
                    subscribers: subscribers[i].clone(),
                    owner: None,
                });
            }
        } else {
            for &device in &subscribers[i] {
                out.push(DeploymentRequest {
                    app: id,
                    spec: spec.clone(),
                    task_length_mi: app.task_length_mi,
                    subscribers: vec![device],
                    owner: Some(device),
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TaskId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    SloMiss,
    Rejected,
}

/// Lifecycle timestamps of a task, in simulated seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Trace {
    pub submitted: Option<f64>,
    pub broker_resolved: Option<f64>,
    pub request_arrived: Option<f64>,
    pub execution_started: Option<f64>,
    pub execution_finished: Option<f64>,
    pub response_delivered: Option<f64>,
}

impl Trace {
    pub fn stamps(&self) -> [Option<f64>; 6] {
        [
            self.submitted,
            self.broker_resolved,
            self.request_arrived,
            self.execution_started,
            self.execution_finished,
            self.response_delivered,
        ]
    }

    /// Recorded timestamps never decrease in lifecycle order.
    pub fn is_monotone(&self) -> bool {
        let mut last = f64::NEG_INFINITY;
        for t in self.stamps().into_iter().flatten() {
            if t < last {
                return false;
            }
            last = t;
        }
        true
    }
}

/// A short-lived user request.
#[derive(Clone, Debug)]
pub struct Task {
    pub id: TaskId,
    pub device: NodeId,
    pub app: AppId,
    pub length_mi: f64,
    pub request_mb: f64,
    pub response_mb: f64,
    pub created_at: SimTime,
    pub max_latency_s: f64,
    pub deadline: SimTime,
    pub trace: Trace,
    pub instance: Option<InstanceId>,
    pub outcome: Option<Outcome>,
}

impl Task {
    /// Judges a delivered response against the deadline.
    pub fn judge(&self, delivered: SimTime) -> Outcome {
        if delivered.secs() - self.created_at.secs() <= self.max_latency_s {
            Outcome::Success
        } else {
            Outcome::SloMiss
        }
    }
}
