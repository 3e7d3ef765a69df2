//! Scenario files: schema, presets, validation and the effective-config echo.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::orchestration::PolicyConfig;
use crate::topology::{ComputeSpec, LinkTable, TopologyConfig};
use crate::virtualization::AppId;
use crate::workload::presets::{build_preset, Preset, UnknownPreset};
use crate::workload::{ApplicationSpec, Pattern, UserConfig};

/// Per-core MIPS of the five CPU classes swept by the capacity harness.
pub const CPU_CLASSES_MIPS: [f64; 5] = [25_000.0, 45_000.0, 65_000.0, 80_000.0, 95_000.0];

/// Default simulated time: 300 minutes.
pub const DEFAULT_DURATION_S: f64 = 18_000.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentModel {
    /// Containers run on OLT-hosted VMs only.
    #[default]
    EdgeOnly,
    /// Containers may also run on ONTs.
    FarEdgePlusEdge,
}

impl DeploymentModel {
    pub const ALL: [DeploymentModel; 2] = [DeploymentModel::EdgeOnly, DeploymentModel::FarEdgePlusEdge];

    pub fn as_str(self) -> &'static str {
        match self {
            DeploymentModel::EdgeOnly => "edge_only",
            DeploymentModel::FarEdgePlusEdge => "far_edge_plus_edge",
        }
    }

    pub fn far_edge(self) -> bool {
        self == DeploymentModel::FarEdgePlusEdge
    }
}

impl fmt::Display for DeploymentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeploymentModel {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge_only" => Ok(DeploymentModel::EdgeOnly),
            "far_edge_plus_edge" => Ok(DeploymentModel::FarEdgePlusEdge),
            _ => Err(ConfigError::invalid("deployment_model", format!("unknown model `{s}`"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Preset(#[from] UnknownPreset),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_reps() -> u32 {
    1
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub replication_count: u32,
    /// Simulated duration of the workload phase.
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub deployment_model: DeploymentModel,
    /// Per-host cap on queued and executing tasks; unbounded when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queued_tasks: Option<u32>,
    /// Keep one record per task (memory grows with the task count).
    #[serde(default, skip_serializing_if = "is_false")]
    pub keep_task_records: bool,
    #[serde(default)]
    pub policy: PolicyConfig,
    pub topology: TopologyConfig,
    pub applications: Vec<ApplicationSpec>,
    /// Explicit users on top of each application's auto-generated ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<UserConfig>,
}

/// Device table derived from a scenario: application and ONT of each user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserPlan {
    pub app: AppId,
    pub ont: Option<u32>,
    pub pattern: Pattern,
    pub activity: crate::workload::Activity,
}

impl ScenarioConfig {
    /// Single-application capacity-planning topology: one 8-core OLT split
    /// into four 2-core VMs running at `mips`, one ONT per user.
    pub fn capacity_topology(mips: f64) -> TopologyConfig {
        TopologyConfig {
            olts: 1,
            vms_per_olt: 4,
            onts: None,
            cloud: ComputeSpec::cloud(),
            olt: ComputeSpec::new(8, mips, 32_768.0, 512_000.0),
            vm: ComputeSpec::new(2, mips, 8_192.0, 64_000.0),
            ont: ComputeSpec::ont(),
            links: LinkTable::default(),
            cloud_hosts_containers: false,
        }
    }

    /// Policy-comparison topology: three 14-core OLTs with seven 2-core VMs
    /// each, one ONT per user.
    pub fn mixed_topology() -> TopologyConfig {
        TopologyConfig {
            olts: 3,
            vms_per_olt: 7,
            onts: None,
            cloud: ComputeSpec::cloud(),
            olt: ComputeSpec::new(14, 95_000.0, 65_536.0, 1_024_000.0),
            vm: ComputeSpec::new(2, 95_000.0, 8_192.0, 64_000.0),
            ont: ComputeSpec::ont(),
            links: LinkTable::default(),
            cloud_hosts_containers: false,
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        let (topology, policy) = match preset {
            Preset::Mixed => (Self::mixed_topology(), PolicyConfig::default()),
            _ => (
                Self::capacity_topology(CPU_CLASSES_MIPS[CPU_CLASSES_MIPS.len() - 1]),
                PolicyConfig {
                    offloading: "round_robin:dynamic".parse().expect("valid"),
                    ..PolicyConfig::default()
                },
            ),
        };
        Self {
            name: preset.name().to_string(),
            seed: default_seed(),
            replication_count: default_reps(),
            duration_s: DEFAULT_DURATION_S,
            deployment_model: DeploymentModel::EdgeOnly,
            max_queued_tasks: None,
            keep_task_records: false,
            policy,
            topology,
            applications: build_preset(preset),
            users: Vec::new(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        Ok(Self::from_preset(name.parse()?))
    }

    /// Sets the per-core MIPS of the OLT and its VMs.
    pub fn set_edge_mips(&mut self, mips: f64) {
        self.topology.olt.mips_per_core = mips;
        self.topology.vm.mips_per_core = mips;
    }

    pub fn app_id(&self, name: &str) -> Option<AppId> {
        self.applications
            .iter()
            .position(|a| a.name == name)
            .map(|i| AppId(i as u16))
    }

    /// Users in device order: auto-generated per application, then explicit.
    pub fn user_plan(&self) -> Vec<UserPlan> {
        let mut out = Vec::new();
        for (i, a) in self.applications.iter().enumerate() {
            for _ in 0..a.users {
                out.push(UserPlan {
                    app: AppId(i as u16),
                    ont: None,
                    pattern: a.pattern.clone(),
                    activity: a.activity.clone(),
                });
            }
        }
        for u in &self.users {
            let app = self.app_id(&u.app).expect("validated");
            let spec = &self.applications[app.0 as usize];
            out.push(UserPlan {
                app,
                ont: u.ont,
                pattern: u.pattern.clone().unwrap_or_else(|| spec.pattern.clone()),
                activity: u.activity.clone().unwrap_or_else(|| spec.activity.clone()),
            });
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |f: &str, r: &str| Err(ConfigError::invalid(f, r));
        let pos = |f: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(f, format!("must be positive, got {v}")))
            }
        };
        let non_neg = |f: &str, v: f64| -> Result<(), ConfigError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(f, format!("must be non-negative, got {v}")))
            }
        };
        pos("duration_s", self.duration_s)?;
        if self.replication_count == 0 {
            return bad("replication_count", "must be at least 1");
        }
        let t = &self.topology;
        for (name, c) in [("cloud", &t.cloud), ("olt", &t.olt), ("vm", &t.vm), ("ont", &t.ont)] {
            if c.cores == 0 {
                return bad(&format!("topology.{name}.cores"), "must be at least 1");
            }
            pos(&format!("topology.{name}.mips_per_core"), c.mips_per_core)?;
            pos(&format!("topology.{name}.ram_mb"), c.ram_mb)?;
            pos(&format!("topology.{name}.storage_mb"), c.storage_mb)?;
            non_neg(&format!("topology.{name}.active_watts"), c.active_watts)?;
            non_neg(&format!("topology.{name}.idle_watts"), c.idle_watts)?;
        }
        let l = &t.links;
        for (name, p) in [
            ("device_ont", &l.device_ont),
            ("ont_olt", &l.ont_olt),
            ("olt_cloud", &l.olt_cloud),
            ("olt_vm", &l.olt_vm),
            ("olt_broker", &l.olt_broker),
            ("hypervisor", &l.hypervisor),
        ] {
            non_neg(&format!("topology.links.{name}.latency_s"), p.latency_s)?;
            pos(&format!("topology.links.{name}.bandwidth_mbps"), p.bandwidth_mbps)?;
            non_neg(&format!("topology.links.{name}.energy_per_mb"), p.energy_per_mb)?;
        }
        if t.olts == 0 {
            return bad("topology.olts", "must be at least 1");
        }
        if t.vms_per_olt * t.vm.cores > t.olt.cores {
            return bad("topology.vms_per_olt", "VM cores exceed the OLT's physical cores");
        }
        if self.applications.is_empty() {
            return bad("applications", "at least one application is required");
        }
        for (i, a) in self.applications.iter().enumerate() {
            let f = |k: &str| format!("applications[{i}].{k}");
            if a.name.is_empty() {
                return bad(&f("name"), "must not be empty");
            }
            if self.applications[..i].iter().any(|b| b.name == a.name) {
                return bad(&f("name"), &format!("duplicate application `{}`", a.name));
            }
            pos(&f("task_rate_per_min"), a.task_rate_per_min)?;
            pos(&f("max_latency_s"), a.max_latency_s)?;
            non_neg(&f("task_length_mi"), a.task_length_mi)?;
            non_neg(&f("request_kb"), a.request_kb)?;
            non_neg(&f("response_kb"), a.response_kb)?;
            non_neg(&f("container.ram_mb"), a.container.ram_mb)?;
            non_neg(&f("container.storage_mb"), a.container.storage_mb)?;
            non_neg(&f("container.image_size_mb"), a.container.image_size_mb)?;
            if a.container.shared && a.container.replicas == 0 {
                return bad(&f("container.replicas"), "a shared container needs at least one replica");
            }
            check_pattern(&f("pattern"), &a.pattern)?;
            check_activity(&f("activity"), &a.activity)?;
        }
        let total_users = self.user_plan_len();
        let onts = t.onts.unwrap_or(total_users as u32);
        if total_users > 0 && onts == 0 {
            return bad("topology.onts", "users need at least one ONT");
        }
        for (i, u) in self.users.iter().enumerate() {
            let f = |k: &str| format!("users[{i}].{k}");
            if self.app_id(&u.app).is_none() {
                return bad(&f("app"), &format!("unknown application `{}`", u.app));
            }
            if let Some(o) = u.ont {
                if o >= onts {
                    return bad(&f("ont"), &format!("ONT {o} does not exist ({onts} ONTs)"));
                }
            }
            if let Some(p) = &u.pattern {
                check_pattern(&f("pattern"), p)?;
            }
            if let Some(a) = &u.activity {
                check_activity(&f("activity"), a)?;
            }
        }
        let p = &self.policy;
        for (name, w) in [("trade_off_weights", &p.trade_off_weights), ("multi_objective_weights", &p.multi_objective_weights)] {
            non_neg(&format!("policy.{name}.cloud"), w.cloud)?;
            non_neg(&format!("policy.{name}.olt"), w.olt)?;
            non_neg(&format!("policy.{name}.ont"), w.ont)?;
        }
        let r = &p.resource_weights;
        for (name, v) in [("ram", r.ram), ("storage", r.storage), ("cores", r.cores), ("mips", r.mips)] {
            non_neg(&format!("policy.resource_weights.{name}"), v)?;
        }
        non_neg("policy.broker_lookup_latency_s", p.broker_lookup_latency_s)?;
        non_neg("policy.control_message_kb", p.control_message_kb)?;
        if self.max_queued_tasks == Some(0) {
            return bad("max_queued_tasks", "must be at least 1");
        }
        Ok(())
    }

    fn user_plan_len(&self) -> usize {
        self.applications.iter().map(|a| a.users as usize).sum::<usize>() + self.users.len()
    }

    /// Parses TOML text and validates it.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration with every default spelled out, as TOML.
    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

fn check_pattern(field: &str, p: &Pattern) -> Result<(), ConfigError> {
    match *p {
        Pattern::Random => Ok(()),
        Pattern::Periodic { period_s: Some(s) } if !(s.is_finite() && s > 0.0) => {
            Err(ConfigError::invalid(format!("{field}.period_s"), "must be positive"))
        }
        Pattern::Periodic { .. } => Ok(()),
        Pattern::Bursty {
            burst_size,
            burst_interval_s,
        } => {
            if burst_size == 0 {
                Err(ConfigError::invalid(format!("{field}.burst_size"), "must be at least 1"))
            } else if !(burst_interval_s.is_finite() && burst_interval_s > 0.0) {
                Err(ConfigError::invalid(format!("{field}.burst_interval_s"), "must be positive"))
            } else {
                Ok(())
            }
        }
    }
}

fn check_activity(field: &str, a: &crate::workload::Activity) -> Result<(), ConfigError> {
    if !(a.start_s.is_finite() && a.start_s >= 0.0) {
        return Err(ConfigError::invalid(format!("{field}.start_s"), "must be non-negative"));
    }
    if let Some(x) = a.active_s {
        if !(x.is_finite() && x > 0.0) {
            return Err(ConfigError::invalid(format!("{field}.active_s"), "must be positive"));
        }
    }
    if !(a.idle_s.is_finite() && a.idle_s >= 0.0) {
        return Err(ConfigError::invalid(format!("{field}.idle_s"), "must be non-negative"));
    }
    Ok(())
}


/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::parse(&text)
}
