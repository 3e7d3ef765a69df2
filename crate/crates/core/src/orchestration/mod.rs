//! Two-plane orchestration: cloud-level container placement and
//! broker-level task offloading.
//!
//! Policy names are exchanged as `name:variant` strings, e.g.
//! `trade_off:latency` or `best_delay:dynamic`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::topology::NodeKind;

pub mod offloading;
pub mod placement;

pub use offloading::{offload, score_best_delay, BrokerState, Directory, OffloadRequest};
pub use placement::{
    place, score_cpu_greedy, score_multi_objective, score_trade_off, select_host_latency,
    select_host_rate, PlacementContext, PlacementError, PlacementScope, PlacementState,
};

/// Two latencies closer than this are treated as equal by tie rules.
pub const LATENCY_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy `{0}`")]
pub struct UnknownPolicy(pub String);

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $s),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownPolicy;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($s => Ok($name::$variant),)+
                    _ => Err(UnknownPolicy(s.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

named_enum!(PlacementAlgorithm {
    RoundRobin => "round_robin",
    CpuGreedy => "cpu_greedy",
    TradeOff => "trade_off",
    MultiObjective => "multi_objective",
});

named_enum!(PlacementVariant {
    Standard => "standard",
    LatencyBased => "latency",
    RateBased => "rate",
});

named_enum!(OffloadAlgorithm {
    RoundRobin => "round_robin",
    BestLatency => "best_latency",
    BestDelay => "best_delay",
});

named_enum!(OffloadMode {
    Static => "static",
    Dynamic => "dynamic",
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PlacementPolicy {
    pub algorithm: PlacementAlgorithm,
    pub variant: PlacementVariant,
}

impl PlacementPolicy {
    pub fn new(algorithm: PlacementAlgorithm, variant: PlacementVariant) -> Self {
        Self { algorithm, variant }
    }

    /// The 12 algorithm x variant combinations, algorithm-major.
    pub fn all() -> Vec<PlacementPolicy> {
        PlacementAlgorithm::ALL
            .iter()
            .flat_map(|&a| PlacementVariant::ALL.iter().map(move |&v| Self::new(a, v)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OffloadPolicy {
    pub algorithm: OffloadAlgorithm,
    pub mode: OffloadMode,
}

impl OffloadPolicy {
    pub fn new(algorithm: OffloadAlgorithm, mode: OffloadMode) -> Self {
        Self { algorithm, mode }
    }

    /// The 6 algorithm x mode combinations, algorithm-major.
    pub fn all() -> Vec<OffloadPolicy> {
        OffloadAlgorithm::ALL
            .iter()
            .flat_map(|&a| OffloadMode::ALL.iter().map(move |&m| Self::new(a, m)))
            .collect()
    }
}

fn split_pair(s: &str) -> Result<(&str, &str), UnknownPolicy> {
    s.split_once(':').ok_or_else(|| UnknownPolicy(s.to_string()))
}

impl FromStr for PlacementPolicy {
    type Err = UnknownPolicy;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, v) = split_pair(s)?;
        Ok(Self::new(
            a.parse().map_err(|_| UnknownPolicy(s.into()))?,
            v.parse().map_err(|_| UnknownPolicy(s.into()))?,
        ))
    }
}

impl FromStr for OffloadPolicy {
    type Err = UnknownPolicy;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, m) = split_pair(s)?;
        Ok(Self::new(
            a.parse().map_err(|_| UnknownPolicy(s.into()))?,
            m.parse().map_err(|_| UnknownPolicy(s.into()))?,
        ))
    }
}

impl fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm, self.variant)
    }
}

impl fmt::Display for OffloadPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm, self.mode)
    }
}

impl TryFrom<String> for PlacementPolicy {
    type Error = UnknownPolicy;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PlacementPolicy> for String {
    fn from(p: PlacementPolicy) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for OffloadPolicy {
    type Error = UnknownPolicy;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<OffloadPolicy> for String {
    fn from(p: OffloadPolicy) -> String {
        p.to_string()
    }
}

/// Per-tier topology weights `t_i`. VMs inherit the OLT weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyWeights {
    pub cloud: f64,
    pub olt: f64,
    pub ont: f64,
}

impl TopologyWeights {
    pub fn weight(&self, kind: NodeKind) -> f64 {
        match kind {
            NodeKind::Cloud => self.cloud,
            NodeKind::Olt | NodeKind::Vm => self.olt,
            NodeKind::Ont => self.ont,
            NodeKind::EdgeDevice | NodeKind::Broker => 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            cloud: self.cloud * k,
            olt: self.olt * k,
            ont: self.ont * k,
        }
    }
}

/// Weights `w_R` of the availability terms in the multi-objective score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceWeights {
    pub ram: f64,
    pub storage: f64,
    pub cores: f64,
    pub mips: f64,
}

impl Default for ResourceWeights {
    fn default() -> Self {
        Self {
            ram: 1.0,
            storage: 1.0,
            cores: 1.0,
            mips: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub placement: PlacementPolicy,
    pub offloading: OffloadPolicy,
    pub trade_off_weights: TopologyWeights,
    pub multi_objective_weights: TopologyWeights,
    pub resource_weights: ResourceWeights,
    /// DNS lookup time at the broker.
    pub broker_lookup_latency_s: f64,
    /// Size of control messages (resolution, placement updates).
    pub control_message_kb: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            placement: PlacementPolicy::new(PlacementAlgorithm::TradeOff, PlacementVariant::Standard),
            offloading: OffloadPolicy::new(OffloadAlgorithm::BestDelay, OffloadMode::Dynamic),
            trade_off_weights: TopologyWeights {
                cloud: 2.0,
                olt: 1.0,
                ont: 0.8,
            },
            multi_objective_weights: TopologyWeights {
                cloud: 1.0,
                olt: 0.25,
                ont: 0.0,
            },
            resource_weights: ResourceWeights::default(),
            broker_lookup_latency_s: 0.001,
            control_message_kb: 1.0,
        }
    }
}
