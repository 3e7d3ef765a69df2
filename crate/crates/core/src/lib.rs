//! Discrete-event simulation of edge computing over passive optical
//! networks.
//!
//! The infrastructure is a forest rooted at the cloud: OLTs host VMs and a
//! DNS broker each, ONTs hang off OLTs over fiber, and every user's edge
//! device sits behind one ONT. Containers are placed once by a global
//! orchestrator; every task is then routed by the broker of the user's OLT
//! to one running replica.
//!
//! ```no_run
//! use ponedge::config::ScenarioConfig;
//! use ponedge::harness::run_once;
//!
//! let mut cfg = ScenarioConfig::preset("S2").unwrap();
//! cfg.duration_s = 60.0;
//! let out = run_once(&cfg, 7).unwrap();
//! println!("TSR {:?}", out.metrics.tsr(None));
//! ```

pub mod config;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod orchestration;
pub mod sim;
pub mod topology;
pub mod virtualization;
pub mod workload;

pub use config::{DeploymentModel, ScenarioConfig};
pub use sim::{RunOutput, SimError, Simulation};
