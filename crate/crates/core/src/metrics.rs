//! Task outcome accounting, TSR, SLA-normalized latency and energy.

use serde::Serialize;

use crate::topology::NodeId;
use crate::virtualization::AppId;
use crate::workload::{Outcome, TaskId, Trace};

/// Final record of one submitted task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord {
    pub id: TaskId,
    pub app: AppId,
    pub device: NodeId,
    pub created_at: f64,
    pub trace: Trace,
    pub outcome: Option<Outcome>,
    /// Executing host, when the task was offloaded.
    pub host: Option<NodeId>,
}

impl TaskRecord {
    pub fn latency_s(&self) -> Option<f64> {
        self.trace.response_delivered.map(|d| d - self.created_at)
    }
}

/// Per-application counters.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AppStats {
    pub name: String,
    pub slo_s: f64,
    pub submitted: u64,
    pub success: u64,
    pub slo_miss: u64,
    pub rejected: u64,
    /// Arrivals held back while the application had no running replica.
    pub withheld: u64,
    pub latency_sum_s: f64,
}

impl AppStats {
    pub fn completed(&self) -> u64 {
        self.success + self.slo_miss
    }

    /// Submitted tasks without a final outcome.
    pub fn in_flight(&self) -> u64 {
        self.submitted - self.success - self.slo_miss - self.rejected
    }

    pub fn tsr(&self) -> Option<f64> {
        (self.submitted > 0).then(|| self.success as f64 / self.submitted as f64)
    }

    pub fn mean_latency_s(&self) -> Option<f64> {
        let n = self.completed();
        (n > 0).then(|| self.latency_sum_s / n as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Energy {
    pub network_j: f64,
    pub compute_j: f64,
    pub mediation_j: f64,
}

impl Energy {
    pub fn total_j(&self) -> f64 {
        self.network_j + self.compute_j + self.mediation_j
    }
}

/// Outcomes of one run.
#[derive(Clone, Debug, Default)]
pub struct MetricsLedger {
    pub apps: Vec<AppStats>,
    pub records: Option<Vec<TaskRecord>>,
    pub energy: Energy,
    pub events_processed: u64,
    /// Simulated time the workload phase started.
    pub workload_start_s: f64,
}

impl MetricsLedger {
    pub fn new(apps: impl IntoIterator<Item = (String, f64)>, keep_records: bool) -> Self {
        Self {
            apps: apps
                .into_iter()
                .map(|(name, slo_s)| AppStats {
                    name,
                    slo_s,
                    ..AppStats::default()
                })
                .collect(),
            records: keep_records.then(Vec::new),
            ..Self::default()
        }
    }

    pub fn submit(&mut self, app: AppId) {
        self.apps[app.0 as usize].submitted += 1;
    }

    pub fn withhold(&mut self, app: AppId) {
        self.apps[app.0 as usize].withheld += 1;
    }

    /// Records a final outcome; `latency_s` applies to delivered tasks.
    pub fn finish(&mut self, app: AppId, outcome: Outcome, latency_s: Option<f64>) {
        let s = &mut self.apps[app.0 as usize];
        match outcome {
            Outcome::Success => s.success += 1,
            Outcome::SloMiss => s.slo_miss += 1,
            Outcome::Rejected => s.rejected += 1,
        }
        if let Some(l) = latency_s {
            s.latency_sum_s += l;
        }
    }

    pub fn push_record(&mut self, record: TaskRecord) {
        if let Some(r) = self.records.as_mut() {
            r.push(record);
        }
    }

    pub fn submitted(&self) -> u64 {
        self.apps.iter().map(|a| a.submitted).sum()
    }

    pub fn completed(&self) -> u64 {
        self.apps.iter().map(|a| a.completed()).sum()
    }

    pub fn failed(&self) -> u64 {
        self.apps.iter().map(|a| a.rejected).sum()
    }

    pub fn in_flight(&self) -> u64 {
        self.apps.iter().map(|a| a.in_flight()).sum()
    }

    /// Successes over submitted tasks, in-flight tasks counting as failures.
    /// `None` when nothing was submitted.
    pub fn tsr(&self, app: Option<AppId>) -> Option<f64> {
        match app {
            Some(a) => self.apps[a.0 as usize].tsr(),
            None => {
                let sub = self.submitted();
                let ok: u64 = self.apps.iter().map(|a| a.success).sum();
                (sub > 0).then(|| ok as f64 / sub as f64)
            }
        }
    }

    /// Mean end-to-end latency over all delivered tasks.
    pub fn mean_latency_s(&self) -> Option<f64> {
        let n = self.completed();
        let sum: f64 = self.apps.iter().map(|a| a.latency_sum_s).sum();
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean over applications of mean latency / SLO. Applications without
    /// delivered tasks are left out and listed in the second value.
    pub fn normalized_latency(&self) -> (Option<f64>, Vec<AppId>) {
        normalized_latency(
            self.apps
                .iter()
                .map(|a| (a.mean_latency_s(), a.slo_s)),
        )
    }
}

/// `mean_i(mean_latency_i / slo_i)` over apps that have a mean latency.
pub fn normalized_latency(
    per_app: impl IntoIterator<Item = (Option<f64>, f64)>,
) -> (Option<f64>, Vec<AppId>) {
    let (mut sum, mut n) = (0.0, 0usize);
    let mut excluded = Vec::new();
    for (i, (mean, slo)) in per_app.into_iter().enumerate() {
        match mean {
            Some(m) => {
                sum += m / slo;
                n += 1;
            }
            None => excluded.push(AppId(i as u16)),
        }
    }
    ((n > 0).then(|| sum / n as f64), excluded)
}

/// Two-state core energy: busy core-seconds at active power, the rest idle.
pub fn compute_energy_j(
    busy_core_s: f64,
    cores: u32,
    span_s: f64,
    active_watts: f64,
    idle_watts: f64,
) -> f64 {
    let idle = (cores as f64 * span_s - busy_core_s).max(0.0);
    busy_core_s * active_watts + idle * idle_watts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(success: u64, miss: u64, rejected: u64, submitted: u64) -> MetricsLedger {
        let mut l = MetricsLedger::new([("a".to_string(), 0.05)], false);
        let s = &mut l.apps[0];
        s.success = success;
        s.slo_miss = miss;
        s.rejected = rejected;
        s.submitted = submitted;
        l
    }

    #[test]
    fn tsr_counts() {
        assert_eq!(ledger(95, 5, 0, 100).tsr(None), Some(0.95));
        assert_eq!(ledger(10, 0, 0, 10).tsr(None), Some(1.0));
        assert_eq!(ledger(0, 0, 0, 0).tsr(None), None);
        let l = ledger(90, 2, 3, 100);
        assert_eq!(l.in_flight(), 5);
        assert_eq!(l.submitted(), l.completed() + l.failed() + l.in_flight());
    }

    #[test]
    fn normalized_latency_values() {
        assert_eq!(normalized_latency([(Some(0.025), 0.05)]).0, Some(0.5));
        let (v, _) = normalized_latency([(Some(0.2), 1.0), (Some(0.3), 0.5)]);
        assert!((v.unwrap() - 0.4).abs() < 1e-12);
        let (v, ex) = normalized_latency([(None, 1.0), (Some(0.1), 0.5)]);
        assert!((v.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(ex, vec![AppId(0)]);
    }

    #[test]
    fn energy_products() {
        assert_eq!(compute_energy_j(10.0, 1, 10.0, 5.0, 0.0), 50.0);
        assert_eq!(compute_energy_j(0.0, 4, 10.0, 0.0, 0.0), 0.0);
        assert_eq!(compute_energy_j(5.0, 2, 10.0, 4.0, 1.0), 20.0 + 15.0);
    }
}
