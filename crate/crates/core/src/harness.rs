//! Experiment drivers: single runs with replications, the policy grid, the
//! capacity sweep and the scalability sweep, plus CSV output.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DeploymentModel, ScenarioConfig};
use crate::orchestration::{OffloadPolicy, PlacementPolicy};
use crate::sim::{RunOutput, SimError, Simulation};

/// One CSV row: a run (or the mean of runs) at one aggregation scope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    /// `all` or an application name.
    pub scope: String,
    pub placement: String,
    pub offloading: String,
    pub deployment: String,
    /// Empty on mean rows.
    pub seed: Option<u64>,
    /// Replication index, or `mean`.
    pub rep: String,
    pub edge_mips: f64,
    pub olts: u32,
    pub users: u32,
    pub submitted: Option<u64>,
    pub success: Option<u64>,
    pub slo_miss: Option<u64>,
    pub rejected: Option<u64>,
    pub in_flight: Option<u64>,
    pub withheld: Option<u64>,
    pub tsr: Option<f64>,
    pub mean_latency_s: Option<f64>,
    pub l_norm: Option<f64>,
    pub energy_j: Option<f64>,
    pub wall_clock_s: Option<f64>,
    pub peak_memory_mb: Option<f64>,
}

pub const ALL_SCOPE: &str = "all";

/// Runs one configuration with one seed.
pub fn run_once(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput, SimError> {
    Simulation::new(cfg, seed)?.run()
}

fn base_row(cfg: &ScenarioConfig, scope: &str, seed: Option<u64>, rep: String) -> ResultRow {
    ResultRow {
        scenario: cfg.name.clone(),
        scope: scope.to_string(),
        placement: cfg.policy.placement.to_string(),
        offloading: cfg.policy.offloading.to_string(),
        deployment: cfg.deployment_model.to_string(),
        seed,
        rep,
        edge_mips: cfg.topology.vm.mips_per_core,
        olts: cfg.topology.olts,
        users: cfg.user_plan().len() as u32,
        submitted: None,
        success: None,
        slo_miss: None,
        rejected: None,
        in_flight: None,
        withheld: None,
        tsr: None,
        mean_latency_s: None,
        l_norm: None,
        energy_j: None,
        wall_clock_s: None,
        peak_memory_mb: None,
    }
}

/// Rows of one run: the global row, then one per application when
/// `per_app` is set.
pub fn rows_of(cfg: &ScenarioConfig, out: &RunOutput, seed: u64, rep: u32, per_app: bool) -> Vec<ResultRow> {
    let m = &out.metrics;
    let mut all = base_row(cfg, ALL_SCOPE, Some(seed), rep.to_string());
    all.submitted = Some(m.submitted());
    all.success = Some(m.apps.iter().map(|a| a.success).sum());
    all.slo_miss = Some(m.apps.iter().map(|a| a.slo_miss).sum());
    all.rejected = Some(m.failed());
    all.in_flight = Some(m.in_flight());
    all.withheld = Some(m.apps.iter().map(|a| a.withheld).sum());
    all.tsr = m.tsr(None);
    all.mean_latency_s = m.mean_latency_s();
    all.l_norm = m.normalized_latency().0;
    all.energy_j = Some(m.energy.total_j());
    let mut rows = vec![all];
    if per_app {
        for a in &m.apps {
            let mut r = base_row(cfg, &a.name, Some(seed), rep.to_string());
            r.submitted = Some(a.submitted);
            r.success = Some(a.success);
            r.slo_miss = Some(a.slo_miss);
            r.rejected = Some(a.rejected);
            r.in_flight = Some(a.in_flight());
            r.withheld = Some(a.withheld);
            r.tsr = a.tsr();
            r.mean_latency_s = a.mean_latency_s();
            r.l_norm = a.mean_latency_s().map(|l| l / a.slo_s);
            rows.push(r);
        }
    }
    rows
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean rows per scope over replication rows of the same configuration.
pub fn mean_rows(cfg: &ScenarioConfig, runs: &[ResultRow]) -> Vec<ResultRow> {
    let mut scopes: Vec<&str> = Vec::new();
    for r in runs {
        if !scopes.contains(&r.scope.as_str()) {
            scopes.push(&r.scope);
        }
    }
    scopes
        .into_iter()
        .map(|scope| {
            let sel = || runs.iter().filter(move |r| r.scope == scope);
            let mut row = base_row(cfg, scope, None, "mean".to_string());
            row.tsr = mean_of(sel().map(|r| r.tsr));
            row.mean_latency_s = mean_of(sel().map(|r| r.mean_latency_s));
            row.l_norm = mean_of(sel().map(|r| r.l_norm));
            row.energy_j = mean_of(sel().map(|r| r.energy_j));
            row
        })
        .collect()
}

/// `replication_count` runs with seeds `seed + k`, then mean rows.
pub fn run_single(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let reps: Vec<u32> = (0..cfg.replication_count).collect();
    let per_run: Result<Vec<Vec<ResultRow>>, SimError> = reps
        .par_iter()
        .map(|&k| {
            let seed = cfg.seed.wrapping_add(k as u64);
            run_once(cfg, seed).map(|out| rows_of(cfg, &out, seed, k, true))
        })
        .collect();
    let mut rows: Vec<ResultRow> = per_run?.into_iter().flatten().collect();
    let means = mean_rows(cfg, &rows);
    rows.extend(means);
    Ok(rows)
}

/// Axes of the policy grid.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub placements: Vec<PlacementPolicy>,
    pub offloadings: Vec<OffloadPolicy>,
    pub deployments: Vec<DeploymentModel>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            placements: PlacementPolicy::all(),
            offloadings: OffloadPolicy::all(),
            deployments: DeploymentModel::ALL.to_vec(),
        }
    }
}

/// Every grid configuration in row order: deployment, placement,
/// offloading, replication.
pub fn grid_configs(cfg: &ScenarioConfig, spec: &GridSpec) -> Vec<(ScenarioConfig, u64, u32)> {
    let mut out = Vec::new();
    for &d in &spec.deployments {
        for &p in &spec.placements {
            for &o in &spec.offloadings {
                let mut c = cfg.clone();
                c.deployment_model = d;
                c.policy.placement = p;
                c.policy.offloading = o;
                for k in 0..cfg.replication_count {
                    out.push((c.clone(), cfg.seed.wrapping_add(k as u64), k));
                }
            }
        }
    }
    out
}

fn run_jobs(jobs: &[(ScenarioConfig, u64, u32)]) -> Result<Vec<ResultRow>, SimError> {
    let rows: Result<Vec<Vec<ResultRow>>, SimError> = jobs
        .par_iter()
        .map(|(c, seed, k)| run_once(c, *seed).map(|out| rows_of(c, &out, *seed, *k, false)))
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// One global row per (deployment, placement, offloading, replication),
/// each configuration followed by its mean row.
pub fn run_policy_grid(cfg: &ScenarioConfig, spec: &GridSpec) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let jobs = grid_configs(cfg, spec);
    let rows = run_jobs(&jobs)?;
    let reps = cfg.replication_count.max(1) as usize;
    let mut out = Vec::with_capacity(rows.len() + rows.len() / reps);
    for (chunk, job) in rows.chunks(reps).zip(jobs.chunks(reps)) {
        out.extend_from_slice(chunk);
        out.extend(mean_rows(&job[0].0, chunk));
    }
    Ok(out)
}

/// One row per (edge MIPS, deployment, replication). OLT and VM cores are
/// rescaled to each MIPS value; ONTs stay fixed.
pub fn run_capacity_sweep(
    cfg: &ScenarioConfig,
    mips: &[f64],
    deployments: &[DeploymentModel],
) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &m in mips {
        for &d in deployments {
            let mut c = cfg.clone();
            c.set_edge_mips(m);
            c.deployment_model = d;
            for k in 0..cfg.replication_count {
                jobs.push((c.clone(), cfg.seed.wrapping_add(k as u64), k));
            }
        }
    }
    run_jobs(&jobs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleAxis {
    Olts,
    Users,
}

impl std::str::FromStr for ScaleAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "olts" => Ok(ScaleAxis::Olts),
            "users" => Ok(ScaleAxis::Users),
            _ => Err(format!("unknown axis `{s}` (expected olts or users)")),
        }
    }
}

/// Rescales the per-application user counts to `total`, keeping their
/// proportions (largest remainder).
pub fn scale_users(cfg: &mut ScenarioConfig, total: u32) {
    let current: u32 = cfg.applications.iter().map(|a| a.users).sum();
    if current == 0 {
        return;
    }
    let exact: Vec<f64> = cfg
        .applications
        .iter()
        .map(|a| a.users as f64 * total as f64 / current as f64)
        .collect();
    let mut counts: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut left = total - counts.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for (a, c) in cfg.applications.iter_mut().zip(counts) {
        a.users = c;
    }
}

/// Peak resident memory of this process in MB, from `/proc/self/status`.
pub fn peak_memory_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Resets the peak-RSS watermark where the kernel allows it.
fn reset_peak_memory() {
    let _ = std::fs::write("/proc/self/clear_refs", "5");
}

/// Sequential runs along one axis, each timed and memory-sampled.
pub fn run_scalability(cfg: &ScenarioConfig, axis: ScaleAxis, values: &[u32]) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        match axis {
            ScaleAxis::Olts => c.topology.olts = v,
            ScaleAxis::Users => scale_users(&mut c, v),
        }
        c.validate()?;
        reset_peak_memory();
        let started = Instant::now();
        let out = run_once(&c, c.seed)?;
        let wall = started.elapsed().as_secs_f64();
        let mut row = rows_of(&c, &out, c.seed, 0, false).remove(0);
        row.wall_clock_s = Some(wall);
        row.peak_memory_mb = peak_memory_mb();
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("in-memory CSV");
    String::from_utf8(buf).expect("utf-8")
}
