use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ponedge::config::{parse_scenario, ConfigError, DeploymentModel, ScenarioConfig, CPU_CLASSES_MIPS};
use ponedge::harness::{
    run_capacity_sweep, run_policy_grid, run_scalability, run_single, write_csv, GridSpec, ResultRow,
    ScaleAxis,
};
use ponedge::orchestration::{OffloadPolicy, PlacementPolicy};

#[derive(Parser)]
#[command(name = "ponedge", version, about = "PON edge-computing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration with its replications.
    Run(Common),
    /// Run every placement x offloading combination.
    Grid(Common),
    /// Sweep the per-core MIPS of the OLT and its VMs.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated per-core MIPS values.
        #[arg(long, value_delimiter = ',', default_values_t = CPU_CLASSES_MIPS.to_vec())]
        mips: Vec<f64>,
    },
    /// Time runs while growing OLTs or users.
    Scale {
        #[command(flatten)]
        common: Common,
        /// `olts` or `users`.
        #[arg(long, default_value = "users")]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u32>,
        /// OLT count held fixed on the users axis.
        #[arg(long)]
        olts: Option<u32>,
        /// User count held fixed on the OLTs axis.
        #[arg(long)]
        users: Option<u32>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// S1..S5 or mixed.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// edge_only or far_edge_plus_edge; grid and capacity run both when omitted.
    #[arg(long)]
    deployment: Option<String>,
    /// Placement policy as name:variant.
    #[arg(long)]
    placement: Option<String>,
    /// Offloading policy as name:mode.
    #[arg(long)]
    offloading: Option<String>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulated minutes of workload.
    #[arg(long)]
    duration_min: Option<f64>,
    /// Write the effective configuration to this path.
    #[arg(long)]
    echo_config: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ponedge::SimError> for Failure {
    fn from(e: ponedge::SimError) -> Self {
        match e {
            ponedge::SimError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

struct Parsed {
    cfg: ScenarioConfig,
    deployment: Option<DeploymentModel>,
    placement: Option<PlacementPolicy>,
    offloading: Option<OffloadPolicy>,
}

fn load(c: &Common) -> Result<Parsed, Failure> {
    let mut cfg = match (&c.scenario, &c.preset) {
        (Some(path), _) => parse_scenario(path)?,
        (None, Some(name)) => ScenarioConfig::preset(name)?,
        (None, None) => return Err(Failure::Config("one of --scenario or --preset is required".into())),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.reps {
        cfg.replication_count = r;
    }
    if let Some(m) = c.duration_min {
        cfg.duration_s = m * 60.0;
    }
    let deployment = c.deployment.as_deref().map(str::parse::<DeploymentModel>).transpose()?;
    let placement = c
        .placement
        .as_deref()
        .map(|s| s.parse::<PlacementPolicy>().map_err(|e| Failure::Config(e.to_string())))
        .transpose()?;
    let offloading = c
        .offloading
        .as_deref()
        .map(|s| s.parse::<OffloadPolicy>().map_err(|e| Failure::Config(e.to_string())))
        .transpose()?;
    if let Some(d) = deployment {
        cfg.deployment_model = d;
    }
    if let Some(p) = placement {
        cfg.policy.placement = p;
    }
    if let Some(o) = offloading {
        cfg.policy.offloading = o;
    }
    cfg.validate()?;
    if let Some(path) = &c.echo_config {
        std::fs::write(path, cfg.effective_toml()).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(Parsed {
        cfg,
        deployment,
        placement,
        offloading,
    })
}

fn emit(rows: &[ResultRow], out: &Option<PathBuf>) -> Result<(), Failure> {
    let res = match out {
        Some(path) => File::create(path)
            .map_err(csv::Error::from)
            .and_then(|f| write_csv(rows, f)),
        None => write_csv(rows, io::stdout().lock()),
    };
    res.map_err(|e| Failure::Runtime(e.to_string()))
}

fn deployments(d: Option<DeploymentModel>) -> Vec<DeploymentModel> {
    d.map_or_else(|| DeploymentModel::ALL.to_vec(), |d| vec![d])
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(c) => {
            let p = load(&c)?;
            emit(&run_single(&p.cfg)?, &c.out)
        }
        Command::Grid(c) => {
            let p = load(&c)?;
            let spec = GridSpec {
                placements: p.placement.map_or_else(PlacementPolicy::all, |x| vec![x]),
                offloadings: p.offloading.map_or_else(OffloadPolicy::all, |x| vec![x]),
                deployments: deployments(p.deployment),
            };
            emit(&run_policy_grid(&p.cfg, &spec)?, &c.out)
        }
        Command::Capacity { common, mips } => {
            let p = load(&common)?;
            if mips.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                return Err(Failure::Config("--mips values must be positive".into()));
            }
            emit(&run_capacity_sweep(&p.cfg, &mips, &deployments(p.deployment))?, &common.out)
        }
        Command::Scale {
            common,
            axis,
            values,
            olts,
            users,
        } => {
            let mut p = load(&common)?;
            let axis: ScaleAxis = axis.parse().map_err(Failure::Config)?;
            if let Some(o) = olts {
                p.cfg.topology.olts = o;
            }
            if let Some(u) = users {
                ponedge::harness::scale_users(&mut p.cfg, u);
            }
            emit(&run_scalability(&p.cfg, axis, &values)?, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime failure: {msg}");
            ExitCode::from(3)
        }
    }
}
