//! Sweeps the OLT/VM CPU class for one application and reports the smallest
//! class that meets a TSR target in each deployment model.
//!
//! `cargo run --release --example capacity_planning -- [preset] [minutes] [target]`

use ponedge::config::{ScenarioConfig, CPU_CLASSES_MIPS};
use ponedge::harness::run_capacity_sweep;
use ponedge::DeploymentModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "S4".into());
    let minutes: f64 = args.next().map_or(Ok(10.0), |s| s.parse())?;
    let target: f64 = args.next().map_or(Ok(0.95), |s| s.parse())?;

    let mut cfg = ScenarioConfig::preset(&preset)?;
    cfg.duration_s = minutes * 60.0;
    cfg.replication_count = 1;
    let rows = run_capacity_sweep(&cfg, &CPU_CLASSES_MIPS, &DeploymentModel::ALL)?;

    for d in DeploymentModel::ALL {
        println!("{preset} / {}", d.as_str());
        let mut enough = None;
        for r in rows.iter().filter(|r| r.deployment == d.as_str()) {
            let tsr = r.tsr.unwrap_or(0.0);
            println!("  {:>7} MIPS  TSR {:.4}  L_norm {:.3}", r.edge_mips, tsr, r.l_norm.unwrap_or(f64::NAN));
            if tsr >= target && enough.is_none() {
                enough = Some(r.edge_mips);
            }
        }
        match enough {
            Some(m) => println!("  smallest class reaching TSR {target}: {m} MIPS"),
            None => println!("  no class reaches TSR {target}"),
        }
    }
    Ok(())
}
