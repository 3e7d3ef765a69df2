//! Runs every placement x offloading combination on the mixed workload for
//! both deployment models and prints the mean TSR and L_norm per policy.
//!
//! `cargo run --release --example policy_comparison -- [minutes] [seeds]`

use ponedge::config::ScenarioConfig;
use ponedge::harness::{run_policy_grid, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let minutes: f64 = args.next().map_or(Ok(1.0), |s| s.parse())?;
    let seeds: u32 = args.next().map_or(Ok(1), |s| s.parse())?;

    let mut cfg = ScenarioConfig::preset("mixed")?;
    cfg.duration_s = minutes * 60.0;
    cfg.replication_count = seeds;
    let rows = run_policy_grid(&cfg, &GridSpec::default())?;

    println!("{:<20} {:<26} {:<22} {:>7} {:>7}", "deployment", "placement", "offloading", "TSR", "L_norm");
    for r in rows.iter().filter(|r| r.rep == "mean") {
        println!(
            "{:<20} {:<26} {:<22} {:>7.4} {:>7.3}",
            r.deployment,
            r.placement,
            r.offloading,
            r.tsr.unwrap_or(f64::NAN),
            r.l_norm.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
