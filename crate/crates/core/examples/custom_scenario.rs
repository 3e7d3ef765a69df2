//! Loads a scenario file, runs its replications and prints per-application
//! results.
//!
//! `cargo run --release --example custom_scenario -- scenarios/campus_far_edge.toml`

use ponedge::config::parse_scenario;
use ponedge::harness::run_single;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/campus_far_edge.toml").into());
    let cfg = parse_scenario(path.as_ref())?;
    println!(
        "{}: {} OLTs, {} users, {} / {} / {}",
        cfg.name,
        cfg.topology.olts,
        cfg.applications.iter().map(|a| a.users).sum::<u32>(),
        cfg.deployment_model.as_str(),
        cfg.policy.placement,
        cfg.policy.offloading
    );
    for r in run_single(&cfg)?.iter().filter(|r| r.rep == "mean") {
        println!(
            "  {:<18} TSR {:.4}  mean latency {:.4} s  L_norm {:.3}",
            r.scope,
            r.tsr.unwrap_or(f64::NAN),
            r.mean_latency_s.unwrap_or(f64::NAN),
            r.l_norm.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
