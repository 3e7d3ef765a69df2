//! Deploys the mixed workload under one placement policy and shows which
//! host each container landed on.
//!
//! `cargo run --release --example placement_map -- far_edge_plus_edge multi_objective:latency`

use std::collections::BTreeMap;

use ponedge::config::ScenarioConfig;
use ponedge::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = ScenarioConfig::preset("mixed")?;
    if let Some(d) = args.first() {
        cfg.deployment_model = d.parse()?;
    }
    if let Some(p) = args.get(1) {
        cfg.policy.placement = p.parse()?;
    }
    let mut sim = Simulation::new(&cfg, cfg.seed)?;
    sim.deploy()?;

    let topo = sim.topology();
    let mut by_host: BTreeMap<_, Vec<&str>> = BTreeMap::new();
    for inst in sim.cluster().instances() {
        by_host.entry(inst.host).or_default().push(&cfg.applications[inst.app().0 as usize].name);
    }
    println!("{} / {}", cfg.deployment_model.as_str(), cfg.policy.placement);
    for (host, apps) in by_host {
        let olt = topo.olt_of(host).map_or("-".to_string(), |o| o.0.to_string());
        println!("{:>5} {:<6?} olt {:>3}: {}", host.0, topo.kind(host), olt, apps.join(", "));
    }
    Ok(())
}
