//! Follows individual Smart City tasks through their lifecycle on a single
//! lightly loaded OLT and prints every timestamp.

use ponedge::config::ScenarioConfig;
use ponedge::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::preset("S1")?;
    cfg.applications[0].users = 2;
    cfg.duration_s = 60.0;
    cfg.keep_task_records = true;

    let out = Simulation::new(&cfg, cfg.seed)?.run()?;
    let records = out.metrics.records.unwrap_or_default();
    println!("{} tasks recorded", records.len());
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}  outcome", "task", "created", "submit", "broker", "arrive", "start", "finish", "deliver");
    let fmt = |t: Option<f64>| t.map_or("-".to_string(), |t| format!("{t:.5}"));
    for r in records.iter().take(8) {
        let tr = &r.trace;
        println!(
            "{:>6} {:>9.5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}  {}, latency {}",
            r.id.0,
            r.created_at,
            fmt(tr.submitted),
            fmt(tr.broker_resolved),
            fmt(tr.request_arrived),
            fmt(tr.execution_started),
            fmt(tr.execution_finished),
            fmt(tr.response_delivered),
            r.outcome.map_or("in flight".to_string(), |o| format!("{o:?}")),
            fmt(r.latency_s()),
        );
    }
    Ok(())
}
