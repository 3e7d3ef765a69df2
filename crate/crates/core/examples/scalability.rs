//! Times the mixed workload while growing the user population on a fixed
//! 100-OLT topology.
//!
//! `cargo run --release --example scalability -- [minutes] [users...]`

use ponedge::config::ScenarioConfig;
use ponedge::harness::{run_scalability, ScaleAxis};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let minutes: f64 = args.next().map_or(Ok(2.0), |s| s.parse())?;
    let mut users: Vec<u32> = args.map(|s| s.parse()).collect::<Result<_, _>>()?;
    if users.is_empty() {
        users = vec![100, 250, 500, 1000];
    }

    let mut cfg = ScenarioConfig::preset("mixed")?;
    cfg.duration_s = minutes * 60.0;
    cfg.topology.olts = 100;
    let rows = run_scalability(&cfg, ScaleAxis::Users, &users)?;

    let base = rows[0].wall_clock_s.unwrap_or(f64::NAN);
    println!("{:>6} {:>9} {:>10} {:>8} {:>8}", "users", "tasks", "wall [s]", "x base", "RSS MB");
    for r in &rows {
        let wall = r.wall_clock_s.unwrap_or(f64::NAN);
        println!(
            "{:>6} {:>9} {:>10.3} {:>8.2} {:>8.1}",
            r.users,
            r.submitted.unwrap_or(0),
            wall,
            wall / base,
            r.peak_memory_mb.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
