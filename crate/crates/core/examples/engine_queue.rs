//! The bare event engine: events fire in time order, ties in insertion
//! order, and per-entity random substreams do not depend on each other.

use ponedge::engine::{Engine, RandomStreams, SimTime};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut engine = Engine::new();
    engine.schedule(SimTime::from_secs(2.0), "late")?;
    engine.schedule(SimTime::from_secs(1.0), "first tie")?;
    engine.schedule(SimTime::from_secs(1.0), "second tie")?;
    engine.schedule_in(0.5, "earliest")?;
    while let Some(ev) = engine.pop_until(SimTime::from_secs(10.0)) {
        println!("t={:.1} {}", engine.now().secs(), ev.payload);
    }

    let streams = RandomStreams::new(42);
    for user in 0..3 {
        let x: f64 = streams.substream(0, user).random();
        println!("user {user} first draw {x:.6}");
    }
    Ok(())
}
