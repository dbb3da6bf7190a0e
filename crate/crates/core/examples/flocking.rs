//! The 15-agent flocking study with DSA, stepped manually.
//!
//! cargo run --example flocking -- [seed]

use dsa::{Mode, Scenario, Simulation};

fn main() -> dsa::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut sim = Simulation::new(Scenario::flocking(seed, true))?;
    println!("  time   min dist   in BC");
    while !sim.is_finished() {
        let rec = sim.step()?;
        if rec.step % 50 == 0 {
            let bc = rec.agents.iter().filter(|a| a.mode == Mode::Bc).count();
            println!("{:6.1}   {:8.3}   {bc:>5}", rec.time, rec.min_distance);
        }
    }
    let s = sim.summary(0.0);
    println!(
        "seed {seed}: min distance {:.3} m, {} violations, mean BC fraction {:.3}",
        s.min_distance, s.violation_count, s.mean_bc_fraction
    );
    Ok(())
}
