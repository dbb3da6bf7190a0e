//! Reynolds flocking with and without DSA over a range of seeds.
//!
//! cargo run --release --example flocking_comparison -- [seeds]

use dsa::sim::run;
use dsa::Scenario;

fn main() -> dsa::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    println!("seed | Reynolds: min dist  violations | DSA: min dist  violations  BC fraction");
    for seed in 1..=seeds {
        let plain = run(&Scenario::flocking(seed, false))?;
        let guarded = run(&Scenario::flocking(seed, true))?;
        println!(
            "{seed:>4} | {:>18.3} {:>11} | {:>13.3} {:>11} {:>12.3}",
            plain.min_distance,
            plain.violation_count,
            guarded.min_distance,
            guarded.violation_count,
            guarded.mean_bc_fraction
        );
    }
    Ok(())
}
