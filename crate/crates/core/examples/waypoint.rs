//! Four agents crossing paths on a way-point grid.
//!
//! cargo run --example waypoint -- [out_dir]
//! With an output directory the trajectory and closest-neighbor series are
//! written as CSV for plotting.

use std::path::PathBuf;

use dsa::cli::run_scenario;
use dsa::Scenario;

fn main() -> dsa::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let scenario = Scenario::waypoint();
    if let dsa::scenario::ControllerConfig::Waypoint(cfg) = &scenario.controller {
        for (k, plan) in cfg.plans.iter().enumerate() {
            let stops: Vec<String> = plan.iter().map(|p| format!("({}, {})", p.x, p.y)).collect();
            println!("agent {k}: {}", stops.join(" -> "));
        }
    }
    let s = run_scenario(&scenario, out_dir.as_deref(), true)?;
    println!(
        "reached {:?}, done at {:?} s, min distance {:.4} m (d_min {}), {} violations",
        s.waypoints_reached.unwrap_or_default(),
        s.plans_completed_at,
        s.min_distance,
        scenario.limits.d_min,
        s.violation_count
    );
    Ok(())
}
