//! Forward and reverse switching conditions for a pair closing head-on,
//! and the reachable-barrier bound used alongside the linear threshold.

use dsa::cbf::PairwiseCbf;
use dsa::decision::{fsc, reachable_h_lower_bound, rsc, threshold_lambda, SwitchParams};
use dsa::dynamics::{AgentState, PhysicalLimits};
use dsa::Vec2;

fn main() -> dsa::Result<()> {
    let limits = PhysicalLimits::FLOCKING;
    let cbf = PairwiseCbf::from_limits(&limits, 1.0)?;
    let params = SwitchParams::new(3, limits.eta)?;
    let j = AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.0));

    println!("  dist        h   lambda  bound(1)  bound(3)   FSC    RSC");
    for d in [2.1, 2.3, 2.6, 3.0, 3.5, 3.9] {
        let i = AgentState::new(Vec2::new(d, 0.0), Vec2::new(-1.0, 0.0));
        println!(
            "{d:6.2} {:8.3} {:8.3} {:9.3} {:9.3} {:>5} {:>6}",
            cbf.eval_h(&i, &j)?,
            threshold_lambda(&cbf, &i, &j, &limits)?,
            reachable_h_lower_bound(&cbf, &i, &j, &limits, 1),
            reachable_h_lower_bound(&cbf, &i, &j, &limits, 3),
            fsc(&cbf, &i, &[j], &limits),
            rsc(&cbf, &i, &[j], &limits, &params)
        );
    }
    Ok(())
}
