//! Pairwise barrier, its Lie derivative, and how the binary constraint is
//! split into one half-plane per agent.

use dsa::cbf::PairwiseCbf;
use dsa::dynamics::{AgentState, PhysicalLimits};
use dsa::Vec2;

fn main() -> dsa::Result<()> {
    let limits = PhysicalLimits::FLOCKING;
    let cbf = PairwiseCbf::from_limits(&limits, 1.0)?;
    let j = AgentState::at_rest(Vec2::ZERO);

    println!("head-on approach at 1 m/s from various distances:");
    println!("  dist        h     drift   constraint");
    for d in [2.1, 2.2, 2.5, 3.0, 3.8] {
        let i = AgentState::new(Vec2::new(d, 0.0), Vec2::new(-1.0, 0.0));
        let h = cbf.eval_h(&i, &j)?;
        let lie = cbf.lie_decomposition(&i, &j)?;
        let c = cbf.pairwise_constraint(&i, &j)?;
        let (mine, theirs) = c.partition();
        println!(
            "{d:6.2} {h:8.3} {:9.3}   P={} Q={} b={:.3}",
            lie.drift, c.p, c.q, c.b
        );
        println!(
            "                          mine: {}·u <= {:.3}, theirs: {}·u <= {:.3}",
            mine.normal, mine.offset, theirs.normal, theirs.offset
        );
    }

    let i = AgentState::new(Vec2::new(2.5, 1.0), Vec2::new(-1.0, 0.3));
    let others = [j, AgentState::new(Vec2::new(4.5, 2.5), Vec2::new(0.0, -1.0))];
    let set = cbf.admissible_set(&i, &others, &limits)?;
    println!("\nadmissible set of an agent with two neighbors:");
    for hp in &set.halfplanes {
        println!("  {}·u <= {:.4}", hp.normal, hp.offset);
    }
    println!("  |u| <= {}", set.action_bound);
    println!("  contains zero action: {}", set.contains(Vec2::ZERO));
    Ok(())
}
