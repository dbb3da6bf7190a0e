//! The baseline controller's two-variable LP on a few hand-made instances.

use dsa::baseline::{solve_bc, BcObjective};
use dsa::cbf::{AdmissibleSet, HalfPlane};
use dsa::Vec2;

fn show(label: &str, gradient: Vec2, set: &AdmissibleSet) {
    let sol = solve_bc(&BcObjective { gradient, constant: 0.0 }, set);
    println!(
        "{label:<28} u = {:<28} {:?}, active {:?}",
        sol.action.to_string(),
        sol.status,
        sol.active_constraints
    );
}

fn main() {
    let disk = AdmissibleSet::disk(5.0);
    show("disk only", Vec2::new(3.0, 4.0), &disk);
    show("zero gradient", Vec2::ZERO, &disk);

    let chord = AdmissibleSet::with_halfplanes(5.0, [HalfPlane::new(Vec2::new(1.0, 0.0), 1.0)]);
    show("chord x <= 1, maximize x", Vec2::new(1.0, 0.0), &chord);

    let wedge = AdmissibleSet::with_halfplanes(
        5.0,
        [
            HalfPlane::new(Vec2::new(1.0, 1.0), 1.0),
            HalfPlane::new(Vec2::new(1.0, -1.0), 1.0),
        ],
    );
    show("wedge, maximize x", Vec2::new(1.0, 0.0), &wedge);

    let empty = AdmissibleSet::with_halfplanes(
        5.0,
        [
            HalfPlane::new(Vec2::new(1.0, 0.0), -1.0),
            HalfPlane::new(Vec2::new(-1.0, 0.0), -1.0),
        ],
    );
    show("contradictory pair", Vec2::new(0.0, 1.0), &empty);
}
