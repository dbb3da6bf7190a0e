//! The baseline controller: a 2-D linear program over the admissible set.
//!
//! The utility is the barrier-weighted sum of the pairwise Lie derivatives
//! with every neighbor's action predicted as zero, so only its gradient in
//! `u_i` matters. The feasible region is a disk cut by half-planes; the
//! optimum is found by enumerating the finitely many points where it can
//! occur (disk tangent point, line/circle and line/line intersections).

use std::cmp::Ordering;

use crate::cbf::{AdmissibleSet, HalfPlane, PairwiseCbf, DOMAIN_EPS};
use crate::dynamics::{AgentState, PhysicalLimits};
use crate::error::Result;
use crate::geometry::Vec2;

/// Tolerance for a solution to count as satisfying a constraint.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Looser tolerance accepted before falling back to violation minimization.
const LOOSE_TOL: f64 = 1e-6;
/// Barrier values are floored here before inverting them into weights.
pub const WEIGHT_FLOOR: f64 = 1e-3;

const TIE_REL: f64 = 1e-12;
const PARALLEL_EPS: f64 = 1e-12;

/// Linear utility `constant + gradient · u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BcObjective {
    pub gradient: Vec2,
    /// Action-independent part, kept for diagnostics.
    pub constant: f64,
}

impl BcObjective {
    pub fn value(&self, u: Vec2) -> f64 {
        self.constant + self.gradient.dot(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    /// No candidate met [`FEASIBILITY_TOL`] but one met a looser tolerance.
    FeasibleFallback,
    /// The admissible set is numerically empty; the action minimizes the
    /// largest half-plane violation instead.
    InfeasibleFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub action: Vec2,
    pub status: LpStatus,
    /// Indices of half-planes tight at `action`.
    pub active_constraints: Vec<usize>,
}

/// Assembles the weighted-sum utility for agent `me`.
///
/// Each neighbor contributes its Lie derivative weighted by
/// `1 / max(h, WEIGHT_FLOOR)`. Neighbors inside the Lie domain get the
/// maximal weight along the direction pointing away from them.
pub fn build_objective(cbf: &PairwiseCbf, me: &AgentState, neighbor_states: &[AgentState]) -> BcObjective {
    let mut obj = BcObjective::default();
    for other in neighbor_states {
        let dp = me.position - other.position;
        let dist = dp.norm();
        if dist == 0.0 {
            log::warn!("baseline objective: coincident neighbor ignored");
            continue;
        }
        if dist <= cbf.d_min + DOMAIN_EPS {
            obj.gradient += dp / dist / WEIGHT_FLOOR;
            continue;
        }
        let (Ok(h), Ok(lie)) = (cbf.eval_h(me, other), cbf.lie_decomposition(me, other)) else {
            continue;
        };
        let weight = 1.0 / h.max(WEIGHT_FLOOR);
        obj.gradient += lie.coeff_i * weight;
        obj.constant += lie.drift * weight;
    }
    obj
}

/// Maximizes the objective over the admissible set.
pub fn solve_bc(objective: &BcObjective, admissible: &AdmissibleSet) -> LpSolution {
    let g = objective.gradient;
    let planes = &admissible.halfplanes;
    let radius = admissible.action_bound;

    let cands = candidates(planes, radius, 0.0, g);
    for (tol, status) in [
        (FEASIBILITY_TOL, LpStatus::Optimal),
        (LOOSE_TOL, LpStatus::FeasibleFallback),
    ] {
        if let Some(u) = best_candidate(&cands, planes, radius, 0.0, tol, g) {
            if status != LpStatus::Optimal {
                log::warn!("baseline LP: solution only feasible at tolerance {tol:e}");
            }
            return finish(u, status, planes, 0.0);
        }
    }

    // Smallest uniform outward shift of all half-planes that makes the
    // region non-empty, found by bisection on the shift.
    let feasible_at = |shift: f64| {
        let c = candidates(planes, radius, shift, Vec2::ZERO);
        best_candidate(&c, planes, radius, shift, FEASIBILITY_TOL, Vec2::ZERO).is_some()
    };
    let mut lo = 0.0;
    let mut hi = planes.iter().map(|hp| -hp.offset).fold(0.0, f64::max) + FEASIBILITY_TOL;
    while !feasible_at(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let cands = candidates(planes, radius, hi, g);
    let u = best_candidate(&cands, planes, radius, hi, FEASIBILITY_TOL, g).unwrap_or(Vec2::ZERO);
    log::warn!("baseline LP: admissible set empty, minimax violation {hi:e}");
    finish(u, LpStatus::InfeasibleFallback, planes, hi)
}

/// Convenience: objective, admissible set and LP solve for one agent.
pub fn baseline_action(
    cbf: &PairwiseCbf,
    me: &AgentState,
    neighbor_states: &[AgentState],
    limits: &PhysicalLimits,
) -> Result<LpSolution> {
    let set = cbf.admissible_set(me, neighbor_states, limits)?;
    let obj = build_objective(cbf, me, neighbor_states);
    Ok(solve_bc(&obj, &set))
}

fn finish(u: Vec2, status: LpStatus, planes: &[HalfPlane], shift: f64) -> LpSolution {
    let active_constraints = planes
        .iter()
        .enumerate()
        .filter(|(_, hp)| (hp.violation(u) - shift).abs() <= FEASIBILITY_TOL * (1.0 + hp.offset.abs()))
        .map(|(k, _)| k)
        .collect();
    LpSolution {
        action: u,
        status,
        active_constraints,
    }
}

/// Points where the optimum of a linear objective (or, for a zero
/// gradient, the minimum-norm point) over the shifted region can lie.
fn candidates(planes: &[HalfPlane], radius: f64, shift: f64, g: Vec2) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(2 + 3 * planes.len() + planes.len() * planes.len() / 2);
    let min_norm = g == Vec2::ZERO;
    match g.normalized() {
        Some(dir) => out.push(dir * radius),
        None => out.push(Vec2::ZERO),
    }
    for hp in planes {
        if hp.normal == Vec2::ZERO {
            continue;
        }
        let off = hp.offset + shift;
        if off.abs() <= radius {
            let foot = hp.normal * off;
            let half_chord = (radius * radius - off * off).max(0.0).sqrt();
            let along = hp.normal.perp();
            out.push(foot + along * half_chord);
            out.push(foot - along * half_chord);
            if min_norm {
                out.push(foot);
            }
        }
    }
    for (k, a) in planes.iter().enumerate() {
        for b in &planes[k + 1..] {
            let det = a.normal.cross(b.normal);
            if det.abs() < PARALLEL_EPS {
                continue;
            }
            let (oa, ob) = (a.offset + shift, b.offset + shift);
            let u = Vec2::new(
                (oa * b.normal.y - a.normal.y * ob) / det,
                (a.normal.x * ob - oa * b.normal.x) / det,
            );
            if u.norm() <= radius * (1.0 + FEASIBILITY_TOL) {
                out.push(u);
            }
        }
    }
    out
}

fn best_candidate(
    cands: &[Vec2],
    planes: &[HalfPlane],
    radius: f64,
    shift: f64,
    tol: f64,
    g: Vec2,
) -> Option<Vec2> {
    let feasible = |u: &Vec2| {
        u.norm() <= radius + tol && planes.iter().all(|hp| hp.violation(*u) - shift <= tol)
    };
    let score = |u: Vec2| if g == Vec2::ZERO { -u.norm() } else { g.dot(u) };
    cands
        .iter()
        .copied()
        .filter(feasible)
        .reduce(|best, u| if prefer(score(u), u, score(best), best) { u } else { best })
        .map(|u| u.clip_norm(radius))
}

/// Higher score wins; near-ties go to the smaller norm, then to the
/// lexicographically smaller point.
fn prefer(score_a: f64, a: Vec2, score_b: f64, b: Vec2) -> bool {
    if !near(score_a, score_b) {
        return score_a > score_b;
    }
    let (na, nb) = (a.norm(), b.norm());
    if !near(na, nb) {
        return na < nb;
    }
    match a.x.total_cmp(&b.x) {
        Ordering::Equal => a.y < b.y,
        ord => ord == Ordering::Less,
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_REL * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(gx: f64, gy: f64) -> BcObjective {
        BcObjective {
            gradient: Vec2::new(gx, gy),
            constant: 0.0,
        }
    }

    fn hp(nx: f64, ny: f64, off: f64) -> HalfPlane {
        HalfPlane::new(Vec2::new(nx, ny), off)
    }

    fn grid_best(o: &BcObjective, set: &AdmissibleSet, cells: usize) -> Option<f64> {
        let r = set.action_bound;
        let step = 2.0 * r / (cells - 1) as f64;
        let mut best: Option<f64> = None;
        for ix in 0..cells {
            for iy in 0..cells {
                let u = Vec2::new(-r + ix as f64 * step, -r + iy as f64 * step);
                if set.contains(u) {
                    let v = o.gradient.dot(u);
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
        best
    }

    #[test]
    fn unconstrained_disk_maximum() {
        let sol = solve_bc(&obj(1.0, 0.0), &AdmissibleSet::disk(5.0));
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.action, Vec2::new(5.0, 0.0));
    }

    #[test]
    fn chord_optimum_breaks_tie_lexicographically() {
        let set = AdmissibleSet::with_halfplanes(5.0, [hp(1.0, 0.0, 1.0)]);
        let sol = solve_bc(&obj(1.0, 0.0), &set);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.action.x - 1.0).abs() < 1e-12);
        assert!((sol.action.y + 24f64.sqrt()).abs() < 1e-12);
        assert!((sol.action.y + 4.898979).abs() < 1e-6);
        assert_eq!(sol.active_constraints, vec![0]);

        let grid = grid_best(&obj(1.0, 0.0), &set, 1001).unwrap();
        assert!(sol.action.x >= grid - 0.01);
    }

    #[test]
    fn zero_gradient_returns_min_norm_point() {
        let sol = solve_bc(&obj(0.0, 0.0), &AdmissibleSet::disk(5.0));
        assert_eq!(sol.action, Vec2::ZERO);

        let set = AdmissibleSet::with_halfplanes(5.0, [hp(-1.0, 0.0, -2.0)]);
        let sol = solve_bc(&obj(0.0, 0.0), &set);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.action - Vec2::new(2.0, 0.0)).norm() < 1e-12);

        let set = AdmissibleSet::with_halfplanes(5.0, [hp(-1.0, 0.0, -2.0), hp(0.0, -1.0, -1.0)]);
        let sol = solve_bc(&obj(0.0, 0.0), &set);
        assert!((sol.action - Vec2::new(2.0, 1.0)).norm() < 1e-12);
        assert_eq!(sol.active_constraints, vec![0, 1]);
    }

    #[test]
    fn wedge_vertex_is_optimal() {
        let set = AdmissibleSet::with_halfplanes(5.0, [hp(1.0, 1.0, 1.0), hp(1.0, -1.0, 1.0)]);
        let sol = solve_bc(&obj(1.0, 0.0), &set);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.action - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn infeasible_set_minimizes_worst_violation() {
        // x ≤ -3 and x ≥ 3 cannot both hold; best compromise is x = 0 with
        // violation 3 on each side
        let set = AdmissibleSet::with_halfplanes(5.0, [hp(1.0, 0.0, -3.0), hp(-1.0, 0.0, -3.0)]);
        let sol = solve_bc(&obj(0.0, 1.0), &set);
        assert_eq!(sol.status, LpStatus::InfeasibleFallback);
        assert!(sol.action.x.abs() < 1e-9, "{:?}", sol.action);
        // the tie in violation leaves y free; the objective pushes it up
        assert!(sol.action.y > 3.9);

        // requirement beyond the disk: x ≥ 6
        let set = AdmissibleSet::with_halfplanes(5.0, [hp(-1.0, 0.0, -6.0)]);
        let sol = solve_bc(&obj(0.0, 1.0), &set);
        assert_eq!(sol.status, LpStatus::InfeasibleFallback);
        assert!((sol.action - Vec2::new(5.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn no_neighbors_gives_zero_gradient() {
        let cbf = PairwiseCbf::new(5.0, 2.0, 1.0).unwrap();
        assert_eq!(build_objective(&cbf, &AgentState::default(), &[]).gradient, Vec2::ZERO);
    }

    #[test]
    fn single_neighbor_gradient_points_away() {
        let cbf = PairwiseCbf::new(5.0, 2.0, 1.0).unwrap();
        let me = AgentState::new(Vec2::ZERO, Vec2::new(0.3, -0.2));
        let east = AgentState::new(Vec2::new(3.0, 0.0), Vec2::new(-1.0, 0.4));
        let g = build_objective(&cbf, &me, &[east]).gradient;
        assert!(g.y.abs() < 1e-15 && g.x < 0.0);
    }

    #[test]
    fn symmetric_neighbors_cancel() {
        let cbf = PairwiseCbf::new(5.0, 2.0, 1.0).unwrap();
        let me = AgentState::default();
        let east = AgentState::at_rest(Vec2::new(3.0, 0.0));
        let west = AgentState::at_rest(Vec2::new(-3.0, 0.0));
        assert_eq!(build_objective(&cbf, &me, &[east, west]).gradient, Vec2::ZERO);
    }

    #[test]
    fn close_neighbor_makes_baseline_retreat() {
        let cbf = PairwiseCbf::new(5.0, 2.0, 1.0).unwrap();
        let me = AgentState::default();
        let other = AgentState::at_rest(Vec2::new(2.05, 0.0));
        let sol = baseline_action(&cbf, &me, &[other], &PhysicalLimits::FLOCKING).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let away = (me.position - other.position).normalized().unwrap();
        assert!(sol.action.dot(away) > 0.0);
    }

    #[test]
    fn solver_is_deterministic() {
        let set = AdmissibleSet::with_halfplanes(
            2.0,
            [hp(0.3, 1.0, 0.4), hp(-1.0, 0.2, 0.1), hp(0.5, -0.5, 0.9)],
        );
        let a = solve_bc(&obj(0.7, -0.1), &set);
        let b = solve_bc(&obj(0.7, -0.1), &set);
        assert_eq!(a.action.x.to_bits(), b.action.x.to_bits());
        assert_eq!(a.action.y.to_bits(), b.action.y.to_bits());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        prop_compose! {
            fn feasible_instance()(
                inner in (-0.9..0.9f64, -0.9..0.9f64),
                raw in prop::collection::vec((0.0..std::f64::consts::TAU, 0.0..0.8f64), 0..6),
                g in (-1.0..1.0f64, -1.0..1.0f64),
            ) -> (BcObjective, AdmissibleSet) {
                let radius = 2.0;
                let anchor = Vec2::new(inner.0, inner.1) * radius * 0.7;
                let planes = raw.into_iter().map(|(theta, slack)| {
                    let n = Vec2::new(theta.cos(), theta.sin());
                    HalfPlane::new(n, n.dot(anchor) + slack)
                });
                (obj(g.0, g.1), AdmissibleSet::with_halfplanes(radius, planes))
            }
        }

        proptest! {
            #[test]
            fn optimal_output_is_admissible((o, set) in feasible_instance()) {
                let sol = solve_bc(&o, &set);
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!(set.contains_with_tol(sol.action, FEASIBILITY_TOL));
            }

            #[test]
            fn beats_coarse_grid((o, set) in feasible_instance()) {
                let sol = solve_bc(&o, &set);
                let cells = 81;
                let step = 2.0 * set.action_bound / (cells - 1) as f64;
                if let Some(best) = grid_best(&o, &set, cells) {
                    let inc = (o.gradient.x.abs() + o.gradient.y.abs()) * step;
                    prop_assert!(o.gradient.dot(sol.action) >= best - inc);
                }
            }
        }
    }
}
