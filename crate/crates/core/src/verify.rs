//! Monte Carlo verification suites.
//!
//! Each suite checks a safety-relevant property of the library against an
//! oracle that does not share the code path under test: direct arithmetic
//! for constraint partitioning, central finite differences of the barrier
//! for the Lie derivative, forward simulation for switching soundness and
//! forward invariance, and grid enumeration for the LP solver.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{baseline_action, solve_bc, BcObjective, LpStatus, FEASIBILITY_TOL};
use crate::cbf::{partition, AdmissibleSet, BinaryConstraint, HalfPlane, PairwiseCbf, DOMAIN_EPS};
use crate::decision::{fsc, rsc, SwitchParams};
use crate::dynamics::{step_dynamics, AgentState, PhysicalLimits};
use crate::geometry::Vec2;

/// Barrier values below this after a step count as leaving the safe set.
pub const H_SLACK: f64 = 1e-6;

pub const SUITES: [&str; 6] = ["partition", "lie", "fsc", "lp", "invariance", "hysteresis"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Suite-specific worst observed value (error, margin, or barrier).
    pub worst: f64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {} cases, {} failures, {} {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.failures,
            self.detail,
            self.worst
        )
    }
}

/// Problem setup shared by the suites: flocking limits with `γ = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub limits: PhysicalLimits,
    pub cbf: PairwiseCbf,
    pub m: u32,
}

impl Default for Setup {
    fn default() -> Self {
        let limits = PhysicalLimits::FLOCKING;
        Setup {
            limits,
            cbf: PairwiseCbf {
                a_max: limits.a_max,
                d_min: limits.d_min,
                gamma: 1.0,
            },
            m: 3,
        }
    }
}

pub fn sample_disk(rng: &mut impl Rng, radius: f64) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(t.cos(), t.sin()) * r
}

/// Pair of neighbors: `j` at the origin, `i` at a uniform distance in
/// `(d_min, sense_radius)`, both velocities uniform in the speed disk.
pub fn sample_pair(rng: &mut impl Rng, setup: &Setup) -> (AgentState, AgentState) {
    let lim = &setup.limits;
    loop {
        let d = rng.random_range(lim.d_min..lim.sense_radius);
        if d <= lim.d_min + DOMAIN_EPS {
            continue;
        }
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        let si = AgentState::new(Vec2::new(t.cos(), t.sin()) * d, sample_disk(rng, lim.v_max));
        let sj = AgentState::new(Vec2::ZERO, sample_disk(rng, lim.v_max));
        return (si, sj);
    }
}

/// A neighboring pair with `h ≥ 0`.
pub fn sample_recoverable_pair(rng: &mut impl Rng, setup: &Setup) -> (AgentState, AgentState) {
    loop {
        let (si, sj) = sample_pair(rng, setup);
        if setup.cbf.eval_h(&si, &sj).is_ok_and(|h| h >= 0.0) {
            return (si, sj);
        }
    }
}

/// Random binary constraints and action pairs: whenever both partitioned
/// halves hold, the binary constraint must hold.
pub fn partition_soundness(samples: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut both_held = 0;
    let mut worst = f64::NEG_INFINITY;
    let v = |rng: &mut ChaCha8Rng, r: f64| Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
    for _ in 0..samples {
        let (p, q) = (v(&mut rng, 3.0), v(&mut rng, 3.0));
        let b = rng.random_range(-20.0..20.0);
        let (ui, uj) = (v(&mut rng, 5.0), v(&mut rng, 5.0));
        let (hi, hj) = partition(p, q, b);
        if hi.contains(ui) && hj.contains(uj) {
            both_held += 1;
            let binary = BinaryConstraint { p, q, b };
            worst = worst.max(p.dot(ui) + q.dot(uj) - b);
            if !binary.holds(ui, uj) {
                failures += 1;
            }
        }
    }
    SuiteReport {
        name: "partition",
        cases: samples,
        failures,
        worst,
        detail: format!("({both_held} with both halves satisfied) max binary slack"),
    }
}

fn flow(s: &AgentState, a: Vec2, t: f64) -> AgentState {
    AgentState::new(s.position + s.velocity * t + a * (0.5 * t * t), s.velocity + a * t)
}

/// Analytic `ḣ` against central differences of `h` along the exact
/// double-integrator flow, base step `1e-6 η`. One Richardson step (steps
/// δ and δ/2) removes the δ² truncation term, which otherwise dominates a
/// few micrometres outside `d_min` where the square root is very steep.
pub fn lie_derivative(samples: usize, seed: u64, setup: &Setup) -> SuiteReport {
    const REL_TOL: f64 = 1e-4;
    const ABS_TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1e-6 * setup.limits.eta;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (si, sj) = sample_recoverable_pair(&mut rng, setup);
        let ai = sample_disk(&mut rng, setup.limits.a_max);
        let aj = sample_disk(&mut rng, setup.limits.a_max);
        let analytic = match setup.cbf.lie_decomposition(&si, &sj) {
            Ok(lie) => lie.rate(ai, aj),
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let h = |t: f64| setup.cbf.eval_h(&flow(&si, ai, t), &flow(&sj, aj, t));
        let central = |d: f64| -> Option<f64> { Some((h(d).ok()? - h(-d).ok()?) / (2.0 * d)) };
        let (Some(coarse), Some(fine)) = (central(dt), central(0.5 * dt)) else {
            failures += 1;
            continue;
        };
        let fd = (4.0 * fine - coarse) / 3.0;
        let err = (analytic - fd).abs();
        if err > (REL_TOL * analytic.abs()).max(ABS_TOL) {
            failures += 1;
        }
        worst = worst.max(err / analytic.abs().max(ABS_TOL / REL_TOL));
    }
    SuiteReport {
        name: "lie",
        cases: samples,
        failures,
        worst,
        detail: "max scaled error".into(),
    }
}

/// States where the forward switching condition is false, stepped once
/// under sampled and worst-case action pairs: the barrier must stay
/// non-negative.
pub fn fsc_soundness(states: usize, actions: usize, seed: u64, setup: &Setup) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = &setup.limits;
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..states {
        let (si, sj) = loop {
            let (si, sj) = sample_pair(&mut rng, setup);
            if !fsc(&setup.cbf, &si, &[sj], lim) {
                break (si, sj);
            }
        };
        let unit = (si.position - sj.position) / si.position.distance(sj.position);
        let closing = (sj.velocity - si.velocity).normalized().unwrap_or(-unit);
        let a = lim.a_max;
        let mut pairs = vec![
            (-unit * a, unit * a),
            (-unit * a, Vec2::ZERO),
            (Vec2::ZERO, unit * a),
            (closing * a, -closing * a),
        ];
        pairs.extend((0..actions).map(|_| (sample_disk(&mut rng, a), sample_disk(&mut rng, a))));
        let mut state_failed = false;
        for (ai, aj) in pairs {
            let (Ok(ni), Ok(nj)) = (step_dynamics(&si, ai, lim), step_dynamics(&sj, aj, lim)) else {
                state_failed = true;
                continue;
            };
            match setup.cbf.eval_h(&ni, &nj) {
                Ok(h) => {
                    worst = worst.min(h);
                    state_failed |= h < -H_SLACK;
                }
                Err(_) => state_failed = true,
            }
        }
        failures += usize::from(state_failed);
    }
    SuiteReport {
        name: "fsc",
        cases: states,
        failures,
        worst,
        detail: format!("({} action pairs per state) min next-step barrier", actions + 4),
    }
}

/// Random feasible LPs (up to 6 half-planes in the `a_max` disk) against a
/// `grid × grid` enumeration.
pub fn lp_vs_grid(instances: usize, grid: usize, seed: u64, setup: &Setup) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = setup.limits.a_max;
    let step = 2.0 * radius / (grid - 1) as f64;
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for k in 0..instances {
        let anchor = sample_disk(&mut rng, 0.9 * radius);
        let count = rng.random_range(0..=6);
        let planes: Vec<HalfPlane> = (0..count)
            .map(|_| {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let n = Vec2::new(t.cos(), t.sin());
                HalfPlane::new(n, n.dot(anchor) + rng.random_range(0.0..0.5 * radius))
            })
            .collect();
        let set = AdmissibleSet::with_halfplanes(radius, planes);
        let gradient = if k % 20 == 0 {
            Vec2::ZERO
        } else {
            Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        let sol = solve_bc(&BcObjective { gradient, constant: 0.0 }, &set);
        if sol.status != LpStatus::Optimal || !set.contains_with_tol(sol.action, FEASIBILITY_TOL) {
            failures += 1;
            continue;
        }

        // zero gradient: compare norms (smaller is better), else objective
        let score = |u: Vec2| if gradient == Vec2::ZERO { -u.norm() } else { gradient.dot(u) };
        let increment = if gradient == Vec2::ZERO {
            step * std::f64::consts::SQRT_2
        } else {
            (gradient.x.abs() + gradient.y.abs()) * step
        };
        let mut best = f64::NEG_INFINITY;
        for ix in 0..grid {
            for iy in 0..grid {
                let u = Vec2::new(-radius + ix as f64 * step, -radius + iy as f64 * step);
                if set.contains(u) {
                    best = best.max(score(u));
                }
            }
        }
        if best.is_finite() {
            let margin = score(sol.action) - (best - increment);
            worst = worst.min(margin);
            if margin < 0.0 {
                failures += 1;
            }
        }
    }
    SuiteReport {
        name: "lp",
        cases: instances,
        failures,
        worst,
        detail: format!("({grid}x{grid} grid) min margin over grid-minus-increment"),
    }
}

fn baseline_pair_step(setup: &Setup, si: &AgentState, sj: &AgentState) -> Option<(AgentState, AgentState)> {
    let lim = &setup.limits;
    let neighbors = si.position.distance(sj.position) < lim.sense_radius;
    let act = |me: &AgentState, other: &AgentState| -> Option<Vec2> {
        let near: &[AgentState] = if neighbors { std::slice::from_ref(other) } else { &[] };
        baseline_action(&setup.cbf, me, near, lim).ok().map(|s| s.action)
    };
    let (ai, aj) = (act(si, sj)?, act(sj, si)?);
    Some((step_dynamics(si, ai, lim).ok()?, step_dynamics(sj, aj, lim).ok()?))
}

/// Recoverable pairs with both agents on the baseline controller for
/// `steps` periods: the barrier must stay non-negative throughout.
pub fn forward_invariance(states: usize, steps: usize, seed: u64, setup: &Setup) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..states {
        let (mut si, mut sj) = sample_recoverable_pair(&mut rng, setup);
        let mut failed = false;
        for _ in 0..steps {
            let Some((ni, nj)) = baseline_pair_step(setup, &si, &sj) else {
                failed = true;
                break;
            };
            (si, sj) = (ni, nj);
            match setup.cbf.eval_h(&si, &sj) {
                Ok(h) => {
                    worst = worst.min(h);
                    if h < -H_SLACK {
                        failed = true;
                        break;
                    }
                }
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        failures += usize::from(failed);
    }
    SuiteReport {
        name: "invariance",
        cases: states,
        failures,
        worst,
        detail: format!("({steps} steps each) min barrier"),
    }
}

/// States where the reverse switching condition holds, followed for `m`
/// periods under baseline actions: the forward condition must not fire
/// during that window (the switching state included).
pub fn hysteresis(trials: usize, seed: u64, setup: &Setup) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = &setup.limits;
    let params = SwitchParams { m: setup.m, eta: lim.eta };
    let mut failures = 0;
    let mut earliest = setup.m as f64;
    for _ in 0..trials {
        let (mut si, mut sj) = loop {
            let (si, sj) = sample_pair(&mut rng, setup);
            if rsc(&setup.cbf, &si, &[sj], lim, &params) && rsc(&setup.cbf, &sj, &[si], lim, &params) {
                break (si, sj);
            }
        };
        for k in 0..setup.m {
            if si.position.distance(sj.position) < lim.sense_radius
                && (fsc(&setup.cbf, &si, &[sj], lim) || fsc(&setup.cbf, &sj, &[si], lim))
            {
                failures += 1;
                earliest = earliest.min(k as f64);
                break;
            }
            match baseline_pair_step(setup, &si, &sj) {
                Some((ni, nj)) => (si, sj) = (ni, nj),
                None => {
                    failures += 1;
                    break;
                }
            }
        }
    }
    SuiteReport {
        name: "hysteresis",
        cases: trials,
        failures,
        worst: earliest,
        detail: format!("(m = {0}) first forward switch inside the window, {0} meaning none", setup.m),
    }
}

/// Runs a named suite at full size. `scale` in `(0, 1]` shrinks the sample
/// counts for quick checks.
pub fn run_suite(name: &str, seed: u64, scale: f64) -> Option<SuiteReport> {
    let setup = Setup::default();
    let n = |full: usize| ((full as f64 * scale).ceil() as usize).max(1);
    Some(match name {
        "partition" => partition_soundness(n(100_000), seed),
        "lie" => lie_derivative(n(10_000), seed, &setup),
        "fsc" => fsc_soundness(n(1_000), n(1_000), seed, &setup),
        "lp" => lp_vs_grid(n(1_000), 400, seed, &setup),
        "invariance" => forward_invariance(n(1_000), 100, seed, &setup),
        "hysteresis" => hysteresis(n(1_000), seed, &setup),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for name in SUITES {
            let report = run_suite(name, 7, 0.01).unwrap();
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", 0, 1.0).is_none());
    }

    #[test]
    fn sampled_pairs_are_neighbors_outside_d_min() {
        let setup = Setup::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (si, sj) = sample_recoverable_pair(&mut rng, &setup);
            let d = si.position.distance(sj.position);
            assert!(d > 2.0 && d < 4.0);
            assert!(si.velocity.norm() <= 2.5 && sj.velocity.norm() <= 2.5);
            assert!(setup.cbf.eval_h(&si, &sj).unwrap() >= 0.0);
        }
    }
}
