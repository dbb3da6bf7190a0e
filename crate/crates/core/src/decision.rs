//! Switching logic between the advanced and baseline controllers.
//!
//! Each barrier gets a threshold `λ = η · |min ḣ|`, the worst-case decrease
//! of the barrier over one control period at the current rate. The forward
//! switching condition (FSC) fires when some barrier is below `λ`; the
//! reverse condition (RSC) requires every barrier above `m λ`.
//!
//! The linear threshold alone under-approximates the one-step decrease near
//! `d_min`, where `h` has a square-root profile. Both conditions therefore
//! also consult [`reachable_h_lower_bound`], a guaranteed lower bound on the
//! barrier over every state reachable within the horizon.

use serde::{Deserialize, Serialize};

use crate::cbf::{PairwiseCbf, DOMAIN_EPS};
use crate::dynamics::{AgentState, PhysicalLimits};
use crate::error::{DsaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Advanced controller in control.
    Ac,
    /// Baseline controller in control.
    Bc,
}

impl Mode {
    /// 0 for AC, 1 for BC, as written to trajectory files.
    pub fn code(self) -> u8 {
        match self {
            Mode::Ac => 0,
            Mode::Bc => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmState {
    pub mode: Mode,
    pub last_switch_step: usize,
}

impl Default for DmState {
    fn default() -> Self {
        DmState {
            mode: Mode::Ac,
            last_switch_step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchParams {
    /// Reverse-switching horizon in control periods, at least 2.
    pub m: u32,
    pub eta: f64,
}

impl SwitchParams {
    pub fn new(m: u32, eta: f64) -> Result<Self> {
        if m < 2 {
            return Err(DsaError::invalid(format!("switching multiplier m must be at least 2 (got {m})")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(DsaError::invalid(format!("eta must be positive (got {eta})")));
        }
        Ok(SwitchParams { m, eta })
    }
}

/// `η · max(0, -min ḣ)` with the minimum over both agents' action disks.
pub fn threshold_lambda(
    cbf: &PairwiseCbf,
    s_i: &AgentState,
    s_j: &AgentState,
    limits: &PhysicalLimits,
) -> Result<f64> {
    let lie = cbf.lie_decomposition(s_i, s_j)?;
    let worst_rate = lie.drift - (lie.coeff_i.norm() + lie.coeff_j.norm()) * limits.a_max;
    Ok(limits.eta * (-worst_rate).max(0.0))
}

/// Lower bound on `h_ij` over all states reachable in `steps` control
/// periods under any actions in the `a_max` disks, velocity clipping
/// included.
///
/// Over a horizon `T`, each agent's velocity stays within `a_max T` of its
/// current value (clipping is a projection onto a convex set that contains
/// the current velocity) and its position within `a_max T² / 2` of the
/// coasting position. The bound combines the smallest reachable distance
/// with the largest reachable approach speed.
pub fn reachable_h_lower_bound(
    cbf: &PairwiseCbf,
    s_i: &AgentState,
    s_j: &AgentState,
    limits: &PhysicalLimits,
    steps: u32,
) -> f64 {
    let horizon = limits.eta * f64::from(steps);
    let dv = s_i.velocity - s_j.velocity;
    let coast = s_i.position - s_j.position + dv * horizon;
    let spread = limits.a_max * horizon * horizon;
    let coast_dist = coast.norm();
    let speed = dv.norm();

    let closest = coast_dist - spread;
    let worst_approach = if closest <= 0.0 {
        speed
    } else if speed == 0.0 {
        0.0
    } else {
        // directions of the reachable offsets form a cone of half-angle
        // asin(spread / coast_dist) around the coasting offset
        let half_angle = (spread / coast_dist).asin();
        let cos_off = (-coast.dot(dv) / (coast_dist * speed)).clamp(-1.0, 1.0);
        let off_angle = cos_off.acos();
        speed * (off_angle - half_angle).max(0.0).cos()
    };
    cbf.braking_root(closest.max(0.0)) - worst_approach - 2.0 * limits.a_max * horizon
}

fn inside_domain(cbf: &PairwiseCbf, s_i: &AgentState, s_j: &AgentState) -> bool {
    s_i.position.distance(s_j.position) <= cbf.d_min + DOMAIN_EPS
}

/// Forward switching condition for agent `me`.
pub fn fsc(
    cbf: &PairwiseCbf,
    me: &AgentState,
    neighbor_states: &[AgentState],
    limits: &PhysicalLimits,
) -> bool {
    neighbor_states.iter().any(|other| {
        if inside_domain(cbf, me, other) {
            return true;
        }
        let (Ok(h), Ok(lambda)) = (cbf.eval_h(me, other), threshold_lambda(cbf, me, other, limits)) else {
            return true;
        };
        h < lambda || reachable_h_lower_bound(cbf, me, other, limits, 1) < 0.0
    })
}

/// Reverse switching condition for agent `me`.
pub fn rsc(
    cbf: &PairwiseCbf,
    me: &AgentState,
    neighbor_states: &[AgentState],
    limits: &PhysicalLimits,
    params: &SwitchParams,
) -> bool {
    let m = f64::from(params.m);
    neighbor_states.iter().all(|other| {
        if inside_domain(cbf, me, other) {
            return false;
        }
        let (Ok(h), Ok(lambda)) = (cbf.eval_h(me, other), threshold_lambda(cbf, me, other, limits)) else {
            return false;
        };
        h > m * lambda && (1..=params.m).all(|k| reachable_h_lower_bound(cbf, me, other, limits, k) > 0.0)
    })
}

/// One update of the switching automaton.
pub fn dm_step(dm: DmState, fsc_val: bool, rsc_val: bool, step: usize) -> DmState {
    let mode = match dm.mode {
        Mode::Bc if rsc_val => Mode::Ac,
        Mode::Ac if fsc_val => Mode::Bc,
        unchanged => unchanged,
    };
    if mode == dm.mode {
        dm
    } else {
        DmState {
            mode,
            last_switch_step: step,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_dynamics;
    use crate::geometry::Vec2;

    fn cbf() -> PairwiseCbf {
        PairwiseCbf::new(5.0, 2.0, 1.0).unwrap()
    }

    const LIM: PhysicalLimits = PhysicalLimits::FLOCKING;

    fn at(x: f64, y: f64) -> AgentState {
        AgentState::at_rest(Vec2::new(x, y))
    }

    /// Stationary pair at the distance giving barrier value `h`.
    fn stationary_pair_with_h(h: f64) -> (AgentState, AgentState) {
        let d = 2.0 + h * h / 20.0;
        (at(d, 0.0), at(0.0, 0.0))
    }

    #[test]
    fn lambda_for_stationary_pair() {
        let (a, b) = stationary_pair_with_h(3.0);
        let lambda = threshold_lambda(&cbf(), &a, &b, &LIM).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_scales_with_eta() {
        let a = AgentState::new(Vec2::new(2.7, 1.0), Vec2::new(-0.4, 0.3));
        let b = AgentState::new(Vec2::ZERO, Vec2::new(0.2, 0.1));
        let l1 = threshold_lambda(&cbf(), &a, &b, &LIM).unwrap();
        let doubled = PhysicalLimits { eta: 0.2, ..LIM };
        let l2 = threshold_lambda(&cbf(), &a, &b, &doubled).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn lambda_vanishes_when_worst_rate_is_non_negative() {
        // receding fast: drift ≥ 2 a_max
        let a = AgentState::new(Vec2::new(2.01, 0.0), Vec2::new(2.5, 0.0));
        let b = AgentState::new(Vec2::ZERO, Vec2::new(-2.5, 0.0));
        let lie = cbf().lie_decomposition(&a, &b).unwrap();
        assert!(lie.drift >= 10.0);
        assert_eq!(threshold_lambda(&cbf(), &a, &b, &LIM).unwrap(), 0.0);
    }

    #[test]
    fn fsc_examples() {
        assert!(!fsc(&cbf(), &at(0.0, 0.0), &[], &LIM));
        let (a, b) = stationary_pair_with_h(0.5);
        assert!(fsc(&cbf(), &a, &[b], &LIM));
        assert!(!fsc(&cbf(), &at(6.0, 0.0), &[at(0.0, 0.0)], &LIM));
        assert!(fsc(&cbf(), &at(1.5, 0.0), &[at(0.0, 0.0)], &LIM));
    }

    #[test]
    fn rsc_examples() {
        let params = SwitchParams::new(2, 0.1).unwrap();
        assert!(rsc(&cbf(), &at(0.0, 0.0), &[], &LIM, &params));
        let (a, b) = stationary_pair_with_h(1.5);
        assert!(!rsc(&cbf(), &a, &[b], &LIM, &params));
        assert!(rsc(&cbf(), &at(6.0, 0.0), &[at(0.0, 0.0)], &LIM, &params));
    }

    #[test]
    fn switch_params_require_m_at_least_two() {
        assert!(SwitchParams::new(1, 0.1).is_err());
        assert!(SwitchParams::new(2, 0.1).is_ok());
    }

    #[test]
    fn dm_transitions() {
        let ac = DmState::default();
        let bc = dm_step(ac, true, false, 7);
        assert_eq!(bc, DmState { mode: Mode::Bc, last_switch_step: 7 });
        assert_eq!(dm_step(bc, false, true, 9).mode, Mode::Ac);
        assert_eq!(dm_step(bc, true, false, 9), bc);
        assert_eq!(dm_step(ac, false, true, 3), ac);
        assert_eq!(dm_step(ac, false, false, 3), ac);
    }

    #[test]
    fn bound_is_tight_for_head_on_braking_failure() {
        // stationary pair: worst case is both agents accelerating head-on
        let (a, b) = stationary_pair_with_h(1.8);
        let bound = reachable_h_lower_bound(&cbf(), &a, &b, &LIM, 1);
        let ai = step_dynamics(&a, Vec2::new(-5.0, 0.0), &LIM).unwrap();
        let bi = step_dynamics(&b, Vec2::new(5.0, 0.0), &LIM).unwrap();
        let actual = cbf().eval_h(&ai, &bi).unwrap();
        assert!(bound <= actual + 1e-12);
        assert!((bound - actual).abs() < 1e-9);
    }

    #[test]
    fn linear_threshold_alone_misses_unrecoverable_successors() {
        // h == λ, so the linear test does not fire, but a head-on step from
        // here leaves the recoverable set
        let (a, b) = stationary_pair_with_h(1.0);
        let lambda = threshold_lambda(&cbf(), &a, &b, &LIM).unwrap();
        let h = cbf().eval_h(&a, &b).unwrap();
        assert!(h >= lambda - 1e-12);
        let ai = step_dynamics(&a, Vec2::new(-5.0, 0.0), &LIM).unwrap();
        let bi = step_dynamics(&b, Vec2::new(5.0, 0.0), &LIM).unwrap();
        assert!(cbf().eval_h(&ai, &bi).unwrap() < -0.5);
        assert!(fsc(&cbf(), &a, &[b], &LIM));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn disk(r: f64) -> impl Strategy<Value = Vec2> {
            (0.0..1.0f64, 0.0..std::f64::consts::TAU)
                .prop_map(move |(s, t)| Vec2::new(t.cos(), t.sin()) * (r * s.sqrt()))
        }

        proptest! {
            #[test]
            fn bound_holds_for_sampled_action_sequences(
                d in 2.0..4.0f64, theta in 0.0..std::f64::consts::TAU,
                vi in disk(2.5), vj in disk(2.5),
                acts in prop::collection::vec((disk(5.0), disk(5.0)), 3),
            ) {
                let c = cbf();
                let mut a = AgentState::new(Vec2::new(theta.cos(), theta.sin()) * d, vi);
                let mut b = AgentState::new(Vec2::ZERO, vj);
                let (a0, b0) = (a, b);
                for (k, (ai, aj)) in acts.into_iter().enumerate() {
                    a = step_dynamics(&a, ai, &LIM).unwrap();
                    b = step_dynamics(&b, aj, &LIM).unwrap();
                    let bound = reachable_h_lower_bound(&c, &a0, &b0, &LIM, k as u32 + 1);
                    if let Ok(h) = c.eval_h(&a, &b) {
                        prop_assert!(h >= bound - 1e-9, "step {}: h {} < bound {}", k + 1, h, bound);
                    }
                }
            }

            #[test]
            fn mode_is_a_function_of_inputs(
                prev_bc in any::<bool>(), f in any::<bool>(), r in any::<bool>(), step in 0usize..1000,
            ) {
                let prev = DmState { mode: if prev_bc { Mode::Bc } else { Mode::Ac }, last_switch_step: 0 };
                let next = dm_step(prev, f, r, step);
                let expected = match (prev.mode, f, r) {
                    (Mode::Bc, _, true) => Mode::Ac,
                    (Mode::Ac, true, _) => Mode::Bc,
                    (m, _, _) => m,
                };
                prop_assert_eq!(next.mode, expected);
                prop_assert_eq!(next.last_switch_step, if expected != prev.mode { step } else { 0 });
            }
        }
    }
}
