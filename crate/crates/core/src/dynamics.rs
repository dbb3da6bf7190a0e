//! Agent state, double-integrator dynamics and neighbor sensing.

use serde::{Deserialize, Serialize};

use crate::error::{DsaError, Result};
use crate::geometry::Vec2;

/// Slack allowed on `‖action‖ ≤ a_max` before [`step_dynamics`] rejects it.
pub const ACTION_TOLERANCE: f64 = 1e-9;

/// Position and velocity of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub const fn new(position: Vec2, velocity: Vec2) -> Self {
        AgentState { position, velocity }
    }

    pub fn at_rest(position: Vec2) -> Self {
        AgentState::new(position, Vec2::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }
}

/// Physical bounds shared by every agent of a homogeneous system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalLimits {
    /// Acceleration bound (m/s²).
    pub a_max: f64,
    /// Speed bound (m/s).
    pub v_max: f64,
    /// Sensing radius (m).
    pub sense_radius: f64,
    /// Collision distance (m).
    pub d_min: f64,
    /// Control period (s).
    pub eta: f64,
}

impl PhysicalLimits {
    /// Parameters of the 15-agent flocking study.
    pub const FLOCKING: PhysicalLimits = PhysicalLimits {
        a_max: 5.0,
        v_max: 2.5,
        sense_radius: 4.0,
        d_min: 2.0,
        eta: 0.1,
    };

    /// Parameters of the 4-agent way-point study.
    pub const WAYPOINT: PhysicalLimits = PhysicalLimits {
        a_max: 0.8,
        v_max: 0.2,
        sense_radius: 1.0,
        d_min: 0.2,
        eta: 0.05,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_max", self.a_max),
            ("v_max", self.v_max),
            ("sense_radius", self.sense_radius),
            ("d_min", self.d_min),
            ("eta", self.eta),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(DsaError::invalid(format!(
                    "limits.{name} must be finite and strictly positive (got {value})"
                )));
            }
        }
        if self.d_min >= self.sense_radius {
            return Err(DsaError::invalid(format!(
                "limits.d_min ({}) must be smaller than limits.sense_radius ({})",
                self.d_min, self.sense_radius
            )));
        }
        Ok(())
    }
}

/// Snapshot of the whole system at a step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct MasState {
    pub agents: Vec<AgentState>,
    pub time: f64,
    pub step_index: usize,
}

impl MasState {
    pub fn new(agents: Vec<AgentState>) -> Self {
        MasState {
            agents,
            time: 0.0,
            step_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Smallest distance over all unordered pairs, `+∞` with fewer than two
    /// agents.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                best = best.min(a.position.distance(b.position));
            }
        }
        best
    }
}

/// Advances one agent by one control period with the action held constant.
///
/// Position follows the exact zero-order-hold solution of the double
/// integrator; the resulting velocity is then clipped to `v_max`.
pub fn step_dynamics(
    state: &AgentState,
    action: Vec2,
    limits: &PhysicalLimits,
) -> Result<AgentState> {
    if !state.is_finite() {
        return Err(DsaError::NonFinite {
            what: "agent state",
        });
    }
    if !action.is_finite() {
        return Err(DsaError::NonFinite { what: "action" });
    }
    let norm = action.norm();
    if norm > limits.a_max + ACTION_TOLERANCE {
        return Err(DsaError::ActionOutOfBounds {
            norm,
            a_max: limits.a_max,
        });
    }
    let eta = limits.eta;
    let position = state.position + state.velocity * eta + action * (0.5 * eta * eta);
    let velocity = (state.velocity + action * eta).clip_norm(limits.v_max);
    Ok(AgentState { position, velocity })
}

/// Indices `j != agent` strictly closer than the sensing radius, ascending.
pub fn neighbors(state: &MasState, agent: usize, limits: &PhysicalLimits) -> Vec<usize> {
    let me = state.agents[agent].position;
    state
        .agents
        .iter()
        .enumerate()
        .filter(|&(j, other)| j != agent && me.distance(other.position) < limits.sense_radius)
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits(eta: f64, v_max: f64) -> PhysicalLimits {
        PhysicalLimits {
            eta,
            v_max,
            ..PhysicalLimits::FLOCKING
        }
    }

    // Explicit Euler with many substeps, independent of the closed form.
    fn euler(state: AgentState, a: Vec2, eta: f64, substeps: usize) -> AgentState {
        let dt = eta / substeps as f64;
        let (mut p, mut v) = (state.position, state.velocity);
        for _ in 0..substeps {
            p += v * dt + a * (0.5 * dt * dt);
            v += a * dt;
        }
        AgentState::new(p, v)
    }

    #[test]
    fn rest_stays_at_rest() {
        let s = step_dynamics(&AgentState::default(), Vec2::ZERO, &limits(0.1, 2.5)).unwrap();
        assert_eq!(s, AgentState::default());
    }

    #[test]
    fn uniform_motion() {
        let s0 = AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.0));
        let s = step_dynamics(&s0, Vec2::ZERO, &limits(0.1, 2.5)).unwrap();
        assert!((s.position.x - 0.1).abs() < 1e-15);
        assert_eq!(s.position.y, 0.0);
        assert_eq!(s.velocity, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn constant_acceleration_matches_substepped_oracle() {
        let s = step_dynamics(&AgentState::default(), Vec2::new(5.0, 0.0), &limits(0.1, 2.5))
            .unwrap();
        assert!((s.position.x - 0.025).abs() < 1e-15);
        assert!((s.velocity.x - 0.5).abs() < 1e-15);

        let oracle = euler(AgentState::default(), Vec2::new(5.0, 0.0), 0.1, 1000);
        assert!((oracle.position - s.position).norm() <= 1e-6);
        assert!((oracle.velocity - s.velocity).norm() <= 1e-6);
    }

    #[test]
    fn velocity_is_capped() {
        let s0 = AgentState::new(Vec2::ZERO, Vec2::new(2.4, 0.5));
        let s = step_dynamics(&s0, Vec2::new(5.0, 0.0), &limits(0.1, 2.5)).unwrap();
        assert!(s.velocity.norm() <= 2.5);
    }

    #[test]
    fn rejects_non_finite_and_oversized_actions() {
        let lim = limits(0.1, 2.5);
        let bad = AgentState::new(Vec2::new(f64::NAN, 0.0), Vec2::ZERO);
        assert!(matches!(
            step_dynamics(&bad, Vec2::ZERO, &lim),
            Err(DsaError::NonFinite { .. })
        ));
        assert!(matches!(
            step_dynamics(&AgentState::default(), Vec2::new(6.0, 0.0), &lim),
            Err(DsaError::ActionOutOfBounds { .. })
        ));
    }

    #[test]
    fn neighbor_radius_is_strict() {
        let lim = PhysicalLimits::FLOCKING;
        let close = MasState::new(vec![
            AgentState::at_rest(Vec2::ZERO),
            AgentState::at_rest(Vec2::new(3.9, 0.0)),
        ]);
        assert_eq!(neighbors(&close, 0, &lim), vec![1]);
        assert_eq!(neighbors(&close, 1, &lim), vec![0]);

        let edge = MasState::new(vec![
            AgentState::at_rest(Vec2::ZERO),
            AgentState::at_rest(Vec2::new(4.0, 0.0)),
        ]);
        assert!(neighbors(&edge, 0, &lim).is_empty());
        assert!(neighbors(&edge, 1, &lim).is_empty());
    }

    #[test]
    fn neighbors_on_a_line_match_brute_force() {
        let lim = PhysicalLimits::FLOCKING;
        let state = MasState::new(
            (0..15)
                .map(|k| AgentState::at_rest(Vec2::new(k as f64, 0.0)))
                .collect(),
        );
        assert_eq!(neighbors(&state, 7, &lim), vec![4, 5, 6, 8, 9, 10]);
        for i in 0..15 {
            let brute: Vec<usize> = (0..15)
                .filter(|&j| j != i && (i as f64 - j as f64).abs() < 4.0)
                .collect();
            assert_eq!(neighbors(&state, i, &lim), brute);
        }
    }

    #[test]
    fn limits_validation() {
        assert!(PhysicalLimits::FLOCKING.validate().is_ok());
        assert!(PhysicalLimits::WAYPOINT.validate().is_ok());
        let bad = PhysicalLimits {
            d_min: 5.0,
            ..PhysicalLimits::FLOCKING
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("d_min"), "{err}");
        let bad = PhysicalLimits {
            eta: 0.0,
            ..PhysicalLimits::FLOCKING
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec2(r: f64) -> impl Strategy<Value = Vec2> {
            (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
        }

        proptest! {
            #[test]
            fn closed_form_tracks_euler(p in vec2(10.0), v in vec2(1.7), a in vec2(3.5)) {
                // v_max large enough that clipping never engages
                let lim = limits(0.1, 100.0);
                let s0 = AgentState::new(p, v);
                let exact = step_dynamics(&s0, a, &lim).unwrap();
                let oracle = euler(s0, a, 0.1, 1000);
                prop_assert!((exact.position - oracle.position).norm() <= 1e-6);
            }

            #[test]
            fn speed_never_exceeds_cap(v in vec2(1.76), a in vec2(3.5)) {
                let lim = PhysicalLimits::FLOCKING;
                let s = step_dynamics(&AgentState::new(Vec2::ZERO, v), a, &lim).unwrap();
                prop_assert!(s.velocity.norm() <= lim.v_max);
                prop_assert_eq!(s.velocity.clip_norm(lim.v_max), s.velocity);
            }

            #[test]
            fn neighbor_relation_is_symmetric(pts in prop::collection::vec(vec2(6.0), 2..12)) {
                let lim = PhysicalLimits::FLOCKING;
                let state = MasState::new(pts.into_iter().map(AgentState::at_rest).collect());
                for i in 0..state.len() {
                    for j in neighbors(&state, i, &lim) {
                        prop_assert!(neighbors(&state, j, &lim).contains(&i));
                    }
                }
            }
        }
    }
}
