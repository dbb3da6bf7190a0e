//! Advanced (unverified) controllers: Reynolds flocking and a way-point
//! follower. Neither knows anything about safety.

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, PhysicalLimits};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReynoldsWeights {
    pub w_s: f64,
    pub w_c: f64,
    pub w_al: f64,
}

impl ReynoldsWeights {
    pub const FLOCKING: ReynoldsWeights = ReynoldsWeights {
        w_s: 3.0,
        w_c: 1.5,
        w_al: 0.5,
    };

    pub fn is_valid(&self) -> bool {
        [self.w_s, self.w_c, self.w_al]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// Separation + cohesion + alignment, clipped to the acceleration disk.
///
/// Separation sums `(p_i - p_j) / ‖p_i - p_j‖²` over neighbors; cohesion
/// steers to the neighbors' centroid; alignment matches their mean velocity.
pub fn reynolds_action(
    me: &AgentState,
    neighbor_states: &[AgentState],
    weights: &ReynoldsWeights,
    limits: &PhysicalLimits,
) -> Vec2 {
    if neighbor_states.is_empty() {
        return Vec2::ZERO;
    }
    let count = neighbor_states.len() as f64;
    let mut separation = Vec2::ZERO;
    let mut centroid = Vec2::ZERO;
    let mut mean_velocity = Vec2::ZERO;
    for other in neighbor_states {
        let away = me.position - other.position;
        let dist_sq = away.norm_sq();
        if dist_sq > 0.0 {
            separation += away / dist_sq;
        } else {
            log::warn!("reynolds: coincident neighbor, pushing along +x");
            separation += Vec2::UNIT_X * limits.a_max;
        }
        centroid += other.position;
        mean_velocity += other.velocity;
    }
    let cohesion = centroid / count - me.position;
    let alignment = mean_velocity / count - me.velocity;
    (separation * weights.w_s + cohesion * weights.w_c + alignment * weights.w_al).clip_norm(limits.a_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointGains {
    #[serde(default = "WaypointGains::default_k_p")]
    pub k_p: f64,
    #[serde(default = "WaypointGains::default_k_d")]
    pub k_d: f64,
    #[serde(default = "WaypointGains::default_capture_radius")]
    pub capture_radius: f64,
}

impl WaypointGains {
    fn default_k_p() -> f64 {
        2.0
    }
    fn default_k_d() -> f64 {
        1.5
    }
    fn default_capture_radius() -> f64 {
        0.1
    }
}

impl Default for WaypointGains {
    fn default() -> Self {
        WaypointGains {
            k_p: Self::default_k_p(),
            k_d: Self::default_k_d(),
            capture_radius: Self::default_capture_radius(),
        }
    }
}

/// Ordered way-points for one agent and progress through them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<Vec2>,
    pub current_index: usize,
    pub capture_radius: f64,
}

impl WaypointPlan {
    pub fn new(waypoints: Vec<Vec2>, capture_radius: f64) -> Self {
        WaypointPlan {
            waypoints,
            current_index: 0,
            capture_radius,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.current_index >= self.waypoints.len()
    }

    pub fn target(&self) -> Option<Vec2> {
        self.waypoints.get(self.current_index).copied()
    }
}

/// PD pursuit of the current way-point, braking once the plan is done.
///
/// Captured way-points are consumed before the action is computed, so the
/// returned plan may have advanced by several entries.
pub fn waypoint_action(
    me: &AgentState,
    plan: &WaypointPlan,
    gains: &WaypointGains,
    limits: &PhysicalLimits,
) -> (Vec2, WaypointPlan) {
    let mut plan = plan.clone();
    while let Some(wp) = plan.target() {
        if (wp - me.position).norm() < plan.capture_radius {
            plan.current_index += 1;
        } else {
            break;
        }
    }
    let raw = match plan.target() {
        Some(wp) => (wp - me.position) * gains.k_p - me.velocity * gains.k_d,
        None => -me.velocity * gains.k_d,
    };
    (raw.clip_norm(limits.a_max), plan)
}
