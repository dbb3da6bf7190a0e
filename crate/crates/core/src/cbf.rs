//! Pairwise braking barrier, its Lie derivative, and the per-agent
//! admissible control space built from partitioned pairwise constraints.
//!
//! For a pair `(i, j)` with `Δp = p_i - p_j` and `Δv_ij = v_i - v_j` the
//! barrier is
//!
//! ```text
//! h_ij = sqrt(4 a_max (‖Δp‖ - d_min)) - Δv,    Δv = -(Δp · Δv_ij) / ‖Δp‖
//! ```
//!
//! where `Δv` is the approach speed along the connecting line (positive when
//! closing). `h_ij ≥ 0` says the pair can still brake at full relative
//! deceleration `2 a_max` without coming closer than `d_min`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, PhysicalLimits};
use crate::error::{DsaError, Result};
use crate::geometry::Vec2;

/// Neighbors closer than `d_min + DOMAIN_EPS` are outside the domain where
/// the Lie derivative is finite.
pub const DOMAIN_EPS: f64 = 1e-6;

/// The braking barrier for one pair, with `α(h) = γ h³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCbf {
    pub a_max: f64,
    pub d_min: f64,
    pub gamma: f64,
}

/// `ḣ = drift + coeff_i · a_i + coeff_j · a_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieDecomposition {
    /// Action-independent part of `ḣ` (the `L_f h` terms only).
    pub drift: f64,
    pub coeff_i: Vec2,
    pub coeff_j: Vec2,
}

impl LieDecomposition {
    pub fn rate(&self, a_i: Vec2, a_j: Vec2) -> f64 {
        self.drift + self.coeff_i.dot(a_i) + self.coeff_j.dot(a_j)
    }
}

impl PairwiseCbf {
    pub fn new(a_max: f64, d_min: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("a_max", a_max), ("d_min", d_min), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DsaError::invalid(format!(
                    "barrier parameter {name} must be finite and positive (got {v})"
                )));
            }
        }
        Ok(PairwiseCbf {
            a_max,
            d_min,
            gamma,
        })
    }

    pub fn from_limits(limits: &PhysicalLimits, gamma: f64) -> Result<Self> {
        PairwiseCbf::new(limits.a_max, limits.d_min, gamma)
    }

    /// Class-K gain `α(h) = γ h³` (odd, so it is used as-is for `h < 0`).
    pub fn alpha(&self, h: f64) -> f64 {
        self.gamma * h * h * h
    }

    /// `sqrt(4 a_max (d - d_min))`, extended to `-sqrt(4 a_max (d_min - d))`
    /// below the collision distance.
    pub fn braking_root(&self, distance: f64) -> f64 {
        let slack = distance - self.d_min;
        let root = (4.0 * self.a_max * slack.abs()).sqrt();
        if slack >= 0.0 {
            root
        } else {
            -root
        }
    }

    /// Value of the barrier for the pair.
    pub fn eval_h(&self, s_i: &AgentState, s_j: &AgentState) -> Result<f64> {
        let dp = s_i.position - s_j.position;
        let dist = dp.norm();
        if dist == 0.0 {
            return Err(DsaError::CoincidentAgents);
        }
        let approach = -dp.dot(s_i.velocity - s_j.velocity) / dist;
        Ok(self.braking_root(dist) - approach)
    }

    pub fn lie_decomposition(&self, s_i: &AgentState, s_j: &AgentState) -> Result<LieDecomposition> {
        let dp = s_i.position - s_j.position;
        let dv = s_i.velocity - s_j.velocity;
        let dist = dp.norm();
        if dist <= self.d_min {
            return Err(DsaError::InsideCollisionRadius {
                distance: dist,
                d_min: self.d_min,
            });
        }
        let radial = dv.dot(dp);
        let root = (4.0 * self.a_max * (dist - self.d_min)).sqrt();
        let drift = -radial * radial / (dist * dist * dist)
            + dv.norm_sq() / dist
            + 2.0 * self.a_max * radial / (dist * root);
        let unit = dp / dist;
        Ok(LieDecomposition {
            drift,
            coeff_i: unit,
            coeff_j: -unit,
        })
    }

    /// The binary constraint `P·u_i + Q·u_j ≤ b` equivalent to
    /// `ḣ + α(h) ≥ 0`.
    pub fn pairwise_constraint(&self, s_i: &AgentState, s_j: &AgentState) -> Result<BinaryConstraint> {
        let lie = self.lie_decomposition(s_i, s_j)?;
        let h = self.eval_h(s_i, s_j)?;
        Ok(BinaryConstraint {
            p: -lie.coeff_i,
            q: -lie.coeff_j,
            b: lie.drift + self.alpha(h),
        })
    }

    /// Builds agent `me`'s admissible control space from its neighbors.
    pub fn admissible_set(
        &self,
        me: &AgentState,
        neighbor_states: &[AgentState],
        limits: &PhysicalLimits,
    ) -> Result<AdmissibleSet> {
        let mut set = AdmissibleSet::disk(limits.a_max);
        for other in neighbor_states {
            let dp = me.position - other.position;
            let dist = dp.norm();
            if dist == 0.0 {
                return Err(DsaError::CoincidentAgents);
            }
            if dist <= self.d_min + DOMAIN_EPS {
                // already in violation: demand at least half throttle away
                set.push(HalfPlane::new(-(dp / dist), -0.5 * limits.a_max));
                continue;
            }
            let (mine, _) = self.pairwise_constraint(me, other)?.partition();
            set.push(mine);
        }
        Ok(set)
    }
}

/// `[P Q] [u_i; u_j] ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryConstraint {
    pub p: Vec2,
    pub q: Vec2,
    pub b: f64,
}

impl BinaryConstraint {
    pub fn holds(&self, u_i: Vec2, u_j: Vec2) -> bool {
        self.p.dot(u_i) + self.q.dot(u_j) <= self.b
    }

    /// Equal split into `P·u_i ≤ b/2` and `Q·u_j ≤ b/2`. Satisfying both
    /// halves implies the binary constraint whatever the sign of `b`.
    pub fn partition(&self) -> (HalfPlane, HalfPlane) {
        partition(self.p, self.q, self.b)
    }
}

pub fn partition(p: Vec2, q: Vec2, b: f64) -> (HalfPlane, HalfPlane) {
    (HalfPlane::new(p, 0.5 * b), HalfPlane::new(q, 0.5 * b))
}

/// `normal · u ≤ offset`, stored with a unit normal where possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Vec2, offset: f64) -> Self {
        let n = normal.norm();
        if n > 0.0 {
            HalfPlane {
                normal: normal / n,
                offset: offset / n,
            }
        } else {
            HalfPlane { normal, offset }
        }
    }

    /// True for `0 · u ≤ c` with `c ≥ 0`, which every action satisfies.
    pub fn is_vacuous(&self) -> bool {
        self.normal == Vec2::ZERO && self.offset >= 0.0
    }

    /// Signed violation `normal · u - offset` (positive means violated).
    pub fn violation(&self, u: Vec2) -> f64 {
        self.normal.dot(u) - self.offset
    }

    pub fn contains(&self, u: Vec2) -> bool {
        self.violation(u) <= 0.0
    }

    pub fn contains_with_tol(&self, u: Vec2, tol: f64) -> bool {
        self.violation(u) <= tol
    }
}

/// Intersection of half-planes with the action disk `‖u‖ ≤ action_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSet {
    pub halfplanes: Vec<HalfPlane>,
    pub action_bound: f64,
}

impl AdmissibleSet {
    pub fn disk(action_bound: f64) -> Self {
        AdmissibleSet {
            halfplanes: Vec::new(),
            action_bound,
        }
    }

    /// Adds a constraint, dropping vacuous ones.
    pub fn push(&mut self, hp: HalfPlane) {
        if !hp.is_vacuous() {
            self.halfplanes.push(hp);
        }
    }

    pub fn with_halfplanes(action_bound: f64, halfplanes: impl IntoIterator<Item = HalfPlane>) -> Self {
        let mut set = AdmissibleSet::disk(action_bound);
        for hp in halfplanes {
            set.push(hp);
        }
        set
    }

    pub fn contains(&self, u: Vec2) -> bool {
        self.contains_with_tol(u, 0.0)
    }

    pub fn contains_with_tol(&self, u: Vec2, tol: f64) -> bool {
        u.norm() <= self.action_bound + tol && self.halfplanes.iter().all(|hp| hp.contains_with_tol(u, tol))
    }
}
