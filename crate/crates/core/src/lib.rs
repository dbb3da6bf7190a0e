//! Runtime assurance for multi-agent systems, one simplex instance per agent.
//!
//! Every agent runs its own Simplex instance: an unverified advanced
//! controller, a baseline controller derived from pairwise control barrier
//! functions, and a decision module that switches between them using only
//! the states of the agent's neighbors.
//!
//! ```
//! use dsa::{sim, Scenario};
//!
//! let mut scenario = Scenario::flocking(3, true);
//! scenario.duration = 2.0;
//! let summary = sim::run(&scenario).unwrap();
//! assert_eq!(summary.violation_count, 0);
//! ```

pub mod baseline;
pub mod cbf;
pub mod cli;
pub mod controllers;
pub mod decision;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod output;
pub mod scenario;
pub mod sim;
pub mod verify;

pub use baseline::{baseline_action, solve_bc, LpSolution, LpStatus};
pub use cbf::{AdmissibleSet, BinaryConstraint, HalfPlane, PairwiseCbf};
pub use decision::{DmState, Mode, SwitchParams};
pub use dynamics::{step_dynamics, AgentState, MasState, PhysicalLimits};
pub use error::{DsaError, Result};
pub use geometry::Vec2;
pub use scenario::Scenario;
pub use sim::{RunSummary, Simulation, StepRecord};
