//! The synchronous step loop: sense, update switching state, select a
//! controller, act, integrate.
//!
//! Within a step every agent reads the same pre-step snapshot; all updates
//! are committed together at the step boundary.

use std::time::Instant;

use serde::Serialize;

use crate::baseline::{build_objective, solve_bc, LpStatus};
use crate::cbf::PairwiseCbf;
use crate::controllers::{reynolds_action, waypoint_action, WaypointPlan};
use crate::decision::{dm_step, fsc, rsc, DmState, Mode, SwitchParams};
use crate::dynamics::{neighbors, step_dynamics, AgentState, MasState, PhysicalLimits};
use crate::error::{DsaError, Result};
use crate::geometry::Vec2;
use crate::scenario::{ControllerConfig, Scenario};

/// One agent's row in a [`StepRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRecord {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Action applied during the period that ended at this record.
    pub action: Vec2,
    /// Mode in control during that period.
    pub mode: Mode,
    /// Distance to the closest neighbor, `+∞` without neighbors.
    pub min_neighbor_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub agents: Vec<AgentRecord>,
    /// Over all pairs.
    pub min_distance: f64,
    /// Over neighboring pairs, `+∞` when there are none.
    pub min_h: f64,
    pub bc_count: usize,
}

/// Receives step records in order.
pub trait RecordSink {
    fn record(&mut self, rec: &StepRecord) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl RecordSink for Vec<StepRecord> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _: &StepRecord) -> Result<()> {
        Ok(())
    }
}

/// Fans records out to several sinks.
pub struct Tee<'a>(pub Vec<&'a mut dyn RecordSink>);

impl RecordSink for Tee<'_> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        self.0.iter_mut().try_for_each(|s| s.record(rec))
    }

    fn finish(&mut self) -> Result<()> {
        self.0.iter_mut().try_for_each(|s| s.finish())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub dsa_enabled: bool,
    pub n: usize,
    pub steps: usize,
    pub eta: f64,
    /// Smallest pairwise distance at any step boundary (`inf` with one agent).
    pub min_distance: f64,
    pub min_h: f64,
    /// Step boundaries at which some pair was closer than `d_min`.
    pub violation_count: usize,
    pub bc_fraction: Vec<f64>,
    pub mean_bc_fraction: f64,
    pub switch_counts: Vec<usize>,
    pub lp_feasible_fallbacks: usize,
    pub lp_infeasible_fallbacks: usize,
    /// Way-points reached per agent (way-point controller only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoints_reached: Option<Vec<usize>>,
    /// Simulated time at which every plan was complete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plans_completed_at: Option<f64>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("summary is always representable as TOML")
    }

    pub fn all_plans_completed(&self) -> bool {
        self.plans_completed_at.is_some()
    }
}

/// Mean over agents of the fraction of steps spent in BC mode.
pub fn mean_bc_fraction(summary: &RunSummary) -> f64 {
    if summary.bc_fraction.is_empty() {
        0.0
    } else {
        summary.bc_fraction.iter().sum::<f64>() / summary.bc_fraction.len() as f64
    }
}

/// Stepwise simulation of one scenario.
pub struct Simulation {
    scenario: Scenario,
    cbf: PairwiseCbf,
    params: SwitchParams,
    state: MasState,
    dm: Vec<DmState>,
    plans: Option<Vec<WaypointPlan>>,
    steps: usize,
    // statistics
    bc_steps: Vec<usize>,
    switches: Vec<usize>,
    min_distance: f64,
    min_h: f64,
    violations: usize,
    lp_feasible_fallbacks: usize,
    lp_infeasible_fallbacks: usize,
    plans_completed_at: Option<f64>,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let state = scenario.initial_state()?;
        let n = scenario.n;
        let mut sim = Simulation {
            cbf: scenario.cbf(),
            params: scenario.switch_params(),
            plans: scenario.initial_plans(),
            steps: scenario.step_count(),
            dm: vec![DmState::default(); n],
            bc_steps: vec![0; n],
            switches: vec![0; n],
            min_distance: f64::INFINITY,
            min_h: f64::INFINITY,
            violations: 0,
            lp_feasible_fallbacks: 0,
            lp_infeasible_fallbacks: 0,
            plans_completed_at: None,
            state,
            scenario,
        };
        sim.check_plans();
        let initial = sim.initial_record();
        sim.absorb(&initial);
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &MasState {
        &self.state
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.dm.iter().map(|d| d.mode).collect()
    }

    pub fn plans(&self) -> Option<&[WaypointPlan]> {
        self.plans.as_deref()
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.state.step_index >= self.steps
    }

    /// Record of the current state with the given per-agent actions/modes.
    fn snapshot(&self, actions: &[Vec2], modes: &[Mode]) -> StepRecord {
        let limits = self.scenario.limits;
        let agents = &self.state.agents;
        let mut nearest = vec![f64::INFINITY; agents.len()];
        let mut min_distance = f64::INFINITY;
        let mut min_h = f64::INFINITY;
        for (i, a) in agents.iter().enumerate() {
            for (j, b) in agents.iter().enumerate().skip(i + 1) {
                let d = a.position.distance(b.position);
                min_distance = min_distance.min(d);
                if d < limits.sense_radius {
                    nearest[i] = nearest[i].min(d);
                    nearest[j] = nearest[j].min(d);
                    if let Ok(h) = self.cbf.eval_h(a, b) {
                        min_h = min_h.min(h);
                    }
                }
            }
        }
        StepRecord {
            step: self.state.step_index,
            time: self.state.time,
            agents: agents
                .iter()
                .enumerate()
                .map(|(k, s)| AgentRecord {
                    position: s.position,
                    velocity: s.velocity,
                    action: actions[k],
                    mode: modes[k],
                    min_neighbor_distance: nearest[k],
                })
                .collect(),
            min_distance,
            min_h,
            bc_count: modes.iter().filter(|m| **m == Mode::Bc).count(),
        }
    }

    fn absorb(&mut self, rec: &StepRecord) {
        self.min_distance = self.min_distance.min(rec.min_distance);
        self.min_h = self.min_h.min(rec.min_h);
        if rec.min_distance < self.scenario.limits.d_min {
            self.violations += 1;
        }
    }

    /// Record for the initial state (zero actions, all agents in AC mode).
    /// Its statistics are already part of the run from construction on.
    pub fn initial_record(&self) -> StepRecord {
        let n = self.state.len();
        self.snapshot(&vec![Vec2::ZERO; n], &vec![Mode::Ac; n])
    }

    /// Advances every agent by one control period.
    pub fn step(&mut self) -> Result<StepRecord> {
        let limits: PhysicalLimits = self.scenario.limits;
        let step = self.state.step_index;
        let snapshot = &self.state;
        let n = snapshot.len();

        let mut next_dm = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        let mut next_plans = self.plans.clone();

        for i in 0..n {
            let me = &snapshot.agents[i];
            let near: Vec<AgentState> = neighbors(snapshot, i, &limits)
                .into_iter()
                .map(|j| snapshot.agents[j])
                .collect();

            let dm = if self.scenario.dsa_enabled {
                let f = fsc(&self.cbf, me, &near, &limits);
                let r = rsc(&self.cbf, me, &near, &limits, &self.params);
                dm_step(self.dm[i], f, r, step + 1)
            } else {
                self.dm[i]
            };

            // the advanced controller runs every period so plan progress
            // continues while the baseline is in control
            let advanced = match (&self.scenario.controller, next_plans.as_mut()) {
                (ControllerConfig::Reynolds(w), _) => reynolds_action(me, &near, w, &limits),
                (ControllerConfig::Waypoint(cfg), Some(plans)) => {
                    let (a, plan) = waypoint_action(me, &plans[i], &cfg.gains, &limits);
                    plans[i] = plan;
                    a
                }
                (ControllerConfig::Waypoint(_), None) => Vec2::ZERO,
            };

            let action = match dm.mode {
                Mode::Ac => advanced.clip_norm(limits.a_max),
                Mode::Bc => {
                    let set = self.cbf.admissible_set(me, &near, &limits).map_err(|e| DsaError::Aborted {
                        step,
                        agent: i,
                        reason: e.to_string(),
                    })?;
                    let sol = solve_bc(&build_objective(&self.cbf, me, &near), &set);
                    match sol.status {
                        LpStatus::Optimal => {}
                        LpStatus::FeasibleFallback => self.lp_feasible_fallbacks += 1,
                        LpStatus::InfeasibleFallback => self.lp_infeasible_fallbacks += 1,
                    }
                    sol.action
                }
            };
            next_dm.push(dm);
            actions.push(action);
        }

        let mut next_agents = Vec::with_capacity(n);
        for (i, (s, a)) in snapshot.agents.iter().zip(&actions).enumerate() {
            let next = step_dynamics(s, *a, &limits).map_err(|e| DsaError::Aborted {
                step,
                agent: i,
                reason: e.to_string(),
            })?;
            if !next.is_finite() {
                return Err(DsaError::Aborted {
                    step,
                    agent: i,
                    reason: "state became non-finite".into(),
                });
            }
            next_agents.push(next);
        }

        for (i, dm) in next_dm.iter().enumerate() {
            if dm.mode != self.dm[i].mode {
                self.switches[i] += 1;
            }
            if dm.mode == Mode::Bc {
                self.bc_steps[i] += 1;
            }
        }
        let modes: Vec<Mode> = next_dm.iter().map(|d| d.mode).collect();
        self.dm = next_dm;
        self.plans = next_plans;
        self.state = MasState {
            agents: next_agents,
            time: (step + 1) as f64 * limits.eta,
            step_index: step + 1,
        };
        self.check_plans();
        let rec = self.snapshot(&actions, &modes);
        self.absorb(&rec);
        Ok(rec)
    }

    fn check_plans(&mut self) {
        if self.plans_completed_at.is_none()
            && self.plans.as_ref().is_some_and(|ps| ps.iter().all(WaypointPlan::is_complete))
        {
            self.plans_completed_at = Some(self.state.time);
        }
    }

    pub fn summary(&self, wall_time_s: f64) -> RunSummary {
        let steps = self.state.step_index;
        let bc_fraction: Vec<f64> = self
            .bc_steps
            .iter()
            .map(|&b| if steps == 0 { 0.0 } else { b as f64 / steps as f64 })
            .collect();
        let mut summary = RunSummary {
            scenario: self.scenario.name.clone(),
            dsa_enabled: self.scenario.dsa_enabled,
            n: self.scenario.n,
            steps,
            eta: self.scenario.limits.eta,
            min_distance: self.min_distance,
            min_h: self.min_h,
            violation_count: self.violations,
            bc_fraction,
            mean_bc_fraction: 0.0,
            switch_counts: self.switches.clone(),
            lp_feasible_fallbacks: self.lp_feasible_fallbacks,
            lp_infeasible_fallbacks: self.lp_infeasible_fallbacks,
            waypoints_reached: self
                .plans
                .as_ref()
                .map(|ps| ps.iter().map(|p| p.current_index).collect()),
            plans_completed_at: self.plans_completed_at,
            wall_time_s,
        };
        summary.mean_bc_fraction = mean_bc_fraction(&summary);
        summary
    }

    /// Runs the remaining steps, streaming records (including the initial
    /// one when starting from step 0) into `sink`.
    pub fn run_to_end(mut self, sink: &mut dyn RecordSink) -> Result<RunSummary> {
        let started = Instant::now();
        if self.state.step_index == 0 {
            let rec = self.initial_record();
            sink.record(&rec)?;
        }
        while !self.is_finished() {
            let rec = self.step()?;
            sink.record(&rec)?;
        }
        sink.finish()?;
        Ok(self.summary(started.elapsed().as_secs_f64()))
    }
}

/// Runs a scenario to completion without recording.
pub fn run(scenario: &Scenario) -> Result<RunSummary> {
    run_with_sink(scenario, &mut NullSink)
}

pub fn run_with_sink(scenario: &Scenario, sink: &mut dyn RecordSink) -> Result<RunSummary> {
    Simulation::new(scenario.clone())?.run_to_end(sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::InitConfig;

    fn explicit(mut base: Scenario, states: &[AgentState], seconds: f64) -> Scenario {
        base.n = states.len();
        base.duration = seconds;
        base.init = InitConfig::Explicit {
            positions: states.iter().map(|s| s.position).collect(),
            velocities: Some(states.iter().map(|s| s.velocity).collect()),
        };
        base
    }

    #[test]
    fn single_agent_never_switches() {
        let s = explicit(Scenario::flocking(1, true), &[AgentState::new(Vec2::ZERO, Vec2::new(1.0, 0.5))], 5.0);
        let summary = run(&s).unwrap();
        assert_eq!(summary.min_distance, f64::INFINITY);
        assert_eq!(summary.switch_counts, vec![0]);
        assert_eq!(summary.mean_bc_fraction, 0.0);
    }

    #[test]
    fn distant_agents_stay_idle() {
        let states = [AgentState::at_rest(Vec2::ZERO), AgentState::at_rest(Vec2::new(10.0, 0.0))];
        let s = explicit(Scenario::flocking(1, true), &states, 3.0);
        let mut records = Vec::new();
        let summary = run_with_sink(&s, &mut records).unwrap();
        assert_eq!(records.len(), 31);
        for rec in &records {
            assert_eq!(rec.agents[0].position, Vec2::ZERO);
            assert_eq!(rec.agents[1].position, Vec2::new(10.0, 0.0));
            assert!(rec.agents.iter().all(|a| a.min_neighbor_distance.is_infinite()));
        }
        assert_eq!(summary.min_distance, 10.0);
        assert_eq!(summary.min_h, f64::INFINITY);
    }

    #[test]
    fn records_cover_every_step_with_consistent_time() {
        let s = Scenario::flocking(2, true);
        let mut records = Vec::new();
        let summary = run_with_sink(&s, &mut records).unwrap();
        assert_eq!(records.len(), summary.steps + 1);
        assert_eq!(records[0].step, 0);
        assert!(records[0].agents.iter().all(|a| a.action == Vec2::ZERO && a.mode == Mode::Ac));
        for (k, rec) in records.iter().enumerate() {
            assert_eq!(rec.step, k);
            assert_eq!(rec.time, k as f64 * 0.1);
            assert_eq!(rec.agents.len(), 15);
            assert!(rec.agents.iter().all(|a| a.velocity.norm() <= 2.5 && a.action.norm() <= 5.0 + 1e-9));
        }
    }

    #[test]
    fn separating_pair_unaffected_by_dsa() {
        let states = [
            AgentState::new(Vec2::ZERO, Vec2::new(-2.5, 0.0)),
            AgentState::new(Vec2::new(3.5, 0.0), Vec2::new(2.5, 0.0)),
        ];
        let with = explicit(Scenario::flocking(1, true), &states, 4.0);
        let mut without = with.clone();
        without.dsa_enabled = false;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let sa = run_with_sink(&with, &mut a).unwrap();
        run_with_sink(&without, &mut b).unwrap();
        assert_eq!(sa.switch_counts, vec![0, 0]);
        assert_eq!(a, b);
    }

    #[test]
    fn manual_stepping_matches_run() {
        let s = Scenario::flocking(1, true);
        let mut sim = Simulation::new(s.clone()).unwrap();
        while !sim.is_finished() {
            sim.step().unwrap();
        }
        let mut manual = sim.summary(0.0);
        let mut whole = run(&s).unwrap();
        (manual.wall_time_s, whole.wall_time_s) = (0.0, 0.0);
        assert_eq!(manual, whole);
    }

    #[test]
    fn disabled_dsa_never_uses_baseline() {
        let summary = run(&Scenario::flocking(4, false)).unwrap();
        assert_eq!(summary.mean_bc_fraction, 0.0);
        assert!(summary.switch_counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn mean_fraction_of_full_bc_is_one() {
        let summary = RunSummary {
            scenario: String::new(),
            dsa_enabled: true,
            n: 2,
            steps: 10,
            eta: 0.1,
            min_distance: 3.0,
            min_h: 1.0,
            violation_count: 0,
            bc_fraction: vec![1.0, 1.0],
            mean_bc_fraction: 1.0,
            switch_counts: vec![1, 1],
            lp_feasible_fallbacks: 0,
            lp_infeasible_fallbacks: 0,
            waypoints_reached: None,
            plans_completed_at: None,
            wall_time_s: 0.0,
        };
        assert_eq!(mean_bc_fraction(&summary), 1.0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let s = Scenario::flocking(5, true);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        run_with_sink(&s, &mut a).unwrap();
        run_with_sink(&s, &mut b).unwrap();
        assert_eq!(a, b);
    }
}
