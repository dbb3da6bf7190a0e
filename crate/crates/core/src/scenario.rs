//! Scenario files: TOML documents describing one experiment.
//!
//! ```toml
//! name = "flocking"
//! n = 15
//! duration = 50.0          # s
//! dsa_enabled = true
//!
//! [limits]                 # SI units
//! a_max = 5.0
//! v_max = 2.5
//! sense_radius = 4.0
//! d_min = 2.0
//! eta = 0.1
//!
//! [cbf]
//! gamma = 1.0
//! m = 3
//!
//! [controller]
//! kind = "reynolds"        # or "waypoint" with k_p, k_d, capture_radius, plans
//! w_s = 3.0
//! w_c = 1.5
//! w_al = 0.5
//!
//! [init]
//! kind = "uniform"         # or "explicit" with positions and velocities
//! seed = 1
//! position_range = [-10.0, 10.0]
//! velocity_range = [-1.0, 1.0]
//!
//! [output]
//! trajectory = "trajectory.csv"
//! summary = "summary.toml"
//! ```
//!
//! Dotted `key=value` overrides (for example `limits.eta=0.05`) are applied
//! to the parsed document before it is interpreted.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cbf::PairwiseCbf;
use crate::controllers::{ReynoldsWeights, WaypointGains, WaypointPlan};
use crate::decision::SwitchParams;
use crate::dynamics::{AgentState, MasState, PhysicalLimits};
use crate::error::{DsaError, Result};
use crate::geometry::Vec2;

pub const FLOCKING_TOML: &str = include_str!("../scenarios/flocking.toml");
pub const WAYPOINT_TOML: &str = include_str!("../scenarios/waypoint.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub limits: PhysicalLimits,
    #[serde(default)]
    pub cbf: CbfParams,
    pub controller: ControllerConfig,
    #[serde(default = "default_true")]
    pub dsa_enabled: bool,
    /// Simulated time (s).
    pub duration: f64,
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfParams {
    #[serde(default = "CbfParams::default_gamma")]
    pub gamma: f64,
    #[serde(default = "CbfParams::default_m")]
    pub m: u32,
}

impl CbfParams {
    fn default_gamma() -> f64 {
        1.0
    }
    fn default_m() -> u32 {
        3
    }
}

impl Default for CbfParams {
    fn default() -> Self {
        CbfParams {
            gamma: Self::default_gamma(),
            m: Self::default_m(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerConfig {
    Reynolds(ReynoldsWeights),
    Waypoint(WaypointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointConfig {
    #[serde(flatten)]
    pub gains: WaypointGains,
    /// One ordered way-point list per agent.
    pub plans: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitConfig {
    Explicit {
        positions: Vec<Vec2>,
        /// Defaults to all agents at rest.
        #[serde(default)]
        velocities: Option<Vec<Vec2>>,
    },
    Uniform {
        seed: u64,
        position_range: [f64; 2],
        velocity_range: [f64; 2],
        /// Every sampled pair must have a barrier value at least this large.
        #[serde(default = "default_h_margin")]
        h_margin: f64,
        #[serde(default = "default_max_attempts")]
        max_attempts: usize,
    },
}

fn default_h_margin() -> f64 {
    0.5
}

fn default_max_attempts() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Per-(step, agent) trajectory CSV.
    #[serde(default = "OutputConfig::default_trajectory")]
    pub trajectory: Option<PathBuf>,
    /// Run summary (TOML).
    #[serde(default = "OutputConfig::default_summary")]
    pub summary: Option<PathBuf>,
    /// Per-(step, agent) distance to the closest neighbor, for plotting.
    #[serde(default)]
    pub neighbor_distance: Option<PathBuf>,
}

impl OutputConfig {
    fn default_trajectory() -> Option<PathBuf> {
        Some(PathBuf::from("trajectory.csv"))
    }
    fn default_summary() -> Option<PathBuf> {
        Some(PathBuf::from("summary.toml"))
    }
    pub const DEFAULT_NEIGHBOR_DISTANCE: &'static str = "min_neighbor_distance.csv";
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory: Self::default_trajectory(),
            summary: Self::default_summary(),
            neighbor_distance: None,
        }
    }
}

impl Scenario {
    /// Parses, applies overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Scenario> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| DsaError::invalid(format!("malformed scenario: {e}")))?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        let scenario: Scenario = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| DsaError::invalid(e.message().to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| DsaError::io(path, e))?;
        Scenario::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is always representable as TOML")
    }

    /// The 15-agent flocking study with uniformly sampled initial state.
    pub fn flocking(seed: u64, dsa_enabled: bool) -> Scenario {
        let mut s = Scenario::from_toml_str(FLOCKING_TOML, &[]).expect("built-in scenario is valid");
        s.dsa_enabled = dsa_enabled;
        if !dsa_enabled {
            s.name = format!("{}-nodsa", s.name);
        }
        s.set_seed(seed);
        s
    }

    /// The 4-agent way-point study.
    pub fn waypoint() -> Scenario {
        Scenario::from_toml_str(WAYPOINT_TOML, &[]).expect("built-in scenario is valid")
    }

    /// Replaces the sampling seed; no effect on explicit initial states.
    pub fn set_seed(&mut self, seed: u64) {
        if let InitConfig::Uniform { seed: s, .. } = &mut self.init {
            *s = seed;
        }
    }

    pub fn cbf(&self) -> PairwiseCbf {
        PairwiseCbf {
            a_max: self.limits.a_max,
            d_min: self.limits.d_min,
            gamma: self.cbf.gamma,
        }
    }

    pub fn switch_params(&self) -> SwitchParams {
        SwitchParams {
            m: self.cbf.m,
            eta: self.limits.eta,
        }
    }

    /// `⌊duration / eta⌋`, tolerant of rounding in the division.
    pub fn step_count(&self) -> usize {
        let ratio = self.duration / self.limits.eta;
        (ratio + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(DsaError::invalid("n must be at least 1"));
        }
        self.limits.validate()?;
        PairwiseCbf::from_limits(&self.limits, self.cbf.gamma)?;
        SwitchParams::new(self.cbf.m, self.limits.eta)?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(DsaError::invalid(format!("duration must be positive (got {})", self.duration)));
        }
        let steps = self.step_count();
        if steps == 0 {
            return Err(DsaError::invalid("duration is shorter than one control period"));
        }
        let exact = self.duration / self.limits.eta;
        if (exact - steps as f64).abs() > 1e-9 {
            log::warn!("duration {} is not a multiple of eta; truncated to {steps} steps", self.duration);
        }

        match &self.controller {
            ControllerConfig::Reynolds(w) => {
                if !w.is_valid() {
                    return Err(DsaError::invalid("reynolds weights must be finite and non-negative"));
                }
            }
            ControllerConfig::Waypoint(cfg) => {
                if cfg.plans.len() != self.n {
                    return Err(DsaError::invalid(format!(
                        "waypoint controller needs one plan per agent ({} plans for n = {})",
                        cfg.plans.len(),
                        self.n
                    )));
                }
                let g = cfg.gains;
                if !(g.k_p >= 0.0 && g.k_d >= 0.0 && g.capture_radius > 0.0)
                    || ![g.k_p, g.k_d, g.capture_radius].iter().all(|v| v.is_finite())
                {
                    return Err(DsaError::invalid("waypoint gains must be finite, capture_radius positive"));
                }
                if cfg.plans.iter().flatten().any(|w| !w.is_finite()) {
                    return Err(DsaError::invalid("waypoints must be finite"));
                }
            }
        }

        match &self.init {
            InitConfig::Explicit {
                positions,
                velocities,
            } => {
                if positions.len() != self.n {
                    return Err(DsaError::invalid(format!(
                        "init.positions has {} entries for n = {}",
                        positions.len(),
                        self.n
                    )));
                }
                if let Some(v) = velocities {
                    if v.len() != self.n {
                        return Err(DsaError::invalid(format!(
                            "init.velocities has {} entries for n = {}",
                            v.len(),
                            self.n
                        )));
                    }
                }
                let state = self.explicit_state(positions, velocities.as_deref());
                for a in &state.agents {
                    if !a.is_finite() {
                        return Err(DsaError::invalid("initial state must be finite"));
                    }
                    if a.velocity.norm() > self.limits.v_max {
                        return Err(DsaError::invalid("initial speed exceeds limits.v_max"));
                    }
                }
                if self.dsa_enabled {
                    self.check_recoverable(&state, 0.0)?;
                }
            }
            InitConfig::Uniform {
                position_range,
                velocity_range,
                h_margin,
                max_attempts,
                ..
            } => {
                for (name, [lo, hi]) in [("position_range", position_range), ("velocity_range", velocity_range)] {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(DsaError::invalid(format!("init.{name} must be [lo, hi] with lo < hi")));
                    }
                }
                if !(h_margin.is_finite() && *h_margin >= 0.0) {
                    return Err(DsaError::invalid("init.h_margin must be non-negative"));
                }
                if *max_attempts == 0 {
                    return Err(DsaError::invalid("init.max_attempts must be positive"));
                }
            }
        }
        Ok(())
    }

    fn explicit_state(&self, positions: &[Vec2], velocities: Option<&[Vec2]>) -> MasState {
        let agents = positions
            .iter()
            .enumerate()
            .map(|(k, &p)| AgentState::new(p, velocities.map_or(Vec2::ZERO, |v| v[k])))
            .collect();
        MasState::new(agents)
    }

    /// Rejects states with a pair closer than `d_min` or a barrier below
    /// `h_margin`.
    pub fn check_recoverable(&self, state: &MasState, h_margin: f64) -> Result<()> {
        let cbf = self.cbf();
        for (i, a) in state.agents.iter().enumerate() {
            for (j, b) in state.agents.iter().enumerate().skip(i + 1) {
                let dist = a.position.distance(b.position);
                if dist < self.limits.d_min {
                    return Err(DsaError::invalid(format!(
                        "initial state not recoverable: agents {i} and {j} are {dist} apart (d_min {})",
                        self.limits.d_min
                    )));
                }
                let h = cbf.eval_h(a, b)?;
                if h < h_margin {
                    return Err(DsaError::invalid(format!(
                        "initial state not recoverable: barrier for agents {i} and {j} is {h}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Initial state, sampled deterministically from the seed when uniform.
    pub fn initial_state(&self) -> Result<MasState> {
        match &self.init {
            InitConfig::Explicit {
                positions,
                velocities,
            } => Ok(self.explicit_state(positions, velocities.as_deref())),
            InitConfig::Uniform {
                seed,
                position_range,
                velocity_range,
                h_margin,
                max_attempts,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let [plo, phi] = *position_range;
                let [vlo, vhi] = *velocity_range;
                for _ in 0..*max_attempts {
                    let agents: Vec<AgentState> = (0..self.n)
                        .map(|_| {
                            let p = Vec2::new(rng.random_range(plo..phi), rng.random_range(plo..phi));
                            let v = Vec2::new(rng.random_range(vlo..vhi), rng.random_range(vlo..vhi));
                            AgentState::new(p, v.clip_norm(self.limits.v_max))
                        })
                        .collect();
                    let state = MasState::new(agents);
                    if self.check_recoverable(&state, *h_margin).is_ok() {
                        return Ok(state);
                    }
                }
                Err(DsaError::invalid(format!(
                    "no recoverable initial state found in {max_attempts} attempts"
                )))
            }
        }
    }

    pub fn initial_plans(&self) -> Option<Vec<WaypointPlan>> {
        match &self.controller {
            ControllerConfig::Waypoint(cfg) => Some(
                cfg.plans
                    .iter()
                    .map(|wps| WaypointPlan::new(wps.clone(), cfg.gains.capture_radius))
                    .collect(),
            ),
            ControllerConfig::Reynolds(_) => None,
        }
    }
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// value when possible and as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| DsaError::invalid(format!("override '{assignment}' is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_override_value(raw);
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| DsaError::invalid(format!("override '{assignment}' has an empty key")))?;
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| DsaError::invalid(format!("override '{assignment}': '{part}' is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
