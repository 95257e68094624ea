//! Scenario configuration. Field names follow the simulation parameter
//! table, with units as suffixes.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::safety::SafetyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Integrator,
    Car,
}

impl Dynamics {
    pub fn name(self) -> &'static str {
        match self {
            Dynamics::Integrator => "integrator",
            Dynamics::Car => "car",
        }
    }
}

/// How the braking barrier condition becomes a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyRowForm {
    /// `h_c(k+1) >= (1 - alpha_c dt) h_c(k)` over one Euler step.
    Sampled,
    /// `h_c_dot + alpha_c h_c >= 0` at the current instant.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Slack-relaxed cone guidance with the hard braking barrier.
    Ours,
    Vo,
    Rvo,
    /// Cone barrier as a hard constraint, no braking barrier.
    Hvo,
    Ovvo,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Ours,
        ControllerKind::Vo,
        ControllerKind::Rvo,
        ControllerKind::Hvo,
        ControllerKind::Ovvo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Ours => "ours",
            ControllerKind::Vo => "vo",
            ControllerKind::Rvo => "rvo",
            ControllerKind::Hvo => "hvo",
            ControllerKind::Ovvo => "ovvo",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(
            self,
            ControllerKind::Vo | ControllerKind::Rvo | ControllerKind::Ovvo
        )
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown controller `{s}` (expected ours, vo, rvo, hvo or ovvo)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub dynamics: Dynamics,
    pub controller: ControllerKind,
    pub circle_radius_m: f64,
    pub noise_std_m: f64,
    pub seed: u64,

    pub simulation_time_s: f64,
    pub timestep_s: f64,
    pub alpha_vo: f64,
    pub alpha_c: f64,
    pub k_u: f64,
    pub k_vo: f64,
    /// Cruise speed of the reference controller.
    pub preferred_velocity_mps: f64,
    pub max_velocity_mps: f64,
    pub max_acceleration_mps2: f64,
    pub max_steering_tan: f64,
    /// Fraction of the combined radius an overlap must exceed to count as a
    /// collision.
    pub geometric_tolerance: f64,
    pub goal_tolerance_m: f64,
    pub agent_radius_m: f64,
    pub characteristic_length_m: f64,
    pub p_coefficient: f64,
    pub d_coefficient: f64,
    pub n_sampling_points: usize,
    pub k_tp: f64,
    pub k_vd: f64,
    pub c1: f64,
    pub c2: f64,

    /// Margin `delta` of the braking barrier.
    pub safety_margin_m: f64,
    /// Share of each pairwise braking condition an agent enforces on its own
    /// acceleration: 0.5 splits it evenly, 1 assumes neighbors coast.
    pub safety_share: f64,
    pub safety_row: SafetyRowForm,
    /// Sides of the polygon inscribed in the acceleration disc.
    pub input_polygon_sides: usize,
    /// Cumulative infeasible time after which a hard-constraint episode is
    /// aborted.
    pub infeasible_abort_s: f64,
}

impl ScenarioConfig {
    pub fn integrator() -> Self {
        Self {
            n_agents: 2,
            dynamics: Dynamics::Integrator,
            controller: ControllerKind::Ours,
            circle_radius_m: 5.0,
            noise_std_m: 0.05,
            seed: 0,
            simulation_time_s: 60.0,
            timestep_s: 0.01,
            alpha_vo: 10.0,
            alpha_c: 10.0,
            k_u: 1.0,
            k_vo: 1000.0,
            preferred_velocity_mps: 1.0,
            max_velocity_mps: 2.0,
            max_acceleration_mps2: 1.0,
            max_steering_tan: 2.0,
            geometric_tolerance: 0.1,
            goal_tolerance_m: 0.5,
            agent_radius_m: 0.5,
            characteristic_length_m: 1.0,
            p_coefficient: 1.0,
            d_coefficient: 0.5,
            n_sampling_points: 250,
            k_tp: 2.0,
            k_vd: 1.0,
            c1: 1.0,
            c2: 1.0,
            safety_margin_m: 0.05,
            safety_share: 0.5,
            safety_row: SafetyRowForm::Sampled,
            input_polygon_sides: 16,
            infeasible_abort_s: 1.0,
        }
    }

    pub fn car() -> Self {
        Self {
            dynamics: Dynamics::Car,
            n_agents: 4,
            circle_radius_m: 20.0,
            k_vo: 1.0,
            preferred_velocity_mps: 3.0,
            max_velocity_mps: 10.0,
            max_acceleration_mps2: 3.0,
            goal_tolerance_m: 1.0,
            agent_radius_m: 1.0,
            p_coefficient: 0.2,
            safety_margin_m: 0.1,
            ..Self::integrator()
        }
    }

    pub fn defaults_for(dynamics: Dynamics) -> Self {
        match dynamics {
            Dynamics::Integrator => Self::integrator(),
            Dynamics::Car => Self::car(),
        }
    }

    pub fn with_agents(mut self, n: usize) -> Self {
        self.n_agents = n;
        self
    }

    pub fn with_controller(mut self, controller: ControllerKind) -> Self {
        self.controller = controller;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(&self) -> usize {
        (self.simulation_time_s / self.timestep_s).round() as usize
    }

    /// Radius of the largest disc inside the input polygon.
    pub fn inscribed_acceleration(&self) -> f64 {
        self.max_acceleration_mps2 * (PI / self.input_polygon_sides as f64).cos()
    }

    /// Parameters of the braking barrier. The deceleration budget is what
    /// the admissible input set can actually deliver in every direction.
    pub fn safety_params(&self) -> SafetyParams {
        let u_max = match self.dynamics {
            Dynamics::Integrator => self.inscribed_acceleration(),
            Dynamics::Car => self.max_acceleration_mps2,
        };
        SafetyParams {
            alpha_c: self.alpha_c,
            u_max,
            delta: self.safety_margin_m,
            share: self.safety_share,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must be positive, got {v}")))
            }
        }
        fn nonnegative(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must be nonnegative, got {v}")))
            }
        }
        if self.n_agents == 0 {
            return Err(ConfigError::field("n_agents", "at least one agent is required"));
        }
        positive("timestep_s", self.timestep_s)?;
        if !(self.simulation_time_s >= self.timestep_s) {
            return Err(ConfigError::field(
                "simulation_time_s",
                "must be at least one timestep",
            ));
        }
        positive("circle_radius_m", self.circle_radius_m)?;
        nonnegative("noise_std_m", self.noise_std_m)?;
        positive("alpha_vo", self.alpha_vo)?;
        positive("alpha_c", self.alpha_c)?;
        positive("k_u", self.k_u)?;
        nonnegative("k_vo", self.k_vo)?;
        nonnegative("preferred_velocity_mps", self.preferred_velocity_mps)?;
        positive("max_velocity_mps", self.max_velocity_mps)?;
        positive("max_acceleration_mps2", self.max_acceleration_mps2)?;
        positive("max_steering_tan", self.max_steering_tan)?;
        if !(0.0..1.0).contains(&self.geometric_tolerance) {
            return Err(ConfigError::field("geometric_tolerance", "must lie in [0, 1)"));
        }
        positive("goal_tolerance_m", self.goal_tolerance_m)?;
        positive("agent_radius_m", self.agent_radius_m)?;
        positive("characteristic_length_m", self.characteristic_length_m)?;
        nonnegative("p_coefficient", self.p_coefficient)?;
        nonnegative("d_coefficient", self.d_coefficient)?;
        if self.n_sampling_points == 0 {
            return Err(ConfigError::field("n_sampling_points", "must be at least 1"));
        }
        nonnegative("k_tp", self.k_tp)?;
        nonnegative("k_vd", self.k_vd)?;
        nonnegative("c1", self.c1)?;
        nonnegative("c2", self.c2)?;
        nonnegative("safety_margin_m", self.safety_margin_m)?;
        if !(self.safety_share > 0.0 && self.safety_share <= 1.0) {
            return Err(ConfigError::field("safety_share", "must lie in (0, 1]"));
        }
        if self.input_polygon_sides < 3 {
            return Err(ConfigError::field("input_polygon_sides", "must be at least 3"));
        }
        positive("infeasible_abort_s", self.infeasible_abort_s)?;
        if self.dynamics == Dynamics::Car && self.controller.is_sampling() {
            return Err(ConfigError::UnsupportedCombination {
                controller: self.controller.name(),
                dynamics: self.dynamics.name(),
            });
        }
        Ok(())
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::integrator()
    }
}
