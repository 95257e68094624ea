//! Agent state representations and forward-Euler propagation.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorState {
    pub p: Vec2,
    pub v: Vec2,
}

/// Kinematic car: position, heading and nonnegative forward speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub p: Vec2,
    pub theta: f64,
    pub v: f64,
}

/// Car control `(tan(phi), a)` packed as `x = tan(phi)`, `y = a`.
pub type CarControl = Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentState {
    Integrator(IntegratorState),
    Car(CarState),
}

impl AgentState {
    pub fn position(&self) -> Vec2 {
        match self {
            AgentState::Integrator(s) => s.p,
            AgentState::Car(s) => s.p,
        }
    }

    /// Cartesian velocity.
    pub fn velocity(&self) -> Vec2 {
        match self {
            AgentState::Integrator(s) => s.v,
            AgentState::Car(s) => s.velocity(),
        }
    }

    pub fn speed(&self) -> f64 {
        match self {
            AgentState::Integrator(s) => s.v.length(),
            AgentState::Car(s) => s.v,
        }
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn integrator_step(s: &IntegratorState, u: Vec2, dt: f64, v_max: f64) -> IntegratorState {
    debug_assert!(dt > 0.0);
    IntegratorState {
        p: s.p + s.v * dt,
        v: (s.v + u * dt).clamp_length(v_max),
    }
}

impl CarState {
    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    pub fn velocity(&self) -> Vec2 {
        self.heading() * self.v
    }
}

pub fn car_step(s: &CarState, u: CarControl, dt: f64, v_max: f64, wheelbase: f64) -> CarState {
    debug_assert!(dt > 0.0);
    let (tan_phi, accel) = (u.x, u.y);
    CarState {
        p: s.p + s.velocity() * dt,
        theta: wrap_angle(s.theta + dt * s.v / wheelbase * tan_phi),
        v: (s.v + dt * accel).clamp(0.0, v_max),
    }
}

/// Linear map from car control `(tan(phi), a)` to Cartesian acceleration.
///
/// Differentiating `v (cos theta, sin theta)` gives
/// `a (cos, sin) + v theta_dot (-sin, cos)` with `theta_dot = v tan(phi) / L`.
pub fn car_accel_map(s: &CarState, wheelbase: f64) -> Matrix2<f64> {
    let (sin, cos) = s.theta.sin_cos();
    let lateral = s.v * s.v / wheelbase;
    Matrix2::new(-lateral * sin, cos, lateral * cos, sin)
}

pub fn apply_map(m: &Matrix2<f64>, u: Vec2) -> Vec2 {
    let r = m * Vector2::new(u.x, u.y);
    Vec2::new(r.x, r.y)
}

/// Row vector `c' M`: coefficients of a Cartesian-acceleration row expressed
/// in car controls.
pub fn pull_back(m: &Matrix2<f64>, coef: Vec2) -> Vec2 {
    let r = m.tr_mul(&Vector2::new(coef.x, coef.y));
    Vec2::new(r.x, r.y)
}
