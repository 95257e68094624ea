//! Braking-distance barrier between two discs.
//!
//! `h_c = d - delta - nu^2 / (2 u_max)` with `nu = min(0, v_rel . p_hat)`: the
//! clearance left after both discs stop closing at maximal deceleration.

use crate::error::GeometryError;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    pub alpha_c: f64,
    /// Deceleration budget assumed by the barrier.
    pub u_max: f64,
    pub delta: f64,
    /// Fraction of the barrier condition agent i takes on. With 1 the
    /// neighbor is treated as unaccelerated; with 1/2 two agents running the
    /// same rule jointly satisfy the full condition.
    pub share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyCbfValue {
    pub h: f64,
    pub nu: f64,
    /// False when the pair is receding and the constraint cannot bind.
    pub active: bool,
}

/// Linear inequality `coef . accel_i >= rhs` on agent i's Cartesian
/// acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelRow {
    pub coef: Vec2,
    pub rhs: f64,
}

impl AccelRow {
    pub fn slack(&self, accel: Vec2) -> f64 {
        self.coef.dot(accel) - self.rhs
    }
}

/// Surface distance and unit direction from disc i to disc j. The distance
/// is negative in overlap.
pub fn sphere_distance(
    p_i: Vec2,
    p_j: Vec2,
    r_i: f64,
    r_j: f64,
) -> Result<(f64, Vec2), GeometryError> {
    let diff = p_j - p_i;
    let center_dist = diff.length();
    if center_dist == 0.0 {
        return Err(GeometryError::DegeneratePair);
    }
    Ok((center_dist - r_i - r_j, diff / center_dist))
}

pub fn h_c(d: f64, v_rel: Vec2, p_hat: Vec2, delta: f64, u_max: f64) -> SafetyCbfValue {
    debug_assert!(u_max > 0.0 && delta >= 0.0);
    let closing = v_rel.dot(p_hat);
    let nu = closing.min(0.0);
    SafetyCbfValue {
        h: d - delta - nu * nu / (2.0 * u_max),
        nu,
        active: closing <= 0.0,
    }
}

/// Barrier value for the pair `(i, j)` given absolute states.
pub fn pair_h_c(
    (p_i, v_i, r_i): (Vec2, Vec2, f64),
    (p_j, v_j, r_j): (Vec2, Vec2, f64),
    params: &SafetyParams,
) -> Result<SafetyCbfValue, GeometryError> {
    let (d, p_hat) = sphere_distance(p_i, p_j, r_i, r_j)?;
    Ok(h_c(d, v_j - v_i, p_hat, params.delta, params.u_max))
}

/// Barrier condition `h_c_dot + alpha_c h_c >= 0` as a row on agent i's own
/// acceleration. Agent j's acceleration is left out and the part of the
/// condition not driven by `u_i` is scaled by `params.share`.
///
/// Returns `None` for receding pairs, where the condition holds for every
/// control.
pub fn safety_constraint_row(
    (p_i, v_i, r_i): (Vec2, Vec2, f64),
    (p_j, v_j, r_j): (Vec2, Vec2, f64),
    params: &SafetyParams,
) -> Result<Option<AccelRow>, GeometryError> {
    let (d, p_hat) = sphere_distance(p_i, p_j, r_i, r_j)?;
    let v_rel = v_j - v_i;
    let value = h_c(d, v_rel, p_hat, params.delta, params.u_max);
    if !value.active {
        return Ok(None);
    }
    let center_dist = (p_j - p_i).length();
    let d_dot = v_rel.dot(p_hat);
    let p_hat_dot = (v_rel - p_hat * d_dot) / center_dist;
    let gain = value.nu / params.u_max;
    // h_dot = d_dot - gain * (u_rel . p_hat + v_rel . p_hat_dot), u_rel = -u_i
    Ok(Some(AccelRow {
        coef: p_hat * gain,
        rhs: params.share * (-d_dot + gain * v_rel.dot(p_hat_dot) - params.alpha_c * value.h),
    }))
}

/// Distance covered while braking from closing speed `speed` at `u_max`
/// under forward Euler with step `dt`: `D(c) = c dt + D(c - u_max dt)`.
/// Piecewise linear in `c` and never below `c^2 / (2 u_max)`.
pub fn discrete_braking_distance(speed: f64, u_max: f64, dt: f64) -> f64 {
    if speed <= 0.0 {
        return 0.0;
    }
    let step = u_max * dt;
    let m = (speed / step).ceil();
    dt * (step * m * (m - 1.0) / 2.0 + m * (speed - (m - 1.0) * step))
}

/// Largest closing speed whose discrete braking distance is at most
/// `distance`.
pub fn max_closing_speed(distance: f64, u_max: f64, dt: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let step = u_max * dt;
    // Piece m covers D in [step dt m (m - 1) / 2, step dt m (m + 1) / 2].
    let k = distance / (step * dt);
    let m = ((1.0 + (1.0 + 8.0 * k).sqrt()) / 2.0).floor().max(1.0);
    (m - 1.0) * step + (distance - step * dt * m * (m - 1.0) / 2.0) / (m * dt)
}

/// Braking barrier with the discrete braking distance in place of
/// `nu^2 / (2 u_max)`. A lower bound on `h_c` that full braking keeps
/// constant under forward Euler.
pub fn sampled_h_c(
    (p_i, v_i, r_i): (Vec2, Vec2, f64),
    (p_j, v_j, r_j): (Vec2, Vec2, f64),
    params: &SafetyParams,
    dt: f64,
) -> Result<f64, GeometryError> {
    let (d, p_hat) = sphere_distance(p_i, p_j, r_i, r_j)?;
    let closing = -(v_j - v_i).dot(p_hat);
    Ok(d - params.delta - discrete_braking_distance(closing, params.u_max, dt))
}

/// Sampled-data form of the barrier condition for one forward-Euler step of
/// length `dt`, `h(k+1) >= (1 - alpha_c dt) h(k)` with `h` from
/// [`sampled_h_c`].
///
/// Positions advance with the current velocities, so the next separation is
/// fixed and the condition becomes a bound on the next closing speed, linear
/// in agent i's acceleration. The part not driven by `u_i` is scaled by
/// `params.share`. When no next closing speed can satisfy the condition the
/// row asks for zero closing speed. Returns `None` when no acceleration of
/// magnitude `reach` can violate the row.
pub fn sampled_safety_row(
    a: (Vec2, Vec2, f64),
    b: (Vec2, Vec2, f64),
    params: &SafetyParams,
    dt: f64,
    reach: f64,
) -> Result<Option<AccelRow>, GeometryError> {
    debug_assert!(dt > 0.0 && reach >= 0.0);
    let (p_i, v_i, r_i) = a;
    let (p_j, v_j, r_j) = b;
    let now = sampled_h_c(a, b, params, dt)?;
    let (d_next, p_hat) = sphere_distance(p_i + v_i * dt, p_j + v_j * dt, r_i, r_j)?;
    let budget = d_next - params.delta - (1.0 - params.alpha_c * dt) * now;
    let max_closing = max_closing_speed(budget, params.u_max, dt);
    // (v_rel - u_i dt) . p_hat >= -max_closing
    let rhs = params.share * (-max_closing - (v_j - v_i).dot(p_hat)) / dt;
    if rhs <= -reach {
        return Ok(None);
    }
    Ok(Some(AccelRow { coef: -p_hat, rhs }))
}
