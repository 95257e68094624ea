//! Sampling-based velocity-obstacle baselines (VO, RVO, OVVO).
//!
//! Each step an agent samples velocities reachable within one timestep,
//! scores every sample and converts the best one into an acceleration.

use std::f64::consts::PI;

use rand::Rng;

use crate::config::{ControllerKind, ScenarioConfig};
use crate::controller::desired_velocity;
use crate::sim::Agent;
use crate::vec2::Vec2;
use crate::vo::{time_to_collision, vo_weight, PairGeometry};

/// Floor applied to clearance and pass time in the OVVO cost.
pub const OVVO_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub v: Vec2,
    pub penalty: f64,
}

/// `n` velocities uniform over the disc of radius `u_max dt` around
/// `v_current`, projected onto the speed limit. Sample 0 is always
/// `v_current`.
pub fn sample_admissible<R: Rng + ?Sized>(
    v_current: Vec2,
    u_max: f64,
    dt: f64,
    v_max: f64,
    n: usize,
    rng: &mut R,
) -> Vec<VelocitySample> {
    assert!(n >= 1);
    let reach = u_max * dt;
    let mut out = Vec::with_capacity(n);
    out.push(VelocitySample {
        v: v_current.clamp_length(v_max),
        penalty: 0.0,
    });
    for _ in 1..n {
        let radius = reach * rng.random::<f64>().sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        out.push(VelocitySample {
            v: (v_current + Vec2::from_angle(angle) * radius).clamp_length(v_max),
            penalty: 0.0,
        });
    }
    out
}

/// Time until the sampled motion brings the agent into contact with
/// `other`, using the VO ray `v' - v_B` or the RVO ray `2 v' - v_A - v_B`.
fn ray_time_to_collision(kind: ControllerKind, me: &Agent, sample: Vec2, other: &Agent) -> f64 {
    let v_a = me.state.velocity();
    let v_b = other.state.velocity();
    let ray = match kind {
        ControllerKind::Rvo => sample * 2.0 - v_a - v_b,
        _ => sample - v_b,
    };
    // The agent moves along `ray` relative to B, so B moves along `-ray`
    // relative to the agent.
    let pair = PairGeometry::new(
        other.state.position() - me.state.position(),
        -ray,
        me.radius + other.radius,
    );
    time_to_collision(&pair)
}

/// `1 / T_col + |v - v_des|` with `T_col` the earliest predicted contact
/// over all other agents. The inverse is capped as for the QP weights.
pub fn vo_rvo_penalty(
    kind: ControllerKind,
    i: usize,
    sample: Vec2,
    v_des: Vec2,
    agents: &[Agent],
) -> f64 {
    let me = &agents[i];
    let t_min = agents
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, other)| ray_time_to_collision(kind, me, sample, other))
        .fold(f64::INFINITY, f64::min);
    vo_weight(t_min) + (sample - v_des).length()
}

/// Closest approach of two discs moving with constant relative velocity `w`
/// of agent i against obstacle j, with `p = p_j - p_i`: the separation left
/// between the disc surfaces and the time it is reached. `None` unless the
/// pair is approaching.
pub fn closest_approach(p: Vec2, w: Vec2, r_comb: f64) -> Option<(f64, f64)> {
    let closing = p.dot(w);
    if closing <= 0.0 {
        return None;
    }
    let pass_time = closing / w.length_squared();
    Some(((p - w * pass_time).length() - r_comb, pass_time))
}

/// `sum_j k_tp d_v^-c1 t_p^-c2 + k_vd |v - v_des|` over approaching
/// obstacles, with `d_v` the clearance at closest approach and `t_p` the
/// time until it, both floored at [`OVVO_FLOOR`].
pub fn ovvo_penalty(
    i: usize,
    sample: Vec2,
    v_des: Vec2,
    agents: &[Agent],
    cfg: &ScenarioConfig,
) -> f64 {
    let me = &agents[i];
    let mut cost = cfg.k_vd * (sample - v_des).length();
    for (j, other) in agents.iter().enumerate() {
        if j == i {
            continue;
        }
        let p = other.state.position() - me.state.position();
        let w = sample - other.state.velocity();
        if let Some((clearance, pass_time)) = closest_approach(p, w, me.radius + other.radius) {
            let clearance = clearance.max(OVVO_FLOOR);
            let pass_time = pass_time.max(OVVO_FLOOR);
            cost += cfg.k_tp * clearance.powf(-cfg.c1) * pass_time.powf(-cfg.c2);
        }
    }
    cost
}

/// Scores samples for agent `i` and returns the control reaching the best
/// one. Ties go to the lowest sample index.
pub fn select_velocity<R: Rng + ?Sized>(
    i: usize,
    agents: &[Agent],
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> (Vec2, VelocitySample) {
    let me = &agents[i];
    let v_current = me.state.velocity();
    let v_des = desired_velocity(me.state.position(), me.goal, cfg);
    let mut samples = sample_admissible(
        v_current,
        cfg.max_acceleration_mps2,
        cfg.timestep_s,
        cfg.max_velocity_mps,
        cfg.n_sampling_points,
        rng,
    );
    for s in &mut samples {
        s.penalty = match cfg.controller {
            ControllerKind::Ovvo => ovvo_penalty(i, s.v, v_des, agents, cfg),
            kind => vo_rvo_penalty(kind, i, s.v, v_des, agents),
        };
    }
    let mut best = samples[0];
    for s in &samples[1..] {
        if s.penalty < best.penalty {
            best = *s;
        }
    }
    let u = ((best.v - v_current) / cfg.timestep_s).clamp_length(cfg.max_acceleration_mps2);
    (u, best)
}
