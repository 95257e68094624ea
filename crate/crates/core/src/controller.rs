//! Per-agent QP controllers.
//!
//! The decision vector is `[u_i; lambda_1 .. lambda_k]`: the agent's own
//! control followed by one slack per neighbor that is on a predicted
//! collision course. The objective is
//!
//! ```text
//! k_u |u - u_ref|^2 + k_vo sum_j w_ij lambda_j^2
//! ```
//!
//! subject to the relaxed cone rows `h_vo_dot + alpha_vo h_vo >= lambda_j`,
//! the hard braking rows and the input set. Neighbor accelerations are left
//! out of every row, so each depends on `u_i` alone; the braking rows carry
//! only the configured share of their pair's condition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::config::{ControllerKind, Dynamics, SafetyRowForm, ScenarioConfig};
use crate::dynamics::{car_accel_map, pull_back, wrap_angle, AgentState};
use crate::qp::{solve_qp, LinearConstraintRow, QpError, QpProblem, QpSolution, QpStatus};
use crate::safety::{sampled_safety_row, safety_constraint_row};
use crate::sim::Agent;
use crate::vec2::Vec2;
use crate::vo::{h_vo_dot_terms, time_to_collision, vo_weight, PairGeometry};

/// Number of control variables.
pub const CONTROL_DIM: usize = 2;

/// Which formulation to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpMode {
    /// Slack-relaxed cone rows plus hard braking rows.
    Relaxed,
    /// Cone rows as hard constraints, no slacks, no braking rows.
    HardCone,
}

/// Desired velocity toward the goal: preferred speed along the goal
/// direction, zero inside the goal tolerance.
pub fn desired_velocity(p: Vec2, goal: Vec2, cfg: &ScenarioConfig) -> Vec2 {
    let to_goal = goal - p;
    let dist = to_goal.length();
    if dist <= cfg.goal_tolerance_m {
        Vec2::ZERO
    } else {
        to_goal / dist * cfg.preferred_velocity_mps
    }
}

/// PD-style reference control.
///
/// Integrator: `u = P (v_des - v)` clipped to the acceleration disc.
/// Car: speed tracking `a = P (v_target - v)` and steering `P heading_error`,
/// raised near the goal to the pure-pursuit arc through it,
/// `2 L sin(heading_error) / dist`, so the goal is never orbited. Both
/// box-clipped.
pub fn reference_control(state: &AgentState, goal: Vec2, cfg: &ScenarioConfig) -> Vec2 {
    match state {
        AgentState::Integrator(s) => {
            let v_des = desired_velocity(s.p, goal, cfg);
            ((v_des - s.v) * cfg.p_coefficient).clamp_length(cfg.max_acceleration_mps2)
        }
        AgentState::Car(s) => {
            let to_goal = goal - s.p;
            let dist = to_goal.length();
            let (v_target, steer) = if dist <= cfg.goal_tolerance_m {
                (0.0, 0.0)
            } else {
                let heading_error = wrap_angle(to_goal.y.atan2(to_goal.x) - s.theta);
                (
                    cfg.preferred_velocity_mps.min(cfg.p_coefficient * dist),
                    heading_error.signum()
                        * (cfg.p_coefficient * heading_error.abs()).max(
                            2.0 * cfg.characteristic_length_m * heading_error.sin().abs() / dist,
                        ),
                )
            };
            let steer = steer.clamp(-cfg.max_steering_tan, cfg.max_steering_tan);
            let accel = (cfg.p_coefficient * (v_target - s.v))
                .clamp(-cfg.max_acceleration_mps2, cfg.max_acceleration_mps2);
            Vec2::new(steer, accel)
        }
    }
}

/// Linear map from the agent's control to its Cartesian acceleration.
pub fn control_map(state: &AgentState, cfg: &ScenarioConfig) -> Matrix2<f64> {
    match state {
        AgentState::Integrator(_) => Matrix2::identity(),
        AgentState::Car(s) => car_accel_map(s, cfg.characteristic_length_m),
    }
}

/// Input-set rows on the control variables, padded to `dim` columns.
pub fn input_rows(dynamics: Dynamics, cfg: &ScenarioConfig, dim: usize) -> Vec<LinearConstraintRow> {
    let row = |ax: f64, ay: f64, b: f64| {
        let mut a = vec![0.0; dim];
        a[0] = ax;
        a[1] = ay;
        LinearConstraintRow::new(a, b)
    };
    match dynamics {
        Dynamics::Integrator => {
            let sides = cfg.input_polygon_sides;
            let apothem = cfg.inscribed_acceleration();
            (0..sides)
                .map(|k| {
                    let normal = Vec2::from_angle((2 * k + 1) as f64 * PI / sides as f64);
                    row(-normal.x, -normal.y, -apothem)
                })
                .collect()
        }
        Dynamics::Car => vec![
            row(1.0, 0.0, -cfg.max_steering_tan),
            row(-1.0, 0.0, -cfg.max_steering_tan),
            row(0.0, 1.0, -cfg.max_acceleration_mps2),
            row(0.0, -1.0, -cfg.max_acceleration_mps2),
        ],
    }
}

/// One cone row of the assembled problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeRow {
    pub neighbor: usize,
    pub row: usize,
    /// Decision-vector index of its slack, if relaxed.
    pub slack: Option<usize>,
    pub weight: f64,
    pub h: f64,
}

/// Upper bound on the Cartesian acceleration any admissible control yields.
fn acceleration_reach(map: &Matrix2<f64>, state: &AgentState, cfg: &ScenarioConfig) -> f64 {
    match state {
        AgentState::Integrator(_) => cfg.max_acceleration_mps2,
        AgentState::Car(_) => {
            map.norm() * Vec2::new(cfg.max_steering_tan, cfg.max_acceleration_mps2).length()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledQp {
    pub problem: QpProblem,
    pub u_ref: Vec2,
    pub cone_rows: Vec<ConeRow>,
    pub safety_rows: Vec<(usize, usize)>,
    /// Coincident-center pairs that had to be skipped.
    pub degenerate: Vec<usize>,
}

pub fn assemble_qp(i: usize, agents: &[Agent], cfg: &ScenarioConfig, mode: QpMode) -> AssembledQp {
    let me = &agents[i];
    let p_i = me.state.position();
    let v_i = me.state.velocity();
    let u_ref = reference_control(&me.state, me.goal, cfg);
    let map = control_map(&me.state, cfg);
    let safety = cfg.safety_params();
    let reach = acceleration_reach(&map, &me.state, cfg);

    struct Cone {
        neighbor: usize,
        weight: f64,
        h: f64,
        coef: Vec2,
        rhs: f64,
    }

    let mut cones = Vec::new();
    let mut safety_rows = Vec::new();
    let mut degenerate = Vec::new();
    for (j, other) in agents.iter().enumerate() {
        if j == i {
            continue;
        }
        let p_j = other.state.position();
        let v_j = other.state.velocity();
        let pair = PairGeometry::between(p_i, v_i, me.radius, p_j, v_j, other.radius);
        let Ok(terms) = h_vo_dot_terms(&pair) else {
            degenerate.push(j);
            continue;
        };
        let weight = vo_weight(time_to_collision(&pair));
        if weight > 0.0 {
            // h_dot = grad . (-accel_i) + drift
            cones.push(Cone {
                neighbor: j,
                weight,
                h: terms.h,
                coef: -pull_back(&map, terms.grad_u),
                rhs: -terms.drift - cfg.alpha_vo * terms.h,
            });
        }
        if mode == QpMode::Relaxed {
            let (a, b) = ((p_i, v_i, me.radius), (p_j, v_j, other.radius));
            let row = match cfg.safety_row {
                SafetyRowForm::Sampled => sampled_safety_row(a, b, &safety, cfg.timestep_s, reach),
                SafetyRowForm::Continuous => safety_constraint_row(a, b, &safety),
            };
            match row {
                Ok(Some(row)) => safety_rows.push((j, pull_back(&map, row.coef), row.rhs)),
                Ok(None) => {}
                Err(_) => degenerate.push(j),
            }
        }
    }

    let n_slack = if mode == QpMode::Relaxed { cones.len() } else { 0 };
    let dim = CONTROL_DIM + n_slack;
    let mut hessian = DMatrix::zeros(dim, dim);
    let mut linear = DVector::zeros(dim);
    for c in 0..CONTROL_DIM {
        hessian[(c, c)] = 2.0 * cfg.k_u;
    }
    linear[0] = -2.0 * cfg.k_u * u_ref.x;
    linear[1] = -2.0 * cfg.k_u * u_ref.y;
    if mode == QpMode::Relaxed {
        for (s, cone) in cones.iter().enumerate() {
            hessian[(CONTROL_DIM + s, CONTROL_DIM + s)] = 2.0 * cfg.k_vo * cone.weight;
        }
    }

    let mut problem = QpProblem::new(hessian, linear);
    let mut cone_rows = Vec::with_capacity(cones.len());
    for (s, cone) in cones.iter().enumerate() {
        let mut a = vec![0.0; dim];
        a[0] = cone.coef.x;
        a[1] = cone.coef.y;
        let slack = (mode == QpMode::Relaxed).then(|| {
            a[CONTROL_DIM + s] = -1.0;
            CONTROL_DIM + s
        });
        cone_rows.push(ConeRow {
            neighbor: cone.neighbor,
            row: problem.rows.len(),
            slack,
            weight: cone.weight,
            h: cone.h,
        });
        problem.push_row(LinearConstraintRow::new(a, cone.rhs));
    }
    let mut safety_index = Vec::with_capacity(safety_rows.len());
    for (j, coef, rhs) in safety_rows {
        let mut a = vec![0.0; dim];
        a[0] = coef.x;
        a[1] = coef.y;
        safety_index.push((j, problem.rows.len()));
        problem.push_row(LinearConstraintRow::new(a, rhs));
    }
    let dynamics = match me.state {
        AgentState::Integrator(_) => Dynamics::Integrator,
        AgentState::Car(_) => Dynamics::Car,
    };
    for row in input_rows(dynamics, cfg, dim) {
        problem.push_row(row);
    }

    AssembledQp {
        problem,
        u_ref,
        cone_rows,
        safety_rows: safety_index,
        degenerate,
    }
}

/// Penalty weight on the shared slack of the minimum-violation problem.
pub const VIOLATION_WEIGHT: f64 = 1e6;

/// Copy of `asm` with one extra nonnegative variable that every braking row
/// may draw on, heavily penalized. Always feasible.
pub fn soften_safety_rows(asm: &AssembledQp) -> QpProblem {
    let old = asm.problem.dim();
    let dim = old + 1;
    let mut hessian = DMatrix::zeros(dim, dim);
    hessian.view_mut((0, 0), (old, old)).copy_from(&asm.problem.hessian);
    hessian[(old, old)] = 2.0 * VIOLATION_WEIGHT;
    let mut linear = DVector::zeros(dim);
    linear.rows_mut(0, old).copy_from(&asm.problem.linear);
    let mut problem = QpProblem::new(hessian, linear);
    for (k, row) in asm.problem.rows.iter().enumerate() {
        let mut a = row.a.clone();
        a.push(if asm.safety_rows.iter().any(|&(_, r)| r == k) { 1.0 } else { 0.0 });
        problem.push_row(LinearConstraintRow::new(a, row.b));
    }
    let mut a = vec![0.0; dim];
    a[old] = 1.0;
    problem.push_row(LinearConstraintRow::new(a, 0.0));
    problem
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlStatus {
    Optimal,
    /// Braking rows could not all be met; the least-violating control was
    /// applied, or maximal braking if even that failed.
    Fallback,
    /// Hard-constraint problem had no solution; zero acceleration applied.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutcome {
    pub u: Vec2,
    pub status: ControlStatus,
}

/// Maximal braking along the current direction of motion, without
/// overshooting to rest within one step.
pub fn braking_control(state: &AgentState, cfg: &ScenarioConfig) -> Vec2 {
    let dt = cfg.timestep_s;
    match state {
        AgentState::Integrator(s) => match s.v.normalized() {
            Some(dir) => -dir * cfg.inscribed_acceleration().min(s.v.length() / dt),
            None => Vec2::ZERO,
        },
        AgentState::Car(s) => Vec2::new(0.0, -cfg.max_acceleration_mps2.min(s.v / dt)),
    }
}

pub fn solve_agent_qp(
    i: usize,
    agents: &[Agent],
    cfg: &ScenarioConfig,
    mode: QpMode,
) -> (AssembledQp, Result<QpSolution, QpError>) {
    let assembled = assemble_qp(i, agents, cfg, mode);
    let solution = solve_qp(&assembled.problem);
    (assembled, solution)
}

/// Control of agent `i` for the QP-based controllers.
pub fn compute_control(i: usize, agents: &[Agent], cfg: &ScenarioConfig) -> ControlOutcome {
    let mode = match cfg.controller {
        ControllerKind::Hvo => QpMode::HardCone,
        _ => QpMode::Relaxed,
    };
    let (assembled, solution) = solve_agent_qp(i, agents, cfg, mode);
    match (mode, solution) {
        (_, Ok(sol)) if sol.status == QpStatus::Optimal => ControlOutcome {
            u: Vec2::new(sol.x[0], sol.x[1]),
            status: ControlStatus::Optimal,
        },
        (QpMode::HardCone, _) => ControlOutcome {
            u: Vec2::ZERO,
            status: ControlStatus::Infeasible,
        },
        (QpMode::Relaxed, result) => {
            log::debug!("agent {i}: braking rows infeasible ({result:?})");
            let u = match solve_qp(&soften_safety_rows(&assembled)) {
                Ok(sol) if sol.status == QpStatus::Optimal => Vec2::new(sol.x[0], sol.x[1]),
                other => {
                    log::warn!("agent {i}: softened QP failed ({other:?}), braking");
                    braking_control(&agents[i].state, cfg)
                }
            };
            ControlOutcome {
                u,
                status: ControlStatus::Fallback,
            }
        }
    }
}
