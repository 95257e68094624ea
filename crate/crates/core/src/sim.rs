//! Fixed-step multi-agent simulation, the circle-swap scenario and episode
//! metrics.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::select_velocity;
use crate::config::{ControllerKind, Dynamics, ScenarioConfig};
use crate::controller::{compute_control, ControlOutcome, ControlStatus};
use crate::dynamics::{car_step, integrator_step, AgentState, CarState, IntegratorState};
use crate::safety::pair_h_c;
use crate::vec2::Vec2;
use crate::vo::{h_vo, PairGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub state: AgentState,
    pub radius: f64,
    pub goal: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub t: f64,
    pub step: usize,
    pub agents: Vec<Agent>,
}

/// Agents evenly spaced on a circle, heading for the antipodal point.
/// Start positions get seeded Gaussian noise clipped at three standard
/// deviations; goals are exact.
pub fn make_circle_scenario(cfg: &ScenarioConfig) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_agents;
    let agents = (0..n)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / n as f64;
            let nominal = Vec2::from_angle(angle) * cfg.circle_radius_m;
            let noise = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                * cfg.noise_std_m;
            let p = nominal + noise.clamp_length(3.0 * cfg.noise_std_m);
            let goal = -nominal;
            let state = match cfg.dynamics {
                Dynamics::Integrator => AgentState::Integrator(IntegratorState { p, v: Vec2::ZERO }),
                Dynamics::Car => {
                    let to_goal = goal - p;
                    AgentState::Car(CarState {
                        p,
                        theta: to_goal.y.atan2(to_goal.x),
                        v: 0.0,
                    })
                }
            };
            Agent {
                state,
                radius: cfg.agent_radius_m,
                goal,
            }
        })
        .collect();
    World {
        t: 0.0,
        step: 0,
        agents,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random stream for one agent at one step, so results do not
/// depend on the order agents are processed in.
pub fn agent_rng(seed: u64, step: usize, agent: usize) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ 0x5eed) ^ step as u64) ^ splitmix64(agent as u64 + 1);
    ChaCha8Rng::seed_from_u64(splitmix64(key))
}

/// Control for agent `i` from the immutable snapshot `agents`.
pub fn agent_control(i: usize, agents: &[Agent], step: usize, cfg: &ScenarioConfig) -> ControlOutcome {
    match cfg.controller {
        ControllerKind::Ours | ControllerKind::Hvo => compute_control(i, agents, cfg),
        _ => {
            let mut rng = agent_rng(cfg.seed, step, i);
            let (u, _) = select_velocity(i, agents, cfg, &mut rng);
            ControlOutcome {
                u,
                status: ControlStatus::Optimal,
            }
        }
    }
}

pub fn propagate(agent: &Agent, u: Vec2, cfg: &ScenarioConfig) -> Agent {
    let state = match &agent.state {
        AgentState::Integrator(s) => {
            AgentState::Integrator(integrator_step(s, u, cfg.timestep_s, cfg.max_velocity_mps))
        }
        AgentState::Car(s) => AgentState::Car(car_step(
            s,
            u,
            cfg.timestep_s,
            cfg.max_velocity_mps,
            cfg.characteristic_length_m,
        )),
    };
    Agent { state, ..*agent }
}

/// Advances every agent by one timestep. All controls are computed from the
/// same pre-step snapshot before any state is updated. `order` is the order
/// in which controls are evaluated.
pub fn step_world_ordered(
    world: &World,
    cfg: &ScenarioConfig,
    order: &[usize],
) -> (World, Vec<ControlOutcome>) {
    let n = world.agents.len();
    let mut outcomes = vec![
        ControlOutcome {
            u: Vec2::ZERO,
            status: ControlStatus::Optimal,
        };
        n
    ];
    for &i in order {
        outcomes[i] = agent_control(i, &world.agents, world.step, cfg);
    }
    let agents = world
        .agents
        .iter()
        .zip(&outcomes)
        .map(|(a, o)| propagate(a, o.u, cfg))
        .collect();
    let step = world.step + 1;
    (
        World {
            t: step as f64 * cfg.timestep_s,
            step,
            agents,
        },
        outcomes,
    )
}

pub fn step_world(world: &World, cfg: &ScenarioConfig) -> (World, Vec<ControlOutcome>) {
    let order: Vec<usize> = (0..world.agents.len()).collect();
    step_world_ordered(world, cfg, &order)
}

/// One agent at one recorded instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub state: AgentState,
    /// Control applied from this instant (zero for the final record).
    pub u: Vec2,
    /// Smallest braking barrier over all other agents, `+inf` if alone.
    pub min_h_c: f64,
    /// Smallest cone barrier over all other agents, `+inf` if alone.
    pub min_h_vo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trace: Vec<StepRecord>,
    pub radii: Vec<f64>,
    pub goals: Vec<Vec2>,
    pub collisions: usize,
    pub success: Vec<bool>,
    /// All agents reached their goals and the episode was not aborted.
    pub all_success: bool,
    /// Time the last agent first reached its goal.
    pub completion_time: Option<f64>,
    /// Simulated duration of the episode.
    pub episode_time: f64,
    /// Wall-clock controller time per step, averaged over agents, in ms.
    pub solve_times_ms: Vec<f64>,
    pub infeasible_steps: usize,
    pub fallback_steps: usize,
    pub aborted: bool,
    pub min_h_c: f64,
}

impl EpisodeResult {
    pub fn mean_solve_ms(&self) -> f64 {
        if self.solve_times_ms.is_empty() {
            0.0
        } else {
            self.solve_times_ms.iter().sum::<f64>() / self.solve_times_ms.len() as f64
        }
    }
}

/// Per-agent minimum of the braking and cone barriers over all pairs.
pub fn barrier_minima(agents: &[Agent], cfg: &ScenarioConfig) -> Vec<(f64, f64)> {
    let safety = cfg.safety_params();
    let mut out = vec![(f64::INFINITY, f64::INFINITY); agents.len()];
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let (a, b) = (&agents[i], &agents[j]);
            let (p_i, v_i) = (a.state.position(), a.state.velocity());
            let (p_j, v_j) = (b.state.position(), b.state.velocity());
            // Both barriers are symmetric in (i, j).
            let hc = pair_h_c((p_i, v_i, a.radius), (p_j, v_j, b.radius), &safety)
                .map(|v| v.h)
                .unwrap_or(f64::NEG_INFINITY);
            let hv = h_vo(&PairGeometry::between(p_i, v_i, a.radius, p_j, v_j, b.radius))
                .unwrap_or(f64::NEG_INFINITY);
            for k in [i, j] {
                out[k].0 = out[k].0.min(hc);
                out[k].1 = out[k].1.min(hv);
            }
        }
    }
    out
}

/// Counts collision events: a pair's center distance dropping below
/// `(1 - tolerance) (r_i + r_j)` from above. Re-entries count again.
pub fn detect_collision_events(trace: &[StepRecord], radii: &[f64], tolerance: f64) -> usize {
    let n = radii.len();
    let mut inside = vec![false; n * n];
    let mut events = 0;
    for (k, record) in trace.iter().enumerate() {
        for i in 0..n {
            for j in (i + 1)..n {
                let threshold = (1.0 - tolerance) * (radii[i] + radii[j]);
                let d = (record.agents[i].state.position() - record.agents[j].state.position())
                    .length();
                let now = d < threshold;
                if k > 0 && now && !inside[i * n + j] {
                    events += 1;
                }
                inside[i * n + j] = now;
            }
        }
    }
    events
}

pub fn run_episode(cfg: &ScenarioConfig) -> EpisodeResult {
    run_world(make_circle_scenario(cfg), cfg)
}

/// Runs an episode from an arbitrary initial world.
pub fn run_world(mut world: World, cfg: &ScenarioConfig) -> EpisodeResult {
    let n = world.agents.len();
    let steps = cfg.steps();
    let mut reached: Vec<bool> = world.agents.iter().map(|a| at_goal(a, cfg)).collect();
    let mut completion_time = reached.iter().all(|&r| r).then_some(0.0);
    let mut infeasible_time = vec![0.0; n];
    let mut trace = Vec::with_capacity(steps + 1);
    let mut solve_times_ms = Vec::with_capacity(steps);
    let (mut infeasible_steps, mut fallback_steps) = (0, 0);
    let mut aborted = false;

    while world.step < steps && completion_time.is_none() {
        let minima = barrier_minima(&world.agents, cfg);
        let start = Instant::now();
        let (next, outcomes) = step_world(&world, cfg);
        solve_times_ms.push(start.elapsed().as_secs_f64() * 1e3 / n as f64);

        trace.push(StepRecord {
            t: world.t,
            agents: world
                .agents
                .iter()
                .zip(&outcomes)
                .zip(&minima)
                .map(|((a, o), &(min_h_c, min_h_vo))| AgentRecord {
                    state: a.state,
                    u: o.u,
                    min_h_c,
                    min_h_vo,
                })
                .collect(),
        });

        for (i, o) in outcomes.iter().enumerate() {
            match o.status {
                ControlStatus::Optimal => {}
                ControlStatus::Fallback => fallback_steps += 1,
                ControlStatus::Infeasible => {
                    infeasible_steps += 1;
                    if !reached[i] {
                        infeasible_time[i] += cfg.timestep_s;
                    }
                }
            }
        }
        world = next;

        for (i, a) in world.agents.iter().enumerate() {
            if !reached[i] && at_goal(a, cfg) {
                reached[i] = true;
            }
        }
        if reached.iter().all(|&r| r) {
            completion_time = Some(world.t);
        }
        if infeasible_time.iter().any(|&t| t > cfg.infeasible_abort_s) {
            aborted = true;
            break;
        }
    }

    let minima = barrier_minima(&world.agents, cfg);
    trace.push(StepRecord {
        t: world.t,
        agents: world
            .agents
            .iter()
            .zip(&minima)
            .map(|(a, &(min_h_c, min_h_vo))| AgentRecord {
                state: a.state,
                u: Vec2::ZERO,
                min_h_c,
                min_h_vo,
            })
            .collect(),
    });

    let radii: Vec<f64> = world.agents.iter().map(|a| a.radius).collect();
    let collisions = detect_collision_events(&trace, &radii, cfg.geometric_tolerance);
    let min_h_c = trace
        .iter()
        .flat_map(|r| r.agents.iter().map(|a| a.min_h_c))
        .fold(f64::INFINITY, f64::min);
    EpisodeResult {
        radii,
        goals: world.agents.iter().map(|a| a.goal).collect(),
        collisions,
        all_success: !aborted && reached.iter().all(|&r| r),
        success: reached,
        completion_time: if aborted { None } else { completion_time },
        episode_time: world.t,
        solve_times_ms,
        infeasible_steps,
        fallback_steps,
        aborted,
        min_h_c,
        trace,
    }
}

fn at_goal(agent: &Agent, cfg: &ScenarioConfig) -> bool {
    (agent.state.position() - agent.goal).length() <= cfg.goal_tolerance_m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation; zero spread for a single value.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub runs: usize,
    pub success_rate: f64,
    pub collisions: MeanStd,
    pub episode_time: MeanStd,
    pub solve_ms: MeanStd,
}

pub fn aggregate(results: &[EpisodeResult]) -> AggregateStats {
    assert!(!results.is_empty(), "aggregate needs at least one result");
    let col = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).collect::<Vec<_>>();
    AggregateStats {
        runs: results.len(),
        success_rate: results.iter().filter(|r| r.all_success).count() as f64
            / results.len() as f64,
        collisions: MeanStd::of(&col(&|r| r.collisions as f64)),
        episode_time: MeanStd::of(&col(&|r| r.episode_time)),
        solve_ms: MeanStd::of(&col(&|r| r.mean_solve_ms())),
    }
}
