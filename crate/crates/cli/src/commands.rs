use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use vocbf::report::trace_csv;
use vocbf::{aggregate, run_episode, ControllerKind, EpisodeResult, ScenarioConfig};

use crate::config_file::{load_config, Overrides};
use crate::error::CliError;
use crate::plot;

#[derive(Debug, Serialize)]
pub struct Timings {
    pub simulate_s: f64,
    pub write_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, E: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a ScenarioConfig,
    #[serde(flatten)]
    pub extra: E,
    pub artifacts: Vec<PathBuf>,
    pub timings: Timings,
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    mean: f64,
    max: f64,
}

#[derive(Debug, Serialize)]
struct Metrics<'a> {
    seed: u64,
    n_agents: usize,
    controller: &'a str,
    dynamics: &'a str,
    collisions: usize,
    all_success: bool,
    success: &'a [bool],
    completion_time_s: Option<f64>,
    episode_time_s: f64,
    min_h_c: f64,
    infeasible_steps: usize,
    fallback_steps: usize,
    aborted: bool,
    solve_ms: SolveSummary,
}

fn metrics(cfg: &ScenarioConfig, r: &EpisodeResult) -> String {
    let m = Metrics {
        seed: cfg.seed,
        n_agents: cfg.n_agents,
        controller: cfg.controller.name(),
        dynamics: cfg.dynamics.name(),
        collisions: r.collisions,
        all_success: r.all_success,
        success: &r.success,
        completion_time_s: r.completion_time,
        episode_time_s: r.episode_time,
        // JSON has no infinity; a lone agent has no braking pair.
        min_h_c: if r.min_h_c.is_finite() { r.min_h_c } else { f64::MAX },
        infeasible_steps: r.infeasible_steps,
        fallback_steps: r.fallback_steps,
        aborted: r.aborted,
        solve_ms: SolveSummary {
            mean: r.mean_solve_ms(),
            max: r.solve_times_ms.iter().copied().fold(0.0, f64::max),
        },
    };
    serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n"
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

fn write_manifest<E: Serialize>(
    dir: &Path,
    mut manifest: RunManifest<'_, E>,
    started: Instant,
) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    manifest.artifacts.push(path.clone());
    manifest.timings.total_s = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&path, &json)
}

pub fn cmd_run(config: Option<&Path>, overrides: &Overrides, out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = load_config(config, overrides)?;
    prepare_dir(out_dir)?;

    let result = run_episode(&cfg);
    let simulate_s = started.elapsed().as_secs_f64();
    log::info!(
        "{} agents, {}: {} collisions, success {}, {:.2} s simulated",
        cfg.n_agents,
        cfg.controller.name(),
        result.collisions,
        result.all_success,
        result.episode_time
    );

    let write_start = Instant::now();
    let trace = out_dir.join("trace.csv");
    let metrics_path = out_dir.join("metrics.json");
    write(&trace, &trace_csv(&result.trace))?;
    write(&metrics_path, &metrics(&cfg, &result))?;
    let manifest = RunManifest {
        tool: env!("CARGO_BIN_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "run",
        config: &cfg,
        extra: (),
        artifacts: vec![trace, metrics_path],
        timings: Timings {
            simulate_s,
            write_s: write_start.elapsed().as_secs_f64(),
            total_s: 0.0,
        },
    };
    write_manifest(out_dir, manifest, started)
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub controllers: Vec<ControllerKind>,
    pub agents: Vec<usize>,
    pub seeds: usize,
}

#[derive(Debug, Serialize)]
struct SweepInfo<'a> {
    controllers: Vec<&'a str>,
    agents: &'a [usize],
    seeds: Vec<u64>,
}

/// Episode summary kept per cell; the trace is dropped to bound memory.
fn summarize(mut r: EpisodeResult) -> EpisodeResult {
    r.trace = Vec::new();
    r
}

pub const TABLE_HEADER: &str = "n_agents,controller,runs,success_rate,collisions_mean,collisions_std,completion_mean_s,completion_std_s";
pub const TIMINGS_HEADER: &str = "n_agents,controller,runs,solve_ms_mean,solve_ms_std";

pub fn cmd_compare(
    config: Option<&Path>,
    overrides: &Overrides,
    sweep: &Sweep,
    out_dir: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    if sweep.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let base = load_config(config, overrides)?;
    let seeds: Vec<u64> = (0..sweep.seeds as u64).map(|k| base.seed.wrapping_add(k)).collect();

    // Every cell is validated before any episode runs.
    let mut cells = Vec::new();
    for &n in &sweep.agents {
        for &k in &sweep.controllers {
            let cfg = base.clone().with_agents(n).with_controller(k);
            cfg.validate().map_err(|e| CliError::Usage(format!("cell ({n}, {}): {e}", k.name())))?;
            cells.push(cfg);
        }
    }
    prepare_dir(out_dir)?;

    let jobs: Vec<ScenarioConfig> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(|&s| c.clone().with_seed(s)))
        .collect();
    let results: Vec<EpisodeResult> = jobs.par_iter().map(|c| summarize(run_episode(c))).collect();
    let simulate_s = started.elapsed().as_secs_f64();

    let write_start = Instant::now();
    let mut table = format!("{TABLE_HEADER}\n");
    let mut timings = format!("{TIMINGS_HEADER}\n");
    for (cfg, chunk) in cells.iter().zip(results.chunks(seeds.len())) {
        let s = aggregate(chunk);
        let (n, k) = (cfg.n_agents, cfg.controller.name());
        writeln!(
            table,
            "{n},{k},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.runs, s.success_rate, s.collisions.mean, s.collisions.std, s.episode_time.mean, s.episode_time.std
        )
        .unwrap();
        writeln!(timings, "{n},{k},{},{:.6},{:.6}", s.runs, s.solve_ms.mean, s.solve_ms.std).unwrap();
        log::info!("({n}, {k}): success {:.2}, collisions {:.2}", s.success_rate, s.collisions.mean);
    }
    let table_path = out_dir.join("table.csv");
    let timings_path = out_dir.join("timings.csv");
    write(&table_path, &table)?;
    write(&timings_path, &timings)?;

    let manifest = RunManifest {
        tool: env!("CARGO_BIN_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "compare",
        config: &base,
        extra: SweepInfo {
            controllers: sweep.controllers.iter().map(|k| k.name()).collect(),
            agents: &sweep.agents,
            seeds,
        },
        artifacts: vec![table_path, timings_path],
        timings: Timings {
            simulate_s,
            write_s: write_start.elapsed().as_secs_f64(),
            total_s: 0.0,
        },
    };
    write_manifest(out_dir, manifest, started)
}

pub fn cmd_plot(trace: &Path, out_svg: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(trace).map_err(|e| CliError::Trace {
        path: trace.to_path_buf(),
        line: 0,
        message: format!("cannot read: {e}"),
    })?;
    let paths = plot::parse_trace(&text, trace)?;
    if let Some(dir) = out_svg.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    write(out_svg, &plot::render_svg(&paths))
}
