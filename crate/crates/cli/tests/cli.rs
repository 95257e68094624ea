use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vocbf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vocbf"))
        .args(args)
        .current_dir(dir)
        .env("NAV_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Short two-agent scenario so each episode takes milliseconds.
const SHORT: &str = "n_agents = 2\ncircle_radius_m = 2\nsimulation_time_s = 8\n";

fn short_config(dir: &Path) -> String {
    fs::write(dir.join("short.toml"), SHORT).unwrap();
    "short.toml".into()
}

#[test]
fn run_writes_three_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path());
    let o = vocbf(&["run", "--config", &cfg, "--out-dir", "r"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("r");
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "metrics.json", "trace.csv"]);

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["tool"], "vocbf");
    assert_eq!(manifest["config"]["circle_radius_m"], 2.0);
    assert!(manifest["timings"]["total_s"].as_f64().unwrap() >= 0.0);
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(tmp.path().join(a.as_str().unwrap()).exists(), "{a}");
    }
    let metrics = json(&out.join("metrics.json"));
    assert_eq!(metrics["collisions"], 0);
    assert_eq!(metrics["all_success"], true);
}

#[test]
fn seed_override_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path());
    let o = vocbf(&["run", "--config", &cfg, "--seed", "7", "--out-dir", "r"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&tmp.path().join("r/metrics.json"))["seed"], 7);
    assert_eq!(json(&tmp.path().join("r/manifest.json"))["config"]["seed"], 7);
}

#[test]
fn config_errors_exit_2_with_line_and_field() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.toml"), "n_agents = 2\n\ncontroller = \"orca\"\n").unwrap();
    let o = vocbf(&["run", "--config", "bad.toml", "--out-dir", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bad.toml:3") && e.contains("controller"), "{e}");
    assert!(!tmp.path().join("r").exists());

    fs::write(tmp.path().join("neg.toml"), "# dt\ntimestep_s = -0.01\n").unwrap();
    let o = vocbf(&["run", "--config", "neg.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("neg.toml:2") && stderr(&o).contains("timestep_s"), "{}", stderr(&o));

    let o = vocbf(&["run", "--config", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = vocbf(&["run", "--controller", "orca"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path());
    // The output directory is a regular file.
    fs::write(tmp.path().join("taken"), "").unwrap();
    let o = vocbf(&["run", "--config", &cfg, "--out-dir", "taken"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn compare_single_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = short_config(tmp.path());
    let args = ["compare", "--config", &cfg, "--controller", "ours", "--agents", "2", "--seeds", "1", "--out-dir", "c"];
    let o = vocbf(&args, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("c/table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n_agents,controller,"));
    assert!(lines[1].starts_with("2,ours,1,1.000000,0.000000,"), "{}", lines[1]);
    assert!(tmp.path().join("c/timings.csv").exists());
    assert_eq!(json(&tmp.path().join("c/manifest.json"))["seeds"], serde_json::json!([0]));
}

#[test]
fn compare_sweep_is_cartesian_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("tiny.toml"),
        "circle_radius_m = 2\nsimulation_time_s = 0.5\nn_sampling_points = 20\n",
    )
    .unwrap();
    let run = |out: &str| {
        let args = ["compare", "--config", "tiny.toml", "--seeds", "2", "--seed", "5", "--out-dir", out];
        let o = vocbf(&args, tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(tmp.path().join(out).join("table.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 20);
    for n in ["2", "4", "8", "12"] {
        for k in ["ours", "vo", "rvo", "hvo", "ovvo"] {
            assert!(rows.contains(&(n.to_string(), k.to_string())), "missing ({n}, {k})");
        }
    }
}

#[test]
fn plot_draws_one_polyline_per_agent() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("eight.toml"), "n_agents = 8\nsimulation_time_s = 3\n").unwrap();
    let o = vocbf(&["run", "--config", "eight.toml", "--out-dir", "r"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = vocbf(&["plot", "r/trace.csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("r/trajectories.svg")).unwrap();
    assert!(svg.starts_with("<svg ") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 8);
    assert_eq!(svg.matches(r#"class="start""#).count(), 8);
    assert_eq!(svg.matches(r#"class="goal""#).count(), 8);
    assert!(svg.contains(r#"class="scale-bar""#));
}

#[test]
fn plot_straight_line() {
    let tmp = TempDir::new().unwrap();
    let header = "t,agent_id,px,py,vx,vy,ux,uy,theta,speed,min_h_c,min_h_vo";
    let rows: String = (0..5).map(|k| format!("{k},0,{k},0,1,0,0,0,,,,\n")).collect();
    fs::write(tmp.path().join("line.csv"), format!("{header}\n{rows}")).unwrap();
    let o = vocbf(&["plot", "line.csv", "-o", "p/line.svg"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(tmp.path().join("p/line.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<&str> = points.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert!(ys.iter().all(|y| *y == ys[0]), "{points}");
}

#[test]
fn plot_rejects_empty_and_malformed_traces() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("empty.csv"), "").unwrap();
    fs::write(tmp.path().join("junk.csv"), "hello\n1,2\n").unwrap();
    for f in ["empty.csv", "junk.csv", "absent.csv"] {
        let o = vocbf(&["plot", f], tmp.path());
        assert_eq!(o.status.code(), Some(2), "{f}: {}", stderr(&o));
    }
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vocbf"))
        .args(["run", "--out-dir", "r"])
        .current_dir(tmp.path())
        .env("NAV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
