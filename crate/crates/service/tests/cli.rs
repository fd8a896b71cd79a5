use clap::Parser;
use gesture_service::cli::{execute, Cli};

fn run(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("gesture").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    execute(&cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn golden(name: &str) -> String {
    format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn replay_matches_golden_report() {
    let out = run(&["replay", &golden("thumbsup-move.jsonl")]).unwrap();
    assert_eq!(out, std::fs::read_to_string(golden("thumbsup-move.report.json")).unwrap());
    assert_eq!(out, run(&["replay", &golden("thumbsup-move.jsonl")]).unwrap());
}

#[test]
fn run_default_prints_metrics_table() {
    let out = run(&["run"]).unwrap();
    let table: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("scenario")).collect();
    assert_eq!(table.len(), 10, "{out}");
    assert_eq!(out.lines().filter(|l| l.contains("success interactions")).count(), 9);
}

#[test]
fn run_single_scenario_as_json() {
    let out = run(&["run", "put-in-bowl", "--mode", "high", "--json"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["interaction_events"], 3);
    assert_eq!(v[0]["success"], true);
}

#[test]
fn recorded_session_round_trip() {
    let dir = std::env::temp_dir().join(format!("gesture-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let session = dir.join("swap.jsonl");
    let log = dir.join("swap.log.jsonl");
    let s = session.to_str().unwrap();
    let a = run(&["run", "swap", "--mode", "teleop", "--record", s, "--log", log.to_str().unwrap()]).unwrap();
    let b = run(&["run", "swap", "--mode", "teleop", "--session", s]).unwrap();
    assert_eq!(a, b);
    assert!(std::fs::read_to_string(&log).unwrap().lines().count() > 100);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn explain_shows_drawer_opened_first() {
    let out = run(&["explain", "put-in-closed-drawer", "--trace"]).unwrap();
    assert!(out.contains("[R] approach(drawer)"), "{out}");
    let first = out.lines().find(|l| l.starts_with("tick ")).unwrap();
    assert_eq!(first, "tick 0: approach(drawer) ok");
    assert!(out.lines().any(|l| l.starts_with("tick 1: open_drawer(drawer)")));
    assert!(out.trim_end().ends_with("outcome succeeded"), "{out}");
}

#[test]
fn bench_orders_methods() {
    let out = run(&["bench", "--json"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["static_probabilistic"].as_f64() > v["static_rules"].as_f64());
    assert!(v["dynamic_dtw"].as_f64() > v["dynamic_euclidean"].as_f64());
}

#[test]
fn plot_episode_table_has_activation_columns() {
    let out = run(&["plot-episode", "--scenario", "put-in-bowl"]).unwrap();
    let header = out.lines().next().unwrap();
    assert!(header.starts_with("t\tp_"));
    assert!(header.contains("on_thumbsup") && header.contains("on_swipe_down"));
    let events = run(&["plot-episode", "--scenario", "put-in-bowl", "--events"]).unwrap();
    assert_eq!(events.lines().count(), 4);
}

#[test]
fn errors_are_reported() {
    assert!(run(&["run", "juggle", "--mode", "teleop"]).unwrap_err().to_string().contains("juggle"));
    assert!(run(&["run", "pour2", "--mode", "teleop"]).is_err());
    assert!(run(&["run", "swap", "--log", "x.jsonl"]).is_err());
    assert!(run(&["replay", "/nonexistent.jsonl"]).unwrap_err().to_string().contains("nonexistent"));
    assert!(run(&["--mode", "sideways", "run"]).is_err());
    assert!(run(&["--config", "/nonexistent.toml", "scenarios"]).is_err());
}

#[test]
fn config_file_is_applied() {
    let dir = std::env::temp_dir().join(format!("gesture-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("c.toml");
    std::fs::write(&p, "[execution]\ntick_period = 0.5\n").unwrap();
    let out = run(&["--config", p.to_str().unwrap(), "run", "put-in-bowl", "--mode", "high", "--json"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["success"], true);
    std::fs::write(&p, "[execution]\ntick_period = -1\n").unwrap();
    assert!(run(&["--config", p.to_str().unwrap(), "scenarios"]).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}
