use gesture_lang::session::metrics::report_metrics;
use gesture_lang::session::scenario::*;
use gesture_lang::session::*;

fn run(name: &str, mode: Mode) -> (ScenarioReport, Vec<OutboundMessage>) {
    run_scenario(name, mode, SessionSource::Scripted, &SessionConfig::default(), 7).unwrap()
}

#[test]
fn put_in_bowl_high_level_takes_three_episodes() {
    let (r, _) = run("put-in-bowl", Mode::HighLevelGesture);
    assert!(r.success);
    assert_eq!(r.interaction_events, 3);
    assert_eq!(r.intents, vec!["(move, mug, [bowl, 50%])"]);
}

#[test]
fn occupied_bowl_relocates_cheese_first() {
    let (r, log) = run("put-in-occupied-bowl", Mode::HighLevelGesture);
    assert!(r.success);
    let grasp_cheese = r.primitives.iter().position(|p| p == "grasp(cheese)").expect("cheese moved out");
    let grasp_mug = r.primitives.iter().position(|p| p == "grasp(mug)").unwrap();
    assert!(grasp_cheese < grasp_mug);
    assert!(log.iter().any(|m| matches!(&m.body, Outbound::Tick { record, .. } if record.goal.contains("cheese"))));
}

#[test]
fn swap_teleop_needs_five_times_the_gestures() {
    let (t, _) = run("swap", Mode::Teleop);
    let (g, _) = run("swap", Mode::HighLevelGesture);
    assert!(t.success && g.success);
    assert!(t.interaction_events >= 5 * g.interaction_events, "{} vs {}", t.interaction_events, g.interaction_events);
}

#[test]
fn every_scenario_succeeds_in_gesture_modes() {
    for s in catalog() {
        for mode in [Mode::HighLevelGesture, Mode::LowLevelGesture] {
            let (r, _) = run(s.name, mode);
            assert!(r.success, "{} {mode}: {:?}", s.name, r.failure_reason);
            assert!(r.interaction_events <= r.input_events);
        }
    }
}

#[test]
fn closed_drawer_is_opened_first() {
    let (r, log) = run("put-in-closed-drawer", Mode::HighLevelGesture);
    assert!(r.success);
    assert_eq!(r.primitives[..2], ["approach(drawer)".to_string(), "open_drawer(drawer)".to_string()]);
    let plan = log.iter().find_map(|m| match &m.body {
        Outbound::Plan { tree, .. } => Some(tree.clone()),
        _ => None,
    });
    assert!(plan.unwrap().contains("open_drawer(drawer)"));
}

#[test]
fn unknown_scenario_and_unsupported_teleop() {
    let cfg = SessionConfig::default();
    assert!(matches!(run_scenario("juggle", Mode::Teleop, SessionSource::Scripted, &cfg, 0), Err(ScenarioError::Unknown(_))));
    assert!(matches!(
        run_scenario("pour2", Mode::Teleop, SessionSource::Scripted, &cfg, 0),
        Err(ScenarioError::TeleopUnsupported(_))
    ));
}

#[test]
fn recorded_source_replays_like_scripted() {
    let s = find("swap").unwrap();
    let file = SessionFile::parse(&s.session(Mode::Teleop, 7).unwrap().to_text()).unwrap();
    let cfg = SessionConfig::default();
    let (a, _) = run_scenario("swap", Mode::Teleop, SessionSource::Recorded(file), &cfg, 7).unwrap();
    let (b, _) = run("swap", Mode::Teleop);
    assert_eq!(a, b);
}

#[test]
fn metrics_table_has_nine_rows() {
    let mut reports = Vec::new();
    for name in EVALUATED {
        for mode in Mode::ALL {
            reports.push(run(name, mode).0);
        }
    }
    let table = report_metrics(&reports);
    assert_eq!(table.rows.len(), 9);
    for name in EVALUATED {
        let t = table.row(name, Mode::Teleop).unwrap();
        let g = table.row(name, Mode::HighLevelGesture).unwrap();
        assert!(g.median_interactions < t.median_interactions);
        let red = g.reduction.unwrap();
        assert!((red - (1.0 - g.median_interactions / t.median_interactions)).abs() < 1e-12);
        assert!(t.reduction.is_none());
    }
    let text = table.to_string();
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn robustness_has_no_unexplained_runs() {
    let s = find("put-in-occupied-bowl").unwrap();
    let r = robustness(&s, 30, 5, 200).unwrap();
    assert_eq!(r.runs, 30);
    assert_eq!(r.successes + r.explained_failures, 30);
    assert!(r.all_accounted(), "{r:?}");
}

#[test]
fn golden_session_replays_to_golden_report() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/thumbsup-move.jsonl")).unwrap();
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/thumbsup-move.report.json")).unwrap();
    let file = SessionFile::parse(&text).unwrap();
    let cfg = SessionConfig::default();
    let (r1, l1) = replay(&file, &cfg).unwrap();
    let (r2, l2) = replay(&file, &cfg).unwrap();
    assert_eq!(r1.intents, vec!["(move, mug, [bowl, 50%])"]);
    assert_eq!(r1.to_json() + "\n", golden);
    assert_eq!(r1.to_json(), r2.to_json());
    assert_eq!(to_jsonl(&l1), to_jsonl(&l2));
}
