use gesture_lang::classify::Channel;
use gesture_lang::episode::GestureEvent;
use gesture_lang::geometry::Vec3;
use gesture_lang::session::scenario::{replay, session_report};
use gesture_lang::session::*;
use gesture_lang::simworld::scenes;

fn header(mode: Mode) -> SessionHeader {
    SessionHeader { scene: Some("tabletop".into()), mode, seed: 3, ..Default::default() }
}

fn ev(label: &str, channel: Channel, start: f64, target: Option<&str>) -> GestureEvent {
    let mut e = GestureEvent::new(label, channel, start, start + 0.5, 0.99);
    e.target = target.map(String::from);
    e
}

fn thumbsup_events(t0: f64) -> Vec<Vec<GestureEvent>> {
    let mut pinch = ev("pinch", Channel::Static, t0 + 3.0, None);
    pinch.pinch = Some(0.05);
    vec![
        vec![ev("thumbsup", Channel::Static, t0, None)],
        vec![ev("point", Channel::Deictic, t0 + 1.0, Some("mug"))],
        vec![ev("point", Channel::Deictic, t0 + 2.0, Some("bowl"))],
        vec![pinch],
    ]
}

fn kinds(log: &[OutboundMessage]) -> Vec<&'static str> {
    log.iter().map(|m| m.body.kind()).collect()
}

#[test]
fn synthetic_episodes_give_thumbsup_intent() {
    let mut f = SessionFile::new(header(Mode::HighLevelGesture));
    for (k, events) in thumbsup_events(0.0).into_iter().enumerate() {
        f.push(k as f64 + 0.6, Inbound::Episode { events });
    }
    let (report, log) = replay(&f, &SessionConfig::default()).unwrap();
    assert!(report.success, "{report:?}");
    assert_eq!(report.intents, vec!["(move, mug, [bowl, 50%])"]);
    assert_eq!(report.interaction_events, 4);
    assert!(report.interaction_events <= report.input_events);
    let k = kinds(&log);
    let intent = k.iter().position(|k| *k == "intent").unwrap();
    let plan = k.iter().position(|k| *k == "plan").unwrap();
    let outcome = k.iter().position(|k| *k == "outcome").unwrap();
    assert!(intent < plan && plan < outcome);
    assert!(log.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    assert!(log.windows(2).all(|w| w[1].t >= w[0].t - 1e-9), "timestamps go backwards");
}

#[test]
fn empty_session_reports_no_intent() {
    for mode in Mode::ALL {
        let (r, log) = replay(&SessionFile::new(header(mode)), &SessionConfig::default()).unwrap();
        assert!(!r.success);
        assert_eq!(r.failure_reason.as_deref(), Some("no-intent"));
        assert_eq!(r.input_events, 0);
        assert!(log.is_empty());
    }
}

#[test]
fn mode_switch_pauses_and_resumes_plan() {
    let mut s = Session::new(header(Mode::HighLevelGesture), SessionConfig::default()).unwrap();
    let mut seq = 0;
    let mut send = |s: &mut Session, t: f64, body: Inbound| {
        seq += 1;
        s.handle(&Envelope::new(seq, t, body))
    };
    for (k, events) in thumbsup_events(0.0).into_iter().enumerate() {
        send(&mut s, k as f64 + 0.6, Inbound::Episode { events });
    }
    assert!(s.is_busy());
    // one tick into the plan, the operator takes over
    let out = send(&mut s, 3.75, Inbound::Mode { mode: Mode::Teleop });
    let ack = out.iter().find(|m| m.body.kind() == "mode").unwrap();
    assert_eq!(ack.body, Outbound::Mode { mode: Mode::Teleop, paused: true });
    let before = s.world().clone();
    for k in 0..10 {
        let out = send(&mut s, 4.0 + 0.05 * k as f64, Inbound::Teleop { palm: Vec3::new(0.0, 0.1, 0.4), yaw: 0.0, grip: false });
        assert!(out.iter().all(|m| !matches!(m.body, Outbound::Tick { .. })), "executor ticked in teleop");
    }
    assert_ne!(s.world().gripper.pose, before.gripper.pose);
    let out = send(&mut s, 5.0, Inbound::Mode { mode: Mode::HighLevelGesture });
    assert!(out.iter().any(|m| m.body == Outbound::Mode { mode: Mode::HighLevelGesture, paused: false }));
    send(&mut s, 8.0, Inbound::Tick);
    s.finish();
    let r = session_report(&s).unwrap();
    assert!(r.success, "{r:?}");
    assert!(!s.is_busy());
}

#[test]
fn teleop_input_outside_teleop_is_an_error() {
    let mut s = Session::new(header(Mode::HighLevelGesture), SessionConfig::default()).unwrap();
    let out = s.handle(&Envelope::new(1, 0.0, Inbound::Teleop { palm: Vec3::zeros(), yaw: 0.0, grip: true }));
    assert!(matches!(out[0].body, Outbound::Error { .. }));
}

#[test]
fn ray_highlights_grid_object() {
    let mut s = Session::new(
        SessionHeader { scene: Some("grid9".into()), ..Default::default() },
        SessionConfig::default(),
    )
    .unwrap();
    let w = scenes::grid9();
    for (k, (id, o)) in w.objects.iter().enumerate() {
        let to = o.pose.position;
        let from = to + Vec3::new(0.05, -0.2, 0.4);
        let out = s.handle(&Envelope::new(k as u64 + 1, 0.0, Inbound::Ray { from, to }));
        match &out[0].body {
            Outbound::Deictic { target, .. } => assert_eq!(target.as_deref(), Some(id.as_str())),
            b => panic!("{b:?}"),
        }
    }
}

#[test]
fn scripted_pointing_streams_highlights() {
    let mut f = SessionFile::new(SessionHeader { scene: Some("grid9".into()), ..Default::default() });
    let target = scenes::grid9().objects.keys().nth(4).unwrap().clone();
    f.push(0.0, Inbound::Script { script: GestureScript::new(vec![ScriptEpisode::point(&target)]) });
    let (_, log) = run_session(&f, &SessionConfig::default()).unwrap();
    let highlights: Vec<_> = log
        .iter()
        .filter_map(|m| match &m.body {
            Outbound::Deictic { target, .. } => Some(target.clone()),
            _ => None,
        })
        .collect();
    assert!(highlights.len() >= 4);
    assert!(highlights.iter().all(|t| t.as_deref() == Some(target.as_str())));
}

#[test]
fn sync_restores_state() {
    let mut s = Session::new(header(Mode::HighLevelGesture), SessionConfig::default()).unwrap();
    let events = thumbsup_events(0.0);
    s.handle(&Envelope::new(1, 0.6, Inbound::Episode { events: events[0].clone() }));
    let out = s.handle(&Envelope::new(2, 0.7, Inbound::Sync));
    assert_eq!(kinds(&out), vec!["mode", "world", "sentence"]);
    match &out[2].body {
        Outbound::Sentence { state, missing, .. } => {
            assert_eq!(*state, SentenceState::Open);
            assert_eq!(missing.len(), 2);
        }
        _ => unreachable!(),
    }
}

#[test]
fn low_level_session_builds_primitives_one_by_one() {
    let mut f = SessionFile::new(header(Mode::LowLevelGesture));
    let script = GestureScript::new(vec![ScriptEpisode::point("spam"), ScriptEpisode::pose("grab")]);
    f.push(0.0, Inbound::Script { script });
    let (s, log) = run_session(&f, &SessionConfig::default()).unwrap();
    assert_eq!(s.world().holding().map(String::as_str), Some("spam"));
    let prims: Vec<_> = log
        .iter()
        .filter_map(|m| match &m.body {
            Outbound::Primitive { primitive, ok: true, .. } => Some(primitive.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(prims, vec!["approach(spam)", "grasp(spam)"]);
}

#[test]
fn session_file_errors() {
    let bad = "{\"v\":9,\"seq\":0,\"t\":0,\"type\":\"session\"}\n";
    assert!(matches!(SessionFile::parse(bad), Err(MessageError::Version { found: 9, .. })));
    let unknown = SessionFile::parse("{\"v\":1,\"seq\":0,\"t\":0,\"type\":\"session\",\"scene\":\"moon\"}\n").unwrap();
    assert!(matches!(run_session(&unknown, &SessionConfig::default()), Err(SessionError::UnknownScene(_))));
}
