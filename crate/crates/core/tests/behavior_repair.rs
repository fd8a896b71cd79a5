use gesture_lang::behavior::*;
use gesture_lang::sentence::{Action, AuxParam, Intent, Reference};
use gesture_lang::simworld::{scenes, Support, WorldState};

fn loc(id: &str) -> AuxParam {
    AuxParam::Location(Reference::Object(id.into()))
}

fn run(name: &str, intents: &[Intent], w: &WorldState) -> ExecutionReport {
    let task = Task::from_intents(name, intents, w).unwrap();
    execute(&task, w, &mut SimExecutor::reliable(), &ExecOptions::default())
}

fn assert_clean(r: &ExecutionReport) {
    assert!(r.outcome.is_success(), "{}: {}", r.task, r.outcome);
    assert_eq!(r.infeasible_executions, 0);
    assert!(r.invariant_violations.is_empty(), "{:?}", r.invariant_violations);
}

#[test]
fn stack_three() {
    let w = scenes::tabletop();
    let r = run(
        "stack3",
        &[
            Intent::new(Action::Move, Some("cheese"), vec![loc("spam")]),
            Intent::new(Action::Move, Some("can"), vec![loc("cheese")]),
        ],
        &w,
    );
    assert_clean(&r);
    assert_eq!(r.world.stack_above("spam"), vec!["cheese".to_string(), "can".to_string()]);
}

#[test]
fn tidy_three_into_closed_drawer() {
    let w = scenes::tabletop();
    let intents: Vec<Intent> = ["can", "spam", "cheese"]
        .iter()
        .map(|o| Intent::new(Action::Put, Some(o), vec![loc("drawer")]))
        .collect();
    let r = run("tidy3", &intents, &w);
    assert_clean(&r);
    assert_eq!(r.world.contents("drawer").len(), 3);
    assert_eq!(r.primitives.iter().filter(|p| p.name() == "open_drawer").count(), 1);
}

#[test]
fn pour_two() {
    let w = scenes::tabletop();
    let r = run(
        "pour2",
        &[
            Intent::new(Action::Pour, Some("can"), vec![loc("bowl")]),
            Intent::new(Action::Pour, Some("mug"), vec![loc("bowl")]),
        ],
        &w,
    );
    assert_clean(&r);
    assert_eq!(r.world.objects["bowl"].received_from, vec!["can".to_string(), "mug".to_string()]);
}

#[test]
fn swap_and_rotate() {
    let w = scenes::tabletop();
    let (pc, pb) = (w.objects["can"].pose.xy(), w.objects["bowl"].pose.xy());
    let r = run("swap", &[Intent::new(Action::Swap, Some("can"), vec![loc("bowl")])], &w);
    assert_clean(&r);
    assert!((r.world.objects["can"].pose.xy() - pb).norm() < 1e-9);
    assert!((r.world.objects["bowl"].pose.xy() - pc).norm() < 1e-9);
    assert_eq!(r.primitives.iter().filter(|p| p.name() == "release").count(), 3);
    let r = run("rotate", &[Intent::new(Action::Rotate, Some("spam"), vec![AuxParam::Angle(180.0)])], &w);
    assert_clean(&r);
    assert!((r.world.objects["spam"].pose.yaw.abs() - std::f64::consts::PI).abs() < 1e-9);
}

fn permutations(items: &[&'static str]) -> Vec<Vec<&'static str>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn stacked_as(order: &[&str]) -> WorldState {
    let mut w = scenes::tabletop();
    for pair in order.windows(2) {
        w.objects.get_mut(pair[1]).unwrap().support = Some(Support::On(pair[0].into()));
    }
    w.settle();
    w.validate().unwrap();
    w
}

/// Every initial stack order against every goal stack order: the goals
/// returned by precondition resolution are always achievable in sequence
/// and the task ends with the goal stack.
#[test]
fn stack_permutations_brute_force() {
    let objs = ["can", "spam", "cheese"];
    let mut runs = 0;
    for initial in permutations(&objs) {
        let w = stacked_as(&initial);
        for goal in permutations(&objs) {
            let intents = vec![
                Intent::new(Action::Move, Some(goal[1]), vec![loc(goal[0])]),
                Intent::new(Action::Move, Some(goal[2]), vec![loc(goal[1])]),
            ];
            let task = Task::from_intents("stack", &intents, &w).unwrap();
            let mut res = Reservations::default();
            let mut cur = w.clone();
            for _ in 0..DEFAULT_TICK_BUDGET {
                if task.holds(&cur) {
                    break;
                }
                let goals = resolve_preconditions(&task, &cur, &mut res).unwrap();
                match tick(&build_tree(&goals, &cur), &cur) {
                    Status::Running { primitive } => {
                        cur = gesture_lang::simworld::apply(&cur, &primitive).unwrap();
                        cur.validate().unwrap();
                    }
                    s => panic!("{initial:?} -> {goal:?}: {s:?}"),
                }
            }
            assert!(task.holds(&cur), "{initial:?} -> {goal:?}");
            assert_eq!(cur.stack_above(goal[0]), vec![goal[1].to_string(), goal[2].to_string()]);
            runs += 1;
        }
    }
    assert_eq!(runs, 36);
}
