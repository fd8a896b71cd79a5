use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{yaw_close, Goal};
use crate::simworld::{feasible, Dest, ObjectId, Primitive, WorldState};

/// Gripper-level conditions used inside goal subtrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cond {
    Goal { goal: Goal },
    Holding { object: ObjectId },
    At { object: ObjectId },
    Lifted,
    /// Nothing held, or the held object is lifted.
    CanMove,
    Over { dest: Dest, yaw: Option<f64> },
}

impl Cond {
    pub fn holds(&self, w: &WorldState) -> bool {
        let g = &w.gripper;
        match self {
            Cond::Goal { goal } => goal.holds(w),
            Cond::Holding { object } => g.holding.as_ref() == Some(object),
            Cond::At { object } => g.at.as_ref() == Some(object),
            Cond::Lifted => g.lifted,
            Cond::CanMove => g.holding.is_none() || g.lifted,
            Cond::Over { dest, yaw } => g.over.as_ref() == Some(dest) && yaw.is_none_or(|y| yaw_close(g.pose.yaw, y)),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Goal { goal } => write!(f, "{goal}"),
            Cond::Holding { object } => write!(f, "holding?({object})"),
            Cond::At { object } => write!(f, "at?({object})"),
            Cond::Lifted => f.write_str("lifted?"),
            Cond::CanMove => f.write_str("can_move?"),
            Cond::Over { dest, .. } => match dest {
                Dest::Above(o) => write!(f, "over?({o})"),
                Dest::Table(p) => write!(f, "over?(table {:.2},{:.2})", p.x, p.y),
                Dest::Point(p) => write!(f, "over?({:.2},{:.2},{:.2})", p.x, p.y, p.z),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Condition { cond: Cond },
    Action { primitive: Primitive },
    Sequence { children: Vec<Node> },
    Fallback { children: Vec<Node> },
}

/// Why a tick could not make progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailReason {
    /// Node that failed.
    pub node: String,
    pub reason: String,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.reason)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Success,
    Running { primitive: Primitive },
    Failure { reason: FailReason },
}

fn cond(c: Cond) -> Node {
    Node::Condition { cond: c }
}

fn act(p: Primitive) -> Node {
    Node::Action { primitive: p }
}

fn seq(children: Vec<Node>) -> Node {
    Node::Sequence { children }
}

fn fallback(children: Vec<Node>) -> Node {
    Node::Fallback { children }
}

fn grasped(x: &ObjectId) -> Node {
    fallback(vec![
        cond(Cond::Holding { object: x.clone() }),
        seq(vec![
            fallback(vec![cond(Cond::At { object: x.clone() }), act(Primitive::Approach { object: x.clone() })]),
            act(Primitive::Grasp { object: x.clone() }),
        ]),
    ])
}

fn lifted() -> Node {
    fallback(vec![cond(Cond::Lifted), act(Primitive::Lift)])
}

fn movable() -> Node {
    fallback(vec![cond(Cond::CanMove), act(Primitive::Lift)])
}

fn over(dest: Dest, yaw: Option<f64>) -> Node {
    fallback(vec![
        cond(Cond::Over { dest: dest.clone(), yaw }),
        act(Primitive::MoveTo { dest, yaw }),
    ])
}

/// Postcondition–precondition–action subtree for one goal.
fn goal_tree(goal: &Goal, w: &WorldState) -> Node {
    let body = match goal {
        Goal::Placed { object, target, yaw } => seq(vec![
            grasped(object),
            lifted(),
            over(target.dest(), *yaw),
            act(Primitive::Release),
        ]),
        Goal::Holding { object } => seq(vec![grasped(object), lifted()]),
        Goal::DrawerOpen { drawer } | Goal::DrawerClosed { drawer } => {
            let p = if matches!(goal, Goal::DrawerOpen { .. }) {
                Primitive::OpenDrawer { drawer: drawer.clone() }
            } else {
                Primitive::CloseDrawer { drawer: drawer.clone() }
            };
            seq(vec![
                fallback(vec![cond(Cond::At { object: drawer.clone() }), act(Primitive::Approach { object: drawer.clone() })]),
                act(p),
            ])
        }
        Goal::Poured { source, target, angle } => seq(vec![
            grasped(source),
            lifted(),
            over(Dest::Above(target.clone()), None),
            act(Primitive::Tilt { angle: *angle }),
        ]),
        Goal::GripperYaw { yaw, .. } => seq(vec![
            movable(),
            act(Primitive::MoveTo { dest: Dest::Point(w.gripper.pose.position), yaw: Some(*yaw) }),
        ]),
        Goal::GripperAt { position } => seq(vec![
            movable(),
            act(Primitive::MoveTo { dest: Dest::Point(*position), yaw: None }),
        ]),
    };
    fallback(vec![cond(Cond::Goal { goal: goal.clone() }), body])
}

/// Sequence of goal subtrees, in order.
pub fn build_tree(goals: &[Goal], w: &WorldState) -> Node {
    seq(goals.iter().map(|g| goal_tree(g, w)).collect())
}

fn tick_node(node: &Node, w: &WorldState, trace: &mut Vec<(usize, String, Option<Status>)>, depth: usize) -> Status {
    let slot = trace.len();
    trace.push((depth, label(node), None));
    let s = match node {
        Node::Condition { cond } => {
            if cond.holds(w) {
                Status::Success
            } else {
                Status::Failure {
                    reason: FailReason { node: cond.to_string(), reason: "false".into() },
                }
            }
        }
        Node::Action { primitive } => match feasible(w, primitive) {
            Ok(()) => Status::Running { primitive: primitive.clone() },
            Err(r) => Status::Failure {
                reason: FailReason { node: primitive.to_string(), reason: r.to_string() },
            },
        },
        Node::Sequence { children } => {
            let mut out = Status::Success;
            for c in children {
                out = tick_node(c, w, trace, depth + 1);
                if out != Status::Success {
                    break;
                }
            }
            out
        }
        Node::Fallback { children } => {
            let mut out = Status::Failure {
                reason: FailReason { node: "fallback".into(), reason: "no children".into() },
            };
            for c in children {
                out = tick_node(c, w, trace, depth + 1);
                if !matches!(out, Status::Failure { .. }) {
                    break;
                }
            }
            out
        }
    };
    trace[slot].2 = Some(s.clone());
    s
}

fn label(node: &Node) -> String {
    match node {
        Node::Condition { cond } => cond.to_string(),
        Node::Action { primitive } => primitive.to_string(),
        Node::Sequence { .. } => "->".into(),
        Node::Fallback { .. } => "?".into(),
    }
}

/// Ticks `tree` once. A running status names the single primitive to
/// execute next.
pub fn tick(tree: &Node, w: &WorldState) -> Status {
    tick_node(tree, w, &mut Vec::new(), 0)
}

/// Tree rendering with the status of every visited node after one tick:
/// `S` success, `F` failure, `R` running, `.` not reached.
pub fn explain(tree: &Node, w: &WorldState) -> String {
    let mut trace = Vec::new();
    tick_node(tree, w, &mut trace, 0);
    let mut visited = trace.into_iter().peekable();
    let mut out = String::new();
    render(tree, 0, &mut visited, &mut out);
    out
}

fn render(
    node: &Node,
    depth: usize,
    visited: &mut std::iter::Peekable<std::vec::IntoIter<(usize, String, Option<Status>)>>,
    out: &mut String,
) {
    let l = label(node);
    let mark = match visited.peek() {
        Some((d, name, s)) if *d == depth && *name == l => {
            let m = match s {
                Some(Status::Success) => 'S',
                Some(Status::Running { .. }) => 'R',
                Some(Status::Failure { .. }) => 'F',
                None => '.',
            };
            visited.next();
            m
        }
        _ => '.',
    };
    let _ = writeln!(out, "{}[{mark}] {l}", "  ".repeat(depth));
    if let Node::Sequence { children } | Node::Fallback { children } = node {
        for c in children {
            render(c, depth + 1, visited, out);
        }
    }
}

impl Node {
    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Node::Sequence { children } | Node::Fallback { children } => 1 + children.iter().map(Node::size).sum::<usize>(),
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Target;
    use crate::simworld::{apply, scenes};

    fn run_to_success(goals: &[Goal], mut w: WorldState) -> (WorldState, usize) {
        for n in 0..50 {
            let tree = build_tree(goals, &w);
            match tick(&tree, &w) {
                Status::Success => return (w, n),
                Status::Running { primitive } => w = apply(&w, &primitive).unwrap(),
                Status::Failure { reason } => panic!("{reason}"),
            }
        }
        panic!("no success");
    }

    #[test]
    fn place_runs_five_primitives() {
        let w = scenes::tabletop();
        let g = Goal::Placed { object: "mug".into(), target: Target::In("bowl".into()), yaw: None };
        let (w, n) = run_to_success(std::slice::from_ref(&g), w);
        assert_eq!(n, 5);
        assert!(g.holds(&w));
    }

    #[test]
    fn failure_names_blocker() {
        let w = scenes::stacked();
        let g = Goal::Holding { object: "spam".into() };
        let tree = build_tree(&[g], &w);
        let w = apply(&w, &Primitive::Approach { object: "spam".into() }).unwrap();
        match tick(&tree, &w) {
            Status::Failure { reason } => assert_eq!(reason.to_string(), "grasp(spam): occluded-by(cheese)"),
            s => panic!("{s:?}"),
        }
        let text = explain(&tree, &w);
        assert!(text.contains("[F] grasp(spam)"), "{text}");
        assert!(text.contains("[S] at?(spam)"), "{text}");
    }

    #[test]
    fn explain_marks_running() {
        let w = scenes::tabletop();
        let tree = build_tree(&[Goal::DrawerOpen { drawer: "drawer".into() }], &w);
        let text = explain(&tree, &w);
        assert!(text.contains("[R] approach(drawer)"), "{text}");
        assert!(text.contains("[.] open_drawer(drawer)"), "{text}");
        assert_eq!(text.lines().count(), tree.size());
    }

    #[test]
    fn pour_and_rotate() {
        let w = scenes::tabletop();
        let g = Goal::Poured { source: "can".into(), target: "bowl".into(), angle: 60.0 };
        let (w, _) = run_to_success(&[g], w);
        assert_eq!(w.objects["bowl"].fill, 1.0);
        let yaw = std::f64::consts::FRAC_PI_2;
        let (w, n) = run_to_success(&[Goal::GripperYaw { object: "can".into(), yaw }], w);
        assert_eq!(n, 1);
        assert!((w.objects["can"].pose.yaw - yaw).abs() < 1e-12);
    }
}
