//! Scenario catalog, scripted sessions for each control mode, reports and
//! perturbation robustness runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::script::{pose, GestureScript, ScriptEpisode, Step};
use super::{header_world, run_session, Inbound, Mode, OutboundMessage, Session, SessionConfig, SessionError, SessionFile, SessionHeader};
use crate::behavior::{execute, ExecOptions, Execution, Outcome, SimExecutor, Task, TaskError};
use crate::geometry::Vec3;
use crate::sentence::{Action, AuxParam, Intent, Reference};
use crate::simworld::{apply, perturb, random_perturbation, scenes, Dest, Primitive, WorldState};

/// Scenarios compared across the three control modes.
pub const EVALUATED: [&str; 3] = ["put-in-bowl", "swap", "put-in-occupied-bowl"];

/// Teleop command rate, Hz.
pub const TELEOP_RATE: f64 = 20.0;
/// Scripted palm speed during teleoperation, m/s.
pub const TELEOP_SPEED: f64 = 0.4;
/// Height the teleoperated gripper travels at.
pub const TELEOP_HOVER: f64 = 0.35;
/// Still commands after each motion or grip change.
const TELEOP_SETTLE: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("reference plan for `{scenario}` failed: {reason}")]
    Reference { scenario: String, reason: String },
    #[error("{0} cannot be teleoperated")]
    TeleopUnsupported(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub scene: &'static str,
    pub description: &'static str,
    /// Intents whose postconditions define success.
    pub intents: Vec<Intent>,
    /// High-level gesture script.
    pub script: GestureScript,
}

fn loc(id: &str) -> AuxParam {
    AuxParam::Location(Reference::Object(id.into()))
}

fn act_on(label: &str, object: &str) -> ScriptEpisode {
    ScriptEpisode::act_on(label, object)
}

fn point(target: &str) -> ScriptEpisode {
    ScriptEpisode::point(target)
}

/// Thumbs-up on `object`, point at `to`, then close the sentence.
fn move_to(object: &str, to: &str, close: ScriptEpisode) -> Vec<ScriptEpisode> {
    vec![act_on("thumbsup", object), point(to), close]
}

pub fn catalog() -> Vec<Scenario> {
    let s = |name, scene, description, intents, episodes| Scenario {
        name,
        scene,
        description,
        intents,
        script: GestureScript::new(episodes),
    };
    let mut all = vec![
        s(
            "put-in-bowl",
            "tabletop",
            "Put the mug into the bowl.",
            vec![Intent::new(Action::Move, Some("mug"), vec![loc("bowl")])],
            move_to("mug", "bowl", ScriptEpisode::pinch(0.05)),
        ),
        s(
            "swap",
            "tabletop",
            "Swap the places of the can and the bowl.",
            vec![Intent::new(Action::Swap, Some("can"), vec![loc("bowl")])],
            vec![act_on("five", "can"), point("bowl")],
        ),
        s(
            "put-in-occupied-bowl",
            "occupied-bowl",
            "Put the mug into the bowl, which holds the cheese.",
            vec![Intent::new(Action::Move, Some("mug"), vec![loc("bowl")])],
            move_to("mug", "bowl", ScriptEpisode::pinch(0.05)),
        ),
        s(
            "thumbsup-move",
            "tabletop",
            "Move the mug into the bowl at half speed, one gesture per episode.",
            vec![Intent::new(Action::Move, Some("mug"), vec![loc("bowl")])],
            vec![ScriptEpisode::pose("thumbsup"), point("mug"), point("bowl"), ScriptEpisode::pinch(0.05)],
        ),
        s(
            "put-in-closed-drawer",
            "tabletop",
            "Put the spam into the closed drawer.",
            vec![Intent::new(Action::Put, Some("spam"), vec![loc("drawer")])],
            move_to("spam", "drawer", ScriptEpisode::flash()),
        ),
        s(
            "stack3",
            "tabletop",
            "Stack the cheese on the spam and the can on the cheese.",
            vec![
                Intent::new(Action::Move, Some("cheese"), vec![loc("spam")]),
                Intent::new(Action::Move, Some("can"), vec![loc("cheese")]),
            ],
            [move_to("cheese", "spam", ScriptEpisode::flash()), move_to("can", "cheese", ScriptEpisode::flash())].concat(),
        ),
        s(
            "tidy3",
            "tabletop",
            "Put the can, the spam and the cheese into the drawer.",
            ["can", "spam", "cheese"]
                .iter()
                .map(|o| Intent::new(Action::Put, Some(o), vec![loc("drawer")]))
                .collect(),
            ["can", "spam", "cheese"]
                .iter()
                .flat_map(|o| move_to(o, "drawer", ScriptEpisode::flash()))
                .collect(),
        ),
        s(
            "pour2",
            "tabletop",
            "Pour the can into the bowl at 60 degrees, set it down, then pour the mug.",
            vec![
                Intent::new(Action::Pour, Some("can"), vec![loc("bowl")]),
                Intent::new(Action::Pour, Some("mug"), vec![loc("bowl")]),
            ],
            vec![
                act_on("four", "can"),
                point("bowl"),
                ScriptEpisode::pinch(0.1 / 3.0),
                // a held can would make the next pour sentence take one object only
                ScriptEpisode::pinch(0.05),
                act_on("four", "mug"),
                point("bowl"),
                ScriptEpisode::flash(),
            ],
        ),
    ];
    // the golden session also exercises seeded joint noise
    for sc in all.iter_mut().filter(|sc| sc.name == "thumbsup-move") {
        sc.script.noise = 0.003;
    }
    all
}

pub fn find(name: &str) -> Option<Scenario> {
    catalog().into_iter().find(|s| s.name == name)
}

impl Scenario {
    pub fn world(&self) -> WorldState {
        scenes::builtin(self.scene).expect("catalog scenes are built in")
    }

    /// Goals of the reference intents in the initial world.
    pub fn goal(&self) -> Result<Task, TaskError> {
        Task::from_intents(self.name, &self.intents, &self.world())
    }

    /// Primitives of the reference plan, executed without failures.
    pub fn reference_plan(&self) -> Result<Vec<Primitive>, ScenarioError> {
        let r = execute(&self.goal()?, &self.world(), &mut SimExecutor::reliable(), &ExecOptions::default());
        match r.outcome {
            Outcome::Succeeded => Ok(r.primitives),
            Outcome::Failed { reason } => Err(ScenarioError::Reference { scenario: self.name.into(), reason }),
        }
    }

    /// Scripted input for `mode`: the gesture script, one gesture episode
    /// per reference primitive, or teleop waypoints along the reference
    /// plan.
    pub fn session(&self, mode: Mode, seed: u64) -> Result<SessionFile, ScenarioError> {
        let mut f = SessionFile::new(SessionHeader {
            scenario: Some(self.name.into()),
            mode,
            seed,
            ..Default::default()
        });
        match mode {
            Mode::HighLevelGesture => f.push(0.0, Inbound::Script { script: self.script.clone() }),
            Mode::LowLevelGesture => {
                let episodes = self.reference_plan()?.iter().map(low_level_episode).collect();
                f.push(0.0, Inbound::Script { script: GestureScript::new(episodes) });
            }
            Mode::Teleop => {
                for (t, body) in teleop_commands(&self.world(), &self.reference_plan()?)? {
                    f.push(t, body);
                }
            }
        }
        Ok(f)
    }
}

/// Gesture episode that names `p` in low-level mode.
pub fn low_level_episode(p: &Primitive) -> ScriptEpisode {
    match p {
        Primitive::Approach { object } => point(object),
        Primitive::Grasp { .. } => ScriptEpisode::pose("grab"),
        Primitive::Lift => ScriptEpisode::new(vec![pose("grab", 0.4), Step::Swipe { label: "swipe_up".into(), seconds: 1.0 }]),
        Primitive::MoveTo { dest: Dest::Above(o), .. } => point(o),
        Primitive::MoveTo { dest: Dest::Table(p), .. } => ScriptEpisode::new(vec![Step::PointAt { location: *p, seconds: 0.6 }]),
        Primitive::MoveTo { dest: Dest::Point(p), .. } => {
            ScriptEpisode::new(vec![Step::PointAt { location: p.xy(), seconds: 0.6 }])
        }
        Primitive::Release => ScriptEpisode::pinch(0.05),
        Primitive::OpenDrawer { .. } => ScriptEpisode::pose("two"),
        Primitive::CloseDrawer { .. } => ScriptEpisode::pose("three"),
        Primitive::Tilt { .. } => ScriptEpisode::pose("four"),
    }
}

struct TeleopWriter {
    t: f64,
    palm: Vec3,
    grip: bool,
    out: Vec<(f64, Inbound)>,
}

impl TeleopWriter {
    fn send(&mut self) {
        self.out.push((self.t, Inbound::Teleop { palm: self.palm, yaw: 0.0, grip: self.grip }));
        self.t += 1.0 / TELEOP_RATE;
    }

    fn hold(&mut self, n: usize) {
        for _ in 0..n {
            self.send();
        }
    }

    fn go(&mut self, to: Vec3) {
        let from = self.palm;
        let step = TELEOP_SPEED / TELEOP_RATE;
        let n = ((to - from).norm() / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            self.palm = from + (to - from) * (i as f64 / n as f64);
            self.send();
        }
        self.hold(TELEOP_SETTLE);
    }

    fn grip(&mut self, close: bool) {
        self.grip = close;
        self.send();
        self.hold(TELEOP_SETTLE - 1);
    }
}

/// Teleop commands that carry out `plan` from `world`: travel at hover
/// height, descend to grasp and release, rise again.
pub fn teleop_commands(world: &WorldState, plan: &[Primitive]) -> Result<Vec<(f64, Inbound)>, ScenarioError> {
    let mut w = world.clone();
    let mut tw = TeleopWriter {
        t: 0.0,
        palm: w.gripper.pose.position,
        grip: w.holding().is_some(),
        out: Vec::new(),
    };
    tw.hold(TELEOP_SETTLE);
    let at = |xy: crate::geometry::Vec2, z: f64| Vec3::new(xy.x, xy.y, z);
    for (i, p) in plan.iter().enumerate() {
        match p {
            Primitive::Approach { object } => {
                let o = &w.objects[object];
                let top = o.pose.position.z + o.height() / 2.0;
                tw.go(at(o.pose.xy(), TELEOP_HOVER));
                tw.go(at(o.pose.xy(), top));
            }
            Primitive::Grasp { .. } => tw.grip(true),
            Primitive::Lift => tw.go(at(tw.palm.xy(), TELEOP_HOVER)),
            Primitive::MoveTo { dest: Dest::Above(o), .. } => tw.go(at(w.objects[o].pose.xy(), TELEOP_HOVER)),
            Primitive::MoveTo { dest: Dest::Table(p), .. } => tw.go(at(*p, TELEOP_HOVER)),
            Primitive::Release => {
                let held = w.holding().cloned().ok_or_else(|| ScenarioError::TeleopUnsupported("release".into()))?;
                let after = apply(&w, p).map_err(|e| ScenarioError::Reference { scenario: String::new(), reason: e.to_string() })?;
                let o = &after.objects[&held];
                tw.go(at(tw.palm.xy(), o.pose.position.z + o.height() / 2.0));
                tw.grip(false);
                tw.go(at(tw.palm.xy(), TELEOP_HOVER));
            }
            other => return Err(ScenarioError::TeleopUnsupported(other.to_string())),
        }
        w = apply(&w, &plan[i]).map_err(|e| ScenarioError::Reference { scenario: String::new(), reason: e.to_string() })?;
    }
    Ok(tw.out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub mode: Mode,
    pub success: bool,
    pub total_ticks: usize,
    pub interaction_events: usize,
    pub input_events: usize,
    /// Session clock at the end, seconds.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub intents: Vec<String>,
    pub primitives: Vec<String>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Report of a finished session. With a scenario, success means its goal
/// holds in the final world; otherwise every plan must have succeeded.
pub fn session_report(session: &Session) -> Result<ScenarioReport, ScenarioError> {
    let h = session.header();
    let st = session.stats();
    let w = session.world();
    let scenario = h.scenario.as_deref().map(|n| find(n).ok_or_else(|| ScenarioError::Unknown(n.into()))).transpose()?;
    let acted = !st.intents.is_empty() || !st.primitives.is_empty();
    let last_failure = st.executions.iter().rev().find_map(|r| match &r.outcome {
        Outcome::Failed { reason } => Some(reason.clone()),
        Outcome::Succeeded => None,
    });
    let success = match &scenario {
        Some(s) => Task::from_intents(s.name, &s.intents, &header_world(h)?)?.holds(w),
        None => acted && last_failure.is_none() && !session.is_busy(),
    };
    let failure_reason = if success {
        None
    } else if !acted {
        Some("no-intent".to_string())
    } else if session.is_busy() {
        Some("plan paused".to_string())
    } else {
        Some(last_failure.or_else(|| st.clarifications.last().cloned()).unwrap_or_else(|| "goal not reached".into()))
    };
    Ok(ScenarioReport {
        scenario: h.scenario.clone().or_else(|| h.scene.clone()).unwrap_or_else(|| "custom".into()),
        mode: session.mode(),
        success,
        total_ticks: st.ticks,
        interaction_events: st.interaction_events,
        input_events: st.input_events,
        wall_time: session.clock(),
        failure_reason,
        intents: st.intents.clone(),
        primitives: st.primitives.iter().map(ToString::to_string).collect(),
    })
}

/// Replays a session file: the report and the full outbound log.
pub fn replay(file: &SessionFile, config: &SessionConfig) -> Result<(ScenarioReport, Vec<OutboundMessage>), ScenarioError> {
    let (session, log) = run_session(file, config)?;
    Ok((session_report(&session)?, log))
}

/// Where a scenario run takes its input from.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum SessionSource {
    Scripted,
    Recorded(SessionFile),
}

pub fn run_scenario(
    name: &str,
    mode: Mode,
    source: SessionSource,
    config: &SessionConfig,
    seed: u64,
) -> Result<(ScenarioReport, Vec<OutboundMessage>), ScenarioError> {
    let s = find(name).ok_or_else(|| ScenarioError::Unknown(name.into()))?;
    let file = match source {
        SessionSource::Scripted => s.session(mode, seed)?,
        SessionSource::Recorded(mut f) => {
            f.header.scenario = Some(name.into());
            f.header.mode = mode;
            f
        }
    };
    replay(&file, config)
}

/// Outcome counts of perturbed executions of one scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub scenario: String,
    pub runs: usize,
    pub successes: usize,
    /// Failures that name the condition that stopped the plan.
    pub explained_failures: usize,
    /// Runs that ran out of ticks.
    pub unexplained: usize,
    pub invariant_violations: usize,
    pub infeasible_executions: usize,
    pub failure_reasons: Vec<String>,
}

impl RobustnessSummary {
    pub fn all_accounted(&self) -> bool {
        self.unexplained == 0 && self.invariant_violations == 0 && self.infeasible_executions == 0
    }
}

/// Runs the scenario's goal `runs` times, each with one random
/// perturbation injected at a random tick of the reference plan.
pub fn robustness(s: &Scenario, runs: usize, seed: u64, budget: usize) -> Result<RobustnessSummary, ScenarioError> {
    let goal = s.goal()?;
    let span = s.reference_plan()?.len();
    let mut out = RobustnessSummary { scenario: s.name.into(), runs, ..Default::default() };
    for k in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let at = rng.random_range(0..=span);
        let mut w = s.world();
        let mut run = Execution::new(goal.clone(), &w, budget);
        let mut exec = SimExecutor::reliable();
        while !run.is_finished() {
            if run.ticks() == at {
                if let Some(p) = random_perturbation(&w, &mut rng) {
                    match perturb(&w, &p) {
                        Ok(n) => w = n,
                        Err(e) => run.perturbation_error(e.to_string()),
                    }
                }
            }
            run.step(&mut w, &mut exec);
        }
        let r = run.into_report(&w);
        out.invariant_violations += r.invariant_violations.len();
        out.infeasible_executions += r.infeasible_executions;
        match r.outcome {
            Outcome::Succeeded => out.successes += 1,
            Outcome::Failed { reason } if r.ticks >= budget => {
                out.unexplained += 1;
                out.failure_reasons.push(reason);
            }
            Outcome::Failed { reason } => {
                out.explained_failures += 1;
                out.failure_reasons.push(reason);
            }
        }
    }
    Ok(out)
}
