//! Operator sessions: a single interpreter for timestamped operator input
//! in teleoperation, low-level gesture and high-level gesture mode, and
//! the event stream it produces.

pub mod config;
pub mod fixtures;
pub mod message;
pub mod metrics;
pub mod scenario;
pub mod script;

pub use config::{ConfigError, DetectorConfig, ExecutionConfig, SessionConfig, StaticChoice};
pub use message::{
    kind_counts, parse_line, to_jsonl, Envelope, Inbound, InboundMessage, MessageError, Mode, Outbound, OutboundMessage, SentenceState,
    SessionFile, SessionHeader, SCHEMA_VERSION,
};
pub use script::{GestureScript, Renderer, ScriptEpisode, ScriptError, Step};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::behavior::{Execution, ExecutionReport, Executor, SimExecutor, Task, DEFAULT_POUR_ANGLE};
use crate::deictic::{object_distances, table_point, target_object, Ray};
use crate::episode::{build_episode, episode_summary, Episode, EpisodeBounds, EpisodeSummary, GestureEvent, Segmenter, Termination};
use crate::geometry::Vec3;
use crate::classify::GestureProbabilities;
use crate::episode::DetectionSample;
use crate::handstream::HandFrame;
use crate::pipeline::{Detector, DetectorState};
use crate::sentence::{
    complexity, estimate_intent_with_gap, probs_for_event, AssemblyOutcome, Intent, IntentEstimator, SentenceAssembler,
};
use crate::simworld::{
    load_scene, scenes, set_gripper_pose, teleop_grip, teleop_step_to, Dest, Primitive, SceneError, TeleopState, WorldState,
};

/// A teleoperating hand closes the gripper below this thumb-index
/// distance, meters.
pub const TELEOP_GRIP_APERTURE: f64 = 0.03;
/// Palm displacement between teleop commands that counts as motion, meters.
pub const MOTION_EPS: f64 = 1e-3;

const EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Message(#[from] MessageError),
}

/// What happened in a session so far.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub input_events: usize,
    /// Episodes in gesture modes; motion onsets and grip toggles in teleop.
    pub interaction_events: usize,
    pub episodes: usize,
    pub intents: Vec<String>,
    pub clarifications: Vec<String>,
    /// Primitives that changed the world, in order.
    pub primitives: Vec<Primitive>,
    /// Executor ticks, low-level primitive attempts and teleop commands.
    pub ticks: usize,
    pub executions: Vec<ExecutionReport>,
    pub errors: Vec<String>,
}

/// Initial world named by a session header.
pub fn header_world(header: &SessionHeader) -> Result<WorldState, SessionError> {
    if let Some(doc) = &header.world {
        return Ok(load_scene(doc)?);
    }
    if let Some(name) = &header.scenario {
        let s = scenario::find(name).ok_or_else(|| SessionError::UnknownScenario(name.clone()))?;
        return scenes::builtin(s.scene).ok_or_else(|| SessionError::UnknownScene(s.scene.into()));
    }
    let name = header.scene.as_deref().unwrap_or("tabletop");
    scenes::builtin(name).ok_or_else(|| SessionError::UnknownScene(name.into()))
}

#[derive(Clone, Debug)]
struct TeleopInput {
    state: TeleopState,
    palm: Option<Vec3>,
    moving: bool,
    closed: bool,
}

impl TeleopInput {
    fn new(world: &WorldState) -> Self {
        Self {
            state: TeleopState::from_world(world),
            palm: None,
            moving: false,
            closed: world.holding().is_some(),
        }
    }
}

/// One operator session. Every input first advances the session clock,
/// which ticks the executor at the configured period while a gesture mode
/// is active; teleoperation pauses plans.
#[derive(Clone, Debug)]
pub struct Session {
    config: SessionConfig,
    detector: Detector,
    header: SessionHeader,
    mode: Mode,
    world: WorldState,
    det: DetectorState,
    segmenter: Segmenter,
    samples: Vec<DetectionSample>,
    assembler: SentenceAssembler,
    pub estimator: IntentEstimator,
    queue: VecDeque<Intent>,
    running: Option<Execution>,
    executor: SimExecutor,
    teleop: TeleopInput,
    clock: f64,
    next_tick: f64,
    last_frame: Option<f64>,
    scripts: u64,
    seq: u64,
    out: Vec<OutboundMessage>,
    stats: SessionStats,
    /// Emit a probabilities message for every detection sample.
    pub emit_probabilities: bool,
}

impl Session {
    pub fn new(header: SessionHeader, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let world = header_world(&header)?;
        let detector = config.detector();
        Ok(Self {
            det: DetectorState::new(),
            segmenter: Segmenter::new(&config.episode),
            samples: Vec::new(),
            assembler: SentenceAssembler::new(config.actions.clone(), config.metrics.clone()),
            estimator: IntentEstimator::Rules,
            queue: VecDeque::new(),
            running: None,
            executor: SimExecutor::new(config.execution.failure_probability, header.seed),
            teleop: TeleopInput::new(&world),
            clock: 0.0,
            next_tick: 0.0,
            last_frame: None,
            scripts: 0,
            seq: 0,
            out: Vec::new(),
            stats: SessionStats::default(),
            emit_probabilities: true,
            mode: header.mode,
            detector,
            world,
            header,
            config,
        })
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// A plan is running or queued.
    pub fn is_busy(&self) -> bool {
        self.running.is_some() || !self.queue.is_empty()
    }

    /// Processes one inbound message and returns the messages it caused.
    pub fn handle(&mut self, m: &InboundMessage) -> Vec<OutboundMessage> {
        self.advance(m.t);
        match &m.body {
            Inbound::Session(h) => {
                let (seq, emit) = (self.seq, self.emit_probabilities);
                match Session::new(h.clone(), self.config.clone()) {
                    Ok(s) => {
                        *self = s;
                        self.seq = seq;
                        self.emit_probabilities = emit;
                        self.clock = m.t;
                        self.sync();
                    }
                    Err(e) => self.error(e.to_string()),
                }
            }
            Inbound::Frame { frame } => match frame.clone().into_frame(0) {
                Ok(f) => self.on_frame(f),
                Err(e) => self.error(e.to_string()),
            },
            Inbound::Script { script } => self.on_script(script),
            Inbound::Episode { events } => {
                self.stats.input_events += 1;
                self.on_events(events.clone());
            }
            Inbound::Teleop { palm, yaw, grip } => {
                self.stats.input_events += 1;
                if self.mode == Mode::Teleop {
                    self.teleop_input(m.t, Some((*palm, *yaw)), Some(*grip));
                } else {
                    self.error(format!("teleop input while in {} mode", self.mode));
                }
            }
            Inbound::Mode { mode } => self.set_mode(*mode),
            Inbound::Ray { from, to } => {
                self.stats.input_events += 1;
                match Ray::new(*from, *to, self.config.deictic.source) {
                    Ok(ray) => {
                        let target = target_object(&object_distances(&ray, &self.world, &self.config.deictic));
                        let location = table_point(&ray, &self.world);
                        self.emit(Outbound::Deictic { target, location });
                    }
                    Err(e) => self.error(e.to_string()),
                }
            }
            Inbound::Tick => {}
            Inbound::Sync => self.sync(),
        }
        self.take_output()
    }

    /// Ends the input: closes the open episode and sentence and runs queued
    /// plans to completion unless teleoperation holds them.
    pub fn finish(&mut self) -> Vec<OutboundMessage> {
        if self.mode.is_gesture() {
            if let Some(b) = self.segmenter.finish() {
                self.close_episode(&b);
            }
            if let Some(o) = self.assembler.finish() {
                self.closed_sentence(o);
            }
            while self.is_busy() {
                let t = self.next_tick.max(self.clock);
                self.advance(t);
            }
        }
        self.take_output()
    }

    pub fn take_output(&mut self) -> Vec<OutboundMessage> {
        std::mem::take(&mut self.out)
    }

    fn emit_at(&mut self, t: f64, body: Outbound) {
        self.seq += 1;
        self.out.push(Envelope::new(self.seq, t, body));
    }

    fn emit(&mut self, body: Outbound) {
        self.emit_at(self.clock, body);
    }

    fn error(&mut self, message: String) {
        self.stats.errors.push(message.clone());
        self.emit(Outbound::Error { message });
    }

    fn clarify(&mut self, reason: String) {
        self.stats.clarifications.push(reason.clone());
        self.emit(Outbound::Clarification { reason });
    }

    fn sync(&mut self) {
        self.emit(Outbound::Mode { mode: self.mode, paused: self.mode == Mode::Teleop && self.is_busy() });
        self.emit(Outbound::World { world: self.world.clone() });
        if let Some(s) = self.assembler.pending().cloned() {
            let missing = self.assembler.missing();
            self.emit(Outbound::Sentence {
                state: SentenceState::Open,
                text: s.to_string(),
                complexity: complexity(&s),
                sentence: s,
                missing,
            });
        }
        if let Some(run) = &self.running {
            let task = run.task.name.clone();
            if let Ok((goals, tree)) = run.preview(&self.world) {
                let goals = goals.iter().map(ToString::to_string).collect();
                self.emit(Outbound::Plan { task, goals, tree });
            }
        }
    }

    fn set_mode(&mut self, mode: Mode) {
        if mode != self.mode {
            if self.mode.is_gesture() {
                self.det = DetectorState::new();
                self.segmenter = Segmenter::new(&self.config.episode);
                self.samples.clear();
                self.assembler.finish();
            }
            if mode == Mode::Teleop {
                self.teleop = TeleopInput::new(&self.world);
            } else {
                self.next_tick = self.next_tick.max(self.clock);
            }
            self.mode = mode;
        }
        self.emit(Outbound::Mode { mode, paused: mode == Mode::Teleop && self.is_busy() });
    }

    /// Moves the clock to `t`, ticking the executor on the way.
    fn advance(&mut self, t: f64) {
        if t > self.clock {
            self.clock = t;
        }
        if !self.mode.is_gesture() {
            return;
        }
        loop {
            if self.running.is_none() && !self.start_next() {
                self.next_tick = self.next_tick.max(self.clock);
                return;
            }
            if self.next_tick > self.clock + EPS {
                return;
            }
            let at = self.next_tick;
            self.tick(at);
            self.next_tick += self.config.execution.tick_period;
        }
    }

    fn start_next(&mut self) -> bool {
        while let Some(intent) = self.queue.pop_front() {
            match Task::from_intents(&intent.to_string(), std::slice::from_ref(&intent), &self.world) {
                Ok(task) => {
                    let run = Execution::new(task, &self.world, self.config.execution.budget);
                    match run.preview(&self.world) {
                        Ok((goals, tree)) => {
                            let goals = goals.iter().map(ToString::to_string).collect();
                            self.emit(Outbound::Plan { task: run.task.name.clone(), goals, tree });
                        }
                        Err(e) => self.error(e.to_string()),
                    }
                    self.next_tick = self.next_tick.max(self.clock);
                    self.running = Some(run);
                    return true;
                }
                Err(e) => self.clarify(format!("{intent}: {e}")),
            }
        }
        false
    }

    fn tick(&mut self, at: f64) {
        let Some(run) = self.running.as_mut() else {
            return;
        };
        let rec = run.step(&mut self.world, &mut self.executor);
        let task = run.task.name.clone();
        let tree = if run.is_finished() { None } else { run.preview(&self.world).ok().map(|(_, t)| t) };
        if let Some(record) = rec {
            let changed = record.result.as_deref() == Some("ok");
            self.emit_at(at, Outbound::Tick { task, record, tree });
            if changed {
                self.emit_at(at, Outbound::World { world: self.world.clone() });
            }
        }
        if self.running.as_ref().is_some_and(Execution::is_finished) {
            let report = self.running.take().expect("running").into_report(&self.world);
            self.stats.ticks += report.ticks;
            self.stats.primitives.extend(report.primitives.iter().cloned());
            self.emit_at(at, Outbound::outcome_of(&report));
            self.stats.executions.push(report);
        }
    }

    fn on_frame(&mut self, frame: HandFrame) {
        if self.last_frame.is_some_and(|t| frame.timestamp <= t) {
            self.error(format!("frame at {} is not after the previous frame", frame.timestamp));
            return;
        }
        self.stats.input_events += 1;
        self.last_frame = Some(frame.timestamp);
        if self.mode == Mode::Teleop {
            let palm = frame.hand.as_ref().map(|h| (h.palm_position, h.z_rotation));
            let grip = frame.hand.as_ref().map(|h| h.pinch_distance() < TELEOP_GRIP_APERTURE);
            self.teleop_input(frame.timestamp, palm, grip);
            return;
        }
        let (frames, samples) = match self.det.push(&self.detector, &frame, Some(&self.world)) {
            Ok(x) => x,
            Err(e) => return self.error(e.to_string()),
        };
        for s in &samples {
            if self.emit_probabilities {
                self.emit_at(s.timestamp(), Outbound::Probabilities { probs: s.probs.clone() });
            }
            if self.is_pointing(&s.probs) {
                self.emit_at(s.timestamp(), Outbound::Deictic { target: s.target.clone(), location: s.location });
            }
        }
        self.samples.extend(samples);
        for f in frames {
            for b in self.segmenter.push(f.timestamp, f.is_visible()) {
                self.close_episode(&b);
            }
        }
        let keep = self.segmenter.open_since().unwrap_or(f64::INFINITY);
        self.samples.retain(|s| s.timestamp() >= keep - EPS);
    }

    fn is_pointing(&self, p: &GestureProbabilities) -> bool {
        let best = p
            .static_probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        best.is_some_and(|i| self.config.episode.deictic_labels.contains(&p.static_labels[i]))
    }

    fn on_script(&mut self, script: &GestureScript) {
        let seed = self.header.seed.wrapping_add(self.scripts);
        self.scripts += 1;
        let period = 1.0 / script.rate;
        let mut r = Renderer::new(script.rate, script.noise, seed);
        let next = |s: &Session| s.last_frame.map_or(s.clock, |l| l + period).max(s.clock);
        self.feed(r.gap(next(self), script.gap));
        for ep in &script.episodes {
            match r.episode(ep, &self.world, next(self)) {
                Ok(frames) => self.feed(frames),
                Err(e) => return self.error(e.to_string()),
            }
            self.feed(r.gap(next(self), script.gap));
        }
    }

    fn feed(&mut self, frames: Vec<HandFrame>) {
        for f in frames {
            self.advance(f.timestamp);
            self.on_frame(f);
        }
    }

    fn on_events(&mut self, mut events: Vec<GestureEvent>) {
        if self.mode == Mode::Teleop {
            return self.error("gesture input while in teleop mode".into());
        }
        events.sort_by(|a, b| a.start.total_cmp(&b.start));
        let start = events.first().map_or(self.clock, |e| e.start);
        let end = events.iter().map(|e| e.end).fold(start, f64::max);
        let ep = Episode { start, end, reason: Termination::HandLost, events };
        let summary = episode_summary(&ep, &self.config.episode);
        self.on_summary(ep.reason, summary, None);
    }

    fn close_episode(&mut self, b: &EpisodeBounds) {
        let ep = build_episode(b, &self.samples, &self.config.episode);
        let summary = episode_summary(&ep, &self.config.episode);
        let probs = summary.action_event().and_then(|e| probs_for_event(&self.samples, e));
        self.on_summary(ep.reason, summary, probs);
    }

    fn on_summary(&mut self, reason: Termination, summary: EpisodeSummary, probs: Option<GestureProbabilities>) {
        self.stats.episodes += 1;
        self.stats.interaction_events += 1;
        let action = summary.action_event().map(|e| e.label.clone());
        self.emit(Outbound::Episode { reason, summary: summary.clone(), action });
        match self.mode {
            Mode::HighLevelGesture => self.assemble(&summary, probs),
            Mode::LowLevelGesture => self.low_level(&summary),
            Mode::Teleop => {}
        }
    }

    fn assemble(&mut self, summary: &EpisodeSummary, probs: Option<GestureProbabilities>) {
        for o in self.assembler.push(summary, probs, &self.world) {
            self.closed_sentence(o);
        }
        if let Some(s) = self.assembler.pending().cloned() {
            let missing = self.assembler.missing();
            self.emit(Outbound::Sentence {
                state: SentenceState::Open,
                text: s.to_string(),
                complexity: complexity(&s),
                sentence: s,
                missing,
            });
        }
    }

    fn closed_sentence(&mut self, o: AssemblyOutcome) {
        match o {
            AssemblyOutcome::Complete { sentence, probs } => {
                self.emit(Outbound::Sentence {
                    state: SentenceState::Complete,
                    text: sentence.to_string(),
                    complexity: complexity(&sentence),
                    sentence: sentence.clone(),
                    missing: Vec::new(),
                });
                let r = estimate_intent_with_gap(
                    &sentence,
                    probs.as_ref(),
                    &self.world,
                    &self.config.actions,
                    &self.estimator,
                    self.config.ambiguity_gap,
                );
                match r {
                    Ok(intent) => {
                        let text = intent.to_string();
                        self.stats.intents.push(text.clone());
                        self.emit(Outbound::Intent { text, intent: intent.clone() });
                        self.queue.push_back(intent);
                        self.advance(self.clock);
                    }
                    Err(e) => self.clarify(format!("{sentence}: {e}")),
                }
            }
            AssemblyOutcome::Incomplete { sentence, missing } => {
                let text = sentence.to_string();
                self.emit(Outbound::Sentence {
                    state: SentenceState::Incomplete,
                    complexity: complexity(&sentence),
                    sentence,
                    text: text.clone(),
                    missing: missing.clone(),
                });
                let names: Vec<String> = missing.iter().map(|k| format!("{k:?}").to_lowercase()).collect();
                self.clarify(format!("{text}: missing {}", names.join(", ")));
            }
        }
    }

    fn low_level(&mut self, summary: &EpisodeSummary) {
        let Some(p) = low_level_primitive(summary, &self.world) else {
            let what = summary.action_event().map_or("pointing", |e| e.label.as_str()).to_string();
            return self.clarify(format!("no primitive for {what} here"));
        };
        self.stats.ticks += 1;
        match self.executor.execute(&self.world, &p) {
            Ok(w) => {
                self.world = w;
                self.stats.primitives.push(p.clone());
                self.emit(Outbound::Primitive { primitive: p.to_string(), ok: true, reason: None });
                self.emit(Outbound::World { world: self.world.clone() });
            }
            Err(e) => self.emit(Outbound::Primitive { primitive: p.to_string(), ok: false, reason: Some(e.to_string()) }),
        }
    }

    fn teleop_input(&mut self, t: f64, palm: Option<(Vec3, f64)>, grip: Option<bool>) {
        self.stats.ticks += 1;
        if let Some((p, _)) = palm {
            let moving = self.teleop.palm.is_some_and(|q| (p - q).norm() > MOTION_EPS);
            if moving && !self.teleop.moving {
                self.stats.interaction_events += 1;
            }
            self.teleop.moving = moving;
            self.teleop.palm = Some(p);
        }
        let pose = teleop_step_to(&mut self.teleop.state, &self.world, t, palm, &self.config.teleop);
        set_gripper_pose(&mut self.world, pose);
        if let Some(close) = grip.filter(|g| *g != self.teleop.closed) {
            self.teleop.closed = close;
            self.stats.interaction_events += 1;
            match teleop_grip(&self.world, close) {
                Ok(w) => self.world = w,
                Err(e) => self.error(format!("{}: {e}", if close { "grip" } else { "release" })),
            }
        }
        let holding = self.world.holding().cloned();
        self.emit(Outbound::Teleop { pose: self.world.gripper.pose, holding });
    }
}

/// Primitive named by one low-level episode. Pointing approaches an object
/// or, while holding, moves over the pointed object or free table spot;
/// poses trigger the gripper and drawer primitives.
pub fn low_level_primitive(summary: &EpisodeSummary, w: &WorldState) -> Option<Primitive> {
    let g = &w.gripper;
    let Some(ev) = summary.action_event() else {
        let ev = summary.deictic_events().last()?;
        let Some(held) = g.holding.as_deref() else {
            return Some(Primitive::Approach { object: ev.target.clone()? });
        };
        let dest = match (ev.location, &ev.target) {
            (Some(p), _) if w.spot_is_free(&p, &[held]) => Dest::Table(p),
            (_, Some(t)) if t != held => Dest::Above(t.clone()),
            _ => return None,
        };
        return Some(Primitive::MoveTo { dest, yaw: None });
    };
    Some(match ev.label.as_str() {
        "grab" => Primitive::Grasp { object: g.at.clone()? },
        "swipe_up" => Primitive::Lift,
        "pinch" => Primitive::Release,
        "two" => Primitive::OpenDrawer { drawer: g.at.clone()? },
        "three" => Primitive::CloseDrawer { drawer: g.at.clone()? },
        "four" => Primitive::Tilt { angle: DEFAULT_POUR_ANGLE },
        _ => return None,
    })
}

/// Runs a whole session file and returns the session and its log.
pub fn run_session(file: &SessionFile, config: &SessionConfig) -> Result<(Session, Vec<OutboundMessage>), SessionError> {
    let mut s = Session::new(file.header.clone(), config.clone())?;
    let mut log = Vec::new();
    for m in &file.messages {
        log.extend(s.handle(m));
    }
    log.extend(s.finish());
    Ok((s, log))
}
