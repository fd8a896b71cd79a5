//! Session messages. One JSON object per line, every line an envelope
//! `{"v": 1, "seq": .., "t": .., "type": .., ...}`. Session files are
//! append-only logs of inbound envelopes led by a `session` header.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::script::GestureScript;
use crate::behavior::{ExecutionReport, Outcome, TickRecord};
use crate::classify::GestureProbabilities;
use crate::episode::{EpisodeSummary, GestureEvent, Termination};
use crate::geometry::{Vec2, Vec3};
use crate::handstream::FrameRecord;
use crate::sentence::{GestureSentence, SlotKind};
use crate::simworld::{ObjectId, Pose, SceneDocument, WorldState};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Teleop,
    LowLevelGesture,
    #[default]
    HighLevelGesture,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Teleop, Mode::LowLevelGesture, Mode::HighLevelGesture];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Teleop => "teleop",
            Mode::LowLevelGesture => "low_level_gesture",
            Mode::HighLevelGesture => "high_level_gesture",
        }
    }

    pub fn is_gesture(self) -> bool {
        self != Mode::Teleop
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "teleop" => Ok(Mode::Teleop),
            "low_level_gesture" | "low" | "low_level" => Ok(Mode::LowLevelGesture),
            "high_level_gesture" | "high" | "high_level" | "gesture" => Ok(Mode::HighLevelGesture),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    pub v: u32,
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub body: B,
}

impl<B> Envelope<B> {
    pub fn new(seq: u64, t: f64, body: B) -> Self {
        Self { v: SCHEMA_VERSION, seq, t, body }
    }
}

impl<B: Serialize> Envelope<B> {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MessageError {
    #[error("line {line}: schema version {found}, expected {SCHEMA_VERSION}")]
    Version { line: usize, found: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: sequence number {found} after {previous}")]
    Sequence { line: usize, previous: u64, found: u64 },
    #[error("session file has no `session` header")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses one envelope, checking the schema version first so a version
/// mismatch is reported as such rather than as a shape error.
pub fn parse_line<B: for<'de> Deserialize<'de>>(text: &str, line: usize) -> Result<Envelope<B>, MessageError> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| MessageError::Parse { line, message: e.to_string() })?;
    match raw.get("v").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(MessageError::Version { line, found }),
        None => return Err(MessageError::Parse { line, message: "missing `v`".into() }),
    }
    serde_json::from_str(text).map_err(|e| MessageError::Parse { line, message: e.to_string() })
}

/// First message of a session file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Built-in scene name, used when neither `world` nor `scenario` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<SceneDocument>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
}

/// Operator input.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Session(SessionHeader),
    Frame { frame: FrameRecord },
    /// Scripted episodes, rendered one at a time against the live world.
    Script { script: GestureScript },
    /// A whole episode given directly as gesture events.
    Episode { events: Vec<GestureEvent> },
    /// Teleoperation target: palm position, yaw and gripper closure.
    Teleop { palm: Vec3, yaw: f64, grip: bool },
    Mode { mode: Mode },
    /// Pointing ray from `from` through `to`, e.g. dragged in a console.
    Ray { from: Vec3, to: Vec3 },
    /// Clock advance without input.
    Tick,
    /// Request for the full state, e.g. after a reconnect.
    Sync,
}

impl Inbound {
    /// Counted as user input.
    pub fn is_input(&self) -> bool {
        matches!(self, Inbound::Frame { .. } | Inbound::Episode { .. } | Inbound::Teleop { .. } | Inbound::Ray { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceState {
    Open,
    Complete,
    Incomplete,
}

/// Service output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    Probabilities {
        probs: GestureProbabilities,
    },
    /// Object or table point under the pointing ray.
    Deictic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ObjectId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location: Option<Vec2>,
    },
    Episode {
        reason: Termination,
        summary: EpisodeSummary,
        /// Label of the action candidate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<String>,
    },
    Sentence {
        state: SentenceState,
        sentence: GestureSentence,
        text: String,
        missing: Vec<SlotKind>,
        complexity: usize,
    },
    Intent {
        text: String,
        intent: crate::sentence::Intent,
    },
    /// The sentence could not be turned into an intent; re-demonstrate.
    Clarification {
        reason: String,
    },
    Plan {
        task: String,
        goals: Vec<String>,
        /// Tree outline after one tick.
        tree: String,
    },
    Tick {
        task: String,
        record: TickRecord,
        /// Tree outline for the following tick.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tree: Option<String>,
    },
    Primitive {
        primitive: String,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Outcome {
        task: String,
        outcome: Outcome,
        primitives: Vec<String>,
        ticks: usize,
    },
    Teleop {
        pose: Pose,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holding: Option<ObjectId>,
    },
    Mode {
        mode: Mode,
        /// A plan is waiting for gesture mode to resume.
        paused: bool,
    },
    World {
        world: WorldState,
    },
    Error {
        message: String,
    },
    /// Messages a slow reader missed.
    Overflow {
        dropped: u64,
    },
    /// The peer speaks another schema version.
    Incompatible {
        expected: u32,
        found: u64,
    },
}

impl Outbound {
    pub fn kind(&self) -> &'static str {
        match self {
            Outbound::Probabilities { .. } => "probabilities",
            Outbound::Deictic { .. } => "deictic",
            Outbound::Episode { .. } => "episode",
            Outbound::Sentence { .. } => "sentence",
            Outbound::Intent { .. } => "intent",
            Outbound::Clarification { .. } => "clarification",
            Outbound::Plan { .. } => "plan",
            Outbound::Tick { .. } => "tick",
            Outbound::Primitive { .. } => "primitive",
            Outbound::Outcome { .. } => "outcome",
            Outbound::Teleop { .. } => "teleop",
            Outbound::Mode { .. } => "mode",
            Outbound::World { .. } => "world",
            Outbound::Error { .. } => "error",
            Outbound::Overflow { .. } => "overflow",
            Outbound::Incompatible { .. } => "incompatible",
        }
    }

    pub fn outcome_of(report: &ExecutionReport) -> Self {
        Outbound::Outcome {
            task: report.task.clone(),
            outcome: report.outcome.clone(),
            primitives: report.primitives.iter().map(ToString::to_string).collect(),
            ticks: report.ticks,
        }
    }
}

pub type InboundMessage = Envelope<Inbound>;
pub type OutboundMessage = Envelope<Outbound>;

/// Parsed session file: header and inputs in order.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionFile {
    pub header: SessionHeader,
    pub messages: Vec<InboundMessage>,
}

impl SessionFile {
    pub fn new(header: SessionHeader) -> Self {
        Self { header, messages: Vec::new() }
    }

    /// Appends a message stamped with the next sequence number.
    pub fn push(&mut self, t: f64, body: Inbound) {
        let seq = self.messages.len() as u64 + 1;
        self.messages.push(Envelope::new(seq, t, body));
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, MessageError> {
        let mut header = None;
        let mut messages = Vec::new();
        let mut previous = None;
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let n = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let m: InboundMessage = parse_line(&line, n)?;
            if let Some(p) = previous {
                if m.seq <= p {
                    return Err(MessageError::Sequence { line: n, previous: p, found: m.seq });
                }
            }
            previous = Some(m.seq);
            match (m.body, header.is_none()) {
                (Inbound::Session(h), true) => header = Some(h),
                (Inbound::Session(_), false) => {
                    return Err(MessageError::Parse { line: n, message: "second `session` header".into() })
                }
                (_, true) => return Err(MessageError::MissingHeader),
                (body, false) => messages.push(Envelope { body, ..m }),
            }
        }
        Ok(Self {
            header: header.ok_or(MessageError::MissingHeader)?,
            messages,
        })
    }

    pub fn parse(text: &str) -> Result<Self, MessageError> {
        Self::read(text.as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut out = Envelope::new(0, 0.0, Inbound::Session(self.header.clone())).to_line();
        out.push('\n');
        for m in &self.messages {
            out.push_str(&m.to_line());
            out.push('\n');
        }
        out
    }
}

/// One line per message.
pub fn to_jsonl<B: Serialize>(messages: &[Envelope<B>]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&m.to_line());
        out.push('\n');
    }
    out
}

/// Counts of outbound messages by type, for summaries.
pub fn kind_counts(log: &[OutboundMessage]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for m in log {
        *out.entry(m.body.kind()).or_default() += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_round_trip() {
        let m = Envelope::new(3, 1.25, Inbound::Mode { mode: Mode::Teleop });
        let line = m.to_line();
        assert_eq!(line, r#"{"v":1,"seq":3,"t":1.25,"type":"mode","mode":"teleop"}"#);
        assert_eq!(parse_line::<Inbound>(&line, 1).unwrap(), m);
        let tick = Envelope::new(4, 2.0, Inbound::Tick).to_line();
        assert_eq!(tick, r#"{"v":1,"seq":4,"t":2.0,"type":"tick"}"#);
    }

    #[test]
    fn version_mismatch() {
        let e = parse_line::<Inbound>(r#"{"v":2,"seq":1,"t":0,"type":"tick"}"#, 7).unwrap_err();
        assert!(matches!(e, MessageError::Version { line: 7, found: 2 }));
        assert!(parse_line::<Inbound>(r#"{"v":1,"seq":1,"t":0,"type":"dance"}"#, 1).is_err());
    }

    #[test]
    fn session_file_round_trip() {
        let mut f = SessionFile::new(SessionHeader { scene: Some("tabletop".into()), ..Default::default() });
        f.push(0.5, Inbound::Tick);
        f.push(0.6, Inbound::Teleop { palm: Vec3::new(0.1, 0.0, 0.3), yaw: 0.0, grip: true });
        let text = f.to_text();
        assert_eq!(SessionFile::parse(&text).unwrap(), f);
        assert!(matches!(SessionFile::parse(""), Err(MessageError::MissingHeader)));
        let swapped: String = text.lines().rev().collect::<Vec<_>>().join("\n");
        assert!(SessionFile::parse(&swapped).is_err());
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("fly".parse::<Mode>().is_err());
    }
}
