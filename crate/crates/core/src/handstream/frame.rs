use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::StreamError;
use crate::geometry::{yaw_of, Vec3};

pub const FINGER_COUNT: usize = 5;
pub const BONES_PER_FINGER: usize = 4;

/// Schema name carried by the header line of a hand-frame stream file.
pub const STREAM_SCHEMA: &str = "hand-frames";
pub const STREAM_VERSION: u32 = 1;

const UNIT_TOLERANCE: f64 = 1e-6;
const CHAIN_TOLERANCE: f64 = 1e-6;

/// Finger order used everywhere: thumb first, pinky last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; FINGER_COUNT] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bone {
    pub start: Vec3,
    pub end: Vec3,
}

impl Bone {
    pub fn new(start: Vec3, end: Vec3) -> Self {
        Self { start, end }
    }

    /// Unnormalized start→end vector.
    pub fn vector(&self) -> Vec3 {
        self.end - self.start
    }
}

/// Skeleton of a tracked hand. Bones per finger run metacarpal, proximal,
/// intermediate, distal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandSkeleton {
    pub palm_position: Vec3,
    pub palm_direction: Vec3,
    pub palm_normal: Vec3,
    /// Heading of `palm_direction` on the horizontal plane, radians.
    pub z_rotation: f64,
    pub fingers: [[Bone; BONES_PER_FINGER]; FINGER_COUNT],
    pub fingertips: [Vec3; FINGER_COUNT],
}

impl HandSkeleton {
    pub fn bone(&self, finger: Finger, k: usize) -> &Bone {
        &self.fingers[finger.index()][k]
    }

    pub fn fingertip(&self, finger: Finger) -> Vec3 {
        self.fingertips[finger.index()]
    }

    pub fn pinch_distance(&self) -> f64 {
        (self.fingertip(Finger::Thumb) - self.fingertip(Finger::Index)).norm()
    }

    /// Checks unit palm vectors and connected bone chains.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("palm_direction", &self.palm_direction),
            ("palm_normal", &self.palm_normal),
        ] {
            if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(format!("{name} is not unit length (|v| = {})", v.norm()));
            }
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.palm_position) || !self.z_rotation.is_finite() {
            return Err("non-finite palm pose".into());
        }
        for (f, bones) in self.fingers.iter().enumerate() {
            for (k, pair) in bones.windows(2).enumerate() {
                if (pair[0].end - pair[1].start).norm() > CHAIN_TOLERANCE {
                    return Err(format!("finger {f}: bone {k} end does not meet bone {} start", k + 1));
                }
            }
            if bones.iter().any(|b| !finite(&b.start) || !finite(&b.end)) {
                return Err(format!("finger {f}: non-finite bone position"));
            }
        }
        Ok(())
    }
}

/// One time-stamped observation. `hand` is `None` when the hand is not
/// visible; invisible frames carry no skeleton.
#[derive(Clone, Debug, PartialEq)]
pub struct HandFrame {
    pub timestamp: f64,
    pub hand: Option<HandSkeleton>,
    /// Palm centre of the second hand, when tracked (used by the
    /// hands-distance metric only).
    pub other_palm: Option<Vec3>,
}

impl HandFrame {
    pub fn visible(timestamp: f64, hand: HandSkeleton) -> Self {
        Self {
            timestamp,
            hand: Some(hand),
            other_palm: None,
        }
    }

    pub fn invisible(timestamp: f64) -> Self {
        Self {
            timestamp,
            hand: None,
            other_palm: None,
        }
    }

    pub fn is_visible(&self) -> bool {
        self.hand.is_some()
    }

    pub fn palm_position(&self) -> Option<Vec3> {
        self.hand.as_ref().map(|h| h.palm_position)
    }

    pub fn to_record(&self) -> FrameRecord {
        match &self.hand {
            Some(h) => FrameRecord {
                timestamp: Some(self.timestamp),
                visible: true,
                palm_position: Some(h.palm_position),
                palm_direction: Some(h.palm_direction),
                palm_normal: Some(h.palm_normal),
                z_rotation: Some(h.z_rotation),
                fingers: Some(h.fingers),
                fingertips: Some(h.fingertips),
                other_palm: self.other_palm,
            },
            None => FrameRecord {
                timestamp: Some(self.timestamp),
                visible: false,
                palm_position: None,
                palm_direction: None,
                palm_normal: None,
                z_rotation: None,
                fingers: None,
                fingertips: None,
                other_palm: self.other_palm,
            },
        }
    }
}

/// Wire form of a frame: one JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub timestamp: Option<f64>,
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palm_position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palm_direction: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palm_normal: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingers: Option<[[Bone; BONES_PER_FINGER]; FINGER_COUNT]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingertips: Option<[Vec3; FINGER_COUNT]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_palm: Option<Vec3>,
}

impl FrameRecord {
    pub fn into_frame(self, line: usize) -> Result<HandFrame, StreamError> {
        let missing = |field: &str| StreamError::Parse {
            line,
            message: format!("missing field `{field}`"),
        };
        let timestamp = self.timestamp.ok_or_else(|| missing("timestamp"))?;
        if !timestamp.is_finite() {
            return Err(StreamError::Parse {
                line,
                message: "timestamp is not finite".into(),
            });
        }
        if !self.visible {
            return Ok(HandFrame {
                timestamp,
                hand: None,
                other_palm: self.other_palm,
            });
        }
        let palm_direction = self.palm_direction.ok_or_else(|| missing("palm_direction"))?;
        let hand = HandSkeleton {
            palm_position: self.palm_position.ok_or_else(|| missing("palm_position"))?,
            palm_direction,
            palm_normal: self.palm_normal.ok_or_else(|| missing("palm_normal"))?,
            z_rotation: self.z_rotation.unwrap_or_else(|| yaw_of(&palm_direction)),
            fingers: self.fingers.ok_or_else(|| missing("fingers"))?,
            fingertips: self.fingertips.ok_or_else(|| missing("fingertips"))?,
        };
        hand.validate()
            .map_err(|message| StreamError::Parse { line, message })?;
        Ok(HandFrame {
            timestamp,
            hand: Some(hand),
            other_palm: self.other_palm,
        })
    }
}

/// Parses one record line. `line` is only used for diagnostics.
pub fn parse_frame(record: &str, line: usize) -> Result<HandFrame, StreamError> {
    let rec: FrameRecord = serde_json::from_str(record).map_err(|e| StreamError::Parse {
        line,
        message: e.to_string(),
    })?;
    rec.into_frame(line)
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamHeader {
    schema: String,
    version: u32,
}

pub fn stream_header() -> String {
    serde_json::to_string(&StreamHeader {
        schema: STREAM_SCHEMA.into(),
        version: STREAM_VERSION,
    })
    .expect("header serializes")
}

/// Reads a whole stream file: header line, then one frame per line.
/// Blank lines are skipped.
pub fn read_stream<R: BufRead>(reader: R) -> Result<Vec<HandFrame>, StreamError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, l)) => {
                let l = l.map_err(|e| StreamError::Io(e.to_string()))?;
                if !l.trim().is_empty() {
                    break (i + 1, l);
                }
            }
            None => return Err(StreamError::MissingHeader),
        }
    };
    let parsed: StreamHeader =
        serde_json::from_str(&header.1).map_err(|_| StreamError::MissingHeader)?;
    if parsed.schema != STREAM_SCHEMA || parsed.version != STREAM_VERSION {
        return Err(StreamError::UnsupportedSchema {
            schema: parsed.schema,
            version: parsed.version,
        });
    }
    let mut frames: Vec<HandFrame> = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(|e| StreamError::Io(e.to_string()))?;
        if l.trim().is_empty() {
            continue;
        }
        let frame = parse_frame(&l, i + 1)?;
        if let Some(prev) = frames.last() {
            if frame.timestamp <= prev.timestamp {
                return Err(StreamError::NonMonotonic {
                    line: i + 1,
                    previous: prev.timestamp,
                    timestamp: frame.timestamp,
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Serializes frames with the header line.
pub fn write_stream<W: std::io::Write>(mut out: W, frames: &[HandFrame]) -> std::io::Result<()> {
    writeln!(out, "{}", stream_header())?;
    for f in frames {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&f.to_record()).expect("frame serializes")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handstream::synth::{HandPoseKind, PoseGenerator};

    fn sample_hand() -> HandSkeleton {
        PoseGenerator::noiseless().canonical(HandPoseKind::Five)
    }

    #[test]
    fn visible_record_round_trips() {
        let mut hand = sample_hand();
        let shift = Vec3::new(0.0, 0.0, 0.2) - hand.palm_position;
        crate::handstream::synth::translate(&mut hand, &shift);
        let frame = HandFrame::visible(0.5, hand);
        let line = serde_json::to_string(&frame.to_record()).unwrap();
        let parsed = parse_frame(&line, 1).unwrap();
        assert!(parsed.is_visible());
        assert_eq!(parsed.palm_position(), Some(Vec3::new(0.0, 0.0, 0.2)));
        assert_eq!(parsed, frame);
    }

    #[test]
    fn invisible_record_has_no_skeleton() {
        let f = parse_frame(r#"{"timestamp": 1.25, "visible": false}"#, 3).unwrap();
        assert!(!f.is_visible());
        assert_eq!(f.timestamp, 1.25);
    }

    #[test]
    fn missing_timestamp_is_a_parse_error() {
        let err = parse_frame(r#"{"visible": false}"#, 7).unwrap_err();
        match err {
            StreamError::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("timestamp"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_frame("{not json", 12).unwrap_err();
        assert!(matches!(err, StreamError::Parse { line: 12, .. }));
    }

    #[test]
    fn non_unit_direction_rejected() {
        let mut rec = HandFrame::visible(0.0, sample_hand()).to_record();
        rec.palm_direction = Some(Vec3::new(0.0, 2.0, 0.0));
        let line = serde_json::to_string(&rec).unwrap();
        assert!(parse_frame(&line, 1).is_err());
    }

    #[test]
    fn stream_rejects_non_monotonic_time() {
        let text = format!(
            "{}\n{}\n{}\n",
            stream_header(),
            r#"{"timestamp": 0.1, "visible": false}"#,
            r#"{"timestamp": 0.1, "visible": false}"#
        );
        let err = read_stream(text.as_bytes()).unwrap_err();
        assert!(matches!(err, StreamError::NonMonotonic { line: 3, .. }));
    }

    #[test]
    fn stream_requires_header() {
        let text = r#"{"timestamp": 0.1, "visible": false}"#;
        assert!(read_stream(text.as_bytes()).is_err());
        assert!(matches!(read_stream("".as_bytes()), Err(StreamError::MissingHeader)));
    }

    #[test]
    fn stream_write_read() {
        let frames = vec![
            HandFrame::visible(0.0, sample_hand()),
            HandFrame::invisible(0.05),
        ];
        let mut buf = Vec::new();
        write_stream(&mut buf, &frames).unwrap();
        assert_eq!(read_stream(buf.as_slice()).unwrap(), frames);
    }
}
