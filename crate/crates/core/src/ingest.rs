//! Skeleton recordings: parsing, canonical joint mapping, validation and
//! uniform resampling.
//!
//! Files are UTF-8 JSON Lines. The first line is a header
//! `{"patient_id": .., "session": "pre"|"post", "source": "depth_tracker_32"|"mesh_model_24", "action": "squat"|"sit_to_stand"}`
//! and every following line is one frame `{"t": <seconds>, "joints": {"<label>": [x, y, z], ..}}`
//! with coordinates in metres (right-handed, y-up). Extra keys on a frame line
//! (for example per-joint rotations) are accepted and ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A 3D position in metres.
pub type Point3 = [f64; 3];

/// Default sampling interval, 30 frames per second.
pub const DEFAULT_DT: f64 = 1.0 / 30.0;

/// Largest timestamp gap bridged by interpolation before a recording is rejected.
pub const DEFAULT_GAP_TOLERANCE: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: header declares source {found}, expected {expected}")]
    ConventionMismatch {
        line: usize,
        expected: ConventionName,
        found: ConventionName,
    },
    #[error("line {line}: unknown joint label {label:?} for convention {convention}")]
    UnknownJoint {
        line: usize,
        label: String,
        convention: ConventionName,
    },
    #[error("line {line}: non-finite coordinate for joint {label:?}")]
    NonFiniteCoordinate { line: usize, label: String },
    #[error("line {line}: missing joint {label:?}")]
    MissingJoint { line: usize, label: String },
    #[error("frame {frame}: missing joint {label:?} required for {joint}")]
    MissingCanonicalJoint {
        frame: usize,
        joint: JointId,
        label: String,
    },
    #[error("convention {convention} has no mapping for canonical joint {joint}")]
    UnmappedJoint { convention: ConventionName, joint: JointId },
    #[error("invalid convention table: {0}")]
    InvalidConvention(String),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("sampling interval must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("recording must be mapped to canonical joints before resampling")]
    NotCanonical,
    #[error("timestamps not strictly increasing at frame {0}")]
    NonMonotonicTimestamp(usize),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Canonical joint set shared by both pose sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JointId {
    Pelvis,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    SpineChest,
    Neck,
}

impl JointId {
    pub const COUNT: usize = 15;

    pub const ALL: [JointId; JointId::COUNT] = [
        JointId::Pelvis,
        JointId::LeftHip,
        JointId::RightHip,
        JointId::LeftKnee,
        JointId::RightKnee,
        JointId::LeftAnkle,
        JointId::RightAnkle,
        JointId::LeftShoulder,
        JointId::RightShoulder,
        JointId::LeftElbow,
        JointId::RightElbow,
        JointId::LeftWrist,
        JointId::RightWrist,
        JointId::SpineChest,
        JointId::Neck,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::Pelvis => "PELVIS",
            JointId::LeftHip => "LEFT_HIP",
            JointId::RightHip => "RIGHT_HIP",
            JointId::LeftKnee => "LEFT_KNEE",
            JointId::RightKnee => "RIGHT_KNEE",
            JointId::LeftAnkle => "LEFT_ANKLE",
            JointId::RightAnkle => "RIGHT_ANKLE",
            JointId::LeftShoulder => "LEFT_SHOULDER",
            JointId::RightShoulder => "RIGHT_SHOULDER",
            JointId::LeftElbow => "LEFT_ELBOW",
            JointId::RightElbow => "RIGHT_ELBOW",
            JointId::LeftWrist => "LEFT_WRIST",
            JointId::RightWrist => "RIGHT_WRIST",
            JointId::SpineChest => "SPINE_CHEST",
            JointId::Neck => "NECK",
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        JointId::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| format!("unknown canonical joint {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Session {
    Pre,
    Post,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::Pre => "pre",
            Session::Post => "post",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Squat,
    SitToStand,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Squat, Action::SitToStand];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Squat => "squat",
            Action::SitToStand => "sit_to_stand",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "squat" => Ok(Action::Squat),
            "sit_to_stand" => Ok(Action::SitToStand),
            _ => Err(format!("unknown action {s:?}")),
        }
    }
}

/// Name of a source skeleton layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConventionName {
    /// 32-joint depth-camera body tracker, labelled by joint name.
    #[serde(rename = "depth_tracker_32")]
    DepthTracker32,
    /// 24-joint parametric mesh model, labelled by joint index.
    #[serde(rename = "mesh_model_24")]
    MeshModel24,
}

impl ConventionName {
    pub const ALL: [ConventionName; 2] = [ConventionName::DepthTracker32, ConventionName::MeshModel24];

    pub fn as_str(self) -> &'static str {
        match self {
            ConventionName::DepthTracker32 => "depth_tracker_32",
            ConventionName::MeshModel24 => "mesh_model_24",
        }
    }
}

impl fmt::Display for ConventionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConventionName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ConventionName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown skeleton source {s:?}"))
    }
}

const DEPTH_TRACKER_LABELS: [&str; 32] = [
    "PELVIS",
    "SPINE_NAVEL",
    "SPINE_CHEST",
    "NECK",
    "CLAVICLE_LEFT",
    "SHOULDER_LEFT",
    "ELBOW_LEFT",
    "WRIST_LEFT",
    "HAND_LEFT",
    "HANDTIP_LEFT",
    "THUMB_LEFT",
    "CLAVICLE_RIGHT",
    "SHOULDER_RIGHT",
    "ELBOW_RIGHT",
    "WRIST_RIGHT",
    "HAND_RIGHT",
    "HANDTIP_RIGHT",
    "THUMB_RIGHT",
    "HIP_LEFT",
    "KNEE_LEFT",
    "ANKLE_LEFT",
    "FOOT_LEFT",
    "HIP_RIGHT",
    "KNEE_RIGHT",
    "ANKLE_RIGHT",
    "FOOT_RIGHT",
    "HEAD",
    "NOSE",
    "EYE_LEFT",
    "EAR_LEFT",
    "EYE_RIGHT",
    "EAR_RIGHT",
];

const DEPTH_TRACKER_MAP: [(JointId, &str); JointId::COUNT] = [
    (JointId::Pelvis, "PELVIS"),
    (JointId::LeftHip, "HIP_LEFT"),
    (JointId::RightHip, "HIP_RIGHT"),
    (JointId::LeftKnee, "KNEE_LEFT"),
    (JointId::RightKnee, "KNEE_RIGHT"),
    (JointId::LeftAnkle, "ANKLE_LEFT"),
    (JointId::RightAnkle, "ANKLE_RIGHT"),
    (JointId::LeftShoulder, "SHOULDER_LEFT"),
    (JointId::RightShoulder, "SHOULDER_RIGHT"),
    (JointId::LeftElbow, "ELBOW_LEFT"),
    (JointId::RightElbow, "ELBOW_RIGHT"),
    (JointId::LeftWrist, "WRIST_LEFT"),
    (JointId::RightWrist, "WRIST_RIGHT"),
    (JointId::SpineChest, "SPINE_CHEST"),
    (JointId::Neck, "NECK"),
];

// Mesh joints are labelled by their index in the 24-joint kinematic tree:
// 0 pelvis, 1/2 hips, 3 spine1, 4/5 knees, 6 spine2, 7/8 ankles, 9 spine3,
// 10/11 feet, 12 neck, 13/14 collars, 15 head, 16/17 shoulders,
// 18/19 elbows, 20/21 wrists, 22/23 hands. Left precedes right.
const MESH_MODEL_MAP: [(JointId, &str); JointId::COUNT] = [
    (JointId::Pelvis, "0"),
    (JointId::LeftHip, "1"),
    (JointId::RightHip, "2"),
    (JointId::LeftKnee, "4"),
    (JointId::RightKnee, "5"),
    (JointId::LeftAnkle, "7"),
    (JointId::RightAnkle, "8"),
    (JointId::LeftShoulder, "16"),
    (JointId::RightShoulder, "17"),
    (JointId::LeftElbow, "18"),
    (JointId::RightElbow, "19"),
    (JointId::LeftWrist, "20"),
    (JointId::RightWrist, "21"),
    (JointId::SpineChest, "9"),
    (JointId::Neck, "12"),
];

/// A source skeleton layout: the labels it may emit and which of them map
/// onto canonical joints.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConvention {
    name: ConventionName,
    labels: Vec<String>,
    mapping: BTreeMap<JointId, String>,
}

impl SkeletonConvention {
    pub fn depth_tracker_32() -> Self {
        SkeletonConvention {
            name: ConventionName::DepthTracker32,
            labels: DEPTH_TRACKER_LABELS.iter().map(|s| s.to_string()).collect(),
            mapping: DEPTH_TRACKER_MAP.iter().map(|(j, l)| (*j, l.to_string())).collect(),
        }
    }

    pub fn mesh_model_24() -> Self {
        SkeletonConvention {
            name: ConventionName::MeshModel24,
            labels: (0..24).map(|i| i.to_string()).collect(),
            mapping: MESH_MODEL_MAP.iter().map(|(j, l)| (*j, l.to_string())).collect(),
        }
    }

    pub fn for_name(name: ConventionName) -> Self {
        match name {
            ConventionName::DepthTracker32 => Self::depth_tracker_32(),
            ConventionName::MeshModel24 => Self::mesh_model_24(),
        }
    }

    /// Builds a convention from an explicit table. The table may leave
    /// canonical joints unmapped (mapping then fails with
    /// [`IngestError::UnmappedJoint`]) but must be injective and only use
    /// declared labels.
    pub fn custom(name: ConventionName, labels: Vec<String>, mapping: Vec<(JointId, String)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (joint, label) in mapping {
            if !labels.contains(&label) {
                return Err(IngestError::InvalidConvention(format!(
                    "label {label:?} mapped to {joint} is not declared"
                )));
            }
            if table.values().any(|l: &String| *l == label) {
                return Err(IngestError::InvalidConvention(format!(
                    "label {label:?} mapped more than once"
                )));
            }
            if table.insert(joint, label).is_some() {
                return Err(IngestError::InvalidConvention(format!("{joint} mapped more than once")));
            }
        }
        Ok(SkeletonConvention {
            name,
            labels,
            mapping: table,
        })
    }

    pub fn name(&self) -> ConventionName {
        self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_known(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn label_for(&self, joint: JointId) -> Option<&str> {
        self.mapping.get(&joint).map(String::as_str)
    }

    pub fn joint_for(&self, label: &str) -> Option<JointId> {
        self.mapping.iter().find(|(_, l)| *l == label).map(|(j, _)| *j)
    }

    /// True when every canonical joint has a source label.
    pub fn is_complete(&self) -> bool {
        self.mapping.len() == JointId::COUNT
    }
}

/// Whether frame labels are source labels or canonical joint names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Labelling {
    Source,
    Canonical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub joints: BTreeMap<String, Point3>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub patient_id: String,
    pub session: Session,
    pub source: ConventionName,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub patient_id: String,
    pub session: Session,
    pub source: ConventionName,
    pub action: Action,
    pub labelling: Labelling,
    pub frames: Vec<Frame>,
}

impl RawRecording {
    pub fn header(&self) -> RecordingHeader {
        RecordingHeader {
            patient_id: self.patient_id.clone(),
            session: self.session,
            source: self.source,
            action: self.action,
        }
    }
}

#[derive(Deserialize)]
struct FrameLine {
    t: f64,
    joints: serde_json::Map<String, Value>,
}

enum CoordError {
    NonFinite,
    Malformed(String),
}

fn parse_component(v: &Value) -> std::result::Result<f64, CoordError> {
    match v {
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).ok_or(CoordError::NonFinite),
        Value::String(s) => match s.trim().parse::<f64>() {
            Ok(x) if !x.is_finite() => Err(CoordError::NonFinite),
            _ => Err(CoordError::Malformed(format!("coordinate {s:?} is a string"))),
        },
        other => Err(CoordError::Malformed(format!("coordinate {other} is not a number"))),
    }
}

fn parse_point(v: &Value) -> std::result::Result<Point3, CoordError> {
    let parts: [&Value; 3] = match v {
        Value::Array(items) if items.len() == 3 => [&items[0], &items[1], &items[2]],
        Value::Object(map) => match (map.get("x"), map.get("y"), map.get("z")) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => return Err(CoordError::Malformed("point object needs x, y and z".into())),
        },
        _ => return Err(CoordError::Malformed("point must be [x, y, z]".into())),
    };
    let mut out = [0.0; 3];
    // A non-finite component wins over a malformed one so the error names the real problem.
    let mut malformed = None;
    for (slot, part) in out.iter_mut().zip(parts) {
        match parse_component(part) {
            Ok(x) => *slot = x,
            Err(CoordError::NonFinite) => return Err(CoordError::NonFinite),
            Err(CoordError::Malformed(m)) => malformed = malformed.or(Some(m)),
        }
    }
    match malformed {
        Some(m) => Err(CoordError::Malformed(m)),
        None => Ok(out),
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<RecordingHeader> {
    serde_json::from_str(line).map_err(|e| IngestError::MalformedLine {
        line: line_no,
        message: format!("invalid header: {e}"),
    })
}

fn parse_frame(line: &str, line_no: usize, convention: &SkeletonConvention) -> Result<Frame> {
    let raw: FrameLine = serde_json::from_str(line).map_err(|e| IngestError::MalformedLine {
        line: line_no,
        message: e.to_string(),
    })?;
    if !raw.t.is_finite() {
        return Err(IngestError::MalformedLine {
            line: line_no,
            message: "timestamp is not finite".into(),
        });
    }
    let mut joints = BTreeMap::new();
    for (label, value) in &raw.joints {
        if !convention.is_known(label) {
            return Err(IngestError::UnknownJoint {
                line: line_no,
                label: label.clone(),
                convention: convention.name(),
            });
        }
        let point = parse_point(value).map_err(|e| match e {
            CoordError::NonFinite => IngestError::NonFiniteCoordinate {
                line: line_no,
                label: label.clone(),
            },
            CoordError::Malformed(message) => IngestError::MalformedLine {
                line: line_no,
                message: format!("joint {label:?}: {message}"),
            },
        })?;
        joints.insert(label.clone(), point);
    }
    for joint in JointId::ALL {
        if let Some(label) = convention.label_for(joint) {
            if !joints.contains_key(label) {
                return Err(IngestError::MissingJoint {
                    line: line_no,
                    label: label.to_string(),
                });
            }
        }
    }
    Ok(Frame { t: raw.t, joints })
}

/// Parses a recording from any buffered reader. Line numbers in errors are 1-based.
pub fn parse_reader<R: BufRead>(reader: R, convention: &SkeletonConvention) -> Result<RawRecording> {
    let mut header = None;
    let mut frames = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let h = parse_header(&line, line_no)?;
                if h.source != convention.name() {
                    return Err(IngestError::ConventionMismatch {
                        line: line_no,
                        expected: convention.name(),
                        found: h.source,
                    });
                }
                header = Some(h);
            }
            Some(_) => frames.push(parse_frame(&line, line_no, convention)?),
        }
    }
    let header = header.ok_or(IngestError::MissingHeader)?;
    Ok(RawRecording {
        patient_id: header.patient_id,
        session: header.session,
        source: header.source,
        action: header.action,
        labelling: Labelling::Source,
        frames,
    })
}

pub fn parse_str(text: &str, convention: &SkeletonConvention) -> Result<RawRecording> {
    parse_reader(text.as_bytes(), convention)
}

pub fn parse_recording(path: &Path, convention: &SkeletonConvention) -> Result<RawRecording> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_reader(BufReader::new(file), convention)
}

/// Reads the header line only.
pub fn read_header(path: &Path) -> Result<RecordingHeader> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if !line.trim().is_empty() {
            return parse_header(&line, idx + 1);
        }
    }
    Err(IngestError::MissingHeader)
}

/// Parses a file using the built-in convention named in its header.
pub fn parse_recording_auto(path: &Path) -> Result<RawRecording> {
    let header = read_header(path)?;
    parse_recording(path, &SkeletonConvention::for_name(header.source))
}

/// Writes a recording in the JSON Lines interchange format. Floats are
/// written in shortest round-trip form so parsing the output reproduces
/// every coordinate bit for bit.
pub fn write_recording<W: Write>(rec: &RawRecording, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, &rec.header())?;
    out.write_all(b"\n")?;
    for frame in &rec.frames {
        let line = serde_json::json!({ "t": frame.t, "joints": frame.joints });
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Relabels every frame onto the canonical joint set, dropping source joints
/// that have no canonical counterpart. Canonical recordings are returned
/// unchanged.
pub fn map_to_canonical(rec: &RawRecording, convention: &SkeletonConvention) -> Result<RawRecording> {
    if rec.labelling == Labelling::Canonical {
        return Ok(rec.clone());
    }
    let mut table = Vec::with_capacity(JointId::COUNT);
    for joint in JointId::ALL {
        let label = convention.label_for(joint).ok_or(IngestError::UnmappedJoint {
            convention: convention.name(),
            joint,
        })?;
        table.push((joint, label));
    }
    let frames = rec
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let mut joints = BTreeMap::new();
            for (joint, label) in &table {
                let p = frame
                    .joints
                    .get(*label)
                    .ok_or_else(|| IngestError::MissingCanonicalJoint {
                        frame: i,
                        joint: *joint,
                        label: label.to_string(),
                    })?;
                joints.insert(joint.name().to_string(), *p);
            }
            Ok(Frame { t: frame.t, joints })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawRecording {
        labelling: Labelling::Canonical,
        frames,
        ..rec.clone()
    })
}

/// A problem found by [`validate_series`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    NonFiniteTimestamp { index: usize },
    NonMonotonicTimestamp { index: usize },
    GapExceedsTolerance { index: usize, gap: f64 },
    NonFiniteCoordinate { frame: usize, label: String },
    MissingJoint { frame: usize, joint: JointId },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NonFiniteTimestamp { index } => write!(f, "frame {index}: timestamp is not finite"),
            Finding::NonMonotonicTimestamp { index } => {
                write!(f, "frame {index}: timestamp does not increase")
            }
            Finding::GapExceedsTolerance { index, gap } => {
                write!(f, "frame {index}: gap of {gap:.3} s exceeds tolerance")
            }
            Finding::NonFiniteCoordinate { frame, label } => {
                write!(f, "frame {frame}: joint {label} has a non-finite coordinate")
            }
            Finding::MissingJoint { frame, joint } => write!(f, "frame {frame}: joint {joint} missing"),
        }
    }
}

/// Checks timestamps and coordinates. An empty result means the recording
/// can be resampled. Canonical recordings are also checked for joint
/// completeness.
pub fn validate_series(rec: &RawRecording, gap_tolerance: f64) -> Vec<Finding> {
    let mut findings = Vec::new();
    for (i, frame) in rec.frames.iter().enumerate() {
        if !frame.t.is_finite() {
            findings.push(Finding::NonFiniteTimestamp { index: i });
        } else if i > 0 {
            let prev = rec.frames[i - 1].t;
            if prev.is_finite() {
                let gap = frame.t - prev;
                if gap <= 0.0 {
                    findings.push(Finding::NonMonotonicTimestamp { index: i });
                } else if gap > gap_tolerance {
                    findings.push(Finding::GapExceedsTolerance { index: i, gap });
                }
            }
        }
        for (label, p) in &frame.joints {
            if p.iter().any(|c| !c.is_finite()) {
                findings.push(Finding::NonFiniteCoordinate {
                    frame: i,
                    label: label.clone(),
                });
            }
        }
        if rec.labelling == Labelling::Canonical {
            for joint in JointId::ALL {
                if !frame.joints.contains_key(joint.name()) {
                    findings.push(Finding::MissingJoint { frame: i, joint });
                }
            }
        }
    }
    findings
}

/// Uniformly sampled canonical joint positions for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSeries {
    pub patient_id: String,
    pub session: Session,
    pub source: ConventionName,
    pub action: Action,
    /// Time of the first sample, seconds.
    pub t0: f64,
    pub dt: f64,
    /// Frame-major positions indexed by [`JointId::index`].
    pub positions: Vec<[Point3; JointId::COUNT]>,
}

impl CanonicalSeries {
    pub fn frame_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, frame: usize, joint: JointId) -> Point3 {
        self.positions[frame][joint.index()]
    }

    pub fn track(&self, joint: JointId) -> impl Iterator<Item = Point3> + '_ {
        self.positions.iter().map(move |f| f[joint.index()])
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.frame_count().saturating_sub(1)) as f64
    }

    /// Converts back to a canonical-labelled recording on the uniform clock.
    pub fn to_recording(&self) -> RawRecording {
        let frames = self
            .positions
            .iter()
            .enumerate()
            .map(|(i, frame)| Frame {
                t: self.t0 + i as f64 * self.dt,
                joints: JointId::ALL
                    .iter()
                    .map(|j| (j.name().to_string(), frame[j.index()]))
                    .collect(),
            })
            .collect();
        RawRecording {
            patient_id: self.patient_id.clone(),
            session: self.session,
            source: self.source,
            action: self.action,
            labelling: Labelling::Canonical,
            frames,
        }
    }
}

/// Linear interpolation of every coordinate onto `t_first, t_first + dt, ..`.
/// The grid has `floor((t_last - t_first) / dt) + 1` points.
pub fn resample_uniform(rec: &RawRecording, dt: f64) -> Result<CanonicalSeries> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(IngestError::InvalidDt(dt));
    }
    if rec.labelling != Labelling::Canonical {
        return Err(IngestError::NotCanonical);
    }
    let n_src = rec.frames.len();
    if n_src < 2 {
        return Err(IngestError::TooFewFrames(n_src));
    }
    let mut source = Vec::with_capacity(n_src);
    for (i, frame) in rec.frames.iter().enumerate() {
        if i > 0 && !(frame.t > rec.frames[i - 1].t) {
            return Err(IngestError::NonMonotonicTimestamp(i));
        }
        let mut row = [[0.0; 3]; JointId::COUNT];
        for joint in JointId::ALL {
            row[joint.index()] = *frame
                .joints
                .get(joint.name())
                .ok_or_else(|| IngestError::MissingCanonicalJoint {
                    frame: i,
                    joint,
                    label: joint.name().to_string(),
                })?;
        }
        source.push(row);
    }

    let t_first = rec.frames[0].t;
    let t_last = rec.frames[n_src - 1].t;
    // Tolerance keeps the final node when the span is a float multiple of dt.
    let steps = ((t_last - t_first) / dt + 1e-9).floor() as usize;
    let node_eps = 1e-9 * dt;

    let mut positions = Vec::with_capacity(steps + 1);
    let mut seg = 0;
    for k in 0..=steps {
        let t = t_first + k as f64 * dt;
        while seg + 2 < n_src && rec.frames[seg + 1].t <= t {
            seg += 1;
        }
        let (ta, tb) = (rec.frames[seg].t, rec.frames[seg + 1].t);
        let row = if (t - ta).abs() <= node_eps {
            source[seg]
        } else if (t - tb).abs() <= node_eps {
            source[seg + 1]
        } else {
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            let (a, b) = (&source[seg], &source[seg + 1]);
            let mut row = [[0.0; 3]; JointId::COUNT];
            for j in 0..JointId::COUNT {
                for c in 0..3 {
                    row[j][c] = a[j][c] + w * (b[j][c] - a[j][c]);
                }
            }
            row
        };
        positions.push(row);
    }

    Ok(CanonicalSeries {
        patient_id: rec.patient_id.clone(),
        session: rec.session,
        source: rec.source,
        action: rec.action,
        t0: t_first,
        dt,
        positions,
    })
}
