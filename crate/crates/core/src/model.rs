//! Domain records shared by every pipeline stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of basic facial expressions scored by the upstream expression model.
pub const N_EXPRESSIONS: usize = 8;

/// Expression names in index order (index 1 is `neutral`).
pub const EXPRESSION_NAMES: [&str; N_EXPRESSIONS] = [
    "neutral",
    "happiness",
    "surprise",
    "sadness",
    "anger",
    "disgust",
    "fear",
    "contempt",
];

/// Tolerance on the sum of a stored expression distribution.
pub const EXPRESSION_SUM_TOLERANCE: f64 = 1e-6;

/// Raw sums inside this band are renormalized on ingestion; outside it the record is invalid.
pub const RENORMALIZE_BAND: (f64, f64) = (0.9, 1.1);

/// Probabilities over the eight basic expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; N_EXPRESSIONS]", into = "[f64; N_EXPRESSIONS]")]
pub struct ExpressionVector([f64; N_EXPRESSIONS]);

impl From<[f64; N_EXPRESSIONS]> for ExpressionVector {
    fn from(probs: [f64; N_EXPRESSIONS]) -> Self {
        Self::ingest(probs)
    }
}

impl From<ExpressionVector> for [f64; N_EXPRESSIONS] {
    fn from(v: ExpressionVector) -> Self {
        v.0
    }
}

impl ExpressionVector {
    /// Strict constructor: ingests `probs` and rejects anything that is not a distribution.
    pub fn new(probs: [f64; N_EXPRESSIONS]) -> Result<Self> {
        let v = Self::ingest(probs);
        if v.is_valid() {
            Ok(v)
        } else {
            Err(Error::InvalidDistribution(format!(
                "expression probabilities {probs:?} are not a distribution"
            )))
        }
    }

    /// Ingestion path used by loaders and generators.
    ///
    /// Sums within [`RENORMALIZE_BAND`] are rescaled to one; anything else is kept
    /// verbatim so that validation can report it.
    pub fn ingest(probs: [f64; N_EXPRESSIONS]) -> Self {
        let sum: f64 = probs.iter().sum();
        let in_band = sum >= RENORMALIZE_BAND.0 && sum <= RENORMALIZE_BAND.1;
        if in_band && (sum - 1.0).abs() > 1e-12 && probs.iter().all(|p| p.is_finite()) {
            let mut out = probs;
            for p in &mut out {
                *p /= sum;
            }
            Self(out)
        } else {
            Self(probs)
        }
    }

    pub fn uniform() -> Self {
        Self([1.0 / N_EXPRESSIONS as f64; N_EXPRESSIONS])
    }

    pub fn one_hot(index: usize) -> Self {
        assert!((1..=N_EXPRESSIONS).contains(&index), "expression index is 1-based");
        let mut probs = [0.0; N_EXPRESSIONS];
        probs[index - 1] = 1.0;
        Self(probs)
    }

    pub fn probs(&self) -> &[f64; N_EXPRESSIONS] {
        &self.0
    }

    /// 1-based probability accessor.
    pub fn prob(&self, index: usize) -> f64 {
        self.0[index - 1]
    }

    pub fn is_valid(&self) -> bool {
        let in_range = self.0.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p));
        let sum: f64 = self.0.iter().sum();
        in_range && (sum - 1.0).abs() <= EXPRESSION_SUM_TOLERANCE
    }
}

/// One tracked face in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub track_id: u64,
    /// Meters from the camera.
    pub distance: f64,
    /// Degrees, [-180, 180].
    pub yaw: f64,
    /// Degrees, [-90, 90].
    pub pitch: f64,
    /// Degrees, [-180, 180].
    pub roll: f64,
    #[serde(rename = "expression_probs")]
    pub expression: ExpressionVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_index: u64,
    pub scene_descriptor: Vec<f64>,
    pub faces: Vec<FaceObservation>,
}

impl Frame {
    pub fn has_faces(&self) -> bool {
        !self.faces.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Formal,
    Informal,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Formal => "formal",
            Category::Informal => "informal",
        }
    }

    /// Binary target used by the categorization classifier (formal is the positive class).
    pub fn as_target(self) -> u8 {
        match self {
            Category::Formal => 1,
            Category::Informal => 0,
        }
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Category::Formal
        } else {
            Category::Informal
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionLabel {
    Interacting,
    NonInteracting,
}

impl InteractionLabel {
    pub fn from_positive(positive: bool) -> Self {
        if positive {
            InteractionLabel::Interacting
        } else {
            InteractionLabel::NonInteracting
        }
    }

    pub fn is_interacting(self) -> bool {
        self == InteractionLabel::Interacting
    }
}

/// An egocentric segment sharing one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: u64,
    pub day_index: u32,
    pub frames: Vec<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Category>,
}

impl EventRecord {
    /// Fraction of frames showing at least one face.
    pub fn face_density(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let with_faces = self.frames.iter().filter(|f| f.has_faces()).count();
        with_faces as f64 / self.frames.len() as f64
    }

    /// Groups face observations by track, one prototype per track, ordered by track id.
    pub fn prototypes(&self) -> Vec<Prototype> {
        let mut tracks: BTreeMap<u64, Vec<TimedFace>> = BTreeMap::new();
        for frame in &self.frames {
            for face in &frame.faces {
                tracks.entry(face.track_id).or_default().push(TimedFace {
                    frame_index: frame.frame_index,
                    face: face.clone(),
                });
            }
        }
        tracks
            .into_iter()
            .map(|(track_id, observations)| Prototype {
                id: PrototypeId { event_id: self.event_id, track_id },
                observations,
                label: None,
            })
            .collect()
    }
}

/// Identity of a prototype: one track inside one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrototypeId {
    pub event_id: u64,
    pub track_id: u64,
}

impl fmt::Display for PrototypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.event_id, self.track_id)
    }
}

impl FromStr for PrototypeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("prototype id `{s}` is not `event:track`"));
        let (e, t) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self {
            event_id: e.trim().parse().map_err(|_| bad())?,
            track_id: t.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedFace {
    pub frame_index: u64,
    pub face: FaceObservation,
}

/// One tracked person within one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub id: PrototypeId,
    pub observations: Vec<TimedFace>,
    pub label: Option<InteractionLabel>,
}

impl Prototype {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn faces(&self) -> impl Iterator<Item = &FaceObservation> {
        self.observations.iter().map(|o| &o.face)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Distance,
    Yaw,
    Pitch,
    Roll,
    Expression,
    Environment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Detection,
    Categorization,
}

/// Predefined feature settings for the two classification tasks.
///
/// `Sic1` and `Sic2` select the same feature (environment only); they differ in which
/// scene-descriptor source the user supplies, so models built with one are not
/// interchangeable with the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureMask {
    Sid1,
    Sid2,
    Sid3,
    Sid4,
    Sic1,
    Sic2,
    Sic3,
}

impl FeatureMask {
    pub const DETECTION: [FeatureMask; 4] = [Self::Sid1, Self::Sid2, Self::Sid3, Self::Sid4];
    pub const CATEGORIZATION: [FeatureMask; 3] = [Self::Sic1, Self::Sic2, Self::Sic3];

    pub fn detection(setting: u8) -> Result<Self> {
        match setting {
            1 => Ok(Self::Sid1),
            2 => Ok(Self::Sid2),
            3 => Ok(Self::Sid3),
            4 => Ok(Self::Sid4),
            n => Err(Error::InvalidArgument(format!("no detection setting SID{n}"))),
        }
    }

    pub fn categorization(setting: u8) -> Result<Self> {
        match setting {
            1 => Ok(Self::Sic1),
            2 => Ok(Self::Sic2),
            3 => Ok(Self::Sic3),
            n => Err(Error::InvalidArgument(format!("no categorization setting SIC{n}"))),
        }
    }

    pub fn task(self) -> Task {
        match self {
            Self::Sid1 | Self::Sid2 | Self::Sid3 | Self::Sid4 => Task::Detection,
            Self::Sic1 | Self::Sic2 | Self::Sic3 => Task::Categorization,
        }
    }

    /// Features in canonical column order.
    pub fn features(self) -> &'static [Feature] {
        use Feature::*;
        match self {
            Self::Sid1 => &[Distance, Yaw],
            Self::Sid2 => &[Distance, Yaw, Pitch, Roll],
            Self::Sid3 => &[Distance, Yaw, Expression],
            Self::Sid4 => &[Distance, Yaw, Pitch, Roll, Expression],
            Self::Sic1 | Self::Sic2 => &[Environment],
            Self::Sic3 => &[Environment, Expression],
        }
    }

    pub fn contains(self, feature: Feature) -> bool {
        self.features().contains(&feature)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sid1 => "SID1",
            Self::Sid2 => "SID2",
            Self::Sid3 => "SID3",
            Self::Sid4 => "SID4",
            Self::Sic1 => "SIC1",
            Self::Sic2 => "SIC2",
            Self::Sic3 => "SIC3",
        }
    }

    /// Fails unless the mask belongs to `task`.
    pub fn expect_task(self, task: Task) -> Result<Self> {
        if self.task() == task {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("{} is not a {task:?} mask", self.name())))
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyEvent,
    UnorderedFrames,
    OutOfRange,
    InvalidExpression,
    DimensionMismatch,
    DuplicateTrack,
    DuplicateEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub event_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}", self.event_id)?;
        if let Some(frame) = self.frame_index {
            write!(f, " frame {frame}")?;
        }
        if let Some(track) = self.track_id {
            write!(f, " track {track}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn for_event(&self, event_id: u64) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.event_id == event_id)
    }
}

fn check_angle(name: &str, value: f64, limit: f64) -> Option<String> {
    if value.is_finite() && value.abs() <= limit {
        None
    } else {
        Some(format!("{name} {value} outside [-{limit}, {limit}]"))
    }
}

/// Scans a dataset for invariant violations. An empty report means the dataset is accepted.
pub fn validate_dataset(events: &[EventRecord]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut descriptor_dim: Option<usize> = None;
    let mut embedding_dim: Option<usize> = None;
    let mut seen_events = BTreeSet::new();

    for event in events {
        let mut push = |frame_index: Option<u64>, track_id: Option<u64>, kind, message: String| {
            violations.push(Violation { event_id: event.event_id, frame_index, track_id, kind, message })
        };

        if !seen_events.insert(event.event_id) {
            push(None, None, ViolationKind::DuplicateEvent, "duplicate event id".into());
        }
        if event.frames.is_empty() {
            push(None, None, ViolationKind::EmptyEvent, "event has no frames".into());
            continue;
        }

        for (i, frame) in event.frames.iter().enumerate() {
            let fi = Some(frame.frame_index);
            if i > 0 && frame.frame_index <= event.frames[i - 1].frame_index {
                push(
                    fi,
                    None,
                    ViolationKind::UnorderedFrames,
                    format!("frame index {} follows {}", frame.frame_index, event.frames[i - 1].frame_index),
                );
            }

            let dim = frame.scene_descriptor.len();
            match descriptor_dim {
                None => descriptor_dim = Some(dim),
                Some(expected) if expected != dim => push(
                    fi,
                    None,
                    ViolationKind::DimensionMismatch,
                    format!("scene descriptor has {dim} components, expected {expected}"),
                ),
                _ => {}
            }
            if frame.scene_descriptor.iter().any(|v| !v.is_finite()) {
                push(fi, None, ViolationKind::OutOfRange, "non-finite scene descriptor".into());
            }

            let mut tracks = BTreeSet::new();
            for face in &frame.faces {
                let ti = Some(face.track_id);
                if !tracks.insert(face.track_id) {
                    push(fi, ti, ViolationKind::DuplicateTrack, "track appears twice in one frame".into());
                }
                if !(face.distance.is_finite() && face.distance >= 0.0) {
                    push(fi, ti, ViolationKind::OutOfRange, format!("distance {} is not a finite non-negative value", face.distance));
                }
                for msg in [
                    check_angle("yaw", face.yaw, 180.0),
                    check_angle("pitch", face.pitch, 90.0),
                    check_angle("roll", face.roll, 180.0),
                ]
                .into_iter()
                .flatten()
                {
                    push(fi, ti, ViolationKind::OutOfRange, msg);
                }
                if !face.expression.is_valid() {
                    push(
                        fi,
                        ti,
                        ViolationKind::InvalidExpression,
                        format!("expression probabilities {:?} are not a distribution", face.expression.probs()),
                    );
                }
                if let Some(emb) = &face.embedding {
                    match embedding_dim {
                        None => embedding_dim = Some(emb.len()),
                        Some(expected) if expected != emb.len() => push(
                            fi,
                            ti,
                            ViolationKind::DimensionMismatch,
                            format!("embedding has {} components, expected {expected}", emb.len()),
                        ),
                        _ => {}
                    }
                    if emb.iter().any(|v| !v.is_finite()) {
                        push(fi, ti, ViolationKind::OutOfRange, "non-finite embedding".into());
                    }
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Number of distinct day indices in a dataset.
pub fn distinct_days(events: &[EventRecord]) -> usize {
    events.iter().map(|e| e.day_index).collect::<BTreeSet<_>>().len()
}
