//! File formats: line-delimited datasets, the ground-truth sidecar and versioned JSON
//! artifacts.
//!
//! A dataset file holds one JSON object per frame:
//!
//! ```text
//! {"event_id":3,"day_index":0,"frame_index":12,"scene_descriptor":[...],
//!  "faces":[{"track_id":1,"distance":1.2,"yaw":-4.0,"pitch":2.5,"roll":0.0,
//!            "expression_probs":[...8 values...],"embedding":[...]}]}
//! ```
//!
//! Frames of one event may be interleaved with other events' frames; events are
//! returned in order of first appearance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::characterization::CharacterizationReport;
use crate::classifier::SequenceClassifier;
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::features::EnvironmentReducer;
use crate::lstm::TrainingLog;
use crate::model::{Category, EventRecord, FaceObservation, FeatureMask, Frame, InteractionLabel, PrototypeId, Task};
use crate::numerics::Standardizer;
use crate::scalar::Scalar;
use crate::selection::InteractionRecord;

/// Version stamped into every artifact written by this crate.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    event_id: u64,
    day_index: u32,
    frame_index: u64,
    scene_descriptor: Vec<f64>,
    faces: Vec<FaceObservation>,
}

/// Parses a dataset from any line source.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<EventRecord>> {
    let mut events: Vec<EventRecord> = Vec::new();
    let mut slot: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FrameLine =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let idx = *slot.entry(parsed.event_id).or_insert_with(|| {
            events.push(EventRecord { event_id: parsed.event_id, day_index: parsed.day_index, frames: Vec::new(), label: None });
            events.len() - 1
        });
        let event = &mut events[idx];
        if event.day_index != parsed.day_index {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "field `day_index`: event {} is on day {}, line says {}",
                    event.event_id, event.day_index, parsed.day_index
                ),
            });
        }
        event.frames.push(Frame {
            frame_index: parsed.frame_index,
            scene_descriptor: parsed.scene_descriptor,
            faces: parsed.faces,
        });
    }
    Ok(events)
}

pub fn write_dataset<W: Write>(events: &[EventRecord], mut writer: W) -> Result<()> {
    for event in events {
        for frame in &event.frames {
            let line = FrameLine {
                event_id: event.event_id,
                day_index: event.day_index,
                frame_index: frame.frame_index,
                scene_descriptor: frame.scene_descriptor.clone(),
                faces: frame.faces.clone(),
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EventRecord>> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn save_dataset(events: &[EventRecord], path: impl AsRef<Path>) -> Result<()> {
    write_dataset(events, BufWriter::new(File::create(path)?))
}

/// Ground-truth labels kept apart from the dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub prototypes: BTreeMap<PrototypeId, InteractionLabel>,
    pub events: BTreeMap<u64, Category>,
    /// Generator identity of each prototype, when known.
    pub identities: BTreeMap<PrototypeId, usize>,
}

#[derive(Serialize, Deserialize)]
struct PrototypeLabelLine {
    event_id: u64,
    track_id: u64,
    interacting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    identity: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct EventLabelLine {
    event_id: u64,
    category: Category,
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    format_version: u32,
    prototypes: Vec<PrototypeLabelLine>,
    events: Vec<EventLabelLine>,
}

impl GroundTruth {
    pub fn interacting(&self, id: &PrototypeId) -> Option<bool> {
        self.prototypes.get(id).map(|l| l.is_interacting())
    }

    /// Copies event labels onto `events`.
    pub fn attach(&self, events: &mut [EventRecord]) {
        for e in events {
            e.label = self.events.get(&e.event_id).copied();
        }
    }

    fn to_file(&self) -> LabelFile {
        LabelFile {
            format_version: FORMAT_VERSION,
            prototypes: self
                .prototypes
                .iter()
                .map(|(id, l)| PrototypeLabelLine {
                    event_id: id.event_id,
                    track_id: id.track_id,
                    interacting: l.is_interacting(),
                    identity: self.identities.get(id).copied(),
                })
                .collect(),
            events: self.events.iter().map(|(&event_id, &category)| EventLabelLine { event_id, category }).collect(),
        }
    }

    fn from_file(file: LabelFile) -> Result<Self> {
        check_version(file.format_version)?;
        let mut truth = GroundTruth::default();
        for p in file.prototypes {
            let id = PrototypeId { event_id: p.event_id, track_id: p.track_id };
            truth.prototypes.insert(id, InteractionLabel::from_positive(p.interacting));
            if let Some(identity) = p.identity {
                truth.identities.insert(id, identity);
            }
        }
        truth.events = file.events.into_iter().map(|e| (e.event_id, e.category)).collect();
        Ok(truth)
    }
}

pub fn save_labels(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_json(&truth.to_file(), path)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<GroundTruth> {
    GroundTruth::from_file(read_json(path)?)
}

fn check_version(found: u32) -> Result<()> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(Error::FormatVersion { found, expected: FORMAT_VERSION })
    }
}

pub fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Artifacts carry a format version that is checked on load.
pub trait Artifact: Serialize + DeserializeOwned {
    fn format_version(&self) -> u32;

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        let value: Self = read_json(path)?;
        check_version(value.format_version())?;
        Ok(value)
    }
}

/// Fitted feature extraction: vocabulary, PCA and full-width standardizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureArtifact<T: Scalar> {
    pub format_version: u32,
    /// Mask whose columns `detection_standardizer` covers.
    pub detection_mask: FeatureMask,
    /// Mask whose columns `categorization_standardizer` covers.
    pub categorization_mask: FeatureMask,
    pub environment: EnvironmentReducer<T>,
    pub detection_standardizer: Standardizer<T>,
    pub categorization_standardizer: Standardizer<T>,
}

impl<T: Scalar> Artifact for FeatureArtifact<T> {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelArtifact<T: Scalar> {
    pub format_version: u32,
    pub task: Task,
    pub mask: FeatureMask,
    pub classifier: SequenceClassifier<T>,
    pub training_log: TrainingLog,
}

impl<T: Scalar> Artifact for ModelArtifact<T> {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionsArtifact {
    pub format_version: u32,
    pub detection_mask: FeatureMask,
    pub categorization_mask: FeatureMask,
    /// Distinct days in the processed dataset.
    pub dataset_days: usize,
    pub records: Vec<InteractionRecord>,
}

impl Artifact for InteractionsArtifact {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub format_version: u32,
    pub detection_mask: FeatureMask,
    pub categorization_mask: FeatureMask,
    pub distance_threshold: f64,
    pub clusters: ClusterSet,
}

impl Artifact for ClusterArtifact {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReportArtifact<T: Scalar> {
    pub format_version: u32,
    pub detection_mask: FeatureMask,
    pub categorization_mask: FeatureMask,
    pub reports: Vec<CharacterizationReport<T>>,
}

impl<T: Scalar> Artifact for ReportArtifact<T> {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}
