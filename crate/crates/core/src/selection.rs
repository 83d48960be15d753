//! Potential-social-event selection and the detection → categorization pipeline.

use serde::{Deserialize, Serialize};

use crate::classifier::SequenceClassifier;
use crate::error::Result;
use crate::features::{build_detection_series, EnvironmentReducer};
use crate::model::{Category, EventRecord, FeatureMask, PrototypeId, Task};
use crate::scalar::Scalar;

pub const DEFAULT_MIN_FACE_DENSITY: f64 = 0.25;

/// Keeps events whose fraction of frames with at least one face reaches `min_face_density`.
pub fn select_social_events(events: &[EventRecord], min_face_density: f64) -> Vec<EventRecord> {
    events
        .iter()
        .filter(|e| !e.frames.is_empty() && e.face_density() >= min_face_density)
        .cloned()
        .collect()
}

/// One detected interaction with one tracked person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub prototype_id: PrototypeId,
    pub event_id: u64,
    pub day_index: u32,
    pub category: Category,
    /// Number of frames in which the person was tracked.
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detection_mask: FeatureMask,
    pub categorization_mask: FeatureMask,
    pub min_face_density: f64,
    pub detection_threshold: f64,
    pub categorization_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detection_mask: FeatureMask::Sid4,
            categorization_mask: FeatureMask::Sic3,
            min_face_density: DEFAULT_MIN_FACE_DENSITY,
            detection_threshold: 0.5,
            categorization_threshold: 0.5,
        }
    }
}

/// Runs detection on every prototype of every selected event, then categorizes each
/// event holding at least one interacting prototype.
///
/// Records are ordered by prototype id (event first, then track).
pub fn run_pipeline<T: Scalar>(
    dataset: &[EventRecord],
    detector: &SequenceClassifier<T>,
    categorizer: &SequenceClassifier<T>,
    environment: &EnvironmentReducer<T>,
    config: &PipelineConfig,
) -> Result<Vec<InteractionRecord>> {
    config.detection_mask.expect_task(Task::Detection)?;
    config.categorization_mask.expect_task(Task::Categorization)?;
    detector.ensure_mask(config.detection_mask)?;
    categorizer.ensure_mask(config.categorization_mask)?;

    let mut records = Vec::new();
    for event in select_social_events(dataset, config.min_face_density) {
        let mut interacting = Vec::new();
        for proto in event.prototypes() {
            let series = build_detection_series(&proto, config.detection_mask)?;
            if detector.classify(&series, T::of(config.detection_threshold))?.positive {
                interacting.push(proto);
            }
        }
        if interacting.is_empty() {
            continue;
        }
        let series = environment.categorization_series(&event, config.categorization_mask)?;
        let positive = categorizer.classify(&series, T::of(config.categorization_threshold))?.positive;
        let category = Category::from_positive(positive);
        records.extend(interacting.into_iter().map(|p| InteractionRecord {
            prototype_id: p.id,
            event_id: event.event_id,
            day_index: event.day_index,
            category,
            frame_count: p.len(),
            person_id: None,
        }));
    }
    records.sort_by_key(|r| r.prototype_id);
    Ok(records)
}
