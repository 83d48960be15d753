//! Dataset-level assembly of labeled training samples and fitted feature artifacts.

use crate::error::Result;
use crate::features::{build_detection_series, EnvironmentReducer, Vocabulary};
use crate::io::{FeatureArtifact, GroundTruth, FORMAT_VERSION};
use crate::model::{EventRecord, FeatureMask, PrototypeId, Task};
use crate::numerics::{fit_standardizer, Matrix};
use crate::scalar::Scalar;
use crate::series::MultiSeries;

/// Detection series of every labeled prototype in `events`, with 1 = interacting.
pub fn detection_samples<T: Scalar>(
    events: &[EventRecord],
    truth: &GroundTruth,
    mask: FeatureMask,
) -> Result<Vec<(PrototypeId, MultiSeries<T>, u8)>> {
    mask.expect_task(Task::Detection)?;
    let mut out = Vec::new();
    for event in events {
        for proto in event.prototypes() {
            if let Some(interacting) = truth.interacting(&proto.id) {
                out.push((proto.id, build_detection_series(&proto, mask)?, interacting as u8));
            }
        }
    }
    Ok(out)
}

/// Categorization series of every labeled event, with 1 = formal.
pub fn categorization_samples<T: Scalar>(
    events: &[EventRecord],
    truth: &GroundTruth,
    environment: &EnvironmentReducer<T>,
    mask: FeatureMask,
) -> Result<Vec<(u64, MultiSeries<T>, u8)>> {
    mask.expect_task(Task::Categorization)?;
    let mut out = Vec::new();
    for event in events {
        if let Some(category) = truth.events.get(&event.event_id) {
            out.push((event.event_id, environment.categorization_series(event, mask)?, category.as_target()));
        }
    }
    Ok(out)
}

fn stack_steps<T: Scalar>(series: impl Iterator<Item = MultiSeries<T>>) -> Result<Matrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for s in series {
        rows.extend(s.steps().map(<[T]>::to_vec));
    }
    Matrix::from_rows(&rows)
}

/// Fits the environment reducer on every frame of `events` and full-width
/// standardizers on the SID4 and SIC3 series.
pub fn fit_features<T: Scalar>(
    events: &[EventRecord],
    top_k: usize,
    variance_threshold: T,
) -> Result<FeatureArtifact<T>> {
    let raw_dim = events
        .iter()
        .flat_map(|e| e.frames.first())
        .map(|f| f.scene_descriptor.len())
        .next()
        .unwrap_or(0);
    let vocabulary = Vocabulary::new(top_k.min(raw_dim.max(1)), raw_dim)?;
    let environment = EnvironmentReducer::fit(events, vocabulary, variance_threshold)?;

    let detection = events
        .iter()
        .flat_map(|e| e.prototypes())
        .map(|p| build_detection_series::<T>(&p, FeatureMask::Sid4))
        .collect::<Result<Vec<_>>>()?;
    let categorization = events
        .iter()
        .map(|e| environment.categorization_series(e, FeatureMask::Sic3))
        .collect::<Result<Vec<_>>>()?;

    Ok(FeatureArtifact {
        format_version: FORMAT_VERSION,
        detection_mask: FeatureMask::Sid4,
        categorization_mask: FeatureMask::Sic3,
        detection_standardizer: fit_standardizer(&stack_steps(detection.into_iter())?),
        categorization_standardizer: fit_standardizer(&stack_steps(categorization.into_iter())?),
        environment,
    })
}

impl<T: Scalar> FeatureArtifact<T> {
    /// Standardizer restricted to the columns `mask` selects.
    pub fn standardizer_for(&self, mask: FeatureMask) -> Result<crate::numerics::Standardizer<T>> {
        match mask.task() {
            Task::Detection => self.detection_standardizer.select(&crate::features::detection_columns(mask)?),
            Task::Categorization => {
                let k = self.environment.dim();
                let width = if mask.contains(crate::model::Feature::Expression) { self.categorization_standardizer.dim() } else { k };
                self.categorization_standardizer.select(&(0..width).collect::<Vec<_>>())
            }
        }
    }
}
