//! Time-series assembly for the two classification tasks.
//!
//! Detection series (one per prototype) carry, per frame, the face distance, the three
//! head-pose angles and the index of the dominant expression. Categorization series (one
//! per event) carry the reduced scene descriptor followed by the mean expression
//! distribution of every face in the frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EventRecord, ExpressionVector, Feature, FeatureMask, Prototype, Task, EXPRESSION_NAMES, N_EXPRESSIONS,
};
use crate::numerics::{fit_pca, Matrix, PcaModel};
use crate::scalar::Scalar;
use crate::series::MultiSeries;

/// Canonical detection columns.
pub const DETECTION_LABELS: [&str; 5] = ["distance", "yaw", "pitch", "roll", "expression"];

/// Default number of descriptor components kept per frame.
pub const DEFAULT_TOP_K: usize = 64;

/// Default cumulative explained-variance threshold of the environment reduction.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// Index (1-based) of the most probable expression; ties go to the lowest index.
pub fn dominant_expression(e: &ExpressionVector) -> usize {
    let probs = e.probs();
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best + 1
}

fn detection_column(feature: Feature) -> usize {
    match feature {
        Feature::Distance => 0,
        Feature::Yaw => 1,
        Feature::Pitch => 2,
        Feature::Roll => 3,
        Feature::Expression => 4,
        Feature::Environment => unreachable!("environment is not a detection feature"),
    }
}

/// Columns of the full five-column detection series selected by `mask`.
pub fn detection_columns(mask: FeatureMask) -> Result<Vec<usize>> {
    mask.expect_task(Task::Detection)?;
    Ok(mask.features().iter().map(|&f| detection_column(f)).collect())
}

/// Per-frame detection features of one prototype, restricted to `mask`.
pub fn build_detection_series<T: Scalar>(p: &Prototype, mask: FeatureMask) -> Result<MultiSeries<T>> {
    let columns = detection_columns(mask)?;
    if p.is_empty() {
        return Err(Error::EmptyPrototype);
    }
    let rows: Vec<Vec<T>> = p
        .faces()
        .map(|f| {
            let full = [f.distance, f.yaw, f.pitch, f.roll, dominant_expression(&f.expression) as f64];
            columns.iter().map(|&c| T::of(full[c])).collect()
        })
        .collect();
    let labels = columns.iter().map(|&c| DETECTION_LABELS[c].to_string()).collect();
    MultiSeries::new(Matrix::from_rows(&rows)?, labels)
}

/// Component-wise mean of the expression vectors of every face in a frame.
///
/// A frame without faces yields the uniform distribution.
pub fn mean_expression(frame_faces: &[ExpressionVector]) -> [f64; N_EXPRESSIONS] {
    if frame_faces.is_empty() {
        return *ExpressionVector::uniform().probs();
    }
    let mut mean = [0.0; N_EXPRESSIONS];
    for e in frame_faces {
        for (m, p) in mean.iter_mut().zip(e.probs()) {
            *m += p;
        }
    }
    let n = frame_faces.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Sparsification of a raw scene descriptor into its strongest "words".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub top_k: usize,
    pub raw_dim: usize,
}

impl Vocabulary {
    pub fn new(top_k: usize, raw_dim: usize) -> Result<Self> {
        if top_k == 0 || top_k > raw_dim {
            return Err(Error::InvalidArgument(format!("top_k {top_k} outside [1, {raw_dim}]")));
        }
        Ok(Self { top_k, raw_dim })
    }
}

/// Keeps the `top_k` largest-magnitude components at their values and zeroes the rest.
/// Ties are resolved toward the lower index.
pub fn quantize_descriptor<T: Scalar>(x: &[T], v: &Vocabulary) -> Result<Vec<T>> {
    if x.len() != v.raw_dim {
        return Err(Error::DimensionMismatch { expected: v.raw_dim, actual: x.len() });
    }
    if x.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("descriptor contains non-finite values".into()));
    }
    if v.top_k >= x.len() {
        return Ok(x.to_vec());
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    // partial selection: indices ordered by (|x| desc, index asc)
    let cmp = |&a: &usize, &b: &usize| {
        x[b].abs().partial_cmp(&x[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    };
    order.select_nth_unstable_by(v.top_k - 1, cmp);
    let mut out = vec![T::zero(); x.len()];
    for &i in &order[..v.top_k] {
        out[i] = x[i];
    }
    Ok(out)
}

/// Vocabulary plus PCA reduction of the environment descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnvironmentReducer<T: Scalar> {
    pub vocabulary: Vocabulary,
    pub pca: PcaModel<T>,
}

impl<T: Scalar> EnvironmentReducer<T> {
    /// Fits the PCA on the quantized descriptors of every frame of `events`.
    pub fn fit(events: &[EventRecord], vocabulary: Vocabulary, variance_threshold: T) -> Result<Self> {
        let mut rows = Vec::new();
        for e in events {
            for f in &e.frames {
                let raw: Vec<T> = f.scene_descriptor.iter().map(|&v| T::of(v)).collect();
                rows.push(quantize_descriptor(&raw, &vocabulary)?);
            }
        }
        let pca = fit_pca(&Matrix::from_rows(&rows)?, variance_threshold)?;
        Ok(Self { vocabulary, pca })
    }

    pub fn reduce(&self, descriptor: &[f64]) -> Result<Vec<T>> {
        let raw: Vec<T> = descriptor.iter().map(|&v| T::of(v)).collect();
        self.pca.project(&quantize_descriptor(&raw, &self.vocabulary)?)
    }

    pub fn dim(&self) -> usize {
        self.pca.n_components()
    }
}

/// Column labels of the full (environment + expression) categorization series.
pub fn categorization_labels(env_dim: usize, mask: FeatureMask) -> Vec<String> {
    let mut labels: Vec<String> = (1..=env_dim).map(|i| format!("env_{i}")).collect();
    if mask.contains(Feature::Expression) {
        labels.extend(EXPRESSION_NAMES.iter().map(|n| format!("expr_{n}")));
    }
    labels
}

/// Per-frame categorization features of one event, restricted to `mask`.
pub fn build_categorization_series<T: Scalar>(
    e: &EventRecord,
    pca: &PcaModel<T>,
    v: &Vocabulary,
    mask: FeatureMask,
) -> Result<MultiSeries<T>> {
    mask.expect_task(Task::Categorization)?;
    if pca.input_dim() != v.raw_dim {
        return Err(Error::DimensionMismatch { expected: v.raw_dim, actual: pca.input_dim() });
    }
    let with_expression = mask.contains(Feature::Expression);
    let mut rows = Vec::with_capacity(e.frames.len());
    for frame in &e.frames {
        let raw: Vec<T> = frame.scene_descriptor.iter().map(|&x| T::of(x)).collect();
        let mut row = pca.project(&quantize_descriptor(&raw, v)?)?;
        if with_expression {
            let faces: Vec<ExpressionVector> = frame.faces.iter().map(|f| f.expression).collect();
            row.extend(mean_expression(&faces).iter().map(|&p| T::of(p)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("event {} has no frames", e.event_id)));
    }
    MultiSeries::new(Matrix::from_rows(&rows)?, categorization_labels(pca.n_components(), mask))
}

impl<T: Scalar> EnvironmentReducer<T> {
    pub fn categorization_series(&self, e: &EventRecord, mask: FeatureMask) -> Result<MultiSeries<T>> {
        build_categorization_series(e, &self.pca, &self.vocabulary, mask)
    }
}
