//! A trained LSTM bound to the feature mask and standardizer it was trained with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{lstm_forward, train, Classification, LstmParams, TrainConfig, TrainingLog};
use crate::model::FeatureMask;
use crate::numerics::{fit_standardizer, Matrix, Standardizer};
use crate::scalar::Scalar;
use crate::series::MultiSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SequenceClassifier<T: Scalar> {
    pub mask: FeatureMask,
    pub dim_labels: Vec<String>,
    pub standardizer: Standardizer<T>,
    pub params: LstmParams<T>,
}

impl<T: Scalar> SequenceClassifier<T> {
    /// Fits a standardizer on every step of `samples` (unless one is supplied) and trains
    /// the LSTM on the standardized sequences.
    pub fn fit(
        samples: &[(MultiSeries<T>, u8)],
        mask: FeatureMask,
        standardizer: Option<Standardizer<T>>,
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainingLog)> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("no training samples".into()))?;
        let dim_labels = first.0.dim_labels().to_vec();
        let standardizer = match standardizer {
            Some(s) => s,
            None => {
                let rows: Vec<&[T]> = samples.iter().flat_map(|(s, _)| s.steps()).collect();
                fit_standardizer(&Matrix::from_rows(&rows)?)
            }
        };
        let prepared = samples
            .iter()
            .map(|(s, l)| Ok((s.map_rows(|r| standardizer.apply(r))?, *l)))
            .collect::<Result<Vec<_>>>()?;
        let (params, log) = train(&prepared, cfg)?;
        Ok((Self { mask, dim_labels, standardizer, params }, log))
    }

    /// Fails unless the classifier was built with `requested`.
    pub fn ensure_mask(&self, requested: FeatureMask) -> Result<()> {
        if self.mask == requested {
            Ok(())
        } else {
            Err(Error::MaskMismatch { model: self.mask.to_string(), requested: requested.to_string() })
        }
    }

    pub fn probability(&self, series: &MultiSeries<T>) -> Result<T> {
        if series.dim() != self.standardizer.dim() {
            return Err(Error::DimensionMismatch { expected: self.standardizer.dim(), actual: series.dim() });
        }
        let z = series.map_rows(|r| self.standardizer.apply(r))?;
        Ok(lstm_forward(&self.params, &z)?.0)
    }

    pub fn classify(&self, series: &MultiSeries<T>, threshold: T) -> Result<Classification<T>> {
        let probability = self.probability(series)?;
        Ok(Classification { positive: probability >= threshold, probability })
    }

    /// Fraction of `samples` classified correctly at `threshold`.
    pub fn accuracy(&self, samples: &[(MultiSeries<T>, u8)], threshold: T) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for (s, l) in samples {
            if self.classify(s, threshold)?.positive == (*l > 0) {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}
