//! Detection, categorization and characterization of a wearable-camera user's social
//! interactions from per-frame face and scene features.
//!
//! The numerical core (PCA, standardization, the LSTM classifier, the metrics) is
//! generic over [`Scalar`] (`f32` or `f64`). The aliases below fix the scalar to `f64`,
//! which is what the pipeline and the command-line tool use.

pub mod characterization;
pub mod classifier;
pub mod clustering;
pub mod error;
pub mod features;
pub mod generator;
pub mod io;
pub mod lstm;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod selection;
pub mod series;
pub mod training;

pub use error::{Error, Result};
pub use model::{
    validate_dataset, Category, EventRecord, ExpressionVector, FaceObservation, Feature, FeatureMask, Frame,
    InteractionLabel, Prototype, PrototypeId, Task, ValidationReport,
};
pub use scalar::Scalar;
pub use selection::{run_pipeline, select_social_events, InteractionRecord, PipelineConfig};

pub type Series = series::MultiSeries<f64>;
pub type Pca = numerics::PcaModel<f64>;
pub type ZScore = numerics::Standardizer<f64>;
pub type Lstm = lstm::LstmParams<f64>;
pub type Classifier = classifier::SequenceClassifier<f64>;
pub type Environment = features::EnvironmentReducer<f64>;
pub type Report = characterization::CharacterizationReport<f64>;
pub type Features = io::FeatureArtifact<f64>;
pub type Model = io::ModelArtifact<f64>;
