//! Demand-level classification for on-demand air-taxi services.
//!
//! The crate covers the whole modeling path: trip and weather ingestion,
//! k-means partitioning of pickup coordinates into location IDs, feature
//! engineering over `(location, date, hour)` cells, four classifiers
//! (multinomial logistic regression, a one-hidden-layer network, random
//! forests and gradient boosting), cross-validated grid search with
//! per-class metrics, and permutation feature importance.

pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod importance;
pub mod ingest;
pub mod learners;
pub mod seed;

pub use error::{Error, Result};
pub use features::{Demand, FeatureMatrix, Sample};
pub use geo::ClusterModel;
pub use ingest::{Condition, TripRecord, WeatherRecord};
pub use learners::{Classifier, Hyper, LearnerKind, TrainedModel};
