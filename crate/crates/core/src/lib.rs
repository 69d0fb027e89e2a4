//! Budgeted image classification with learned region-acquisition policies.
//!
//! An image is split into a fixed grid of regions. At test time only `B`
//! regions are ever described: a fixed start region, then `B - 1` regions
//! chosen one at a time by per-step linear policies that look at what has
//! been acquired so far, and finally a linear classifier over the acquired
//! regions. Policies are trained backwards from the classifier using
//! deterministic rollouts.

pub mod bundle_io;
pub mod data;
pub mod error;
pub mod experiments;
pub mod features;
pub mod image;
pub mod inference;
pub mod linear;
pub mod seed;
pub mod training;

pub use bundle_io::{load_bundle, save_bundle};
pub use data::{generate_pointer_task, load_dataset, save_dataset, LabeledDataset, PointerTaskSpec};
pub use error::{Error, Result};
pub use features::{AggregatedFeatures, FeatureExtractor, FeatureVector, RegionGrid};
pub use image::Image;
pub use inference::{classify, classify_random, InferenceResult};
pub use linear::{LinearModel, TrainConfig};
pub use training::{learn_full_policy, ExtractorConfig, PolicyBundle, TrainingPlan, Trajectory};
