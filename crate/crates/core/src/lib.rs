//! Rare fold-pattern detection with a convolutional beta-VAE.
//!
//! The crate is organised along the processing chain:
//!
//! * [`grid`]: voxel lattices, geometric operations, chamfer distances, volume files.
//! * [`preprocess`]: skeleton to normalized distance-map crops, region masks, augmentation.
//! * [`synth`]: procedural fold skeletons with ground truth and perturbation benchmarks.
//! * [`vae`]: the beta-VAE, its objective, training, checkpoints and hyperparameter search.
//! * [`detect`]: latent-space classifiers and one-class detectors, two-sample tests, residual maps.
//! * [`explore`]: latent averages, interpolations, traversals, binarization and slice images.

pub mod detect;
pub mod error;
pub mod explore;
pub mod grid;
pub mod preprocess;
pub mod rng;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
pub use grid::{BinaryGrid, BoundingBox, Dims, Grid, GridKind, LabelGrid, ScalarGrid};
