//! Convolutional beta-VAE over normalized distance-map crops.

mod checkpoint;
mod config;
mod conv;
mod gradcheck;
mod gridsearch;
mod network;
mod params;
mod real;
mod train;

pub use config::{ModelConfig, ReconKind};
pub use conv::ConvGeom;
pub use gradcheck::{grad_check, relative_error, GradCheck, GradCheckOptions};
pub use network::{kl_divergence, reparameterize, LatentCode, LossParts, Vae, LEAKY_SLOPE};
pub use params::{layout, ParamSpec, Parameters};
pub use real::Real;
pub use checkpoint::{config_sidecar, load_model, read_checkpoint, save_model, write_checkpoint, CHECKPOINT_MAGIC};
pub use train::{evaluate, train, train_with, Adam, EpochLosses, TrainReport, TrainSet};
pub use gridsearch::{grid_search, select_entry, GridEntry, GridSearch, RECON_GATE};
