//! Outlier identification in latent and folding space.

mod iforest;
mod ocsvm;
mod outliers;
mod pca;
mod residual;
mod stats;
mod svm;

pub use iforest::{average_path_length, isolation_forest, ForestOptions};
pub use ocsvm::{median_gamma, one_class_svm, OcsvmOptions, OcsvmResult};
pub use outliers::{repeated_outlier_controls, Group, OutlierFrequency, ScoredSample};
pub use pca::{pca2d, Pca2d};
pub use residual::{residual_maps, ResidualMaps, ResidualMass, DEFAULT_NOISE_FLOOR};
pub use stats::{auc, kolmogorov_q, ks_test, midranks, mwu_test, RocCurve, TestResult, KS_EXACT_LIMIT, MWU_EXACT_LIMIT};
pub use svm::{fit_linear_svm, linear_svm_cv, stratified_folds, LinearModel, SvmCv, SvmOptions};
