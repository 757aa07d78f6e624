//! The pipeline configuration: one versioned JSON document, with dotted-path
//! overrides from the command line.

use std::path::{Path, PathBuf};

use foldscan_core::grid::Dims;
use foldscan_core::rng::derive_seed;
use foldscan_core::synth::{GeneratorParams, Hemisphere, Range, MAIN_LABELS};
use foldscan_core::vae::ModelConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Independent random streams under the top-level seed.
pub mod streams {
    pub const COHORT: u64 = 1;
    pub const ASYMMETRY: u64 = 2;
    pub const INTERRUPTED: u64 = 3;
    pub const MODEL: u64 = 4;
    pub const BENCHMARK: u64 = 5;
    pub const DETECT: u64 = 6;
    pub const GRIDSEARCH: u64 = 7;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Stage outputs go to `<workdir>/<stage>/`.
    pub workdir: PathBuf,
    pub seed: u64,
    pub region: RegionConfig,
    /// Generator of the control cohort (right hemispheres).
    pub generator: GeneratorParams,
    pub split: SplitConfig,
    /// `input_dims` and `seed` are derived from `region.pad_dims` and `seed`.
    pub model: ModelConfig,
    pub gridsearch: GridSearchConfig,
    pub benchmark: BenchmarkConfig,
    pub detect: DetectConfig,
    pub explore: ExploreConfig,
}

/// Where the region of interest sits and how crops of it are made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    /// Skeleton labels whose union over the training cohort defines the mask.
    pub mask_labels: Vec<u32>,
    pub dilation_mm: f32,
    /// Context kept around the mask box, in downsampled voxels.
    pub margin: usize,
    pub downsample: usize,
    pub pad_dims: Dims,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            name: "central".into(),
            mask_labels: MAIN_LABELS.to_vec(),
            dilation_mm: 5.0,
            margin: 4,
            downsample: 2,
            pad_dims: [32, 32, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub cohort_size: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { cohort_size: 560, train: 300, val: 60, test: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchConfig {
    pub betas: Vec<f64>,
    pub latent_dims: Vec<usize>,
    /// Epochs per grid point.
    pub epochs: usize,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig { betas: vec![1.0, 2.0, 4.0], latent_dims: vec![8, 16, 32], epochs: 20 }
    }
}

/// The left-hemisphere generator differs from `generator` only in these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymmetryConfig {
    /// Subjects per side.
    pub n: usize,
    pub double_knob_prob: f64,
    pub knob_position: Range,
    pub main_y: Range,
    pub tilt: Range,
}

impl Default for AsymmetryConfig {
    fn default() -> Self {
        let left = GeneratorParams::left_default();
        AsymmetryConfig {
            n: 200,
            double_knob_prob: left.double_knob_prob,
            knob_position: left.knob_position,
            main_y: left.main_y,
            tilt: left.tilt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Fraction of band-eligible test subjects that get a deletion.
    pub split_ratio: f64,
    pub asymmetry: AsymmetryConfig,
    /// Size of the interrupted (rare) cohort.
    pub interrupted_n: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig { split_ratio: 0.5, asymmetry: AsymmetryConfig::default(), interrupted_n: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub k_folds: usize,
    pub svm_c: f64,
    pub svm_epochs: usize,
    pub ocsvm_nu: f64,
    pub forest_trees: usize,
    pub forest_subsample: usize,
    /// Isolation-forest repeats (distinct seeds) for the repeated-outlier ranking.
    pub repeats: usize,
    pub noise_floor: f32,
    /// Minimum share of additions mass inside the gap for a subject to count as gap-filled.
    pub gap_fill_fraction: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            k_folds: 5,
            svm_c: 1.0,
            svm_epochs: 200,
            ocsvm_nu: 0.1,
            forest_trees: 100,
            forest_subsample: 256,
            repeats: 10,
            noise_floor: 0.1,
            gap_fill_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    pub steps: usize,
    pub threshold: f32,
    /// Axial slices (constant third coordinate) rendered per frame.
    pub depths: Vec<usize>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { steps: 7, threshold: 0.4, depths: vec![12, 20] }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let region = RegionConfig::default();
        let seed = 0;
        let mut c = PipelineConfig {
            version: CONFIG_VERSION,
            workdir: PathBuf::from("work"),
            seed,
            model: ModelConfig {
                channels: [8, 16, 32],
                latent_dim: 16,
                beta: 2.0,
                learning_rate: 1e-3,
                epochs: 60,
                batch_size: 16,
                ..ModelConfig::default()
            },
            region,
            generator: GeneratorParams::default(),
            split: SplitConfig::default(),
            gridsearch: GridSearchConfig::default(),
            benchmark: BenchmarkConfig::default(),
            detect: DetectConfig::default(),
            explore: ExploreConfig::default(),
        };
        c.derive_fields();
        c
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl PipelineConfig {
    /// Builds the effective configuration: the file (or the defaults), then
    /// `--set` overrides in order, then `--seed`.
    pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Self> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::from_json(&text)?
            }
            None => Self::default(),
        };
        let mut value = serde_json::to_value(&base).map_err(config_err)?;
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{s}` is not of the form key=value")))?;
            apply_override(&mut value, key, raw)?;
        }
        if let Some(seed) = seed {
            value["seed"] = Value::from(seed);
        }
        let mut config: Self = serde_json::from_value(value).map_err(config_err)?;
        config.derive_fields();
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: Self = serde_json::from_str(text).map_err(config_err)?;
        if c.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                c.version
            )));
        }
        c.derive_fields();
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    fn derive_fields(&mut self) {
        self.model.input_dims = self.region.pad_dims;
        self.model.seed = derive_seed(self.seed, streams::MODEL);
    }

    /// Schema-level checks. Generator geometry is checked when subjects are
    /// generated.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.version));
        }
        let s = &self.split;
        if s.train + s.val + s.test > s.cohort_size {
            return bad(format!(
                "split sizes {} + {} + {} exceed cohort size {}",
                s.train, s.val, s.test, s.cohort_size
            ));
        }
        if s.train == 0 || s.val == 0 || s.test < 2 {
            return bad("train and val need at least one subject, test at least two".into());
        }
        if self.region.mask_labels.is_empty() {
            return bad("region.mask_labels is empty".into());
        }
        if self.region.downsample == 0 {
            return bad("region.downsample must be at least 1".into());
        }
        self.model.validate().map_err(config_err)?;
        if !(0.0..=1.0).contains(&self.benchmark.split_ratio) {
            return bad("benchmark.split_ratio must lie in [0, 1]".into());
        }
        if self.benchmark.asymmetry.n < 2 || self.benchmark.interrupted_n < 2 {
            return bad("asymmetry and interrupted cohorts need at least two subjects".into());
        }
        let d = &self.detect;
        if d.k_folds < 2 || d.repeats < 2 || !(d.ocsvm_nu > 0.0 && d.ocsvm_nu <= 1.0) {
            return bad("detect needs k_folds >= 2, repeats >= 2 and ocsvm_nu in (0, 1]".into());
        }
        if self.explore.steps < 2 {
            return bad("explore.steps must be at least 2".into());
        }
        if let Some(&depth) = self.explore.depths.iter().find(|&&z| z >= self.region.pad_dims[2]) {
            return bad(format!("explore depth {depth} outside crop of depth {}", self.region.pad_dims[2]));
        }
        if self.gridsearch.betas.is_empty() || self.gridsearch.latent_dims.is_empty() {
            return bad("gridsearch grid is empty".into());
        }
        Ok(())
    }

    /// Generator of the left-hemisphere asymmetry cohort.
    pub fn left_generator(&self) -> GeneratorParams {
        let a = &self.benchmark.asymmetry;
        GeneratorParams {
            side: Hemisphere::Left,
            double_knob_prob: a.double_knob_prob,
            knob_position: a.knob_position,
            main_y: a.main_y,
            tilt: a.tilt,
            ..self.generator.clone()
        }
    }

    /// Generator of the interrupted cohort.
    pub fn interrupted_generator(&self) -> GeneratorParams {
        GeneratorParams { interruption_prob: 1.0, ..self.generator.clone() }
    }

    pub fn stream_seed(&self, stream: u64) -> u64 {
        derive_seed(self.seed, stream)
    }
}

/// Sets `key` (dotted path into existing fields) to `raw`, read as JSON when
/// it parses and as a string otherwise.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut node = root;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map
                .get_mut(part)
                .ok_or_else(|| CliError::Config(format!("unknown config key `{key}`")))?,
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| CliError::Config(format!("`{part}` in `{key}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| CliError::Config(format!("index {i} out of range ({len}) in `{key}`")))?
            }
            _ => return Err(CliError::Config(format!("`{key}` descends into a scalar"))),
        };
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let once = PipelineConfig::from_json(&c.to_json()).unwrap();
        let twice = PipelineConfig::from_json(&once.to_json()).unwrap();
        assert_eq!(once, c);
        assert_eq!(twice, once);
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let c = PipelineConfig::load(
            None,
            &["model.epochs=3".into(), "region.pad_dims=[24,32,32]".into(), "region.name=cingulate".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(c.model.epochs, 3);
        assert_eq!(c.model.input_dims, [24, 32, 32]);
        assert_eq!(c.region.name, "cingulate");
        assert_eq!(c.seed, 9);
        assert_eq!(c.model.seed, derive_seed(9, streams::MODEL));
        let indexed = PipelineConfig::load(None, &["region.pad_dims.0=40".into()], None).unwrap();
        assert_eq!(indexed.region.pad_dims, [40, 32, 40]);
    }

    #[test]
    fn schema_violations_are_config_errors() {
        for set in ["model.epochs=-1", "nosuch.key=1", "split.train=9999", "model.channels=[1]", "broken"] {
            let err = PipelineConfig::load(None, &[set.into()], None).unwrap_err();
            assert_eq!(err.exit_code(), 4, "{set}: {err}");
        }
        assert!(PipelineConfig::from_json(r#"{"version": 2}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"unknown_field": 1}"#).is_err());
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = PipelineConfig::from_json(r#"{"version": 1, "seed": 4, "split": {"test": 50}}"#).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.split.test, 50);
        assert_eq!(c.split.train, SplitConfig::default().train);
    }

    #[test]
    fn left_generator_changes_only_shift_fields() {
        let c = PipelineConfig::default();
        let left = c.left_generator();
        assert_eq!(left.side, Hemisphere::Left);
        assert_eq!(left.dims, c.generator.dims);
        assert_eq!(left.branch_size_range, c.generator.branch_size_range);
        assert_eq!(left, GeneratorParams::left_default());
    }
}
