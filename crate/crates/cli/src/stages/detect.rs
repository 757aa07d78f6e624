use std::collections::BTreeMap;
use std::fmt::Write as _;

use foldscan_core::detect::{
    isolation_forest, ks_test, linear_svm_cv, mwu_test, one_class_svm, pca2d, repeated_outlier_controls, residual_maps,
    ForestOptions, Group, OcsvmOptions, OutlierFrequency, ScoredSample, SvmOptions, TestResult,
};
use foldscan_core::grid::save_volume;
use foldscan_core::preprocess::{apply_mask, NormalizedMap};
use foldscan_core::rng::stream;
use foldscan_core::synth::SizeBand;
use foldscan_core::vae::{load_model, Vae};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::artifacts::{altered_crop_rel, crop_rel, load_map, BenchmarkManifest, Cohort, CohortManifest, Region, Split};
use crate::config::streams;
use crate::error::{CliError, Result};
use crate::workdir::{create_dir, write_json, write_text};

pub const SUMMARY: &str = "detect/summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Deletion,
    Asymmetry,
    Interrupted,
}

/// Both-space comparison of one control group against one altered group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub name: String,
    pub kind: SetKind,
    pub band: Option<SizeBand>,
    pub n_controls: usize,
    pub n_altered: usize,
    /// Cross-validated latent linear-SVM AUC.
    pub auc: f64,
    /// Reconstruction errors, controls vs altered.
    pub ks: TestResult,
    pub mwu: TestResult,
    pub mean_error_controls: f64,
    pub mean_error_altered: f64,
    /// Latent dimensions by decreasing SVM weight.
    pub ranked_dims: Vec<usize>,
    pub gap_filling: Option<GapFilling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFilling {
    /// A subject counts as gap-filled when at least this share of its additions mass lies in the gap.
    pub threshold: f64,
    pub ids: Vec<String>,
    pub fractions: Vec<f64>,
    pub filled: usize,
    pub share_filled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSummary {
    pub pca_explained: [f64; 2],
    pub ocsvm_gamma: f64,
    pub ocsvm_flagged_controls: Vec<String>,
    pub ocsvm_flagged_rare: Vec<String>,
    /// Mean share of rare subjects flagged per isolation-forest repeat.
    pub forest_rare_rate: f64,
    pub forest_control_rate: f64,
    /// Controls flagged in at least one repeat, most frequent first.
    pub repeated_controls: Vec<OutlierFrequency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub sets: Vec<SetSummary>,
    pub outliers: OutlierSummary,
}

impl DetectionSummary {
    pub fn set(&self, name: &str) -> Option<&SetSummary> {
        self.sets.iter().find(|s| s.name == name)
    }
}

struct Scorer<'a> {
    vae: &'a Vae<f32>,
    region: &'a Region,
}

impl Scorer<'_> {
    fn masked(&self, x: &NormalizedMap) -> Result<NormalizedMap> {
        Ok(apply_mask(x, &self.region.crop_mask.mask)?)
    }

    fn score(&self, id: &str, group: Group, x: &NormalizedMap) -> Result<ScoredSample> {
        let x = self.masked(x)?;
        Ok(ScoredSample {
            id: id.to_string(),
            group,
            mu: self.vae.encode(&x)?.mu,
            recon_error: self.vae.reconstruction_error(&x)?,
            scores: BTreeMap::new(),
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Classifies `altered` against `controls` in latent space and compares
/// their reconstruction errors; writes a per-sample CSV.
fn compare(
    ctx: &Context<'_>,
    name: &str,
    kind: SetKind,
    band: Option<SizeBand>,
    controls: &[ScoredSample],
    altered: &mut [ScoredSample],
    seed_index: u64,
) -> Result<SetSummary> {
    let d = &ctx.config.detect;
    let codes: Vec<Vec<f64>> = controls.iter().chain(altered.iter()).map(|s| s.mu.clone()).collect();
    let labels: Vec<bool> = (0..codes.len()).map(|i| i >= controls.len()).collect();
    let opts = SvmOptions { k_folds: d.k_folds, c: d.svm_c, epochs: d.svm_epochs };
    let mut rng = stream(ctx.config.stream_seed(streams::DETECT), seed_index);
    let cv = linear_svm_cv(&codes, &labels, &opts, &mut rng)?;
    let ec: Vec<f64> = controls.iter().map(|s| s.recon_error).collect();
    let ea: Vec<f64> = altered.iter().map(|s| s.recon_error).collect();

    let mut csv = String::from("id,group,recon_error,svm_decision");
    for k in 0..codes.first().map_or(0, Vec::len) {
        let _ = write!(csv, ",mu_{k}");
    }
    csv.push('\n');
    for (s, dec) in controls.iter().chain(altered.iter()).zip(&cv.decision) {
        let group = serde_json::to_value(s.group).expect("group serializes");
        let _ = write!(csv, "{},{},{},{}", s.id, group.as_str().unwrap_or_default(), s.recon_error, dec);
        for v in &s.mu {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    write_text(&ctx.wd.root().join(format!("detect/{name}.csv")), &csv)?;
    for (s, dec) in altered.iter_mut().zip(&cv.decision[controls.len()..]) {
        s.scores.insert("svm_decision".into(), *dec);
    }

    Ok(SetSummary {
        name: name.to_string(),
        kind,
        band,
        n_controls: controls.len(),
        n_altered: altered.len(),
        auc: cv.auc(),
        ks: ks_test(&ec, &ea)?,
        mwu: mwu_test(&ec, &ea)?,
        mean_error_controls: mean(&ec),
        mean_error_altered: mean(&ea),
        ranked_dims: cv.ranked_dims(),
        gap_filling: None,
    })
}

pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let root = ctx.wd.root().to_path_buf();
    let manifest = CohortManifest::load(&ctx.wd)?;
    let bench = BenchmarkManifest::load(&ctx.wd)?;
    let region = Region::load(&ctx.wd)?;
    let vae = load_model(&root.join(super::train::MODEL))?;
    if vae.config().input_dims != region.crop_mask.mask.dims() {
        return Err(CliError::Config(format!(
            "trained model expects crops of {:?}, the region produces {:?}; rerun train",
            vae.config().input_dims,
            region.crop_mask.mask.dims()
        )));
    }
    let scorer = Scorer { vae: &vae, region: &region };
    let score_cohort = |cohort: Cohort, entries: &mut dyn Iterator<Item = &crate::artifacts::SubjectEntry>, group| {
        entries
            .map(|e| scorer.score(&e.id, group, &load_map(&ctx.wd, &crop_rel(cohort, &e.id))?))
            .collect::<Result<Vec<_>>>()
    };
    let test = score_cohort(Cohort::Control, &mut manifest.split(Split::Test), Group::Control)?;
    let right = score_cohort(Cohort::Right, &mut manifest.cohort(Cohort::Right), Group::Control)?;
    let mut left = score_cohort(Cohort::Left, &mut manifest.cohort(Cohort::Left), Group::Benchmark)?;
    let interrupted_entries: Vec<_> = manifest.cohort(Cohort::Interrupted).collect();
    let mut rare = score_cohort(Cohort::Interrupted, &mut interrupted_entries.iter().copied(), Group::Rare)?;
    ctx.log(&format!("detect: scored {} test, {} asymmetry, {} rare subjects", test.len(), right.len() + left.len(), rare.len()));

    let mut sets = Vec::new();
    let mut seed_index = 0u64;
    for set in &bench.deletion {
        let controls: Vec<ScoredSample> = set.controls.iter().map(|m| test[m.source].clone()).collect();
        let mut altered = set
            .altered
            .iter()
            .map(|m| scorer.score(&m.id, Group::Benchmark, &load_map(&ctx.wd, &altered_crop_rel(&set.name, &m.id))?))
            .collect::<Result<Vec<_>>>()?;
        sets.push(compare(ctx, &set.name, SetKind::Deletion, set.band, &controls, &mut altered, seed_index)?);
        seed_index += 1;
    }
    sets.push(compare(ctx, "asymmetry", SetKind::Asymmetry, None, &right, &mut left, seed_index)?);
    seed_index += 1;

    let mut interrupted = compare(ctx, "interrupted", SetKind::Interrupted, None, &test, &mut rare, seed_index)?;
    create_dir(&root.join("detect/residuals"))?;
    let mut fractions = Vec::with_capacity(rare.len());
    for (entry, s) in interrupted_entries.iter().zip(&rare) {
        let x = scorer.masked(&load_map(&ctx.wd, &crop_rel(Cohort::Interrupted, &entry.id))?)?;
        let x_hat = vae.decode(&s.mu)?;
        let maps = residual_maps(&x, &x_hat, c.detect.noise_floor)?;
        let gap = entry.truth.gap_box.and_then(|b| region.geometry.right.box_to_crop_frame(&b));
        fractions.push(gap.map_or(0.0, |b| maps.additions_fraction_in(&b)));
        save_volume(maps.omissions, root.join(format!("detect/residuals/{}_omissions.fvol", s.id)))?;
        save_volume(maps.additions, root.join(format!("detect/residuals/{}_additions.fvol", s.id)))?;
    }
    let filled = fractions.iter().filter(|&&f| f >= c.detect.gap_fill_fraction).count();
    interrupted.gap_filling = Some(GapFilling {
        threshold: c.detect.gap_fill_fraction,
        ids: rare.iter().map(|s| s.id.clone()).collect(),
        share_filled: filled as f64 / fractions.len().max(1) as f64,
        fractions,
        filled,
    });
    sets.push(interrupted);

    let outliers = one_class(ctx, &test, &rare)?;
    let summary = DetectionSummary { sets, outliers };
    for s in &summary.sets {
        ctx.log(&format!(
            "detect: {} auc {:.3} ks p {:.3e} mwu p {:.3e}",
            s.name, s.auc, s.ks.p_value, s.mwu.p_value
        ));
    }
    write_json(&root.join(SUMMARY), &summary)
}

/// One-class detection on the 2D projection of test controls plus rare subjects.
fn one_class(ctx: &Context<'_>, controls: &[ScoredSample], rare: &[ScoredSample]) -> Result<OutlierSummary> {
    let d = &ctx.config.detect;
    let all: Vec<&ScoredSample> = controls.iter().chain(rare).collect();
    let codes: Vec<Vec<f64>> = all.iter().map(|s| s.mu.clone()).collect();
    let pca = pca2d(&codes)?;
    let points: Vec<Vec<f64>> = pca.coords.iter().map(|p| p.to_vec()).collect();
    let oc = one_class_svm(&points, &OcsvmOptions { nu: d.ocsvm_nu, ..Default::default() })?;
    let flagged = |range: std::ops::Range<usize>| -> Vec<String> {
        range.filter(|&i| oc.flags[i]).map(|i| all[i].id.clone()).collect()
    };
    let n_c = controls.len();

    let opts = ForestOptions { n_trees: d.forest_trees, subsample: d.forest_subsample };
    let n_flag = ((d.ocsvm_nu * points.len() as f64).ceil() as usize).max(1);
    let base = ctx.config.stream_seed(streams::DETECT);
    let mut control_flags = Vec::with_capacity(d.repeats);
    let (mut rare_rate, mut control_rate) = (0.0, 0.0);
    for r in 0..d.repeats {
        let scores = isolation_forest(&points, &opts, &mut stream(base, 1_000 + r as u64))?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut flags = vec![false; scores.len()];
        for &i in &order[..n_flag.min(order.len())] {
            flags[i] = true;
        }
        rare_rate += flags[n_c..].iter().filter(|&&f| f).count() as f64 / rare.len().max(1) as f64;
        control_rate += flags[..n_c].iter().filter(|&&f| f).count() as f64 / n_c as f64;
        control_flags.push(flags[..n_c].to_vec());
    }
    let ids: Vec<String> = controls.iter().map(|s| s.id.clone()).collect();
    let mut repeated = repeated_outlier_controls(&ids, &control_flags)?;
    repeated.retain(|o| o.frequency > 0.0);
    Ok(OutlierSummary {
        pca_explained: pca.explained,
        ocsvm_gamma: oc.gamma,
        ocsvm_flagged_controls: flagged(0..n_c),
        ocsvm_flagged_rare: flagged(n_c..all.len()),
        forest_rare_rate: rare_rate / d.repeats as f64,
        forest_control_rate: control_rate / d.repeats as f64,
        repeated_controls: repeated,
    })
}
