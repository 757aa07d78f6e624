use foldscan_core::detect::SvmOptions;
use foldscan_core::preprocess::preprocess_subject;
use foldscan_core::rng::stream;
use foldscan_core::synth::{build_deletion_benchmark, in_mask_skeleton_voxels, BenchmarkSet, SizeBand};
use foldscan_core::vae::{grid_search, ModelConfig, TrainSet};

use super::Context;
use crate::artifacts::{crop_rel, load_map, load_skeleton, Cohort, CohortManifest, Region, Split};
use crate::config::streams;
use crate::error::{CliError, Result};
use crate::workdir::write_json;

/// Trains one model per (beta, latent size) and selects by latent separation
/// of proxy outliers: validation subjects with a deletion from the largest
/// size band that has eligible subjects.
pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let manifest = CohortManifest::load(&ctx.wd)?;
    let region = Region::load(&ctx.wd)?;
    let val_entries: Vec<_> = manifest.split(Split::Val).collect();
    let skeletons = val_entries.iter().map(|e| load_skeleton(&ctx.wd, e)).collect::<Result<Vec<_>>>()?;
    let named: Vec<(String, &foldscan_core::LabelGrid)> =
        val_entries.iter().zip(&skeletons).map(|(e, s)| (e.id.clone(), s)).collect();
    let mean = skeletons.iter().map(|s| in_mask_skeleton_voxels(s, &region.mask)).sum::<usize>() as f64
        / skeletons.len() as f64;
    let mut rng = stream(c.stream_seed(streams::GRIDSEARCH), 0);
    let proxy_set = SizeBand::rescaled_reference(mean)?
        .iter()
        .rev()
        .find_map(|band| build_deletion_benchmark(&named, &region.mask, band, &mut rng, 1.0).ok())
        .ok_or_else(|| CliError::Config("no validation subject is eligible for a proxy deletion".into()))?;
    let proxy = proxy_set
        .altered
        .iter()
        .map(|m| Ok(preprocess_subject(&BenchmarkSet::materialize(m, named[m.source].1), &region.geometry.right)?))
        .collect::<Result<Vec<_>>>()?;
    ctx.log(&format!("gridsearch: {} proxy outliers from {}", proxy.len(), proxy_set.name));

    let load = |split| {
        manifest
            .split(split)
            .map(|e| load_map(&ctx.wd, &crop_rel(Cohort::Control, &e.id)))
            .collect::<Result<Vec<_>>>()
    };
    let train = load(Split::Train)?;
    let val = load(Split::Val)?;
    let base = ModelConfig { epochs: c.gridsearch.epochs, ..c.model.clone() };
    let svm = SvmOptions { k_folds: c.detect.k_folds, c: c.detect.svm_c, epochs: c.detect.svm_epochs };
    let result = grid_search(
        &base,
        &c.gridsearch.betas,
        &c.gridsearch.latent_dims,
        TrainSet { inputs: &train, mask: Some(&region.crop_mask) },
        &val,
        &proxy,
        &svm,
    )?;
    for e in &result.table {
        ctx.log(&format!(
            "gridsearch: beta {} L {} val recon {:.2} auc {:.3}{}",
            e.beta,
            e.latent_dim,
            e.val_recon,
            e.auc,
            if e.passes_gate { "" } else { " (fails recon gate)" }
        ));
    }
    let root = ctx.wd.root();
    write_json(&root.join("gridsearch/table.json"), &result.table)?;
    write_json(&root.join("gridsearch/best_config.json"), &result.best)
}
