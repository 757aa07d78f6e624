use foldscan_core::vae::{save_model, train_with, EpochLosses, TrainSet};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::artifacts::{crop_rel, load_map, Cohort, CohortManifest, Region, Split};
use crate::error::Result;
use crate::workdir::{write_json, write_text};

pub const MODEL: &str = "train/model.fvae";
pub const SUMMARY: &str = "train/summary.json";

/// Run-independent training record (no wall-clock times).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub epochs: usize,
    pub parameters: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub last: Option<EpochLosses>,
}

pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let manifest = CohortManifest::load(&ctx.wd)?;
    let region = Region::load(&ctx.wd)?;
    let load = |split| {
        manifest
            .split(split)
            .map(|e| load_map(&ctx.wd, &crop_rel(Cohort::Control, &e.id)))
            .collect::<Result<Vec<_>>>()
    };
    let train = load(Split::Train)?;
    let val = load(Split::Val)?;
    let log = &mut ctx.log;
    let (vae, report) = train_with(&c.model, TrainSet { inputs: &train, mask: Some(&region.crop_mask) }, &val, |e| {
        let v = e.val.map_or(String::new(), |v| format!(" val {:.2}/{:.3}", v.recon, v.kl));
        log(&format!("train: epoch {} recon/kl {:.2}/{:.3}{v}", e.epoch, e.train.recon, e.train.kl));
    })?;
    let root = ctx.wd.root();
    save_model(&root.join(MODEL), &vae)?;
    write_text(&root.join("train/losses.csv"), &report.to_csv())?;
    let summary = TrainSummary {
        seed: report.seed,
        epochs: report.epochs.len(),
        parameters: vae.params().len(),
        n_train: train.len(),
        n_val: val.len(),
        last: report.last().copied(),
    };
    write_json(&root.join(SUMMARY), &summary)
}
