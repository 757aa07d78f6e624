//! Pipeline stages. Each reads its upstream artifacts, rewrites its own
//! directory from scratch and marks itself complete last.

mod benchmark;
mod detect;
mod explore;
mod gridsearch;
mod preprocess;
mod report;
mod synth;
mod train;

pub use detect::{DetectionSummary, GapFilling, OutlierSummary, SetSummary};
pub use explore::ExploreSummary;
pub use train::TrainSummary;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::workdir::{sha256_hex, Stage, Workdir};

pub struct Context<'a> {
    pub config: &'a PipelineConfig,
    pub wd: Workdir,
    log: &'a mut dyn FnMut(&str),
}

impl Context<'_> {
    pub fn log(&mut self, msg: &str) {
        (self.log)(msg)
    }
}

/// Hash of the configuration with the work directory blanked, so runs in
/// different directories compare equal.
pub fn config_hash(config: &PipelineConfig) -> String {
    let mut c = config.clone();
    c.workdir = Default::default();
    sha256_hex(c.to_json().as_bytes())
}

/// Runs one stage under the work-directory lock.
pub fn run_stage(config: &PipelineConfig, stage: Stage, log: &mut dyn FnMut(&str)) -> Result<()> {
    let wd = Workdir::new(&config.workdir);
    let _lock = wd.lock()?;
    wd.require(stage)?;
    wd.begin(stage)?;
    let mut ctx = Context { config, wd: wd.clone(), log };
    match stage {
        Stage::Synth => synth::run(&mut ctx)?,
        Stage::Preprocess => preprocess::run(&mut ctx)?,
        Stage::Train => train::run(&mut ctx)?,
        Stage::Gridsearch => gridsearch::run(&mut ctx)?,
        Stage::Benchmark => benchmark::run(&mut ctx)?,
        Stage::Detect => detect::run(&mut ctx)?,
        Stage::Explore => explore::run(&mut ctx)?,
        Stage::Report => report::run(&mut ctx)?,
    }
    wd.finish(stage, &config_hash(config))
}

/// Runs the default stage sequence.
pub fn run_pipeline(config: &PipelineConfig, log: &mut dyn FnMut(&str)) -> Result<()> {
    for stage in Stage::PIPELINE {
        run_stage(config, stage, log)?;
    }
    Ok(())
}
