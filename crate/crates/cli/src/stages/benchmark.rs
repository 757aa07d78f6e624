use foldscan_core::preprocess::preprocess_subject;
use foldscan_core::rng::stream;
use foldscan_core::synth::{asymmetry_set, build_deletion_benchmark, in_mask_skeleton_voxels, BenchmarkSet, SizeBand};
use foldscan_core::Error as CoreError;

use super::Context;
use crate::artifacts::{
    altered_crop_rel, load_skeleton, save_map, BenchmarkManifest, CohortManifest, Region, SkippedBand, Split,
};
use crate::config::streams;
use crate::error::{CliError, Result};
use crate::workdir::write_json;

/// Builds the deletion sets on the test split (one per rescaled size band)
/// and writes the crops of the altered subjects. The asymmetry set is pure
/// membership; its subjects were generated and cropped upstream.
pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let manifest = CohortManifest::load(&ctx.wd)?;
    let region = Region::load(&ctx.wd)?;
    let test: Vec<_> = manifest.split(Split::Test).collect();
    let skeletons = test.iter().map(|e| load_skeleton(&ctx.wd, e)).collect::<Result<Vec<_>>>()?;
    let named: Vec<(String, &foldscan_core::LabelGrid)> =
        test.iter().zip(&skeletons).map(|(e, s)| (e.id.clone(), s)).collect();

    let total: usize = skeletons.iter().map(|s| in_mask_skeleton_voxels(s, &region.mask)).sum();
    let mean = total as f64 / skeletons.len() as f64;
    let bands = SizeBand::rescaled_reference(mean)?;
    let seed = c.stream_seed(streams::BENCHMARK);
    let mut deletion = Vec::new();
    let mut skipped = Vec::new();
    for (b, band) in bands.iter().enumerate() {
        let mut rng = stream(seed, b as u64);
        let set: BenchmarkSet = match build_deletion_benchmark(&named, &region.mask, band, &mut rng, c.benchmark.split_ratio) {
            Ok(set) => set,
            Err(e @ CoreError::InsufficientData(_)) => {
                ctx.log(&format!("benchmark: skipping {}: {e}", band.name()));
                skipped.push(SkippedBand { band: *band, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(CliError::Core(e)),
        };
        for m in &set.altered {
            let altered = BenchmarkSet::materialize(m, named[m.source].1);
            let x = preprocess_subject(&altered, &region.geometry.right)?;
            save_map(&ctx.wd, &altered_crop_rel(&set.name, &m.id), &x)?;
        }
        ctx.log(&format!(
            "benchmark: {} with {} controls, {} altered",
            set.name,
            set.controls.len(),
            set.altered.len()
        ));
        deletion.push(set);
    }
    let out = BenchmarkManifest {
        mean_skeleton_voxels: mean,
        bands,
        deletion,
        skipped,
        asymmetry: asymmetry_set(c.benchmark.asymmetry.n),
    };
    write_json(&ctx.wd.root().join(BenchmarkManifest::FILE), &out)
}
