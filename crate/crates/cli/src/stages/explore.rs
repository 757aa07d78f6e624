use foldscan_core::explore::{binarize, dimension_traversal, interpolate, latent_mean, render_slices, write_traversal, Axis};
use foldscan_core::vae::load_model;
use serde::{Deserialize, Serialize};

use super::detect::{DetectionSummary, SUMMARY as DETECT_SUMMARY};
use super::Context;
use crate::artifacts::Region;
use crate::error::{CliError, Result};
use crate::workdir::{create_dir, read_json, write_json};

pub const SUMMARY: &str = "explore/summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreSummary {
    /// Latent dimension with the largest asymmetry-SVM weight.
    pub dim: usize,
    pub v_min: f64,
    pub v_max: f64,
    /// Share of in-mask voxels whose binarized value differs between the traversal endpoints.
    pub endpoint_change: f64,
    pub traversal_voxels: Vec<usize>,
    pub interpolation_voxels: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct InterpolationManifest {
    from: &'static str,
    to: &'static str,
    threshold: f32,
    depths: Vec<usize>,
    codes: Vec<Vec<f64>>,
    frames: Vec<Vec<String>>,
    voxel_counts: Vec<usize>,
}

/// Latent codes of the asymmetry set as written by the detect stage:
/// (right-hemisphere controls, mirrored left subjects).
fn asymmetry_codes(path: &std::path::Path) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (mut right, mut left) = (Vec::new(), Vec::new());
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            continue;
        }
        let mu = fields[4..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        if fields[1] == "control" {
            right.push(mu);
        } else {
            left.push(mu);
        }
    }
    Ok((right, left))
}

pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = &ctx.config.explore;
    let root = ctx.wd.root().to_path_buf();
    let vae = load_model(&root.join(super::train::MODEL))?;
    let region = Region::load(&ctx.wd)?;
    let detect: DetectionSummary = read_json(&root.join(DETECT_SUMMARY))?;
    let asym = detect
        .set("asymmetry")
        .ok_or_else(|| CliError::Config("detect summary has no asymmetry set".into()))?;
    let dim = asym.ranked_dims[0];
    let (right, left) = asymmetry_codes(&root.join("detect/asymmetry.csv"))?;
    let base = latent_mean(&right)?;
    let (v_min, v_max) = right
        .iter()
        .chain(&left)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z[dim]), hi.max(z[dim])));

    let traversal = dimension_traversal(&base, dim, v_min, v_max, c.steps, &vae)?;
    let manifest = write_traversal(&traversal, c.threshold, Axis::Z, &c.depths, &root.join("explore/traversal"))?;
    let first = binarize(&traversal.decoded[0], c.threshold);
    let last = binarize(&traversal.decoded[traversal.decoded.len() - 1], c.threshold);
    let mask = &region.crop_mask.mask;
    let in_mask = mask.count().max(1);
    let changed = (0..mask.len())
        .filter(|&i| mask.data()[i] != 0 && first.data()[i] != last.data()[i])
        .count();

    let dir = root.join("explore/interpolation");
    create_dir(&dir)?;
    let codes = interpolate(&base, &latent_mean(&left)?, c.steps)?;
    let mut frames = Vec::with_capacity(codes.len());
    let mut voxel_counts = Vec::with_capacity(codes.len());
    for (k, z) in codes.iter().enumerate() {
        let b = binarize(&vae.decode(z)?, c.threshold);
        voxel_counts.push(b.count());
        let mut names = Vec::new();
        for (img, d) in render_slices(&b, Axis::Z, &c.depths)?.iter().zip(&c.depths) {
            let name = format!("frame{k:03}_depth{d:03}.pgm");
            img.write_pgm(&dir.join(&name))?;
            names.push(name);
        }
        frames.push(names);
    }
    write_json(
        &dir.join("manifest.json"),
        &InterpolationManifest {
            from: "right mean",
            to: "left mean",
            threshold: c.threshold,
            depths: c.depths.clone(),
            codes,
            frames,
            voxel_counts: voxel_counts.clone(),
        },
    )?;

    let summary = ExploreSummary {
        dim,
        v_min,
        v_max,
        endpoint_change: changed as f64 / in_mask as f64,
        traversal_voxels: manifest.voxel_counts,
        interpolation_voxels: voxel_counts,
    };
    ctx.log(&format!("explore: dimension {dim} endpoints differ in {:.2}% of the mask", 100.0 * summary.endpoint_change));
    write_json(&root.join(SUMMARY), &summary)
}
