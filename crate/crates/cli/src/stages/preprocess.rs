use foldscan_core::grid::flip_lr;
use foldscan_core::preprocess::{learn_mask, preprocess_subject, NormalizedMap};

use super::Context;
use crate::artifacts::{crop_rel, load_skeleton, save_map, Cohort, CohortManifest, Geometry, Region, Split};
use crate::error::Result;

/// Learns the region mask on the training split, then writes the normalized
/// crop of every subject. Left subjects are cropped with the mirrored mask
/// and mirrored, so all crops share the right-hemisphere frame.
pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let manifest = CohortManifest::load(&ctx.wd)?;
    let train = manifest
        .split(Split::Train)
        .map(|e| load_skeleton(&ctx.wd, e))
        .collect::<Result<Vec<_>>>()?;
    let r = &c.region;
    let mask = learn_mask(train.iter(), &r.mask_labels, r.dilation_mm, r.margin)?;
    drop(train);
    let right = mask.crop_geometry(r.downsample, r.pad_dims)?;
    let left = mask.flipped()?.crop_geometry(r.downsample, r.pad_dims)?;
    let crop_mask = mask.in_crop_frame(&right)?;
    let region = Region {
        geometry: Geometry { right, left, crop_center: crop_mask.center },
        mask,
        crop_mask,
    };
    region.save(&ctx.wd)?;
    ctx.log(&format!(
        "preprocess: mask of {} voxels, crop box {:?}",
        region.mask.mask.count(),
        region.geometry.right.crop_box
    ));

    for entry in &manifest.subjects {
        let skeleton = load_skeleton(&ctx.wd, entry)?;
        let x = match entry.cohort {
            Cohort::Left => NormalizedMap(flip_lr(preprocess_subject(&skeleton, &region.geometry.left)?.grid())),
            _ => preprocess_subject(&skeleton, &region.geometry.right)?,
        };
        save_map(&ctx.wd, &crop_rel(entry.cohort, &entry.id), &x)?;
    }
    ctx.log(&format!("preprocess: {} crops written", manifest.subjects.len()));
    Ok(())
}
