//! On-disk records shared between stages. All paths are relative to the work
//! directory so that artifacts do not depend on where the run happened.

use std::path::Path;

use foldscan_core::grid::{load_volume, save_volume};
use foldscan_core::preprocess::{CropGeometry, CropMask, MaskMeta, NormalizedMap, RegionMask};
use foldscan_core::synth::{BenchmarkSet, SizeBand, SubjectTruth};
use foldscan_core::LabelGrid;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::workdir::{read_json, write_json, Workdir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    /// The normative cohort, split into train / val / test.
    Control,
    /// Right-hemisphere side of the asymmetry benchmark.
    Right,
    /// Left-hemisphere side of the asymmetry benchmark (mirrored at preprocessing).
    Left,
    /// Subjects with an interrupted main fold.
    Interrupted,
}

impl Cohort {
    pub const ALL: [Cohort; 4] = [Cohort::Control, Cohort::Right, Cohort::Left, Cohort::Interrupted];

    pub fn name(self) -> &'static str {
        match self {
            Cohort::Control => "control",
            Cohort::Right => "right",
            Cohort::Left => "left",
            Cohort::Interrupted => "interrupted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub cohort: Cohort,
    pub split: Option<Split>,
    pub seed: u64,
    pub skeleton: String,
    pub truth: SubjectTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub subjects: Vec<SubjectEntry>,
}

impl CohortManifest {
    pub const FILE: &'static str = "synth/cohort.json";

    pub fn load(wd: &Workdir) -> Result<Self> {
        read_json(&wd.root().join(Self::FILE))
    }

    pub fn cohort(&self, cohort: Cohort) -> impl Iterator<Item = &SubjectEntry> {
        self.subjects.iter().filter(move |s| s.cohort == cohort)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SubjectEntry> {
        self.subjects.iter().filter(move |s| s.cohort == Cohort::Control && s.split == Some(split))
    }
}

pub fn load_skeleton(wd: &Workdir, entry: &SubjectEntry) -> Result<LabelGrid> {
    Ok(load_volume(wd.root().join(&entry.skeleton))?.into_label()?)
}

pub fn crop_rel(cohort: Cohort, id: &str) -> String {
    format!("preprocess/crops/{}/{id}.fvol", cohort.name())
}

pub fn altered_crop_rel(set: &str, id: &str) -> String {
    format!("benchmark/crops/{set}/{id}.fvol")
}

pub fn load_map(wd: &Workdir, rel: &str) -> Result<NormalizedMap> {
    Ok(NormalizedMap(load_volume(wd.root().join(rel))?.into_scalar()?))
}

pub fn save_map(wd: &Workdir, rel: &str, x: &NormalizedMap) -> Result<()> {
    let path = wd.root().join(rel);
    if let Some(parent) = path.parent() {
        crate::workdir::create_dir(parent)?;
    }
    Ok(save_volume(x.grid().clone(), path)?)
}

/// Crop frames of the region for both hemispheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub right: CropGeometry,
    /// Left subjects are cropped with the mirrored mask, then mirrored.
    pub left: CropGeometry,
    pub crop_center: [f64; 3],
}

pub struct Region {
    pub mask: RegionMask,
    pub geometry: Geometry,
    pub crop_mask: CropMask,
}

impl Region {
    pub const MASK: &'static str = "preprocess/mask.fvol";
    pub const MASK_META: &'static str = "preprocess/mask.json";
    pub const GEOMETRY: &'static str = "preprocess/geometry.json";
    pub const CROP_MASK: &'static str = "preprocess/crop_mask.fvol";

    pub fn save(&self, wd: &Workdir) -> Result<()> {
        let root = wd.root();
        save_volume(self.mask.mask.clone(), root.join(Self::MASK))?;
        write_json(&root.join(Self::MASK_META), &self.mask.meta())?;
        write_json(&root.join(Self::GEOMETRY), &self.geometry)?;
        save_volume(self.crop_mask.mask.clone(), root.join(Self::CROP_MASK))?;
        Ok(())
    }

    pub fn load(wd: &Workdir) -> Result<Self> {
        let root = wd.root();
        let meta: MaskMeta = read_json(&root.join(Self::MASK_META))?;
        let mask = RegionMask::from_parts(load_volume(root.join(Self::MASK))?.into_binary()?, meta)?;
        let geometry: Geometry = read_json(&root.join(Self::GEOMETRY))?;
        let crop_mask = CropMask {
            mask: load_volume(root.join(Self::CROP_MASK))?.into_binary()?,
            center: geometry.crop_center,
        };
        Ok(Region { mask, geometry, crop_mask })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedBand {
    pub band: SizeBand,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    /// Mean in-mask skeleton size of the test subjects, used to rescale the bands.
    pub mean_skeleton_voxels: f64,
    pub bands: Vec<SizeBand>,
    /// Deletion sets; member `source` indexes the test split in manifest order.
    pub deletion: Vec<BenchmarkSet>,
    pub skipped: Vec<SkippedBand>,
    /// Controls are `right` subjects, altered are `left` subjects.
    pub asymmetry: BenchmarkSet,
}

impl BenchmarkManifest {
    pub const FILE: &'static str = "benchmark/sets.json";

    pub fn load(wd: &Workdir) -> Result<Self> {
        read_json(&wd.root().join(Self::FILE))
    }
}

pub fn exists(wd: &Workdir, rel: &str) -> bool {
    Path::new(&wd.root().join(rel)).exists()
}
