//! Perturbation benchmarks built from synthetic subjects.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generator::{generate_cohort, subject_seed, GeneratorParams, SyntheticSubject};
use crate::error::{Error, Result};
use crate::grid::LabelGrid;
use crate::preprocess::RegionMask;

/// Simple-surface size band `[lo, hi)` in voxels; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBand {
    pub lo: usize,
    pub hi: Option<usize>,
}

/// Band edges of the reference deletion benchmarks, for crops holding about
/// [`REFERENCE_SKELETON_VOXELS`] skeleton voxels.
pub const REFERENCE_BANDS: [(usize, Option<usize>); 4] =
    [(200, Some(500)), (500, Some(700)), (700, Some(1000)), (1000, None)];
pub const REFERENCE_SKELETON_VOXELS: f64 = 3500.0;

impl SizeBand {
    pub fn new(lo: usize, hi: Option<usize>) -> Result<Self> {
        if lo == 0 || hi.is_some_and(|h| h <= lo) {
            return Err(Error::InvalidArgument(format!("invalid size band [{lo}, {hi:?})")));
        }
        Ok(SizeBand { lo, hi })
    }

    pub fn contains(&self, size: usize) -> bool {
        size >= self.lo && self.hi.is_none_or(|h| size < h)
    }

    /// The reference bands scaled to crops averaging `skeleton_voxels` voxels.
    pub fn rescaled_reference(skeleton_voxels: f64) -> Result<Vec<SizeBand>> {
        let k = skeleton_voxels / REFERENCE_SKELETON_VOXELS;
        REFERENCE_BANDS
            .iter()
            .map(|&(lo, hi)| {
                let lo = ((lo as f64 * k).round() as usize).max(1);
                let hi = hi.map(|h| ((h as f64 * k).round() as usize).max(lo + 1));
                SizeBand::new(lo, hi)
            })
            .collect()
    }

    pub fn name(&self) -> String {
        format!("deletion{}", self.lo)
    }
}

/// Voxel count of each label inside the mask support.
pub fn in_mask_sizes(skeleton: &LabelGrid, mask: &RegionMask) -> BTreeMap<u32, usize> {
    let mut sizes = BTreeMap::new();
    for (&l, &m) in skeleton.data().iter().zip(mask.mask.data()) {
        if l != 0 && m != 0 {
            *sizes.entry(l).or_insert(0) += 1;
        }
    }
    sizes
}

pub fn in_mask_skeleton_voxels(skeleton: &LabelGrid, mask: &RegionMask) -> usize {
    in_mask_sizes(skeleton, mask).values().sum()
}

/// Labels eligible for erasure: in-mask voxel count inside the band.
pub fn deletion_candidates(skeleton: &LabelGrid, mask: &RegionMask, band: &SizeBand) -> Vec<u32> {
    in_mask_sizes(skeleton, mask)
        .into_iter()
        .filter(|&(_, n)| band.contains(n))
        .map(|(l, _)| l)
        .collect()
}

/// Zero every voxel of `label`.
pub fn erase_label(skeleton: &LabelGrid, label: u32) -> LabelGrid {
    skeleton.map(|v| if v == label { 0 } else { v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deletion {
    pub skeleton: LabelGrid,
    pub erased_label: u32,
    pub erased_voxels: usize,
}

/// Erase one uniformly chosen band-eligible simple surface, in full (inside
/// and outside the mask). `None` when the subject has no eligible surface.
pub fn delete_ss(skeleton: &LabelGrid, mask: &RegionMask, band: &SizeBand, rng: &mut impl Rng) -> Result<Option<Deletion>> {
    if skeleton.dims() != mask.mask.dims() {
        return Err(Error::DimsMismatch {
            what: "delete_ss",
            expected: mask.mask.dims(),
            actual: skeleton.dims(),
        });
    }
    let candidates = deletion_candidates(skeleton, mask, band);
    let Some(&label) = candidates.choose(rng) else {
        return Ok(None);
    };
    let erased_voxels = skeleton.data().iter().filter(|&&v| v == label).count();
    Ok(Some(Deletion {
        skeleton: erase_label(skeleton, label),
        erased_label: label,
        erased_voxels,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Alteration {
    None,
    Erased { label: u32, voxels: usize },
    /// Generated as a left hemisphere; its crop is mirrored.
    Flipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMember {
    pub id: String,
    /// Index into the cohort the member was drawn from.
    pub source: usize,
    pub alteration: Alteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub name: String,
    pub band: Option<SizeBand>,
    pub controls: Vec<BenchmarkMember>,
    pub altered: Vec<BenchmarkMember>,
}

impl BenchmarkSet {
    /// Skeleton of a member given its source skeleton.
    pub fn materialize(member: &BenchmarkMember, source: &LabelGrid) -> LabelGrid {
        match member.alteration {
            Alteration::Erased { label, .. } => erase_label(source, label),
            Alteration::None | Alteration::Flipped => source.clone(),
        }
    }
}

/// Split band-eligible subjects at random into intact controls and
/// subjects with one erased surface.
pub fn build_deletion_benchmark(
    subjects: &[(String, &LabelGrid)],
    mask: &RegionMask,
    band: &SizeBand,
    rng: &mut impl Rng,
    split_ratio: f64,
) -> Result<BenchmarkSet> {
    if subjects.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::InvalidArgument(format!("split ratio {split_ratio} outside [0, 1]")));
    }
    let mut eligible: Vec<usize> = subjects
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| !deletion_candidates(s, mask, band).is_empty())
        .map(|(i, _)| i)
        .collect();
    if eligible.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} subjects eligible for band [{}, {:?})",
            eligible.len(),
            band.lo,
            band.hi
        )));
    }
    eligible.shuffle(rng);
    let n_altered = ((eligible.len() as f64 * split_ratio).round() as usize).clamp(1, eligible.len() - 1);
    let (alter, keep) = eligible.split_at(n_altered);
    let mut altered = Vec::with_capacity(alter.len());
    for &i in alter {
        let (id, skel) = &subjects[i];
        let del = delete_ss(skel, mask, band, rng)?.expect("eligibility checked");
        altered.push(BenchmarkMember {
            id: id.clone(),
            source: i,
            alteration: Alteration::Erased {
                label: del.erased_label,
                voxels: del.erased_voxels,
            },
        });
    }
    let mut controls: Vec<BenchmarkMember> = keep
        .iter()
        .map(|&i| BenchmarkMember {
            id: subjects[i].0.clone(),
            source: i,
            alteration: Alteration::None,
        })
        .collect();
    altered.sort_by_key(|m| m.source);
    controls.sort_by_key(|m| m.source);
    Ok(BenchmarkSet {
        name: band.name(),
        band: Some(*band),
        controls,
        altered,
    })
}

pub struct AsymmetryBenchmark {
    pub set: BenchmarkSet,
    pub right: Vec<SyntheticSubject>,
    pub left: Vec<SyntheticSubject>,
}

/// Cohort seeds of the right and left subjects of an asymmetry benchmark.
pub fn asymmetry_cohort_seeds(seed: u64) -> (u64, u64) {
    (subject_seed(seed, 0x5249_4748), subject_seed(seed, 0x4c45_4654))
}

/// Membership of an `n` + `n` asymmetry benchmark: `right0000..` controls and
/// `left0000..` mirrored subjects, each indexing its own cohort.
pub fn asymmetry_set(n: usize) -> BenchmarkSet {
    let member = |prefix: &str, i: usize, alteration| BenchmarkMember {
        id: format!("{prefix}{i:04}"),
        source: i,
        alteration,
    };
    BenchmarkSet {
        name: "asymmetry".into(),
        band: None,
        controls: (0..n).map(|i| member("right", i, Alteration::None)).collect(),
        altered: (0..n).map(|i| member("left", i, Alteration::Flipped)).collect(),
    }
}

/// `n` right-hemisphere controls against `n` left-hemisphere subjects whose
/// crops are mirrored downstream.
pub fn build_asymmetry_benchmark(
    right_params: &GeneratorParams,
    left_params: &GeneratorParams,
    n: usize,
    seed: u64,
) -> Result<AsymmetryBenchmark> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("asymmetry benchmark needs n >= 2, got {n}")));
    }
    let (right_seed, left_seed) = asymmetry_cohort_seeds(seed);
    Ok(AsymmetryBenchmark {
        set: asymmetry_set(n),
        right: generate_cohort(right_params, right_seed, n)?,
        left: generate_cohort(left_params, left_seed, n)?,
    })
}
