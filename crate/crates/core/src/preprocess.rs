//! From labelled skeletons to the normalized, masked distance-map crops the
//! model consumes.
//!
//! Chain per subject: chamfer distance (mm) -> block-mean downsampling ->
//! crop to the region box plus a context margin -> sigmoid normalization ->
//! centred padding. The region mask itself is applied later, on the fly, so
//! that rotations can pull in context from under the mask.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    self, chamfer_distance, crop, dilate, downsample, pad_to, rotate_about, BinaryGrid, BoundingBox,
    ChamferWeights, Dims, LabelGrid, ScalarGrid, Voxel,
};

/// Chamfer distance to the nearest skeleton voxel, in mm. Zero on the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap(pub ScalarGrid);

/// Distance map squashed into `[0, 1]`, with 1 exactly on the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMap(pub ScalarGrid);

impl NormalizedMap {
    pub fn grid(&self) -> &ScalarGrid {
        &self.0
    }

    pub fn dims(&self) -> Dims {
        self.0.dims()
    }
}

/// Distance transform of everything with a nonzero value.
pub fn chamfer_dt<T: Voxel + Into<u64>>(skeleton: &grid::Grid<T>) -> Result<DistanceMap> {
    chamfer_distance(skeleton, ChamferWeights::default(), |v| v.into() != 0).map(DistanceMap)
}

/// `1 - (2 / (1 + e^-x) - 1)`, i.e. `2 * sigmoid(-x)`.
#[inline]
pub fn normalize_distance(x: f32) -> f32 {
    let x = x as f64;
    (2.0 / (1.0 + x.exp())) as f32
}

pub fn normalize_map(d: &DistanceMap) -> NormalizedMap {
    NormalizedMap(d.0.map(normalize_distance))
}

/// Region of interest learned from a labelled cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub mask: BinaryGrid,
    pub bbox: BoundingBox,
    /// Centroid of the set voxels, in voxel coordinates.
    pub center: [f64; 3],
    /// Context kept around the box, in voxels at training resolution.
    pub margin: usize,
    pub dilation_mm: f32,
}

/// The JSON companion of a stored mask volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub bbox: BoundingBox,
    pub center: [f64; 3],
    pub margin: usize,
    pub dilation_mm: f32,
}

impl RegionMask {
    pub fn from_support(mask: BinaryGrid, margin: usize, dilation_mm: f32) -> Result<Self> {
        let bbox = mask.support_box().ok_or(Error::EmptyObject)?;
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for (i, &v) in mask.data().iter().enumerate() {
            if v != 0 {
                let p = mask.coords(i);
                for a in 0..3 {
                    sum[a] += p[a] as f64;
                }
                n += 1;
            }
        }
        let center = sum.map(|s| s / n as f64);
        Ok(RegionMask {
            mask,
            bbox,
            center,
            margin,
            dilation_mm,
        })
    }

    pub fn meta(&self) -> MaskMeta {
        MaskMeta {
            bbox: self.bbox,
            center: self.center,
            margin: self.margin,
            dilation_mm: self.dilation_mm,
        }
    }

    pub fn from_parts(mask: BinaryGrid, meta: MaskMeta) -> Result<Self> {
        let rebuilt = Self::from_support(mask, meta.margin, meta.dilation_mm)?;
        if rebuilt.bbox != meta.bbox {
            return Err(Error::InvalidArgument(format!(
                "mask metadata box {:?} disagrees with mask support {:?}",
                meta.bbox, rebuilt.bbox
            )));
        }
        Ok(rebuilt)
    }

    /// Mirror of this mask across the x mid-plane.
    pub fn flipped(&self) -> Result<Self> {
        Self::from_support(grid::flip_lr(&self.mask), self.margin, self.dilation_mm)
    }

    /// Where crops of this region land for the given resolution and padding.
    pub fn crop_geometry(&self, factor: usize, pad_dims: Dims) -> Result<CropGeometry> {
        if factor == 0 {
            return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
        }
        let native = self.mask.dims();
        let ds_dims: Dims = std::array::from_fn(|a| native[a].div_ceil(factor));
        let ds_box = BoundingBox {
            min: self.bbox.min.map(|v| v / factor),
            max: self.bbox.max.map(|v| v / factor),
        };
        let crop_box = ds_box.expanded(self.margin, ds_dims);
        let extent = crop_box.extent();
        if (0..3).any(|a| extent[a] > pad_dims[a]) {
            return Err(Error::PadTooSmall {
                target: pad_dims,
                dims: extent,
            });
        }
        Ok(CropGeometry {
            factor,
            native_dims: native,
            crop_box,
            pad_dims,
            pad_offset: grid::ops_pad_offset(extent, pad_dims),
        })
    }

    /// The mask resampled into the padded crop frame, with its centre.
    pub fn in_crop_frame(&self, geom: &CropGeometry) -> Result<CropMask> {
        let as_scalar = self.mask.map(|v| v as f32);
        let ds = downsample(&as_scalar, geom.factor)?;
        let cropped = crop(&ds, &geom.crop_box)?;
        let bin = cropped.map(|v| u8::from(v > 0.0));
        let mask = pad_to(&bin, geom.pad_dims, 0)?;
        Ok(CropMask {
            mask,
            center: geom.to_crop_frame(self.center),
        })
    }
}

/// Mapping from the native frame to the padded crop frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropGeometry {
    pub factor: usize,
    pub native_dims: Dims,
    /// Box in downsampled voxels.
    pub crop_box: BoundingBox,
    pub pad_dims: Dims,
    pub pad_offset: Dims,
}

impl CropGeometry {
    /// Continuous native voxel coordinates to continuous crop-frame coordinates.
    pub fn to_crop_frame(&self, p: [f64; 3]) -> [f64; 3] {
        let f = self.factor as f64;
        std::array::from_fn(|a| {
            (p[a] + 0.5) / f - 0.5 - self.crop_box.min[a] as f64 + self.pad_offset[a] as f64
        })
    }

    /// Native box to the crop-frame voxels it touches, clipped to the frame.
    pub fn box_to_crop_frame(&self, b: &BoundingBox) -> Option<BoundingBox> {
        let mut min = [0usize; 3];
        let mut max = [0usize; 3];
        for a in 0..3 {
            let lo = (b.min[a] / self.factor) as i64 - self.crop_box.min[a] as i64 + self.pad_offset[a] as i64;
            let hi = (b.max[a] / self.factor) as i64 - self.crop_box.min[a] as i64 + self.pad_offset[a] as i64;
            let lo = lo.max(0);
            let hi = hi.min(self.pad_dims[a] as i64 - 1);
            if lo > hi {
                return None;
            }
            min[a] = lo as usize;
            max[a] = hi as usize;
        }
        Some(BoundingBox { min, max })
    }
}

/// Region mask expressed in the padded crop frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CropMask {
    pub mask: BinaryGrid,
    pub center: [f64; 3],
}

/// Accumulate the target-label voxels of every subject, keep positions hit at
/// least once, and dilate by `dilation_mm`.
pub fn learn_mask<'a>(
    subjects: impl IntoIterator<Item = &'a LabelGrid>,
    target_labels: &[u32],
    dilation_mm: f32,
    margin: usize,
) -> Result<RegionMask> {
    let mut counts: Option<(Dims, [f32; 3], Vec<u32>)> = None;
    for s in subjects {
        let (dims, vs, acc) = counts.get_or_insert_with(|| (s.dims(), s.voxel_size(), vec![0; s.len()]));
        if s.dims() != *dims || s.voxel_size() != *vs {
            return Err(Error::DimsMismatch {
                what: "mask cohort",
                expected: *dims,
                actual: s.dims(),
            });
        }
        for (c, &v) in acc.iter_mut().zip(s.data()) {
            if v != 0 && target_labels.contains(&v) {
                *c += 1;
            }
        }
    }
    let (dims, vs, acc) = counts.ok_or_else(|| Error::InsufficientData("empty mask cohort".into()))?;
    let support = BinaryGrid::from_vec(dims, vs, acc.iter().map(|&c| u8::from(c >= 1)).collect())?;
    if support.count() == 0 {
        return Err(Error::EmptyObject);
    }
    let dilated = dilate(&support, dilation_mm)?;
    RegionMask::from_support(dilated, margin, dilation_mm)
}

/// Normalized, padded crop of one subject. The mask is not applied.
pub fn preprocess_subject(skeleton: &LabelGrid, geom: &CropGeometry) -> Result<NormalizedMap> {
    if skeleton.dims() != geom.native_dims {
        return Err(Error::DimsMismatch {
            what: "skeleton vs mask",
            expected: geom.native_dims,
            actual: skeleton.dims(),
        });
    }
    let dist = chamfer_dt(skeleton)?;
    let ds = downsample(&dist.0, geom.factor)?;
    let cropped = crop(&ds, &geom.crop_box)?;
    let norm = normalize_map(&DistanceMap(cropped));
    Ok(NormalizedMap(pad_to(&norm.0, geom.pad_dims, 0.0)?))
}

/// Zero everything outside the mask support.
pub fn apply_mask(x: &NormalizedMap, mask: &BinaryGrid) -> Result<NormalizedMap> {
    if x.dims() != mask.dims() {
        return Err(Error::DimsMismatch {
            what: "apply_mask",
            expected: mask.dims(),
            actual: x.dims(),
        });
    }
    let data = x.0.data().iter().zip(mask.data()).map(|(&v, &m)| if m != 0 { v } else { 0.0 }).collect();
    Ok(NormalizedMap(x.0.with_data(data)))
}

/// Random rotation in `[-range, range]` degrees per axis about the mask
/// centre, then masking.
pub fn augment(x: &NormalizedMap, mask: &CropMask, angle_range_deg: f64, rng: &mut impl Rng) -> Result<NormalizedMap> {
    if !(angle_range_deg >= 0.0) {
        return Err(Error::InvalidArgument(format!("angle range {angle_range_deg} < 0")));
    }
    let angles: [f64; 3] = std::array::from_fn(|_| (rng.gen::<f64>() * 2.0 - 1.0) * angle_range_deg);
    let rotated = rotate_about(&x.0, mask.center, angles, 0.0)?;
    apply_mask(&NormalizedMap(rotated), &mask.mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarGrid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalization_values() {
        assert_eq!(normalize_distance(0.0), 1.0);
        assert!((normalize_distance(4.5) - 0.021974).abs() < 1e-5);
        assert!(normalize_distance(1.0) > normalize_distance(1.5));
    }

    fn labels(dims: Dims, voxels: &[([usize; 3], u32)]) -> LabelGrid {
        let mut g = LabelGrid::new(dims, [1.0; 3]).unwrap();
        for &(p, l) in voxels {
            g.set(p[0], p[1], p[2], l);
        }
        g
    }

    #[test]
    fn chamfer_counts_any_label_as_object() {
        let g = labels([5, 5, 5], &[([2, 2, 2], 7)]);
        let d = chamfer_dt(&g).unwrap();
        assert_eq!(d.0.get(2, 2, 2), 0.0);
        assert!(matches!(chamfer_dt(&LabelGrid::new([3, 3, 3], [1.0; 3]).unwrap()), Err(Error::EmptyObject)));
    }

    #[test]
    fn mask_of_one_subject_is_dilated_target() {
        let g = labels([9, 9, 9], &[([4, 4, 4], 1), ([1, 1, 1], 2)]);
        let m = learn_mask([&g], &[1], 1.0, 0).unwrap();
        let mut target = BinaryGrid::new([9, 9, 9], [1.0; 3]).unwrap();
        target.set(4, 4, 4, 1);
        assert_eq!(m.mask, dilate(&target, 1.0).unwrap());
        assert_eq!(m.center, [4.0, 4.0, 4.0]);
        assert_eq!(m.bbox.extent(), [3, 3, 3]);
    }

    #[test]
    fn mask_is_union_over_subjects() {
        let a = labels([9, 9, 9], &[([2, 2, 2], 1)]);
        let b = labels([9, 9, 9], &[([6, 6, 6], 1)]);
        let m0 = learn_mask([&a, &b], &[1], 0.0, 0).unwrap();
        assert_eq!(m0.mask.count(), 2);
        let m = learn_mask([&a, &b], &[1], 1.5, 0).unwrap();
        let da = learn_mask([&a], &[1], 1.5, 0).unwrap();
        let db = learn_mask([&b], &[1], 1.5, 0).unwrap();
        assert!(da.mask.is_subset_of(&m.mask) && db.mask.is_subset_of(&m.mask));
    }

    #[test]
    fn mask_errors() {
        let empty: Vec<&LabelGrid> = vec![];
        assert!(learn_mask(empty, &[1], 1.0, 0).is_err());
        let a = labels([4, 4, 4], &[([2, 2, 2], 3)]);
        assert!(matches!(learn_mask([&a], &[1], 1.0, 0), Err(Error::EmptyObject)));
        let b = labels([4, 4, 5], &[([2, 2, 2], 1)]);
        assert!(matches!(learn_mask([&a, &b], &[1], 1.0, 0), Err(Error::DimsMismatch { .. })));
    }

    #[test]
    fn single_skeleton_voxel_at_centre_maps_to_one() {
        let s = labels([12, 12, 12], &[([6, 5, 7], 1)]);
        let mask = learn_mask([&s], &[1], 2.0, 0).unwrap();
        let geom = mask.crop_geometry(1, mask.bbox.extent()).unwrap();
        let x = preprocess_subject(&s, &geom).unwrap();
        assert_eq!(x.dims(), mask.bbox.extent());
        assert_eq!(x.0.max_value(), 1.0);
        let c = geom.to_crop_frame(mask.center).map(|v| v.round() as usize);
        assert_eq!(x.0.get(c[0], c[1], c[2]), 1.0);
    }

    #[test]
    fn crop_frame_mapping_accounts_for_downsampling() {
        let s = labels([16, 16, 16], &[([8, 8, 8], 1)]);
        let mask = learn_mask([&s], &[1], 3.0, 1).unwrap();
        let geom = mask.crop_geometry(2, [8, 8, 8]).unwrap();
        // Native voxels 8 and 9 share the downsampled voxel 4.
        let p = geom.to_crop_frame([8.5, 8.5, 8.5]);
        let q = [4.0 - geom.crop_box.min[0] as f64 + geom.pad_offset[0] as f64; 3];
        assert!((p[0] - q[0]).abs() < 1e-12);
        assert!(mask.crop_geometry(2, [2, 2, 2]).is_err());
    }

    #[test]
    fn locality_outside_the_crop() {
        let a = labels([20, 20, 20], &[([10, 10, 10], 1), ([0, 0, 19], 4)]);
        let b = labels([20, 20, 20], &[([10, 10, 10], 1), ([19, 0, 19], 4)]);
        let mask = learn_mask([&a], &[1], 0.0, 0).unwrap();
        let geom = mask.crop_geometry(1, [3, 3, 3]).unwrap();
        assert_eq!(preprocess_subject(&a, &geom).unwrap(), preprocess_subject(&b, &geom).unwrap());
    }

    fn unit_map(dims: Dims, seed: u64) -> NormalizedMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        NormalizedMap(ScalarGrid::from_vec(dims, [1.0; 3], (0..n).map(|_| rng.gen::<f32>()).collect()).unwrap())
    }

    #[test]
    fn apply_mask_identity_and_idempotence() {
        let x = unit_map([4, 4, 4], 1);
        let full = BinaryGrid::filled([4, 4, 4], [1.0; 3], 1).unwrap();
        assert_eq!(apply_mask(&x, &full).unwrap(), x);
        let mut half = BinaryGrid::new([4, 4, 4], [1.0; 3]).unwrap();
        half.set(1, 1, 1, 1);
        let once = apply_mask(&x, &half).unwrap();
        assert_eq!(apply_mask(&once, &half).unwrap(), once);
        let zero = NormalizedMap(ScalarGrid::new([4, 4, 4], [1.0; 3]).unwrap());
        let empty = BinaryGrid::new([4, 4, 4], [1.0; 3]).unwrap();
        assert_eq!(apply_mask(&zero, &empty).unwrap(), zero);
        assert!(apply_mask(&x, &BinaryGrid::new([4, 4, 5], [1.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn augmentation_contract() {
        let x = unit_map([10, 10, 10], 2);
        let mut m = BinaryGrid::filled([10, 10, 10], [1.0; 3], 1).unwrap();
        m.set(0, 0, 0, 0);
        let cm = CropMask {
            mask: m.clone(),
            center: [4.5, 4.5, 4.5],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(augment(&x, &cm, 0.0, &mut rng).unwrap(), apply_mask(&x, &m).unwrap());
        let a = augment(&x, &cm, 10.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = augment(&x, &cm, 10.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.0.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_ne!(a, apply_mask(&x, &m).unwrap());
    }

    proptest! {
        #[test]
        fn chamfer_is_locally_consistent(bits in proptest::collection::vec(0u8..20, 7 * 7 * 7)) {
            let data: Vec<u32> = bits.iter().map(|&b| u32::from(b == 0)).collect();
            prop_assume!(data.iter().any(|&v| v != 0));
            let g = LabelGrid::from_vec([7, 7, 7], [1.0; 3], data).unwrap();
            let d = chamfer_dt(&g).unwrap().0;
            for i in 0..d.len() {
                let p = d.coords(i).map(|v| v as i64);
                for dz in -1i64..=1 { for dy in -1i64..=1 { for dx in -1i64..=1 {
                    let q = [p[0] + dx, p[1] + dy, p[2] + dz];
                    if (dx, dy, dz) == (0, 0, 0) || !d.contains(q) { continue; }
                    let n = dx.abs() + dy.abs() + dz.abs();
                    let w = [0.0, 1.0, 4.0 / 3.0, 5.0 / 3.0][n as usize];
                    let a = d.data()[i];
                    let b = d.get(q[0] as usize, q[1] as usize, q[2] as usize);
                    prop_assert!((a - b).abs() <= w + 1e-4);
                }}}
            }
        }

        #[test]
        fn normalized_skeleton_is_one_and_bounded(bits in proptest::collection::vec(0u8..30, 6 * 6 * 6)) {
            let data: Vec<u32> = bits.iter().map(|&b| u32::from(b == 0)).collect();
            prop_assume!(data.iter().any(|&v| v != 0));
            let g = LabelGrid::from_vec([6, 6, 6], [1.0; 3], data).unwrap();
            let n = normalize_map(&chamfer_dt(&g).unwrap());
            for (&s, &v) in g.data().iter().zip(n.0.data()) {
                if s != 0 { prop_assert_eq!(v, 1.0); } else { prop_assert!(v > 0.0 && v < 1.0); }
            }
        }
    }
}
