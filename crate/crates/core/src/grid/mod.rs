//! Dense voxel lattices and the geometric operations shared by the rest of
//! the crate.
//!
//! Storage is x-fastest: voxel `(x, y, z)` lives at `x + nx * (y + ny * z)`.
//! Three voxel kinds are distinguished at the type level: labels (`u32`),
//! scalars (`f32`) and binary masks (`u8` holding 0 or 1).

mod chamfer;
mod components;
mod io;
mod ops;

pub use chamfer::{chamfer_distance, ChamferWeights};
pub use components::connected_components;
pub use io::{load_volume, read_volume, save_meta, save_volume, write_volume, AnyGrid};
pub use ops::{crop, dilate, downsample, flip_lr, pad_to, rotate_about};
pub(crate) use ops::pad_offset as ops_pad_offset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Dims = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Label,
    Scalar,
    Binary,
}

impl GridKind {
    pub(crate) fn code(self) -> u32 {
        match self {
            GridKind::Label => 0,
            GridKind::Scalar => 1,
            GridKind::Binary => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(GridKind::Label),
            1 => Some(GridKind::Scalar),
            2 => Some(GridKind::Binary),
            _ => None,
        }
    }
}

/// Element type of a [`Grid`].
pub trait Voxel: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    const KIND: GridKind;

    /// Whether this value is admissible for the grid kind.
    fn is_valid(self) -> bool {
        true
    }
}

impl Voxel for u32 {
    const KIND: GridKind = GridKind::Label;
}

impl Voxel for f32 {
    const KIND: GridKind = GridKind::Scalar;
}

impl Voxel for u8 {
    const KIND: GridKind = GridKind::Binary;

    fn is_valid(self) -> bool {
        self <= 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dims: Dims,
    voxel_size: [f32; 3],
    data: Vec<T>,
}

pub type LabelGrid = Grid<u32>;
pub type ScalarGrid = Grid<f32>;
pub type BinaryGrid = Grid<u8>;

impl<T: Voxel> Grid<T> {
    pub fn new(dims: Dims, voxel_size: [f32; 3]) -> Result<Self> {
        Self::filled(dims, voxel_size, T::default())
    }

    pub fn filled(dims: Dims, voxel_size: [f32; 3], value: T) -> Result<Self> {
        check_geometry(dims, voxel_size)?;
        Ok(Grid {
            dims,
            voxel_size,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn from_vec(dims: Dims, voxel_size: [f32; 3], data: Vec<T>) -> Result<Self> {
        check_geometry(dims, voxel_size)?;
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_valid()) {
            return Err(Error::InvalidArgument(format!(
                "value {bad:?} not allowed in a {:?} grid",
                T::KIND
            )));
        }
        Ok(Grid {
            dims,
            voxel_size,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> [f32; 3] {
        self.voxel_size
    }

    pub fn kind(&self) -> GridKind {
        T::KIND
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    /// Panics on values not admissible for the grid kind (e.g. 2 in a binary grid).
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        assert!(value.is_valid(), "invalid {:?} voxel {value:?}", T::KIND);
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn contains(&self, p: [i64; 3]) -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a])
    }

    pub fn full_box(&self) -> BoundingBox {
        BoundingBox {
            min: [0, 0, 0],
            max: [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1],
        }
    }

    /// Grid of the same geometry with each voxel transformed by `f`.
    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        let data: Vec<U> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_valid()), "map produced invalid voxels");
        Grid {
            dims: self.dims,
            voxel_size: self.voxel_size,
            data,
        }
    }

    pub(crate) fn with_data<U: Voxel>(&self, data: Vec<U>) -> Grid<U> {
        debug_assert_eq!(data.len(), self.data.len());
        Grid {
            dims: self.dims,
            voxel_size: self.voxel_size,
            data,
        }
    }

    pub(crate) fn raw(dims: Dims, voxel_size: [f32; 3], data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), dims[0] * dims[1] * dims[2]);
        Grid {
            dims,
            voxel_size,
            data,
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl ScalarGrid {
    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }
}

impl BinaryGrid {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Tight bounding box of the set voxels, `None` when empty.
    pub fn support_box(&self) -> Option<BoundingBox> {
        support_box_of(self.dims, self.data.iter().map(|&v| v != 0))
    }

    pub fn is_subset_of(&self, other: &BinaryGrid) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }
}

impl LabelGrid {
    /// Binary grid of voxels carrying any nonzero label.
    pub fn object(&self) -> BinaryGrid {
        self.map(|v| u8::from(v != 0))
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

pub(crate) fn support_box_of(dims: Dims, set: impl Iterator<Item = bool>) -> Option<BoundingBox> {
    let mut min = [usize::MAX; 3];
    let mut max = [0usize; 3];
    let mut any = false;
    let [nx, ny, _] = dims;
    for (i, on) in set.enumerate() {
        if !on {
            continue;
        }
        any = true;
        let p = [i % nx, (i / nx) % ny, i / (nx * ny)];
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    any.then_some(BoundingBox { min, max })
}

fn check_geometry(dims: Dims, voxel_size: [f32; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("grid dims must be positive, got {dims:?}")));
    }
    if voxel_size.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "voxel sizes must be positive, got {voxel_size:?}"
        )));
    }
    Ok(())
}

/// Axis-aligned voxel box with inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    pub fn new(min: [usize; 3], max: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| min[a] > max[a]) {
            return Err(Error::InvalidArgument(format!("box min {min:?} exceeds max {max:?}")));
        }
        Ok(BoundingBox { min, max })
    }

    pub fn extent(&self) -> Dims {
        [
            self.max[0] - self.min[0] + 1,
            self.max[1] - self.min[1] + 1,
            self.max[2] - self.min[2] + 1,
        ]
    }

    pub fn volume(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn fits(&self, dims: Dims) -> bool {
        (0..3).all(|a| self.min[a] <= self.max[a] && self.max[a] < dims[a])
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }

    /// Grow by `margin` voxels on every side, clipped to `[0, dims)`.
    pub fn expanded(&self, margin: usize, dims: Dims) -> Self {
        let mut min = [0; 3];
        let mut max = [0; 3];
        for a in 0..3 {
            min[a] = self.min[a].saturating_sub(margin);
            max[a] = (self.max[a] + margin).min(dims[a] - 1);
        }
        BoundingBox { min, max }
    }

    pub fn union(&self, other: &BoundingBox) -> Self {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips_through_coords() {
        let g = ScalarGrid::new([3, 4, 5], [1.0; 3]).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 3);
        assert_eq!(g.index(0, 0, 1), 12);
    }

    #[test]
    fn rejects_bad_geometry_and_values() {
        assert!(ScalarGrid::new([0, 2, 2], [1.0; 3]).is_err());
        assert!(ScalarGrid::new([2, 2, 2], [1.0, 0.0, 1.0]).is_err());
        assert!(matches!(
            ScalarGrid::from_vec([2, 2, 2], [1.0; 3], vec![0.0; 7]),
            Err(Error::LengthMismatch { expected: 8, found: 7 })
        ));
        assert!(BinaryGrid::from_vec([1, 1, 2], [1.0; 3], vec![0, 2]).is_err());
    }

    #[test]
    fn support_box_is_tight() {
        let mut b = BinaryGrid::new([5, 5, 5], [1.0; 3]).unwrap();
        assert!(b.support_box().is_none());
        b.set(1, 2, 3, 1);
        b.set(3, 0, 4, 1);
        let bb = b.support_box().unwrap();
        assert_eq!(bb.min, [1, 0, 3]);
        assert_eq!(bb.max, [3, 2, 4]);
        assert_eq!(bb.extent(), [3, 3, 2]);
    }

    #[test]
    fn expanded_box_is_clipped() {
        let bb = BoundingBox::new([1, 2, 3], [2, 3, 4]).unwrap();
        let e = bb.expanded(2, [4, 10, 6]);
        assert_eq!(e.min, [0, 0, 1]);
        assert_eq!(e.max, [3, 5, 5]);
        assert!(BoundingBox::new([2, 0, 0], [1, 0, 0]).is_err());
    }
}
