//! Generative probing of a trained model: mean codes, interpolations,
//! single-dimension traversals, binarization and slice images.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryGrid, Grid, Voxel};
use crate::preprocess::NormalizedMap;
use crate::vae::{Real, Vae};

pub const DEFAULT_BINARIZE_THRESHOLD: f32 = 0.4;

/// Per-dimension arithmetic mean of a set of latent codes.
pub fn latent_mean(codes: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = codes
        .first()
        .ok_or_else(|| Error::InsufficientData("latent_mean needs at least one code".into()))?;
    let l = first.len();
    let mut mean = vec![0.0; l];
    for c in codes {
        if c.len() != l {
            return Err(Error::LengthMismatch { expected: l, found: c.len() });
        }
        for (m, &v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    let n = codes.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// `steps` points on the segment from `z1` to `z2`, both endpoints included.
pub fn interpolate(z1: &[f64], z2: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if z1.len() != z2.len() {
        return Err(Error::LengthMismatch { expected: z1.len(), found: z2.len() });
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("interpolate needs steps >= 2, got {steps}")));
    }
    Ok(linspace(0.0, 1.0, steps)
        .into_iter()
        .map(|t| z1.iter().zip(z2).map(|(&a, &b)| lerp(a, b, t)).collect())
        .collect())
}

/// Endpoint-exact linear interpolation: returns `a` at 0 and `b` at 1.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 1.0 {
        b
    } else {
        (1.0 - t) * a + t * b
    }
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|k| lerp(lo, hi, k as f64 / (steps - 1) as f64))
        .collect()
}

/// One latent coordinate swept while the others stay at `base`.
#[derive(Debug, Clone)]
pub struct Traversal {
    pub base: Vec<f64>,
    pub dim: usize,
    pub values: Vec<f64>,
    pub decoded: Vec<NormalizedMap>,
}

impl Traversal {
    /// The latent code of frame `k`.
    pub fn code(&self, k: usize) -> Vec<f64> {
        let mut z = self.base.clone();
        z[self.dim] = self.values[k];
        z
    }
}

pub fn dimension_traversal<T: Real>(
    base: &[f64],
    dim: usize,
    v_min: f64,
    v_max: f64,
    steps: usize,
    model: &Vae<T>,
) -> Result<Traversal> {
    if dim >= base.len() {
        return Err(Error::InvalidArgument(format!(
            "traversal dimension {dim} out of range for latent size {}",
            base.len()
        )));
    }
    if !(v_min <= v_max) {
        return Err(Error::InvalidArgument(format!("v_min {v_min} > v_max {v_max}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("traversal needs at least one step".into()));
    }
    let values = linspace(v_min, v_max, steps);
    let mut t = Traversal {
        base: base.to_vec(),
        dim,
        values,
        decoded: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let z = t.code(k);
        t.decoded.push(model.decode(&z)?);
    }
    Ok(t)
}

/// Voxels at or above `threshold`.
pub fn binarize(x: &NormalizedMap, threshold: f32) -> BinaryGrid {
    x.grid().map(|v| u8::from(v >= threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    /// Axial view: slices of constant third coordinate.
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl SliceImage {
    pub fn pixel(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Slices of `g` at the given depths along `axis`.
///
/// Intensities are min-max scaled over the whole volume so that slices of one
/// volume are comparable. A constant volume has no range and renders as 0.
/// For a slice along `axis`, columns run over the lower remaining axis and
/// rows over the higher one (for [`Axis::Z`]: column = x, row = y).
pub fn render_slices<T: Voxel + Into<f64>>(
    g: &Grid<T>,
    axis: Axis,
    depths: &[usize],
) -> Result<Vec<SliceImage>> {
    let dims = g.dims();
    let a = axis.index();
    let (u, v) = match axis {
        Axis::X => (1, 2),
        Axis::Y => (0, 2),
        Axis::Z => (0, 1),
    };
    if let Some(&bad) = depths.iter().find(|&&d| d >= dims[a]) {
        return Err(Error::InvalidArgument(format!(
            "slice depth {bad} out of range for axis of length {}",
            dims[a]
        )));
    }
    let (lo, hi) = g.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        let x: f64 = x.into();
        (lo.min(x), hi.max(x))
    });
    let range = hi - lo;
    let scale = |x: f64| -> u8 {
        if range > 0.0 {
            ((x - lo) / range * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    };
    Ok(depths
        .iter()
        .map(|&d| {
            let (width, height) = (dims[u], dims[v]);
            let mut pixels = Vec::with_capacity(width * height);
            for row in 0..height {
                for col in 0..width {
                    let mut p = [0usize; 3];
                    p[a] = d;
                    p[u] = col;
                    p[v] = row;
                    pixels.push(scale(g.get(p[0], p[1], p[2]).into()));
                }
            }
            SliceImage { width, height, pixels }
        })
        .collect())
}

/// Ordered listing of the frames written for a traversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalManifest {
    pub dim: usize,
    pub base: Vec<f64>,
    pub values: Vec<f64>,
    pub threshold: f32,
    pub axis: Axis,
    pub depths: Vec<usize>,
    /// `frames[k][j]`: file name of frame `k` at `depths[j]`, relative to the manifest.
    pub frames: Vec<Vec<String>>,
    /// Set voxels of each binarized frame.
    pub voxel_counts: Vec<usize>,
}

/// Binarizes every frame, writes one PGM per frame and depth into `dir`, and a
/// `manifest.json` listing them in order.
pub fn write_traversal(
    t: &Traversal,
    threshold: f32,
    axis: Axis,
    depths: &[usize],
    dir: &Path,
) -> Result<TraversalManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(t.decoded.len());
    let mut voxel_counts = Vec::with_capacity(t.decoded.len());
    for (k, x) in t.decoded.iter().enumerate() {
        let b = binarize(x, threshold);
        voxel_counts.push(b.count());
        let images = render_slices(&b, axis, depths)?;
        let mut names = Vec::with_capacity(images.len());
        for (img, d) in images.iter().zip(depths) {
            let name = format!("dim{:02}_frame{:03}_depth{:03}.pgm", t.dim, k, d);
            img.write_pgm(&dir.join(&name))?;
            names.push(name);
        }
        frames.push(names);
    }
    let manifest = TraversalManifest {
        dim: t.dim,
        base: t.base.clone(),
        values: t.values.clone(),
        threshold,
        axis,
        depths: depths.to_vec(),
        frames,
        voxel_counts,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarGrid;
    use proptest::prelude::*;

    fn map(dims: [usize; 3], data: Vec<f32>) -> NormalizedMap {
        NormalizedMap(ScalarGrid::from_vec(dims, [1.0; 3], data).unwrap())
    }

    #[test]
    fn mean_examples() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(latent_mean(std::slice::from_ref(&v)).unwrap(), v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(latent_mean(&[v.clone(), neg]).unwrap(), vec![0.0; 3]);
        let a = vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![-1.0, 0.5]];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(latent_mean(&a).unwrap(), latent_mean(&b).unwrap());
        assert!(latent_mean(&[]).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let z1 = vec![0.0, 1.0, -4.0];
        let z2 = vec![2.0, -1.0, 4.0];
        let path = interpolate(&z1, &z2, 3).unwrap();
        assert_eq!(path[0], z1);
        assert_eq!(path[2], z2);
        assert_eq!(path[1], vec![1.0, 0.0, 0.0]);
        let flat = interpolate(&z1, &z1, 5).unwrap();
        assert!(flat.iter().all(|z| *z == z1));
        assert!(interpolate(&z1, &z2, 1).is_err());
        assert!(interpolate(&z1, &z2[..2], 3).is_err());
    }

    #[test]
    fn binarize_boundary_inclusive() {
        let x = map([3, 1, 1], vec![0.4, 0.39999, 1.0]);
        assert_eq!(binarize(&x, 0.4).data(), &[1, 0, 1]);
        let low = map([2, 1, 1], vec![0.1, 0.3]);
        assert_eq!(binarize(&low, 0.4).count(), 0);
    }

    #[test]
    fn constant_volume_renders_zero() {
        let g = ScalarGrid::filled([4, 3, 2], [1.0; 3], 0.7).unwrap();
        let imgs = render_slices(&g, Axis::Z, &[0, 1]).unwrap();
        assert!(imgs.iter().all(|i| i.pixels.iter().all(|&p| p == 0)));
        assert_eq!((imgs[0].width, imgs[0].height), (4, 3));
    }

    #[test]
    fn impulse_renders_single_pixel() {
        let mut g = ScalarGrid::new([5, 4, 3], [1.0; 3]).unwrap();
        g.set(3, 1, 2, 2.0);
        let img = &render_slices(&g, Axis::Z, &[2]).unwrap()[0];
        for row in 0..4 {
            for col in 0..5 {
                let want = if (col, row) == (3, 1) { 255 } else { 0 };
                assert_eq!(img.pixel(col, row), want);
            }
        }
        let other = &render_slices(&g, Axis::Z, &[1]).unwrap()[0];
        assert!(other.pixels.iter().all(|&p| p == 0));
        let x = &render_slices(&g, Axis::X, &[3]).unwrap()[0];
        assert_eq!(x.pixel(1, 2), 255);
        assert!(render_slices(&g, Axis::Z, &[3]).is_err());
    }

    #[test]
    fn rendering_is_byte_stable() {
        let data: Vec<f32> = (0..60).map(|i| (i as f32 * 0.37).sin()).collect();
        let g = ScalarGrid::from_vec([5, 4, 3], [1.0; 3], data).unwrap();
        let a = render_slices(&g, Axis::Y, &[0, 3]).unwrap();
        let b = render_slices(&g, Axis::Y, &[0, 3]).unwrap();
        assert_eq!(a, b);
        let pgm = a[0].to_pgm();
        assert!(pgm.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(pgm.len(), b"P5\n5 3\n255\n".len() + 15);
    }

    proptest! {
        #[test]
        fn interpolation_stays_on_segment(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..6),
            steps in 2usize..12,
        ) {
            let z1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let z2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            for z in interpolate(&z1, &z2, steps).unwrap() {
                for ((&v, &a), &b) in z.iter().zip(&z1).zip(&z2) {
                    prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
                }
            }
        }

        #[test]
        fn binarize_is_monotone_in_threshold(
            data in proptest::collection::vec(0.0f32..=1.0, 24),
            t1 in 0.0f32..1.0,
            dt in 0.0f32..0.5,
        ) {
            let x = map([4, 3, 2], data);
            let hi = binarize(&x, t1 + dt);
            prop_assert!(hi.is_subset_of(&binarize(&x, t1)));
        }
    }
}
