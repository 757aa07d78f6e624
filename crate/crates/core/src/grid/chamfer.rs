//! Two-pass 3x3x3 chamfer distance transform.

use super::{Dims, Grid, ScalarGrid, Voxel};
use crate::error::{Error, Result};

/// Local weights of the 26-neighbourhood, in units of the voxel size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferWeights {
    pub face: f32,
    pub edge: f32,
    pub corner: f32,
}

impl Default for ChamferWeights {
    /// The classic (3, 4, 5) / 3 mask.
    fn default() -> Self {
        ChamferWeights {
            face: 1.0,
            edge: 4.0 / 3.0,
            corner: 5.0 / 3.0,
        }
    }
}

struct Offset {
    d: [i64; 3],
    w: f32,
}

/// Forward-pass half of the neighbourhood: offsets preceding the centre in
/// raster order. The backward pass uses their negations.
fn causal_offsets(weights: ChamferWeights, voxel_size: [f32; 3]) -> Vec<Offset> {
    let mut out = Vec::with_capacity(13);
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let before = dz < 0 || (dz == 0 && dy < 0) || (dz == 0 && dy == 0 && dx < 0);
                if !before {
                    continue;
                }
                let n = dx.abs() + dy.abs() + dz.abs();
                let base = match n {
                    1 => weights.face,
                    2 => weights.edge,
                    _ => weights.corner,
                };
                let len = ((dx as f32 * voxel_size[0]).powi(2)
                    + (dy as f32 * voxel_size[1]).powi(2)
                    + (dz as f32 * voxel_size[2]).powi(2))
                .sqrt();
                out.push(Offset {
                    d: [dx, dy, dz],
                    w: base * len / (n as f32).sqrt(),
                });
            }
        }
    }
    out
}

/// Chamfer distance (in mm) from every voxel to the nearest voxel for which
/// `is_object` holds. Object voxels get 0.
pub fn chamfer_distance<T: Voxel>(
    grid: &Grid<T>,
    weights: ChamferWeights,
    is_object: impl Fn(T) -> bool,
) -> Result<ScalarGrid> {
    let mut dist: Vec<f32> = grid
        .data()
        .iter()
        .map(|&v| if is_object(v) { 0.0 } else { f32::INFINITY })
        .collect();
    if !dist.contains(&0.0) {
        return Err(Error::EmptyObject);
    }
    let dims = grid.dims();
    let offsets = causal_offsets(weights, grid.voxel_size());
    sweep(&mut dist, dims, &offsets, false);
    sweep(&mut dist, dims, &offsets, true);
    Ok(Grid::raw(dims, grid.voxel_size(), dist))
}

fn sweep(dist: &mut [f32], dims: Dims, offsets: &[Offset], backward: bool) {
    let [nx, ny, nz] = dims;
    let (nx, ny, nz) = (nx as i64, ny as i64, nz as i64);
    let sign = if backward { -1 } else { 1 };
    // Linear-index deltas, so the interior loop avoids recomputing indices.
    let deltas: Vec<(i64, i64, i64, i64, f32)> = offsets
        .iter()
        .map(|o| {
            let d = [o.d[0] * sign, o.d[1] * sign, o.d[2] * sign];
            (d[0], d[1], d[2], d[0] + nx * (d[1] + ny * d[2]), o.w)
        })
        .collect();
    for step_z in 0..nz {
        let z = if backward { nz - 1 - step_z } else { step_z };
        for step_y in 0..ny {
            let y = if backward { ny - 1 - step_y } else { step_y };
            let interior_yz = z > 0 && z < nz - 1 && y > 0 && y < ny - 1;
            for step_x in 0..nx {
                let x = if backward { nx - 1 - step_x } else { step_x };
                let i = x + nx * (y + ny * z);
                let mut best = dist[i as usize];
                if best == 0.0 {
                    continue;
                }
                let interior = interior_yz && x > 0 && x < nx - 1;
                for &(dx, dy, dz, di, w) in &deltas {
                    if !interior {
                        let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                        if qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz {
                            continue;
                        }
                    }
                    let cand = dist[(i + di) as usize] + w;
                    if cand < best {
                        best = cand;
                    }
                }
                dist[i as usize] = best;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BinaryGrid;

    fn lone_voxel(n: usize, p: [usize; 3]) -> BinaryGrid {
        let mut b = BinaryGrid::new([n, n, n], [1.0; 3]).unwrap();
        b.set(p[0], p[1], p[2], 1);
        b
    }

    #[test]
    fn neighbour_distances_follow_weights() {
        let b = lone_voxel(5, [2, 2, 2]);
        let d = chamfer_distance(&b, ChamferWeights::default(), |v| v != 0).unwrap();
        assert_eq!(d.get(2, 2, 2), 0.0);
        assert!((d.get(3, 2, 2) - 1.0).abs() < 1e-6);
        assert!((d.get(2, 1, 2) - 1.0).abs() < 1e-6);
        assert!((d.get(3, 3, 2) - 4.0 / 3.0).abs() < 1e-6);
        assert!((d.get(1, 2, 3) - 4.0 / 3.0).abs() < 1e-6);
        assert!((d.get(3, 3, 3) - 5.0 / 3.0).abs() < 1e-6);
        assert!((d.get(0, 2, 2) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn corner_object_reaches_far_corner() {
        let b = lone_voxel(4, [0, 0, 0]);
        let d = chamfer_distance(&b, ChamferWeights::default(), |v| v != 0).unwrap();
        // Three diagonal steps.
        assert!((d.get(3, 3, 3) - 5.0).abs() < 1e-5);
        assert!(d.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn voxel_size_scales_distances() {
        let mut b = BinaryGrid::new([3, 3, 3], [2.0, 2.0, 2.0]).unwrap();
        b.set(1, 1, 1, 1);
        let d = chamfer_distance(&b, ChamferWeights::default(), |v| v != 0).unwrap();
        assert!((d.get(2, 1, 1) - 2.0).abs() < 1e-6);
        assert!((d.get(2, 2, 2) - 10.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn empty_object_is_an_error() {
        let b = BinaryGrid::new([3, 3, 3], [1.0; 3]).unwrap();
        assert!(matches!(
            chamfer_distance(&b, ChamferWeights::default(), |v| v != 0),
            Err(Error::EmptyObject)
        ));
    }
}
