use super::chamfer::{chamfer_distance, ChamferWeights};
use super::{BinaryGrid, BoundingBox, Dims, Grid, ScalarGrid, Voxel};
use crate::error::{Error, Result};

/// Mirror along x: voxel `(x, y, z)` moves to `(nx - 1 - x, y, z)`.
pub fn flip_lr<T: Voxel>(g: &Grid<T>) -> Grid<T> {
    let [nx, ny, nz] = g.dims();
    let mut data = Vec::with_capacity(g.len());
    for z in 0..nz {
        for y in 0..ny {
            let row = g.index(0, y, z);
            data.extend(g.data()[row..row + nx].iter().rev());
        }
    }
    Grid::raw(g.dims(), g.voxel_size(), data)
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rotation applying x, then y, then z (angles in degrees): `Rz * Ry * Rx`.
fn rotation_matrix(angles_deg: [f64; 3]) -> Mat3 {
    let [ax, ay, az] = angles_deg.map(f64::to_radians);
    let rx = [
        [1.0, 0.0, 0.0],
        [0.0, ax.cos(), -ax.sin()],
        [0.0, ax.sin(), ax.cos()],
    ];
    let ry = [
        [ay.cos(), 0.0, ay.sin()],
        [0.0, 1.0, 0.0],
        [-ay.sin(), 0.0, ay.cos()],
    ];
    let rz = [
        [az.cos(), -az.sin(), 0.0],
        [az.sin(), az.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

/// Rotate a scalar grid about `center` (continuous voxel coordinates) by
/// trilinear resampling of the inverse-rotated coordinates. Samples falling
/// outside the grid read as `fill`.
pub fn rotate_about(g: &ScalarGrid, center: [f64; 3], angles_deg: [f64; 3], fill: f32) -> Result<ScalarGrid> {
    if angles_deg.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite angles {angles_deg:?}")));
    }
    if angles_deg.iter().all(|&a| a == 0.0) {
        return Ok(g.clone());
    }
    let r = rotation_matrix(angles_deg);
    // Inverse of a rotation is its transpose.
    let inv = [
        [r[0][0], r[1][0], r[2][0]],
        [r[0][1], r[1][1], r[2][1]],
        [r[0][2], r[1][2], r[2][2]],
    ];
    let [nx, ny, nz] = g.dims();
    let src = g.data();
    let sample = |ix: i64, iy: i64, iz: i64| -> f64 {
        if ix < 0 || iy < 0 || iz < 0 || ix >= nx as i64 || iy >= ny as i64 || iz >= nz as i64 {
            fill as f64
        } else {
            src[ix as usize + nx * (iy as usize + ny * iz as usize)] as f64
        }
    };
    let mut out = Vec::with_capacity(g.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64 - center[0], y as f64 - center[1], z as f64 - center[2]];
                let q: [f64; 3] =
                    std::array::from_fn(|i| center[i] + inv[i][0] * p[0] + inv[i][1] * p[1] + inv[i][2] * p[2]);
                let f = q.map(f64::floor);
                let t = [q[0] - f[0], q[1] - f[1], q[2] - f[2]];
                let (x0, y0, z0) = (f[0] as i64, f[1] as i64, f[2] as i64);
                let mut acc = 0.0;
                for (dz, wz) in [(0, 1.0 - t[2]), (1, t[2])] {
                    if wz == 0.0 {
                        continue;
                    }
                    for (dy, wy) in [(0, 1.0 - t[1]), (1, t[1])] {
                        if wy == 0.0 {
                            continue;
                        }
                        for (dx, wx) in [(0, 1.0 - t[0]), (1, t[0])] {
                            if wx == 0.0 {
                                continue;
                            }
                            acc += wx * wy * wz * sample(x0 + dx, y0 + dy, z0 + dz);
                        }
                    }
                }
                out.push(acc as f32);
            }
        }
    }
    Ok(Grid::raw(g.dims(), g.voxel_size(), out))
}

pub fn crop<T: Voxel>(g: &Grid<T>, bbox: &BoundingBox) -> Result<Grid<T>> {
    if !bbox.fits(g.dims()) {
        return Err(Error::OutOfRange {
            min: bbox.min,
            max: bbox.max,
            dims: g.dims(),
        });
    }
    let ext = bbox.extent();
    let mut data = Vec::with_capacity(bbox.volume());
    for z in bbox.min[2]..=bbox.max[2] {
        for y in bbox.min[1]..=bbox.max[1] {
            let row = g.index(bbox.min[0], y, z);
            data.extend_from_slice(&g.data()[row..row + ext[0]]);
        }
    }
    Ok(Grid::raw(ext, g.voxel_size(), data))
}

/// Offset at which `pad_to` places the original content.
pub(crate) fn pad_offset(dims: Dims, target: Dims) -> Dims {
    std::array::from_fn(|a| (target[a] - dims[a]) / 2)
}

/// Centre `g` inside a grid of `target` dims; the lower side receives the
/// floor of the excess.
pub fn pad_to<T: Voxel>(g: &Grid<T>, target: Dims, fill: T) -> Result<Grid<T>> {
    let dims = g.dims();
    if (0..3).any(|a| target[a] < dims[a]) {
        return Err(Error::PadTooSmall { target, dims });
    }
    if !fill.is_valid() {
        return Err(Error::InvalidArgument(format!("fill {fill:?} not valid for {:?} grid", T::KIND)));
    }
    let off = pad_offset(dims, target);
    let mut out = Grid::filled(target, g.voxel_size(), fill)?;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let src = g.index(0, y, z);
            let dst = out.index(off[0], y + off[1], z + off[2]);
            out.data_mut()[dst..dst + dims[0]].copy_from_slice(&g.data()[src..src + dims[0]]);
        }
    }
    Ok(out)
}

/// Voxels whose chamfer distance to the object is at most `radius_mm`.
pub fn dilate(b: &BinaryGrid, radius_mm: f32) -> Result<BinaryGrid> {
    if !(radius_mm >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative dilation radius {radius_mm}")));
    }
    let d = chamfer_distance(b, ChamferWeights::default(), |v| v != 0)?;
    // Tolerance absorbs f32 accumulation along chamfer paths.
    let limit = radius_mm + 1e-4 * radius_mm.max(1.0);
    Ok(d.map(|v| u8::from(v <= limit)))
}

/// Block-mean pooling over `factor`^3 blocks; partial edge blocks average the
/// voxels they have.
pub fn downsample(g: &ScalarGrid, factor: usize) -> Result<ScalarGrid> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(g.clone());
    }
    let dims = g.dims();
    let out_dims: Dims = std::array::from_fn(|a| dims[a].div_ceil(factor));
    let n_out = out_dims.iter().product();
    let mut sum = vec![0.0f64; n_out];
    let mut count = vec![0u32; n_out];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let orow = out_dims[0] * (y / factor + out_dims[1] * (z / factor));
            let row = g.index(0, y, z);
            for (x, &v) in g.data()[row..row + dims[0]].iter().enumerate() {
                sum[orow + x / factor] += v as f64;
                count[orow + x / factor] += 1;
            }
        }
    }
    let data = sum.iter().zip(&count).map(|(&s, &c)| (s / c as f64) as f32).collect();
    let vs = g.voxel_size().map(|s| s * factor as f32);
    Ok(Grid::raw(out_dims, vs, data))
}
