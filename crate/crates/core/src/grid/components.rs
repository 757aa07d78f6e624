use std::collections::VecDeque;

use super::{BinaryGrid, LabelGrid};

/// Label the 26-connected components of a binary grid as `1..=count`, in
/// raster order of their first voxel. Returns the labelling and `count`.
pub fn connected_components(b: &BinaryGrid) -> (LabelGrid, usize) {
    let [nx, ny, nz] = b.dims();
    let mut labels = vec![0u32; b.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..b.len() {
        if b.data()[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let [x, y, z] = b.coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 || qz >= nz as i64 {
                            continue;
                        }
                        let j = qx as usize + nx * (qy as usize + ny * qz as usize);
                        if b.data()[j] != 0 && labels[j] == 0 {
                            labels[j] = count;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    let grid = b.with_data(labels);
    (grid, count as usize)
}
