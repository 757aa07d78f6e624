//! Procedural fold skeletons.
//!
//! A subject is a main ribbon (the sulcus of interest) flanked by two
//! neighbouring ribbons, plus a few small branch plates. Ribbons are swept
//! 1-voxel-thick surfaces: depth runs along x from the cortical surface, the
//! sulcus axis runs along z, and the fold's course is a y offset made of knob
//! bumps and a depth tilt. Every piece is one simple surface with its own label.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{flip_lr, BoundingBox, Dims, LabelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
}

/// Closed interval parameter.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub dims: Dims,
    pub voxel_mm: f32,
    pub side: Hemisphere,
    /// Cortical surface position along x.
    pub surface_x: usize,
    /// Main ribbon extent along z, as fractions of `dims[2]`.
    pub main_z_start: Range,
    pub main_z_end: Range,
    pub main_depth: Range,
    /// Main ribbon y position as a fraction of `dims[1]`.
    pub main_y: Range,
    /// y drift per voxel of depth.
    pub tilt: Range,
    /// Knob centre along the ribbon, as a fraction of its length.
    pub knob_position: Range,
    pub knob_amplitude: Range,
    pub knob_width: Range,
    pub double_knob_prob: f64,
    /// Distance of the second knob from the first, in voxels.
    pub second_knob_offset: Range,
    /// Main ribbon split point between its two surfaces, fraction of length.
    pub main_split: Range,
    /// Shallow crossing ("pli de passage") dip in the main ribbon.
    pub crossing_position: Range,
    pub crossing_depth: Range,
    pub flank_offset: Range,
    pub flank_depth_ratio: Range,
    pub flank_coverage: Range,
    pub flank_pieces: [usize; 2],
    pub branch_count_range: [usize; 2],
    pub branch_size_range: [usize; 2],
    pub interruption_prob: f64,
    pub gap_voxels: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            dims: [64, 64, 80],
            voxel_mm: 1.0,
            side: Hemisphere::Right,
            surface_x: 14,
            main_z_start: [0.18, 0.24],
            main_z_end: [0.74, 0.80],
            main_depth: [15.0, 20.0],
            main_y: [0.40, 0.46],
            tilt: [-0.25, 0.25],
            knob_position: [0.40, 0.60],
            knob_amplitude: [3.0, 7.0],
            knob_width: [3.5, 5.5],
            double_knob_prob: 0.10,
            second_knob_offset: [9.0, 13.0],
            main_split: [0.35, 0.65],
            crossing_position: [0.35, 0.65],
            crossing_depth: [0.0, 0.5],
            flank_offset: [9.0, 12.0],
            flank_depth_ratio: [0.55, 0.8],
            flank_coverage: [0.6, 0.95],
            flank_pieces: [1, 3],
            branch_count_range: [5, 8],
            branch_size_range: [30, 120],
            interruption_prob: 0.0,
            gap_voxels: 16,
        }
    }
}

impl GeneratorParams {
    /// Defaults for a left hemisphere: more frequent double knobs, knob
    /// position and tilt drawn from sub-ranges of the right-side ranges, and
    /// a ribbon placement window shifted across the lower edge of the
    /// right-side one. A window strictly inside the right-side range makes
    /// left subjects more typical than right ones, which lowers their
    /// reconstruction error.
    pub fn left_default() -> Self {
        GeneratorParams {
            side: Hemisphere::Left,
            double_knob_prob: 0.35,
            knob_position: [0.40, 0.50],
            main_y: [0.39, 0.44],
            tilt: [-0.25, 0.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 24) {
            return Err(Error::InvalidArgument(format!("generator dims {:?} below 24^3", self.dims)));
        }
        for (name, p) in [("double_knob_prob", self.double_knob_prob), ("interruption_prob", self.interruption_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let reach = self.surface_x as f64 + self.main_depth[1] + 2.0;
        if reach >= self.dims[0] as f64 {
            return Err(Error::InvalidArgument(format!(
                "x extent {} cannot host ribbons of depth {}",
                self.dims[0], self.main_depth[1]
            )));
        }
        for r in [
            self.main_z_start,
            self.main_z_end,
            self.main_depth,
            self.main_y,
            self.tilt,
            self.knob_position,
            self.knob_amplitude,
            self.knob_width,
            self.second_knob_offset,
            self.main_split,
            self.crossing_position,
            self.crossing_depth,
            self.flank_offset,
            self.flank_depth_ratio,
            self.flank_coverage,
        ] {
            if !(r[0] <= r[1]) {
                return Err(Error::InvalidArgument(format!("empty range {r:?}")));
            }
        }
        if self.main_z_start[1] >= self.main_z_end[0] {
            return Err(Error::InvalidArgument("main ribbon z range is empty".into()));
        }
        let len = (self.main_z_end[0] - self.main_z_start[1]) * self.dims[2] as f64;
        if self.interruption_prob > 0.0 && len < (self.gap_voxels + 8) as f64 {
            return Err(Error::InvalidArgument(format!("main ribbon length {len} too short for the gap")));
        }
        for r in [self.flank_pieces, self.branch_count_range, self.branch_size_range] {
            if r[0] > r[1] {
                return Err(Error::InvalidArgument(format!("empty range {r:?}")));
            }
        }
        if self.branch_count_range[1] > BRANCH_SITES.len() {
            return Err(Error::InvalidArgument(format!("at most {} branches are supported", BRANCH_SITES.len())));
        }
        if self.flank_pieces[0] == 0 || self.branch_size_range[0] == 0 {
            return Err(Error::InvalidArgument("flank pieces and branch sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceRole {
    Main,
    Flank,
    Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub hemisphere: Hemisphere,
    pub knob_count: u8,
    pub interrupted: bool,
    /// Native-frame region around the interruption (removed voxels grown by 2 voxels).
    pub gap_box: Option<BoundingBox>,
    pub ss_sizes: BTreeMap<u32, usize>,
    pub roles: BTreeMap<u32, SurfaceRole>,
}

impl SubjectTruth {
    pub fn labels_with_role(&self, role: SurfaceRole) -> Vec<u32> {
        self.roles.iter().filter(|(_, &r)| r == role).map(|(&l, _)| l).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub skeleton: LabelGrid,
    pub truth: SubjectTruth,
    pub seed: u64,
}

/// Recurring branch sites: host ribbon (0 main, 1 anterior flank, 2 posterior
/// flank), relative axial position along the host, and side.
const BRANCH_SITES: [(usize, f64, i64); 8] = [
    (0, 0.15, 1),
    (0, 0.32, -1),
    (0, 0.68, 1),
    (0, 0.85, -1),
    (1, 0.30, -1),
    (1, 0.70, -1),
    (2, 0.35, 1),
    (2, 0.65, 1),
];

/// Labels carried by the main ribbon in every generated subject.
pub const MAIN_LABELS: [u32; 2] = [1, 2];

fn uniform(rng: &mut impl Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

fn uniform_int(rng: &mut impl Rng, r: [usize; 2]) -> usize {
    rng.gen_range(r[0]..=r[1])
}

struct Canvas {
    grid: LabelGrid,
    sizes: BTreeMap<u32, usize>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, z: i64, label: u32) -> bool {
        if !self.grid.contains([x, y, z]) {
            return false;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if self.grid.get(x, y, z) != 0 {
            return false;
        }
        self.grid.set(x, y, z, label);
        *self.sizes.entry(label).or_insert(0) += 1;
        true
    }
}

/// A swept surface: at axial position z and depth d the fold sits at
/// `y(z) + tilt * d`, for `d < depth(z)`.
struct Ribbon {
    z0: i64,
    z1: i64,
    y: Vec<f64>,
    depth: Vec<f64>,
    tilt: f64,
}

impl Ribbon {
    fn y_at(&self, z: i64, d: f64) -> f64 {
        self.y[(z - self.z0) as usize] + self.tilt * d
    }

    fn depth_at(&self, z: i64) -> f64 {
        self.depth[(z - self.z0) as usize]
    }

    /// Rasterize slices `z` in `[from, to)` with `label`. Each slice spans the
    /// y step from the previous slice so the surface stays connected where it
    /// bends.
    fn draw(&self, canvas: &mut Canvas, surface_x: i64, from: i64, to: i64, label: u32) {
        for z in from.max(self.z0)..to.min(self.z1 + 1) {
            let depth = self.depth_at(z).round() as i64;
            for d in 0..depth {
                let y = self.y_at(z, d as f64).round() as i64;
                let prev = if z > self.z0 && (self.depth_at(z - 1).round() as i64) > d {
                    self.y_at(z - 1, d as f64).round() as i64
                } else {
                    y
                };
                for yy in y.min(prev)..=y.max(prev) {
                    canvas.put(surface_x + d, yy, z, label);
                }
            }
        }
    }
}

fn knob_profile(z: f64, centres: &[(f64, f64, f64)]) -> f64 {
    centres
        .iter()
        .map(|&(c, a, w)| a * (-(z - c).powi(2) / (2.0 * w * w)).exp())
        .sum()
}

/// Generate one subject; fully determined by `(params, seed)`.
pub fn generate_subject(params: &GeneratorParams, seed: u64) -> Result<SyntheticSubject> {
    use rand::SeedableRng;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [_, ny, nz] = params.dims;
    let vs = [params.voxel_mm; 3];
    let mut canvas = Canvas {
        grid: LabelGrid::new(params.dims, vs)?,
        sizes: BTreeMap::new(),
    };
    let mut roles = BTreeMap::new();
    let sx = params.surface_x as i64;

    // Main ribbon.
    let z0 = (uniform(&mut rng, params.main_z_start) * nz as f64).round() as i64;
    let z1 = (uniform(&mut rng, params.main_z_end) * nz as f64).round() as i64;
    let len = (z1 - z0) as f64;
    let y0 = uniform(&mut rng, params.main_y) * ny as f64;
    let tilt = uniform(&mut rng, params.tilt);
    let max_depth = uniform(&mut rng, params.main_depth);
    let knob_c = z0 as f64 + uniform(&mut rng, params.knob_position) * len;
    let knob_a = uniform(&mut rng, params.knob_amplitude);
    let knob_w = uniform(&mut rng, params.knob_width);
    let mut knobs = vec![(knob_c, knob_a, knob_w)];
    let double = rng.gen_bool(params.double_knob_prob);
    let second_off = uniform(&mut rng, params.second_knob_offset);
    let second_scale = rng.gen_range(0.6..=1.0);
    let second_dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    if double {
        knobs.push((knob_c + second_dir * second_off, knob_a * second_scale, knob_w));
    }
    let crossing_c = z0 as f64 + uniform(&mut rng, params.crossing_position) * len;
    let crossing_d = uniform(&mut rng, params.crossing_depth);
    let main = Ribbon {
        z0,
        z1,
        y: (z0..=z1).map(|z| y0 + knob_profile(z as f64, &knobs)).collect(),
        depth: (z0..=z1)
            .map(|z| {
                let t = (z - z0) as f64 / len;
                let taper = (std::f64::consts::PI * t).sin().max(0.0).sqrt();
                let dip = 1.0 - crossing_d * (-((z as f64 - crossing_c) / 4.0).powi(2)).exp();
                (max_depth * taper * dip).max(3.0)
            })
            .collect(),
        tilt,
    };

    let interrupted = rng.gen_bool(params.interruption_prob);
    let split = z0 + (uniform(&mut rng, params.main_split) * len).round() as i64;
    let mut gap_box = None;
    if interrupted {
        // The interruption sits at the shallow crossing.
        let g = params.gap_voxels as i64;
        let start = (crossing_c.round() as i64 - g / 2).clamp(z0 + 4, z1 - 4 - g);
        main.draw(&mut canvas, sx, z0, start, MAIN_LABELS[0]);
        main.draw(&mut canvas, sx, start + g, z1 + 1, MAIN_LABELS[1]);
        let mut removed = Canvas {
            grid: LabelGrid::new(params.dims, vs)?,
            sizes: BTreeMap::new(),
        };
        main.draw(&mut removed, sx, start, start + g, 1);
        let bb = removed.grid.object().support_box().ok_or(Error::EmptyObject)?;
        gap_box = Some(bb.expanded(2, params.dims));
    } else {
        main.draw(&mut canvas, sx, z0, split, MAIN_LABELS[0]);
        main.draw(&mut canvas, sx, split, z1 + 1, MAIN_LABELS[1]);
    }
    roles.insert(MAIN_LABELS[0], SurfaceRole::Main);
    roles.insert(MAIN_LABELS[1], SurfaceRole::Main);
    let mut next_label = 3u32;

    // Flanking ribbons, anterior (-y) then posterior (+y).
    let mut ribbons = vec![main];
    for dir in [-1.0, 1.0] {
        let off = uniform(&mut rng, params.flank_offset);
        let cover = uniform(&mut rng, params.flank_coverage);
        let flen = (len * cover).round().max(8.0) as i64;
        let fz0 = z0 + rng.gen_range(0..=((len as i64 - flen).max(0)));
        let fz1 = fz0 + flen;
        let ratio = uniform(&mut rng, params.flank_depth_ratio);
        let ftilt = uniform(&mut rng, params.tilt);
        let fdepth = max_depth * ratio;
        let flank = Ribbon {
            z0: fz0,
            z1: fz1,
            y: (fz0..=fz1).map(|z| y0 + dir * off + 0.6 * knob_profile(z as f64, &knobs)).collect(),
            depth: (fz0..=fz1)
                .map(|z| {
                    let t = (z - fz0) as f64 / flen as f64;
                    (fdepth * (std::f64::consts::PI * t).sin().max(0.0).sqrt()).max(2.0)
                })
                .collect(),
            tilt: ftilt,
        };
        let pieces = uniform_int(&mut rng, params.flank_pieces);
        let mut cuts: Vec<i64> = (1..pieces).map(|_| rng.gen_range(fz0 + 2..=fz1 - 2)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut bounds = vec![fz0];
        bounds.extend(cuts);
        bounds.push(fz1 + 1);
        for w in bounds.windows(2) {
            flank.draw(&mut canvas, sx, w[0], w[1], next_label);
            if canvas.sizes.contains_key(&next_label) {
                roles.insert(next_label, SurfaceRole::Flank);
                next_label += 1;
            }
        }
        ribbons.push(flank);
    }

    // Branch plates: flat patches in an x-y plane leaving a ribbon sideways,
    // at a random subset of recurring sites.
    let n_branches = uniform_int(&mut rng, params.branch_count_range);
    let mut sites: Vec<usize> = (0..BRANCH_SITES.len()).collect();
    sites.shuffle(&mut rng);
    sites.truncate(n_branches);
    sites.sort_unstable();
    for site in sites {
        let (host_idx, t, dir) = BRANCH_SITES[site];
        let size = uniform_int(&mut rng, params.branch_size_range);
        let host = &ribbons[host_idx];
        let z = (host.z0 as f64 + t * (host.z1 - host.z0) as f64).round() as i64;
        let z = z.clamp(host.z0 + 1, host.z1 - 1);
        let reach = 5i64;
        let d_start = 0i64;
        let label = next_label;
        let mut placed = 0usize;
        'fill: for dd in 0.. {
            let d = d_start + dd;
            if sx + d >= params.dims[0] as i64 - 1 || dd > 4 * size as i64 {
                break;
            }
            let y_host = host.y_at(z, d as f64).round() as i64;
            for k in 1..=reach {
                if placed == size {
                    break 'fill;
                }
                if canvas.put(sx + d, y_host + dir * k, z, label) {
                    placed += 1;
                }
            }
        }
        if placed > 0 {
            roles.insert(label, SurfaceRole::Branch);
            next_label += 1;
        }
    }

    let skeleton = match params.side {
        Hemisphere::Right => canvas.grid,
        Hemisphere::Left => flip_lr(&canvas.grid),
    };
    let gap_box = gap_box.map(|b| match params.side {
        Hemisphere::Right => b,
        Hemisphere::Left => {
            let nx = params.dims[0];
            BoundingBox {
                min: [nx - 1 - b.max[0], b.min[1], b.min[2]],
                max: [nx - 1 - b.min[0], b.max[1], b.max[2]],
            }
        }
    });
    Ok(SyntheticSubject {
        skeleton,
        truth: SubjectTruth {
            hemisphere: params.side,
            knob_count: if double { 2 } else { 1 },
            interrupted,
            gap_box,
            ss_sizes: canvas.sizes,
            roles,
        },
        seed,
    })
}

/// Per-subject seed derived from a cohort seed (splitmix64 finalizer).
pub fn subject_seed(cohort_seed: u64, index: u64) -> u64 {
    crate::rng::derive_seed(cohort_seed, index)
}

pub fn generate_cohort(params: &GeneratorParams, cohort_seed: u64, n: usize) -> Result<Vec<SyntheticSubject>> {
    (0..n as u64).map(|i| generate_subject(params, subject_seed(cohort_seed, i))).collect()
}
