//! Stride-2, kernel-3, padding-1 volumetric convolution lowered to matrix
//! products. A "big" volume of dims `B` maps to a "small" one of dims
//! `ceil(B / 2)`; the transposed convolution is the exact adjoint.

use super::real::{rm, tr, Real};
use crate::grid::Dims;

pub const KERNEL: usize = 3;
pub const TAPS: usize = KERNEL * KERNEL * KERNEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub big: Dims,
    pub small: Dims,
}

impl ConvGeom {
    pub fn new(big: Dims) -> Self {
        ConvGeom {
            big,
            small: big.map(|d| d.div_ceil(2)),
        }
    }

    pub fn big_len(&self) -> usize {
        self.big.iter().product()
    }

    pub fn small_len(&self) -> usize {
        self.small.iter().product()
    }

    /// For each small position and tap, the big-volume index it reads, or
    /// `usize::MAX` in the zero padding. Layout: `[tap][small]`.
    pub fn gather_table(&self) -> Vec<usize> {
        let [bx, by, bz] = self.big.map(|v| v as i64);
        let [sx, sy, sz] = self.small;
        let mut table = Vec::with_capacity(TAPS * self.small_len());
        for kz in 0..KERNEL as i64 {
            for ky in 0..KERNEL as i64 {
                for kx in 0..KERNEL as i64 {
                    for oz in 0..sz as i64 {
                        let z = 2 * oz + kz - 1;
                        for oy in 0..sy as i64 {
                            let y = 2 * oy + ky - 1;
                            for ox in 0..sx as i64 {
                                let x = 2 * ox + kx - 1;
                                let inside = x >= 0 && y >= 0 && z >= 0 && x < bx && y < by && z < bz;
                                table.push(if inside { (x + bx * (y + by * z)) as usize } else { usize::MAX });
                            }
                        }
                    }
                }
            }
        }
        table
    }
}

/// Unfold `input` (`[channels][big]`) into columns `[channels * 27][small]`.
pub fn im2col<T: Real>(input: &[T], channels: usize, geom: &ConvGeom, table: &[usize], cols: &mut [T]) {
    let (nb, ns) = (geom.big_len(), geom.small_len());
    debug_assert_eq!(input.len(), channels * nb);
    debug_assert_eq!(cols.len(), channels * TAPS * ns);
    for c in 0..channels {
        let src = &input[c * nb..(c + 1) * nb];
        for tap in 0..TAPS {
            let idx = &table[tap * ns..(tap + 1) * ns];
            let dst = &mut cols[(c * TAPS + tap) * ns..(c * TAPS + tap + 1) * ns];
            for (d, &i) in dst.iter_mut().zip(idx) {
                *d = if i == usize::MAX { T::zero() } else { src[i] };
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into `output` (`[channels][big]`).
pub fn col2im<T: Real>(cols: &[T], channels: usize, geom: &ConvGeom, table: &[usize], output: &mut [T]) {
    let (nb, ns) = (geom.big_len(), geom.small_len());
    debug_assert_eq!(output.len(), channels * nb);
    for c in 0..channels {
        let dst = &mut output[c * nb..(c + 1) * nb];
        for tap in 0..TAPS {
            let idx = &table[tap * ns..(tap + 1) * ns];
            let src = &cols[(c * TAPS + tap) * ns..(c * TAPS + tap + 1) * ns];
            for (&v, &i) in src.iter().zip(idx) {
                if i != usize::MAX {
                    dst[i] += v;
                }
            }
        }
    }
}

/// Strided convolution, big -> small. `weight` is `[c_out][c_in * 27]`.
/// Writes the pre-activation to `out` and leaves the unfolded input in `cols`.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Real>(
    input: &[T],
    c_in: usize,
    c_out: usize,
    weight: &[T],
    bias: &[T],
    geom: &ConvGeom,
    table: &[usize],
    cols: &mut [T],
    out: &mut [T],
) {
    let ns = geom.small_len();
    im2col(input, c_in, geom, table, cols);
    for (o, row) in out.chunks_exact_mut(ns).enumerate() {
        row.fill(bias[o]);
    }
    T::gemm(c_out, c_in * TAPS, ns, T::one(), weight, rm(c_in * TAPS), cols, rm(ns), T::one(), out, rm(ns));
}

/// Gradients of [`conv_forward`]. Accumulates into `d_weight`/`d_bias`; when
/// `d_input` is given it is overwritten with the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Real>(
    d_out: &[T],
    c_in: usize,
    c_out: usize,
    weight: &[T],
    cols: &[T],
    geom: &ConvGeom,
    table: &[usize],
    d_weight: &mut [T],
    d_bias: &mut [T],
    d_input: Option<(&mut [T], &mut [T])>,
) {
    let ns = geom.small_len();
    let k = c_in * TAPS;
    T::gemm(c_out, ns, k, T::one(), d_out, rm(ns), cols, tr(ns), T::one(), d_weight, rm(k));
    for (db, row) in d_bias.iter_mut().zip(d_out.chunks_exact(ns)) {
        *db += row.iter().copied().sum::<T>();
    }
    if let Some((d_input, scratch)) = d_input {
        T::gemm(k, c_out, ns, T::one(), weight, tr(k), d_out, rm(ns), T::zero(), scratch, rm(ns));
        d_input.fill(T::zero());
        col2im(scratch, c_in, geom, table, d_input);
    }
}

/// Transposed convolution, small -> big. `weight` is `[c_in][c_out * 27]`.
#[allow(clippy::too_many_arguments)]
pub fn conv_t_forward<T: Real>(
    input: &[T],
    c_in: usize,
    c_out: usize,
    weight: &[T],
    bias: &[T],
    geom: &ConvGeom,
    table: &[usize],
    scratch: &mut [T],
    out: &mut [T],
) {
    let (nb, ns) = (geom.big_len(), geom.small_len());
    let k = c_out * TAPS;
    T::gemm(k, c_in, ns, T::one(), weight, tr(k), input, rm(ns), T::zero(), scratch, rm(ns));
    for (o, row) in out.chunks_exact_mut(nb).enumerate() {
        row.fill(bias[o]);
    }
    col2im(scratch, c_out, geom, table, out);
}

/// Gradients of [`conv_t_forward`]; `input` is the forward input.
#[allow(clippy::too_many_arguments)]
pub fn conv_t_backward<T: Real>(
    d_out: &[T],
    input: &[T],
    c_in: usize,
    c_out: usize,
    weight: &[T],
    geom: &ConvGeom,
    table: &[usize],
    scratch: &mut [T],
    d_weight: &mut [T],
    d_bias: &mut [T],
    d_input: Option<&mut [T]>,
) {
    let (nb, ns) = (geom.big_len(), geom.small_len());
    let k = c_out * TAPS;
    for (db, row) in d_bias.iter_mut().zip(d_out.chunks_exact(nb)) {
        *db += row.iter().copied().sum::<T>();
    }
    im2col(d_out, c_out, geom, table, scratch);
    T::gemm(c_in, ns, k, T::one(), input, rm(ns), scratch, tr(ns), T::one(), d_weight, rm(k));
    if let Some(d_input) = d_input {
        T::gemm(c_in, k, ns, T::one(), weight, rm(k), scratch, rm(ns), T::zero(), d_input, rm(ns));
    }
}
