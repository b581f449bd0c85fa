//! Dense loops shared by matmul and the convolutions.
//!
//! All products accumulate into `c` with a fixed loop order, so results do
//! not depend on how callers split work across threads.

use rayon::prelude::*;

use crate::real::Real;

/// Rows of `c` are independent, so they are split across threads; each
/// element is accumulated in the same order whatever the split.
const PAR_MIN_WORK: usize = 1 << 15;

fn rows_mut<T: Real>(
    c: &mut [T],
    n: usize,
    work: usize,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    if n == 0 {
        return;
    }
    if work >= PAR_MIN_WORK {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_nn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    rows_mut(&mut c[..m * n], n, m * k * n, |i, row| {
        for p in 0..k {
            let aip = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in row.iter_mut().zip(brow) {
                *cj = *cj + aip * bj;
            }
        }
    });
}

/// `c[m×n] += a[m×k] · bᵀ` where `b` is stored `n×k`.
pub(crate) fn gemm_nt<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    rows_mut(&mut c[..m * n], n, m * k * n, |i, row| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, cj) in row.iter_mut().enumerate() {
            *cj = *cj + dot(arow, &b[j * k..(j + 1) * k]);
        }
    });
}

/// `c[m×n] += aᵀ · b` where `a` is stored `k×m`.
pub(crate) fn gemm_tn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    rows_mut(&mut c[..m * n], n, m * k * n, |i, row| {
        for p in 0..k {
            let api = a[p * m + i];
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in row.iter_mut().zip(brow) {
                *cj = *cj + api * bj;
            }
        }
    });
}

/// Dot product with eight interleaved partial sums, combined in a fixed
/// order, so the compiler can vectorize it without reassociating.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    let pairs = [
        acc[0] + acc[4],
        acc[1] + acc[5],
        acc[2] + acc[6],
        acc[3] + acc[7],
    ];
    (pairs[0] + pairs[2]) + (pairs[1] + pairs[3]) + tail
}

/// Geometry of one image under a 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Input coordinate read by kernel tap `(ki, kj)` at output `(oy, ox)`,
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ki: usize, kj: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ki) as isize - self.pad as isize;
        let x = (ox * self.stride + kj) as isize - self.pad as isize;
        (y >= 0 && x >= 0 && (y as usize) < self.height && (x as usize) < self.width)
            .then_some((y as usize, x as usize))
    }
}

/// Unfolds a batch of `n` images (`[n, C, H, W]`) into one
/// `(C·kh·kw) × (n·out_h·out_w)` matrix; sample `s` owns columns
/// `s·cols .. (s+1)·cols`.
pub(crate) fn im2col<T: Real>(img: &[T], n: usize, g: &ConvGeometry) -> Vec<T> {
    let cols = g.cols();
    let wide = n * cols;
    let plane = g.height * g.width;
    let mut out = vec![T::zero(); g.rows() * wide];
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let r = (c * g.kh + ki) * g.kw + kj;
                for s in 0..n {
                    let src = &img[(s * g.channels + c) * plane..(s * g.channels + c + 1) * plane];
                    let dst = &mut out[r * wide + s * cols..r * wide + (s + 1) * cols];
                    for oy in 0..g.out_h {
                        for ox in 0..g.out_w {
                            if let Some((y, x)) = g.source(oy, ox, ki, kj) {
                                dst[oy * g.out_w + ox] = src[y * g.width + x];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters the column matrix back onto `n`
/// images, summing overlapping taps.
pub(crate) fn col2im<T: Real>(cols_mat: &[T], n: usize, g: &ConvGeometry) -> Vec<T> {
    let cols = g.cols();
    let wide = n * cols;
    let plane = g.height * g.width;
    let mut img = vec![T::zero(); n * g.channels * plane];
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let r = (c * g.kh + ki) * g.kw + kj;
                for s in 0..n {
                    let src = &cols_mat[r * wide + s * cols..r * wide + (s + 1) * cols];
                    let dst =
                        &mut img[(s * g.channels + c) * plane..(s * g.channels + c + 1) * plane];
                    for oy in 0..g.out_h {
                        for ox in 0..g.out_w {
                            if let Some((y, x)) = g.source(oy, ox, ki, kj) {
                                dst[y * g.width + x] =
                                    dst[y * g.width + x] + src[oy * g.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    img
}

/// `[n, f, len]` → `[f, n·len]`.
pub(crate) fn to_channel_major<T: Real>(x: &[T], n: usize, f: usize, len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for s in 0..n {
        for c in 0..f {
            out[(c * n + s) * len..(c * n + s + 1) * len]
                .copy_from_slice(&x[(s * f + c) * len..(s * f + c + 1) * len]);
        }
    }
    out
}

/// `[f, n·len]` → `[n, f, len]`.
pub(crate) fn from_channel_major<T: Real>(x: &[T], n: usize, f: usize, len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for s in 0..n {
        for c in 0..f {
            out[(s * f + c) * len..(s * f + c + 1) * len]
                .copy_from_slice(&x[(c * n + s) * len..(c * n + s + 1) * len]);
        }
    }
    out
}
