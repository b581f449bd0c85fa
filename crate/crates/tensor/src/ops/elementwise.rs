//! Elementwise operators.
//!
//! Binary operators broadcast NumPy-style over trailing dimensions: shapes
//! are right-aligned, missing leading dimensions count as 1, and each
//! aligned pair of extents must be equal or contain a 1. Nothing else is
//! broadcast.

use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::{is_checked, map_vec, Tensor};

/// Output shape of a trailing-dimension broadcast, or `None` if the shapes
/// are incompatible.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() {
            1
        } else {
            a[i - (rank - a.len())]
        };
        let db = if i < rank - b.len() {
            1
        } else {
            b[i - (rank - b.len())]
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For every flat index of `out`, the flat index of `src` it reads.
fn source_index(src: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let offset = rank - src.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for d in (0..rank).rev() {
        let extent = if d < offset { 1 } else { src[d - offset] };
        strides[d] = if extent == 1 { 0 } else { acc };
        acc *= extent;
    }
    let n: usize = out.iter().product();
    let mut idx = Vec::with_capacity(n);
    let mut coord = vec![0usize; rank];
    for _ in 0..n {
        idx.push(coord.iter().zip(&strides).map(|(c, s)| c * s).sum());
        for d in (0..rank).rev() {
            coord[d] += 1;
            if coord[d] < out[d] {
                break;
            }
            coord[d] = 0;
        }
    }
    idx
}

/// Sums an output-shaped gradient back onto the operand through its index
/// map, in increasing output order.
fn reduce_to<T: Real>(g: &[T], map: Option<&[usize]>, len: usize) -> Vec<T> {
    match map {
        None => g.to_vec(),
        Some(map) => {
            let mut out = vec![T::zero(); len];
            for (i, &j) in map.iter().enumerate() {
                out[j] = out[j] + g[i];
            }
            out
        }
    }
}

#[inline]
fn pick<T: Copy>(src: &[T], map: Option<&Vec<usize>>, i: usize) -> T {
    match map {
        Some(m) => src[m[i]],
        None => src[i],
    }
}

#[derive(Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

impl<T: Real> Tensor<T> {
    fn binary(&self, other: &Tensor<T>, kind: BinaryKind) -> Result<Tensor<T>> {
        let op = match kind {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
        };
        let out_shape = broadcast_shape(self.shape(), other.shape()).ok_or_else(|| {
            TensorError::ShapeMismatch {
                op,
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            }
        })?;
        let map_a = (self.shape() != out_shape.as_slice())
            .then(|| Arc::new(source_index(self.shape(), &out_shape)));
        let map_b = (other.shape() != out_shape.as_slice())
            .then(|| Arc::new(source_index(other.shape(), &out_shape)));

        let n: usize = out_shape.iter().product();
        let (a, b) = (self.data(), other.data());
        let at = |i: usize| pick(a, map_a.as_deref(), i);
        let bt = |i: usize| pick(b, map_b.as_deref(), i);
        let data: Vec<T> = (0..n)
            .map(|i| match kind {
                BinaryKind::Add => at(i) + bt(i),
                BinaryKind::Sub => at(i) - bt(i),
                BinaryKind::Mul => at(i) * bt(i),
            })
            .collect();

        let (lhs, rhs) = (self.clone(), other.clone());
        let (need_a, need_b) = (self.is_requires_grad(), other.is_requires_grad());
        let backward = Box::new(move |g: &[T]| {
            let (a, b) = (lhs.data(), rhs.data());
            let ga = need_a.then(|| {
                let local: Vec<T> = match kind {
                    BinaryKind::Add | BinaryKind::Sub => g.to_vec(),
                    BinaryKind::Mul => (0..g.len())
                        .map(|i| g[i] * pick(b, map_b.as_deref(), i))
                        .collect(),
                };
                reduce_to(&local, map_a.as_deref().map(Vec::as_slice), a.len())
            });
            let gb = need_b.then(|| {
                let local: Vec<T> = match kind {
                    BinaryKind::Add => g.to_vec(),
                    BinaryKind::Sub => map_vec(g, |v| -v),
                    BinaryKind::Mul => (0..g.len())
                        .map(|i| g[i] * pick(a, map_a.as_deref(), i))
                        .collect(),
                };
                reduce_to(&local, map_b.as_deref().map(Vec::as_slice), b.len())
            });
            vec![ga, gb]
        });
        Tensor::from_op(
            op,
            data,
            out_shape,
            vec![self.clone(), other.clone()],
            backward,
        )
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, BinaryKind::Add)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, BinaryKind::Sub)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, BinaryKind::Mul)
    }

    /// Applies `f` elementwise. `df(x, y)` returns the derivative at input
    /// `x` with output `y = f(x)`; it is evaluated during the forward pass
    /// and only when gradients are tracked.
    pub fn map_differentiable<F, D>(&self, op: &'static str, f: F, df: D) -> Result<Tensor<T>>
    where
        F: Fn(T) -> T,
        D: Fn(T, T) -> T,
    {
        let data = map_vec(self.data(), &f);
        let deriv: Vec<T> = if self.is_requires_grad() {
            self.data()
                .iter()
                .zip(&data)
                .map(|(&x, &y)| df(x, y))
                .collect()
        } else {
            Vec::new()
        };
        let backward = Box::new(move |g: &[T]| {
            vec![Some(g.iter().zip(&deriv).map(|(&g, &d)| g * d).collect())]
        });
        Tensor::from_op(
            op,
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            backward,
        )
    }

    pub fn neg(&self) -> Result<Tensor<T>> {
        self.map_differentiable("neg", |x| -x, |_, _| -T::one())
    }

    /// Multiplies every element by `c`.
    pub fn scale(&self, c: f64) -> Result<Tensor<T>> {
        let c = T::lit(c);
        self.map_differentiable("scale", move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor<T>> {
        let c = T::lit(c);
        self.map_differentiable("add_scalar", move |x| x + c, |_, _| T::one())
    }

    pub fn exp(&self) -> Result<Tensor<T>> {
        self.map_differentiable("exp", |x| x.exp(), |_, y| y)
    }

    /// Natural logarithm. In checked mode a non-positive element is an
    /// error rather than a NaN or -inf.
    pub fn log(&self) -> Result<Tensor<T>> {
        if is_checked() {
            if let Some(&bad) = self.data().iter().find(|&&v| v <= T::zero()) {
                return Err(TensorError::NonPositiveLog {
                    value: bad.to_f64_lossless(),
                });
            }
        }
        self.map_differentiable("log", |x| x.ln(), |x, _| x.recip())
    }

    pub fn tanh(&self) -> Result<Tensor<T>> {
        self.map_differentiable("tanh", |x| x.tanh(), |_, y| T::one() - y * y)
    }

    pub fn sigmoid(&self) -> Result<Tensor<T>> {
        self.map_differentiable("sigmoid", sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Tensor<T>> {
        let s = T::lit(slope);
        self.map_differentiable(
            "leaky_relu",
            move |x| if x > T::zero() { x } else { x * s },
            move |x, _| if x > T::zero() { T::one() } else { s },
        )
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the clamp is
    /// active.
    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Tensor<T>> {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        self.map_differentiable(
            "clamp",
            move |x| x.max(lo).min(hi),
            move |x, _| {
                if x < lo || x > hi {
                    T::zero()
                } else {
                    T::one()
                }
            },
        )
    }
}

/// Numerically stable logistic function.
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
