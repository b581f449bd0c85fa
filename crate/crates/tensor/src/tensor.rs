use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Result, TensorError};
use crate::real::Real;

static CHECKED: AtomicBool = AtomicBool::new(true);

/// Enables or disables checked mode process-wide.
///
/// In checked mode every operator scans its output for NaN/Inf, `log`
/// rejects non-positive inputs, and a second `backward` on the same loss
/// without an intervening `zero_grad` is an error. Checked mode is on by
/// default.
pub fn set_checked(enabled: bool) {
    CHECKED.store(enabled, Ordering::Relaxed);
}

pub fn is_checked() -> bool {
    CHECKED.load(Ordering::Relaxed)
}

/// Computes the gradient of every operand from the gradient of the output.
///
/// Returns one entry per operand, in operand order; `None` for operands that
/// do not need a gradient.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>> + Send + Sync>;

struct Node<T: Real> {
    op: &'static str,
    inputs: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Inner<T: Real> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<T>>>,
    node: Option<Node<T>>,
}

/// An n-dimensional array of reals, row-major, with an optional gradient
/// buffer and a record of the operation that produced it.
///
/// Cloning is cheap and shares storage. Data is immutable after
/// construction; only the gradient buffer changes.
pub struct Tensor<T: Real = f32> {
    inner: Arc<Inner<T>>,
}

impl<T: Real> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.inner.shape);
        if self.numel() <= 16 {
            s.field("data", &self.inner.data);
        }
        s.field("requires_grad", &self.inner.requires_grad);
        if let Some(node) = &self.inner.node {
            s.field("op", &node.op);
        }
        s.finish()
    }
}

impl<T: Real> Tensor<T> {
    /// Creates a leaf tensor. Fails if `data.len()` is not the product of
    /// `shape`.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self::leaf(data, shape.to_vec(), false))
    }

    /// Creates a leaf from `f64` values, converting to `T`.
    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::from_vec(data.iter().map(|&v| T::lit(v)).collect(), shape)
    }

    pub fn scalar(value: T) -> Self {
        Self::leaf(vec![value], Vec::new(), false)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self::leaf(vec![value; n], shape.to_vec(), false)
    }

    fn leaf(data: Vec<T>, shape: Vec<usize>, requires_grad: bool) -> Self {
        Self {
            inner: Arc::new(Inner {
                shape,
                data,
                requires_grad,
                grad: Mutex::new(None),
                node: None,
            }),
        }
    }

    /// Returns a leaf with the same data that participates in gradient
    /// tracking.
    pub fn requires_grad(self) -> Self {
        self.with_requires_grad(true)
    }

    pub fn with_requires_grad(self, flag: bool) -> Self {
        if self.inner.node.is_none() && self.inner.requires_grad == flag {
            return self;
        }
        let shape = self.inner.shape.clone();
        Self::leaf(self.into_data(), shape, flag)
    }

    /// A leaf copy of this tensor, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::leaf(self.inner.data.clone(), self.inner.shape.clone(), false)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    /// Takes the data out, copying only if the storage is shared.
    pub fn into_data(self) -> Vec<T> {
        match Arc::try_unwrap(self.inner) {
            Ok(inner) => inner.data,
            Err(shared) => shared.data.clone(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner
            .data
            .iter()
            .map(|v| v.to_f64_lossless())
            .collect()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(
            self.numel(),
            1,
            "item() on tensor of shape {:?}",
            self.shape()
        );
        self.inner.data[0]
    }

    pub fn is_requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    /// Name of the operator that produced this tensor, if any.
    pub fn op_name(&self) -> Option<&'static str> {
        self.inner.node.as_ref().map(|n| n.op)
    }

    /// A copy of the accumulated gradient, if any has been written.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().expect("grad lock").clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().expect("grad lock") = None;
    }

    /// True if both handles refer to the same storage.
    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.inner) as usize
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.lock().expect("grad lock");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Builds the result of an operator. The backward closure is dropped
    /// when no operand tracks gradients.
    pub(crate) fn from_op(
        op: &'static str,
        data: Vec<T>,
        shape: Vec<usize>,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Result<Self> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        if is_checked() && data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op });
        }
        let requires_grad = inputs.iter().any(|t| t.inner.requires_grad);
        let node = requires_grad.then(|| Node {
            op,
            inputs,
            backward,
        });
        Ok(Self {
            inner: Arc::new(Inner {
                shape,
                data,
                requires_grad,
                grad: Mutex::new(None),
                node,
            }),
        })
    }

    /// Tensors reachable from `self` that track gradients, operands before
    /// their results.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        // (tensor, children already pushed)
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.key()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = &t.inner.node {
                for input in node.inputs.iter().rev() {
                    if input.inner.requires_grad && !seen.contains(&input.key()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Gradients are added into each reachable tensor's buffer (zero when
    /// empty). The sweep visits tensors in reverse topological order, and
    /// each operand's contributions are summed in the order its consumers
    /// are visited, so a fixed graph always produces the same bits.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape().to_vec(),
            });
        }
        if !self.inner.requires_grad {
            return Ok(());
        }
        if is_checked() && self.inner.grad.lock().expect("grad lock").is_some() {
            return Err(TensorError::BackwardTwice);
        }

        let order = self.topo_order();
        let position: HashMap<usize, usize> = order
            .iter()
            .enumerate()
            .map(|(i, t)| (t.key(), i))
            .collect();
        let mut pending: Vec<Option<Vec<T>>> = vec![None; order.len()];
        pending[order.len() - 1] = Some(vec![T::one()]);

        for idx in (0..order.len()).rev() {
            let Some(g) = pending[idx].take() else {
                continue;
            };
            let t = &order[idx];
            if let Some(node) = &t.inner.node {
                let input_grads = (node.backward)(&g);
                debug_assert_eq!(input_grads.len(), node.inputs.len());
                for (input, ig) in node.inputs.iter().zip(input_grads) {
                    let Some(ig) = ig else { continue };
                    if !input.inner.requires_grad {
                        continue;
                    }
                    let slot = &mut pending[position[&input.key()]];
                    match slot {
                        Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, &b)| *a = *a + b),
                        None => *slot = Some(ig),
                    }
                }
            }
            if is_checked() && g.iter().any(|v| !v.is_finite()) {
                return Err(TensorError::NonFinite {
                    op: t.op_name().unwrap_or("leaf gradient"),
                });
            }
            t.accumulate_grad(&g);
        }
        Ok(())
    }
}

/// Maps every element of `a` with `f` into a fresh vector.
pub(crate) fn map_vec<T: Real>(a: &[T], f: impl Fn(T) -> T) -> Vec<T> {
    a.iter().map(|&v| f(v)).collect()
}
