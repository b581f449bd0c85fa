use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

impl<T: Real> Tensor<T> {
    /// Sum of all elements as a rank-0 tensor. Summation runs in storage
    /// order.
    pub fn sum(&self) -> Result<Tensor<T>> {
        let total = self.data().iter().fold(T::zero(), |acc, &v| acc + v);
        let n = self.numel();
        let backward = Box::new(move |g: &[T]| vec![Some(vec![g[0]; n])]);
        Tensor::from_op("sum", vec![total], Vec::new(), vec![self.clone()], backward)
    }

    /// Mean of all elements as a rank-0 tensor.
    pub fn mean(&self) -> Result<Tensor<T>> {
        let n = self.numel();
        if n == 0 {
            return Err(TensorError::InvalidShape {
                op: "mean",
                shape: self.shape().to_vec(),
                reason: "mean of an empty tensor".into(),
            });
        }
        let inv = T::one() / T::lit(n as f64);
        let total = self.data().iter().fold(T::zero(), |acc, &v| acc + v);
        let backward = Box::new(move |g: &[T]| vec![Some(vec![g[0] * inv; n])]);
        Tensor::from_op(
            "mean",
            vec![total * inv],
            Vec::new(),
            vec![self.clone()],
            backward,
        )
    }

    /// Same data, new shape. The element count must not change.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let backward = Box::new(|g: &[T]| vec![Some(g.to_vec())]);
        Tensor::from_op(
            "reshape",
            self.data().to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            backward,
        )
    }
}
