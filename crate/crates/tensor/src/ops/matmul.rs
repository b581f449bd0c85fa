use crate::error::{Result, TensorError};
use crate::kernels::{gemm_nn, gemm_nt, gemm_tn};
use crate::real::Real;
use crate::tensor::Tensor;

impl<T: Real> Tensor<T> {
    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        if self.rank() != 2 || other.rank() != 2 || self.shape()[1] != other.shape()[0] {
            return Err(mismatch());
        }
        let (m, k, n) = (self.shape()[0], self.shape()[1], other.shape()[1]);
        let mut out = vec![T::zero(); m * n];
        gemm_nn(m, k, n, self.data(), other.data(), &mut out);

        let (a, b) = (self.clone(), other.clone());
        let backward = Box::new(move |g: &[T]| {
            // dA = dC · Bᵀ, dB = Aᵀ · dC
            let ga = a.is_requires_grad().then(|| {
                let mut ga = vec![T::zero(); m * k];
                gemm_nt(m, n, k, g, b.data(), &mut ga);
                ga
            });
            let gb = b.is_requires_grad().then(|| {
                let mut gb = vec![T::zero(); k * n];
                gemm_tn(k, m, n, a.data(), g, &mut gb);
                gb
            });
            vec![ga, gb]
        });
        Tensor::from_op(
            "matmul",
            out,
            vec![m, n],
            vec![self.clone(), other.clone()],
            backward,
        )
    }
}
