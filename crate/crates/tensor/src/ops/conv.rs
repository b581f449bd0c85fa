//! 2-D convolution and its adjoint.
//!
//! `conv2d` is a cross-correlation (the kernel is not flipped) with
//! symmetric zero padding. `conv_transpose2d` with the same kernel, stride
//! and padding is its exact adjoint in the input argument.
//!
//! The whole batch is unfolded into one column matrix so each product is
//! a single wide gemm; see [`crate::kernels`] for how those are split
//! across threads.

use crate::error::{Result, TensorError};
use crate::kernels::{
    col2im, from_channel_major, gemm_nn, gemm_nt, gemm_tn, im2col, to_channel_major, ConvGeometry,
};
use crate::real::Real;
use crate::tensor::Tensor;

/// Output extent of a cross-correlation along one axis.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return None;
    }
    Some((input + 2 * pad - kernel) / stride + 1)
}

/// Output extent of a transposed convolution along one axis: the input
/// size `s` for which `conv_output_size(s, ..) == input`.
pub fn conv_transpose_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Option<usize> {
    if stride == 0 || input == 0 {
        return None;
    }
    ((input - 1) * stride + kernel)
        .checked_sub(2 * pad)
        .filter(|&s| s > 0)
}

fn rank4(op: &'static str, t: &Tensor<impl Real>) -> Result<[usize; 4]> {
    t.shape().try_into().map_err(|_| TensorError::InvalidShape {
        op,
        shape: t.shape().to_vec(),
        reason: "expected rank 4".into(),
    })
}

impl<T: Real> Tensor<T> {
    /// Cross-correlates `self` (`[N, C, H, W]`) with `kernel`
    /// (`[F, C, kh, kw]`), giving `[N, F, H', W']` with
    /// `H' = (H + 2·pad − kh) / stride + 1`.
    pub fn conv2d(&self, kernel: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
        let [n, c, h, w] = rank4("conv2d", self)?;
        let [f, kc, kh, kw] = rank4("conv2d", kernel)?;
        if kc != c {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: self.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        let (Some(out_h), Some(out_w)) = (
            conv_output_size(h, kh, stride, pad),
            conv_output_size(w, kw, stride, pad),
        ) else {
            return Err(TensorError::InvalidShape {
                op: "conv2d",
                shape: self.shape().to_vec(),
                reason: format!(
                    "kernel {kh}x{kw} larger than padded input (pad {pad}, stride {stride})"
                ),
            });
        };
        let geo = ConvGeometry {
            channels: c,
            height: h,
            width: w,
            kh,
            kw,
            stride,
            pad,
            out_h,
            out_w,
        };
        let (rows, wide) = (geo.rows(), n * geo.cols());
        let colm = im2col(self.data(), n, &geo);
        let mut o = vec![T::zero(); f * wide];
        gemm_nn(f, rows, wide, kernel.data(), &colm, &mut o);
        let out = from_channel_major(&o, n, f, geo.cols());

        let (input, kern) = (self.clone(), kernel.clone());
        let backward = Box::new(move |g: &[T]| {
            let gcm = to_channel_major(g, n, f, geo.cols());
            let gx = input.is_requires_grad().then(|| {
                let mut dcol = vec![T::zero(); rows * wide];
                gemm_tn(rows, f, wide, kern.data(), &gcm, &mut dcol);
                col2im(&dcol, n, &geo)
            });
            let gk = kern.is_requires_grad().then(|| {
                let mut dk = vec![T::zero(); f * rows];
                gemm_nt(f, wide, rows, &gcm, &colm, &mut dk);
                dk
            });
            vec![gx, gk]
        });
        Tensor::from_op(
            "conv2d",
            out,
            vec![n, f, out_h, out_w],
            vec![self.clone(), kernel.clone()],
            backward,
        )
    }

    /// Transposed convolution of `self` (`[N, F, H, W]`) with `kernel`
    /// (`[F, C, kh, kw]`), giving `[N, C, H', W']` with
    /// `H' = (H − 1)·stride − 2·pad + kh`.
    ///
    /// For every `u`, `v` of compatible shapes,
    /// `⟨conv2d(u, k), v⟩ = ⟨u, conv_transpose2d(v, k)⟩`.
    pub fn conv_transpose2d(
        &self,
        kernel: &Tensor<T>,
        stride: usize,
        pad: usize,
    ) -> Result<Tensor<T>> {
        let [n, f, h, w] = rank4("conv_transpose2d", self)?;
        let [kf, c, kh, kw] = rank4("conv_transpose2d", kernel)?;
        if kf != f {
            return Err(TensorError::ShapeMismatch {
                op: "conv_transpose2d",
                lhs: self.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        let (Some(out_h), Some(out_w)) = (
            conv_transpose_output_size(h, kh, stride, pad),
            conv_transpose_output_size(w, kw, stride, pad),
        ) else {
            return Err(TensorError::InvalidShape {
                op: "conv_transpose2d",
                shape: self.shape().to_vec(),
                reason: format!("no output size for kernel {kh}x{kw}, stride {stride}, pad {pad}"),
            });
        };
        // Geometry of the forward convolution this operator is the adjoint of.
        let geo = ConvGeometry {
            channels: c,
            height: out_h,
            width: out_w,
            kh,
            kw,
            stride,
            pad,
            out_h: h,
            out_w: w,
        };
        debug_assert_eq!(conv_output_size(out_h, kh, stride, pad), Some(h));
        let (rows, wide) = (geo.rows(), n * geo.cols());
        let xcm = to_channel_major(self.data(), n, f, geo.cols());
        let mut colm = vec![T::zero(); rows * wide];
        gemm_tn(rows, f, wide, kernel.data(), &xcm, &mut colm);
        let out = col2im(&colm, n, &geo);

        let (input, kern) = (self.clone(), kernel.clone());
        let backward = Box::new(move |g: &[T]| {
            let gcol = im2col(g, n, &geo);
            let gx = input.is_requires_grad().then(|| {
                let mut dx = vec![T::zero(); f * wide];
                gemm_nn(f, rows, wide, kern.data(), &gcol, &mut dx);
                from_channel_major(&dx, n, f, geo.cols())
            });
            let gk = kern.is_requires_grad().then(|| {
                let mut dk = vec![T::zero(); f * rows];
                gemm_nt(f, wide, rows, &xcm, &gcol, &mut dk);
                dk
            });
            vec![gx, gk]
        });
        Tensor::from_op(
            "conv_transpose2d",
            out,
            vec![n, c, out_h, out_w],
            vec![self.clone(), kernel.clone()],
            backward,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x =
            Tensor::<f64>::from_vec((0..18).map(|v| v as f64).collect(), &[1, 2, 3, 3]).unwrap();
        let k = Tensor::<f64>::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[2, 2, 1, 1]).unwrap();
        let y = x.conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn ones_sliding_window() {
        let x = Tensor::<f64>::ones(&[1, 1, 3, 3]);
        let k = Tensor::<f64>::ones(&[1, 1, 2, 2]);
        let y = x.conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn transpose_scatter_of_single_pixel() {
        let x = Tensor::<f64>::ones(&[1, 1, 1, 1]);
        let k = Tensor::<f64>::ones(&[1, 1, 4, 4]);
        let y = x.conv_transpose2d(&k, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.0; 4]);
    }

    #[test]
    fn output_sizes() {
        assert_eq!(conv_transpose_output_size(4, 4, 2, 1), Some(8));
        assert_eq!(conv_output_size(8, 4, 2, 1), Some(4));
        assert_eq!(conv_transpose_output_size(1, 4, 1, 0), Some(4));
        assert_eq!(conv_output_size(4, 4, 1, 0), Some(1));
    }

    #[test]
    fn kernel_larger_than_padded_input() {
        let x = Tensor::<f64>::ones(&[1, 1, 2, 2]);
        let k = Tensor::<f64>::ones(&[1, 1, 5, 5]);
        assert!(matches!(
            x.conv2d(&k, 1, 1),
            Err(TensorError::InvalidShape { .. })
        ));
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::<f64>::ones(&[1, 2, 4, 4]);
        let k = Tensor::<f64>::ones(&[1, 3, 2, 2]);
        assert!(matches!(
            x.conv2d(&k, 1, 0),
            Err(TensorError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            x.conv_transpose2d(&k, 1, 0),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }
}
