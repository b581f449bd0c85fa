use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Mean and covariance of a set of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Eigenvalues below `-PSD_TOLERANCE · max(1, largest |eigenvalue|)` mark
/// a covariance as not positive semidefinite.
pub const PSD_TOLERANCE: f64 = 1e-8;

impl GaussianSummary {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.len() != d * d {
            return Err(Error::Metric(format!(
                "covariance needs {} entries, got {}",
                d * d,
                covariance.len()
            )));
        }
        let c = DMatrix::from_row_slice(d, d, &covariance);
        let s = Self {
            mean: DVector::from_vec(mean),
            covariance: (&c + c.transpose()) * 0.5,
        };
        s.check_psd()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_psd(&self) -> Result<()> {
        let eig = SymmetricEigen::new(self.covariance.clone()).eigenvalues;
        let scale = eig.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE * scale {
            return Err(Error::Metric(format!(
                "covariance is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(())
    }
}

/// Sample mean and unbiased (n − 1) covariance.
pub fn fit_gaussian(features: &[Vec<f64>]) -> Result<GaussianSummary> {
    if features.len() < 2 {
        return Err(Error::Metric(format!(
            "need at least 2 feature vectors, got {}",
            features.len()
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|f| f.len() != d) {
        return Err(Error::Metric("feature vectors differ in dimension".into()));
    }
    let n = features.len();
    let x = DMatrix::from_fn(n, d, |i, j| features[i][j]);
    let mean = x.row_mean().transpose();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(GaussianSummary {
        mean,
        covariance: (&cov + cov.transpose()) * 0.5,
    })
}

/// Square root of a symmetric PSD matrix, negative eigenvalues clamped.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// `‖μ₁ − μ₂‖² + tr(Σ₁ + Σ₂ − 2 (Σ₁Σ₂)^{1/2})`, with the cross term
/// evaluated as `tr (Σ₂^{1/2} Σ₁ Σ₂^{1/2})^{1/2}`.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Metric(format!(
            "dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    a.check_psd()?;
    b.check_psd()?;
    let diff = &a.mean - &b.mean;
    let s = sqrt_psd(&b.covariance);
    let m = &s * &a.covariance * &s;
    let m = (&m + m.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let fd = diff.norm_squared() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(fd.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_fit() {
        let g = fit_gaussian(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(g.mean[0], 0.0);
        assert_eq!(g.covariance[(0, 0)], 2.0);
        let z = fit_gaussian(&vec![vec![3.0, 1.0]; 5]).unwrap();
        assert!(z.covariance.iter().all(|v| *v == 0.0));
        assert!(fit_gaussian(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn one_dimensional_closed_form() {
        let a = GaussianSummary::new(vec![0.0], vec![1.0]).unwrap();
        let b = GaussianSummary::new(vec![3.0], vec![1.0]).unwrap();
        assert!((frechet_distance(&a, &b).unwrap() - 9.0).abs() < 1e-12);
        assert!(frechet_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn non_psd_rejected() {
        assert!(GaussianSummary::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).is_err());
    }
}
