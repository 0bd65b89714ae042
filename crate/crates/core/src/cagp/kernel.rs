use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, LinearOperator};

/// `σ² (1 + √3 r/ℓ) exp(−√3 r/ℓ)` with `r = ‖x − x′‖`.
pub fn matern32(x: &[f64], y: &[f64], lengthscale: f64, amplitude: f64) -> f64 {
    let r = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let s = 3f64.sqrt() * r / lengthscale;
    amplitude * (1.0 + s) * (-s).exp()
}

/// Matérn-3/2 covariance function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub lengthscale: f64,
    pub amplitude: f64,
}

impl Kernel {
    pub fn matern32(lengthscale: f64, amplitude: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !(amplitude > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel needs positive lengthscale and amplitude, got {lengthscale}, {amplitude}"
            )));
        }
        Ok(Self {
            lengthscale,
            amplitude,
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        matern32(x, y, self.lengthscale, self.amplitude)
    }

    /// `k(X, Y)`.
    pub fn cross(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_fn(xs.len(), ys.len(), |i, j| self.eval(&xs[i], &ys[j]))
    }

    /// `k(X, X)`, exactly symmetric.
    pub fn gram(&self, xs: &[Vec<f64>]) -> DenseMatrix {
        let n = xs.len();
        let mut k = DenseMatrix::zeros(n, n);
        for i in 0..n {
            k.set(i, i, self.amplitude);
            for j in 0..i {
                let v = self.eval(&xs[i], &xs[j]);
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }

    /// `k(X, X) + γ I` as a dense operator named `A`.
    pub fn system(&self, xs: &[Vec<f64>], noise: f64) -> LinearOperator {
        let mut k = self.gram(xs);
        k.add_identity(noise);
        LinearOperator::dense("A", k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_values() {
        assert_eq!(matern32(&[0.3], &[0.3], 0.1, 2.0), 2.0);
        let v = matern32(&[0.0], &[1.0], 1.0, 1.0);
        let want = (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp();
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.483_357).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let k = matern32(&[0.0, 0.0], &[i as f64 * 0.1, 0.0], 0.5, 1.0);
            assert!(k < prev && k > 0.0);
            prev = k;
        }
        assert!(matern32(&[0.0], &[100.0], 0.1, 1.0) < 1e-300);
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let k = Kernel::matern32(0.3, 1.5).unwrap();
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let g = k.gram(&xs);
        assert_eq!(g.asymmetry(), 0.0);
        assert!(g.is_psd(1e-10));
        assert!(Kernel::matern32(0.0, 1.0).is_err());
    }
}
