//! Desk-scale dense factorizations: LU solves, Cholesky, inverses.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{dim_err, Error, Result};
use crate::linops::{DenseMatrix, Vector};

/// Relative pivot tolerance for singularity detection.
pub const PIVOT_TOL: f64 = 1e-12;

/// Partial-pivoting LU of a square matrix, with a lazily built factorization
/// of the transpose for `Aᵀ` solves.
#[derive(Debug)]
pub struct LuFactors {
    n: usize,
    source: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    lu_t: OnceLock<LU<f64, Dyn, Dyn>>,
}

impl LuFactors {
    pub fn new(a: &DenseMatrix, name: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(dim_err(
                "LU factorization",
                "square",
                format!("{:?}", a.shape()),
            ));
        }
        let n = a.rows();
        let source = a.to_nalgebra();
        let lu = LU::new(source.clone());
        let tol = PIVOT_TOL * a.inf_norm().max(f64::MIN_POSITIVE);
        let pivot = (0..n)
            .map(|i| lu.u()[(i, i)].abs())
            .fold(f64::INFINITY, f64::min);
        if n > 0 && !(pivot > tol) {
            return Err(Error::Singular {
                name: name.to_string(),
                pivot,
                tol,
            });
        }
        Ok(Self {
            n,
            source,
            lu,
            lu_t: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A X = B` for a row-major block `B`.
    pub fn solve_mat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        solve_with(&self.lu, self.n, b)
    }

    /// Solves `Aᵀ X = B`.
    pub fn solve_transpose_mat(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let lu_t = self.lu_t.get_or_init(|| LU::new(self.source.transpose()));
        solve_with(lu_t, self.n, b)
    }
}

fn solve_with(lu: &LU<f64, Dyn, Dyn>, n: usize, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != n {
        return Err(dim_err("LU solve", n, b.rows()));
    }
    let mut rhs = b.to_nalgebra();
    if !lu.solve_mut(&mut rhs) {
        return Err(Error::Singular {
            name: "LU solve".into(),
            pivot: 0.0,
            tol: PIVOT_TOL,
        });
    }
    Ok(DenseMatrix::from_nalgebra(&rhs))
}

/// Solves `A x = b` densely.
pub fn dense_solve(a: &DenseMatrix, b: &Vector) -> Result<Vector> {
    if a.cols() != b.len() {
        return Err(dim_err("dense_solve", a.cols(), b.len()));
    }
    let lu = LuFactors::new(a, "dense_solve")?;
    Ok(Vector::from(
        lu.solve_mat(&DenseMatrix::column(b))?.into_data(),
    ))
}

/// Dense inverse. Used by test oracles and the calibration harness only.
pub fn dense_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let lu = LuFactors::new(a, "dense_inverse")?;
    lu.solve_mat(&DenseMatrix::identity(a.rows()))
}

/// Upper Cholesky factor `F` with `FᵀF = S`.
pub fn chol_factor(s: &DenseMatrix) -> Result<DenseMatrix> {
    if !s.is_square() {
        return Err(dim_err("chol_factor", "square", format!("{:?}", s.shape())));
    }
    let chol =
        nalgebra::Cholesky::new(s.symmetrized().to_nalgebra()).ok_or(Error::NotPositiveDefinite)?;
    Ok(DenseMatrix::from_nalgebra(&chol.l().transpose()))
}

/// Cholesky with a diagonal jitter fallback of `jitter·max|diag|`.
pub fn chol_factor_jittered(s: &DenseMatrix, jitter: f64) -> Result<DenseMatrix> {
    match chol_factor(s) {
        Ok(f) => Ok(f),
        Err(Error::NotPositiveDefinite) => {
            let scale = s.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut shifted = s.clone();
            shifted.add_identity(jitter * scale.max(1.0));
            log::warn!("Cholesky failed; retrying with jitter {jitter:e}");
            chol_factor(&shifted)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut s = b.matmul_tr(&b).unwrap();
        s.add_identity(n as f64 * 0.1);
        s
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = dense_solve(&DenseMatrix::identity(2), &Vector::from(vec![5.0, 7.0])).unwrap();
        assert_eq!(x.as_slice(), &[5.0, 7.0]);
        let x = dense_solve(
            &DenseMatrix::diag(&[2.0, 4.0]),
            &Vector::from(vec![2.0, 4.0]),
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_random_spd_residual() {
        let a = random_spd(20, 3);
        let b = Vector::from_fn(20, |i| (i as f64).sin());
        let x = dense_solve(&a, &b).unwrap();
        let r = a.matvec(&x).unwrap().sub(&b).unwrap();
        let fro = a.frobenius_norm();
        assert!(r.norm() <= 1e-8 * (fro * x.norm() + b.norm()));
    }

    #[test]
    fn singular_detected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            dense_solve(&a, &Vector::zeros(2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn cholesky_cases() {
        let f = chol_factor(&DenseMatrix::identity(3)).unwrap();
        assert!(f.rel_diff(&DenseMatrix::identity(3)) < 1e-15);
        let f = chol_factor(&DenseMatrix::diag(&[4.0, 9.0])).unwrap();
        assert!(f.rel_diff(&DenseMatrix::diag(&[2.0, 3.0])) < 1e-15);
        let s = random_spd(10, 9);
        let f = chol_factor(&s).unwrap();
        for i in 0..10 {
            for j in 0..i {
                assert_eq!(f.get(i, j), 0.0, "factor must be upper");
            }
        }
        assert!(f.tr_matmul(&f).unwrap().rel_diff(&s) < 1e-10);
        let neg = DenseMatrix::diag(&[1.0, -1.0]);
        assert_eq!(chol_factor(&neg), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn transpose_solve() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let lu = LuFactors::new(&a, "a").unwrap();
        let b = DenseMatrix::column(&Vector::from(vec![2.0, 4.0]));
        let x = lu.solve_transpose_mat(&b).unwrap();
        let back = a.tr_matmul(&x).unwrap();
        assert!(back.rel_diff(&b) < 1e-14);
    }
}
