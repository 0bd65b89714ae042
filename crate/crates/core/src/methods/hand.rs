use super::multigrid::GridHierarchy;
use crate::error::{dim_err, Result};
use crate::linops::{Covariance, DenseMatrix, Gaussian, LuFactors, Vector};

/// Probabilistic two-grid cycle written out by hand with explicit
/// cross-covariances between the iterate and the coarse correction.
/// Dense smoother matrices are formed once at construction.
#[derive(Debug)]
pub struct HandTwoGrid {
    a: DenseMatrix,
    b: Vector,
    g: DenseMatrix,
    f: Vector,
    r: DenseMatrix,
    p: DenseMatrix,
    coarse: LuFactors,
    nu_pre: usize,
    nu_post: usize,
}

impl HandTwoGrid {
    pub fn new(hierarchy: &GridHierarchy, b: &Vector) -> Result<Self> {
        let fine = &hierarchy.levels()[0];
        if b.len() != fine.dense.rows() {
            return Err(dim_err("HandTwoGrid", fine.dense.rows(), b.len()));
        }
        let smoother = fine.smoother.as_ref().expect("fine level has a smoother");
        let (g, f) = smoother.dense_affine(b)?;
        let tr = &hierarchy.transfers()[0];
        let coarse = LuFactors::new(&hierarchy.levels()[1].dense, "A2")?;
        let cfg = hierarchy.config();
        Ok(Self {
            a: fine.dense.clone(),
            b: b.clone(),
            g,
            f,
            r: tr.restrictor.to_dense()?,
            p: tr.interpolator.to_dense()?,
            coarse,
            nu_pre: cfg.nu_pre,
            nu_post: cfg.nu_post,
        })
    }

    fn smooth(&self, x: &mut Vector, sigma: &mut DenseMatrix) -> Result<()> {
        let mut next = self.g.matvec(x)?;
        next.axpy(1.0, &self.f);
        *x = next;
        *sigma = self.g.matmul(sigma)?.matmul_tr(&self.g)?;
        Ok(())
    }

    /// One cycle applied to `N(x, Σ)`.
    pub fn step(&self, x: &Vector, sigma: &DenseMatrix) -> Result<(Vector, DenseMatrix)> {
        let mut x = x.clone();
        let mut sigma = sigma.clone();
        for _ in 0..self.nu_pre {
            self.smooth(&mut x, &mut sigma)?;
        }
        let sigma_rl = self.a.matmul(&sigma)?;
        let r1 = self.b.sub(&self.a.matvec(&x)?)?;
        let sigma_r = sigma_rl.matmul_tr(&self.a)?;
        let sigma2_rl = self.r.matmul(&sigma_rl)?;
        let r2 = self.r.matvec(&r1)?;
        let sigma2_r = self.r.matmul(&sigma_r)?.matmul_tr(&self.r)?;
        let sigma2_el = self.coarse.solve_mat(&sigma2_rl)?;
        let e2 = self.coarse.solve_mat(&DenseMatrix::column(&r2))?;
        let half = self.coarse.solve_mat(&sigma2_r)?;
        let sigma2_e = self.coarse.solve_mat(&half.transpose())?;
        let sigma_el = self.p.matmul(&sigma2_el)?;
        let e1 = self.p.matmul(&e2)?;
        let sigma_e = self.p.matmul(&sigma2_e)?.matmul_tr(&self.p)?;
        x.axpy(1.0, &Vector::from(e1.into_data()));
        sigma.add_scaled(1.0, &sigma_e)?;
        sigma.add_scaled(-1.0, &sigma_el)?;
        sigma.add_scaled(-1.0, &sigma_el.transpose())?;
        for _ in 0..self.nu_post {
            self.smooth(&mut x, &mut sigma)?;
        }
        Ok((x, sigma))
    }

    /// `iters` cycles from `N(x0, Σ0)`.
    pub fn run(&self, x0: &Vector, sigma0: &DenseMatrix, iters: usize) -> Result<Gaussian> {
        let mut x = x0.clone();
        let mut sigma = sigma0.clone();
        for _ in 0..iters {
            (x, sigma) = self.step(&x, &sigma)?;
        }
        Ok(Gaussian {
            mean: x,
            cov: Covariance::Dense(sigma.symmetrized()),
        })
    }
}

/// One hand-derived probabilistic two-grid cycle.
pub fn prob_two_grid_hand(
    x: &Vector,
    sigma: &DenseMatrix,
    hierarchy: &GridHierarchy,
    b: &Vector,
) -> Result<Gaussian> {
    HandTwoGrid::new(hierarchy, b)?.run(x, sigma, 1)
}
