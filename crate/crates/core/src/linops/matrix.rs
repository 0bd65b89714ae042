use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linops::Vector;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(dim_err("dense matrix", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds without the finiteness scan; shape must already be right.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Single column matrix holding `v`.
    pub fn column(v: &Vector) -> Self {
        Self::from_raw(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vector {
        Vector::from_fn(self.rows, |i| self.get(i, j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.data[i * self.cols + j]);
            }
        }
        Self::from_raw(self.cols, self.rows, out)
    }

    /// `self · other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(dim_err("matmul", self.cols, other.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        gemm(
            1.0,
            self.as_view(false),
            other.as_view(false),
            0.0,
            &mut out,
        );
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn tr_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(dim_err("transposed matmul", self.rows, other.rows));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        gemm(1.0, self.as_view(true), other.as_view(false), 0.0, &mut out);
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_tr(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(dim_err("matmul transposed", self.cols, other.cols));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        gemm(1.0, self.as_view(false), other.as_view(true), 0.0, &mut out);
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(dim_err("matvec", self.cols, v.len()));
        }
        Ok(Vector::from_fn(self.rows, |i| {
            self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
        }))
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.clone();
        out.add_scaled(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err(
                "matrix add",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|v| alpha * v).collect(),
        )
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn add_identity(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += alpha;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖self − other‖_F / max(‖other‖_F, tiny)`.
    pub fn rel_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "rel_diff shape mismatch");
        let diff: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / other.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// Returns `(S + Sᵀ)/2`.
    pub fn symmetrized(&self) -> DenseMatrix {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let n = self.rows;
        DenseMatrix::from_fn(n, n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Sub-block of rows `r0..r1`, all columns.
    pub fn row_block(&self, r0: usize, r1: usize) -> DenseMatrix {
        Self::from_raw(
            r1 - r0,
            self.cols,
            self.data[r0 * self.cols..r1 * self.cols].to_vec(),
        )
    }

    /// Columns `c0..c1`.
    pub fn col_block(&self, c0: usize, c1: usize) -> DenseMatrix {
        let w = c1 - c0;
        let mut data = Vec::with_capacity(self.rows * w);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[c0..c1]);
        }
        Self::from_raw(self.rows, w, data)
    }

    /// Writes `block` into columns starting at `c0`.
    pub fn set_col_block(&mut self, c0: usize, block: &DenseMatrix) {
        assert_eq!(self.rows, block.rows);
        for i in 0..self.rows {
            let dst = &mut self.data[i * self.cols + c0..i * self.cols + c0 + block.cols];
            dst.copy_from_slice(block.row(i));
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Symmetric eigendecomposition of the symmetrized matrix, eigenvalues
    /// ascending, eigenvectors as columns.
    pub fn sym_eigen(&self) -> (Vec<f64>, DenseMatrix) {
        let sym = self.symmetrized().to_nalgebra();
        let eig = nalgebra::SymmetricEigen::new(sym);
        let n = self.rows;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigen().0.first().copied().unwrap_or(0.0)
    }

    /// Whether the symmetric part is PSD up to `−tol·‖S‖_F`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * self.frobenius_norm()
    }

    pub(crate) fn as_view(&self, transposed: bool) -> MatView<'_> {
        if transposed {
            MatView {
                rows: self.cols,
                cols: self.rows,
                rs: 1,
                cs: self.cols as isize,
                data: &self.data,
            }
        } else {
            MatView {
                rows: self.rows,
                cols: self.cols,
                rs: self.cols as isize,
                cs: 1,
                data: &self.data,
            }
        }
    }
}

impl DenseMatrix {
    /// View of the block `[r0, r0 + nr) × [c0, c0 + nc)`, transposed on request.
    pub(crate) fn block_view(
        &self,
        r0: usize,
        nr: usize,
        c0: usize,
        nc: usize,
        transposed: bool,
    ) -> MatView<'_> {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        let start = if nr == 0 || nc == 0 {
            0
        } else {
            r0 * self.cols + c0
        };
        let data = &self.data[start..];
        let (rs, cs) = (self.cols as isize, 1);
        if transposed {
            MatView {
                rows: nc,
                cols: nr,
                rs: cs,
                cs: rs,
                data,
            }
        } else {
            MatView {
                rows: nr,
                cols: nc,
                rs,
                cs,
                data,
            }
        }
    }
}

/// Strided read-only view used for gemm calls.
pub(crate) struct MatView<'a> {
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
    data: &'a [f64],
}

/// `out = alpha·a·b + beta·out`.
pub(crate) fn gemm(alpha: f64, a: MatView<'_>, b: MatView<'_>, beta: f64, out: &mut DenseMatrix) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(out.rows, a.rows);
    assert_eq!(out.cols, b.cols);
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    if a.cols == 0 {
        out.scale_in_place(beta);
        return;
    }
    let rsc = out.cols as isize;
    // SAFETY: the views and the output cover exactly the strided ranges
    // described by their shapes, as asserted above.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            out.data.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_variants_agree() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, -1.0]]);
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab, m(&[&[7.0, -1.0], &[16.0, -1.0]]));
        assert_eq!(a.transpose().tr_matmul(&b).unwrap(), ab);
        assert_eq!(a.matmul_tr(&b.transpose()).unwrap(), ab);
    }

    #[test]
    fn shape_checks() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn eigen_sorted() {
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (vals, vecs) = a.sym_eigen();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let recon = vecs
            .matmul(&DenseMatrix::diag(&vals))
            .unwrap()
            .matmul_tr(&vecs)
            .unwrap();
        assert!(recon.rel_diff(&a) < 1e-12);
    }
}
