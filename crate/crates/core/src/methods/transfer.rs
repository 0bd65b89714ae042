use super::grid::{Grid, Grid1D};
use crate::error::{Error, Result};
use crate::linops::{CostClass, DenseMatrix, LinearOperator};

/// Distances on the unit interval agree to this many digits count as ties.
const TIE_SCALE: f64 = 1e10;

fn distance_key(p: f64, x: f64) -> i64 {
    ((p - x).abs() * TIE_SCALE).round() as i64
}

/// Index of the point of `pts` nearest to `x`; ties go to the lower index.
fn nearest(pts: &[f64], x: f64) -> usize {
    (0..pts.len())
        .min_by_key(|&i| (distance_key(pts[i], x), i))
        .expect("nonempty grid")
}

/// Coarse point `i` copies its nearest fine point.
pub fn restrictor_1d(fine: Grid1D, coarse: Grid1D) -> Result<DenseMatrix> {
    if coarse.len() > fine.len() {
        return Err(Error::InvalidArgument(format!(
            "coarse grid ({}) larger than fine grid ({})",
            coarse.len(),
            fine.len()
        )));
    }
    let fp = fine.points();
    let mut r = DenseMatrix::zeros(coarse.len(), fine.len());
    for (i, x) in coarse.points().into_iter().enumerate() {
        r.set(i, nearest(&fp, x), 1.0);
    }
    Ok(r)
}

/// Fine point `j` mixes its two nearest coarse points with inverse-distance
/// weights; an exact hit takes weight one.
pub fn interpolator_1d(coarse: Grid1D, fine: Grid1D) -> Result<DenseMatrix> {
    if coarse.len() > fine.len() {
        return Err(Error::InvalidArgument(format!(
            "coarse grid ({}) larger than fine grid ({})",
            coarse.len(),
            fine.len()
        )));
    }
    let cp = coarse.points();
    let k = cp.len().min(2);
    let mut p = DenseMatrix::zeros(fine.len(), coarse.len());
    for (j, x) in fine.points().into_iter().enumerate() {
        let mut order: Vec<usize> = (0..cp.len()).collect();
        order.sort_by_key(|&i| (distance_key(cp[i], x), i));
        let chosen = &order[..k];
        if let Some(&hit) = chosen.iter().find(|&&i| distance_key(cp[i], x) == 0) {
            p.set(j, hit, 1.0);
            continue;
        }
        let w: Vec<f64> = chosen.iter().map(|&i| 1.0 / (cp[i] - x).abs()).collect();
        let total: f64 = w.iter().sum();
        for (&i, wi) in chosen.iter().zip(w) {
            p.set(j, i, wi / total);
        }
    }
    Ok(p)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DenseMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a.get(i / br, j / bc) * b.get(i % br, j % bc)
    })
}

fn same_kind(a: &Grid, b: &Grid) -> Result<()> {
    if a.spatial_dim() != b.spatial_dim() {
        return Err(Error::InvalidArgument(
            "grids of different dimension".into(),
        ));
    }
    Ok(())
}

pub fn restrictor_matrix(fine: &Grid, coarse: &Grid) -> Result<DenseMatrix> {
    same_kind(fine, coarse)?;
    match (fine, coarse) {
        (Grid::D1(f), Grid::D1(c)) => restrictor_1d(*f, *c),
        (Grid::D2(f), Grid::D2(c)) => {
            let r = restrictor_1d(f.axis(), c.axis())?;
            Ok(kron(&r, &r))
        }
        _ => unreachable!(),
    }
}

pub fn interpolator_matrix(coarse: &Grid, fine: &Grid) -> Result<DenseMatrix> {
    same_kind(fine, coarse)?;
    match (coarse, fine) {
        (Grid::D1(c), Grid::D1(f)) => interpolator_1d(*c, *f),
        (Grid::D2(c), Grid::D2(f)) => {
            let p = interpolator_1d(c.axis(), f.axis())?;
            Ok(kron(&p, &p))
        }
        _ => unreachable!(),
    }
}

/// Nearest-neighbour restrictor as an operator.
pub fn build_restrictor(name: &str, fine: &Grid, coarse: &Grid) -> Result<LinearOperator> {
    Ok(LinearOperator::dense_with_class(
        name,
        restrictor_matrix(fine, coarse)?,
        CostClass::Transfer,
    ))
}

/// Two-neighbour inverse-distance interpolator as an operator.
pub fn build_interpolator(name: &str, coarse: &Grid, fine: &Grid) -> Result<LinearOperator> {
    Ok(LinearOperator::dense_with_class(
        name,
        interpolator_matrix(coarse, fine)?,
        CostClass::Transfer,
    ))
}
