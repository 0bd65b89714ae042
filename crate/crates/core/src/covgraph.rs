//! Covariance transforms over linear traced graphs: forward and reverse
//! matrix passes, pushforward covariances, and projections.

use crate::error::{dim_err, Error, Result};
use crate::linops::DenseMatrix;
use crate::tracer::{AffineGraph, NodeKind};

/// Columns pushed through the graph per pass.
const BLOCK: usize = 64;

fn require_linear(g: &AffineGraph) -> Result<()> {
    if g.is_linear() {
        Ok(())
    } else {
        Err(Error::ShiftInLinearGraph)
    }
}

/// `G·M` for the linear map `G` of `g`, in column blocks.
pub fn forward_matmat(g: &AffineGraph, m: &DenseMatrix) -> Result<DenseMatrix> {
    require_linear(g)?;
    if m.rows() != g.input_dim() {
        return Err(dim_err("forward_matmat", g.input_dim(), m.rows()));
    }
    if m.cols() <= BLOCK {
        return g.forward(m, false);
    }
    let mut out = DenseMatrix::zeros(g.output_dim(), m.cols());
    let mut c0 = 0;
    while c0 < m.cols() {
        let c1 = (c0 + BLOCK).min(m.cols());
        let block = g.forward(&m.col_block(c0, c1), false)?;
        out.set_col_block(c0, &block);
        c0 = c1;
    }
    Ok(out)
}

/// `Gᵀ·Y` by one reverse traversal.
fn reverse_block(g: &AffineGraph, y: &DenseMatrix) -> Result<DenseMatrix> {
    let nodes = g.nodes();
    let mut adj: Vec<Option<DenseMatrix>> = vec![None; nodes.len()];
    adj[g.output_id()] = Some(y.clone());
    fn accumulate(slot: &mut Option<DenseMatrix>, m: DenseMatrix) -> Result<()> {
        match slot {
            Some(acc) => acc.add_scaled(1.0, &m),
            None => {
                *slot = Some(m);
                Ok(())
            }
        }
    }
    for node in nodes.iter().rev() {
        if matches!(node.kind, NodeKind::Input) {
            continue;
        }
        let Some(a) = adj[node.id].take() else {
            continue;
        };
        match &node.kind {
            NodeKind::Input => unreachable!(),
            NodeKind::Linear { op, parent } => {
                accumulate(&mut adj[*parent], op.apply_transpose_mat(&a)?)?
            }
            NodeKind::Scale { alpha, parent } => accumulate(&mut adj[*parent], a.scaled(*alpha))?,
            NodeKind::Negate { parent } => accumulate(&mut adj[*parent], a.scaled(-1.0))?,
            NodeKind::Add { left, right } => {
                accumulate(&mut adj[*left], a.clone())?;
                accumulate(&mut adj[*right], a)?;
            }
            NodeKind::Shift { .. } => return Err(Error::ShiftInLinearGraph),
        }
    }
    Ok(adj[g.input_id()]
        .take()
        .unwrap_or_else(|| DenseMatrix::zeros(g.input_dim(), y.cols())))
}

/// `Z = V·G` via reverse traversal, processing rows of `V` in blocks.
pub fn reverse_matmat(g: &AffineGraph, v: &DenseMatrix) -> Result<DenseMatrix> {
    require_linear(g)?;
    if v.cols() != g.output_dim() {
        return Err(dim_err("reverse_matmat", g.output_dim(), v.cols()));
    }
    let mut out = DenseMatrix::zeros(v.rows(), g.input_dim());
    let mut r0 = 0;
    while r0 < v.rows() {
        let r1 = (r0 + BLOCK).min(v.rows());
        let yt = v.row_block(r0, r1).transpose();
        let zt = reverse_block(g, &yt)?;
        let z = zt.transpose();
        out.data_mut()[r0 * g.input_dim()..r1 * g.input_dim()].copy_from_slice(z.data());
        r0 = r1;
    }
    Ok(out)
}

/// `G Σ₀ Gᵀ`, symmetrized.
pub fn posterior_cov(g: &AffineGraph, sigma0: &DenseMatrix) -> Result<DenseMatrix> {
    if !sigma0.is_square() {
        return Err(dim_err(
            "posterior_cov",
            "square prior",
            format!("{:?}", sigma0.shape()),
        ));
    }
    let half = forward_matmat(g, sigma0)?;
    let full = forward_matmat(g, &half.transpose())?;
    Ok(full.symmetrized())
}

/// `Z Σ₀ Zᵀ` with `Z = V·G`.
pub fn project_cov(g: &AffineGraph, sigma0: &DenseMatrix, v: &DenseMatrix) -> Result<DenseMatrix> {
    let z = reverse_matmat(g, v)?;
    let zs = z.matmul(sigma0)?;
    Ok(zs.matmul_tr(&z)?.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{dense_inverse, LinearOperator, Vector};
    use crate::tracer::{strip_shifts, trace, Tracer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let b = rand_mat(n, n, rng);
        let mut s = b.matmul_tr(&b).unwrap();
        s.add_identity(1.0);
        s
    }

    fn gs_linear(a: &DenseMatrix) -> (AffineGraph, DenseMatrix) {
        let n = a.rows();
        let op = LinearOperator::dense("A", a.clone());
        let l_inv =
            LinearOperator::inverse_of(&LinearOperator::lower_tri_of(&op, false).unwrap()).unwrap();
        let u = LinearOperator::upper_tri_of(&op, true).unwrap();
        let b = Vector::from_fn(n, |i| i as f64 + 1.0);
        let g = trace(
            &|t: &mut Tracer, x| {
                let ux = t.apply(&u, x)?;
                let r = t.neg(ux)?;
                let r = t.shift(r, &b)?;
                t.apply(&l_inv, r)
            },
            n,
        )
        .unwrap();
        let l = DenseMatrix::from_fn(n, n, |i, j| if j <= i { a.get(i, j) } else { 0.0 });
        let um = DenseMatrix::from_fn(n, n, |i, j| if j > i { a.get(i, j) } else { 0.0 });
        let dense = dense_inverse(&l).unwrap().matmul(&um).unwrap().scaled(-1.0);
        (strip_shifts(&g), dense)
    }

    #[test]
    fn identity_graph_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = rand_mat(4, 3, &mut rng);
        let id = AffineGraph::identity(4);
        assert_eq!(forward_matmat(&id, &m).unwrap(), m);
        let s = spd(4, &mut rng);
        assert!(posterior_cov(&id, &s).unwrap().rel_diff(&s) < 1e-15);
    }

    #[test]
    fn gs_forward_and_reverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = spd(4, &mut rng);
        let (g, dense) = gs_linear(&a);
        let fwd = forward_matmat(&g, &DenseMatrix::identity(4)).unwrap();
        assert!(fwd.rel_diff(&dense) < 1e-12);
        let rev = reverse_matmat(&g, &DenseMatrix::identity(4)).unwrap();
        assert!(rev.rel_diff(&dense) < 1e-12);
        let v = rand_mat(3, 4, &mut rng);
        let z = reverse_matmat(&g, &v).unwrap();
        let via_forward = fwd.tr_matmul(&v.transpose()).unwrap().transpose();
        assert!(z.rel_diff(&via_forward) < 1e-12);
        assert!(z.rel_diff(&v.matmul(&dense).unwrap()) < 1e-12);
        let e2 = DenseMatrix::from_fn(1, 4, |_, j| if j == 2 { 1.0 } else { 0.0 });
        let row = reverse_matmat(&g, &e2).unwrap();
        for j in 0..4 {
            assert!((row.get(0, j) - dense.get(2, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifts_rejected() {
        let b = Vector::from(vec![1.0, 2.0]);
        let g = trace(&|t: &mut Tracer, x| t.shift(x, &b), 2).unwrap();
        assert_eq!(
            forward_matmat(&g, &DenseMatrix::identity(2)),
            Err(Error::ShiftInLinearGraph)
        );
        assert_eq!(
            reverse_matmat(&g, &DenseMatrix::identity(2)),
            Err(Error::ShiftInLinearGraph)
        );
        assert!(forward_matmat(&AffineGraph::identity(3), &DenseMatrix::identity(2)).is_err());
    }

    #[test]
    fn covariance_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = spd(4, &mut rng);
        let (g, dense) = gs_linear(&a);
        let c = posterior_cov(&g, &DenseMatrix::identity(4)).unwrap();
        assert!(c.rel_diff(&dense.matmul_tr(&dense).unwrap()) < 1e-10);
        let s0 = spd(4, &mut rng);
        let gk = g.power(3).unwrap();
        let dk = dense.matmul(&dense).unwrap().matmul(&dense).unwrap();
        let want = dk.matmul(&s0).unwrap().matmul_tr(&dk).unwrap();
        let got = posterior_cov(&gk, &s0).unwrap();
        assert!(got.rel_diff(&want) < 1e-8);
        assert!(got.is_psd(1e-8));
        assert_eq!(got.asymmetry(), 0.0);
    }

    #[test]
    fn projection_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = spd(30, &mut rng);
        let (g, _) = gs_linear(&a);
        let g = g.power(2).unwrap();
        let s0 = spd(30, &mut rng);
        let full = posterior_cov(&g, &s0).unwrap();
        let v = rand_mat(2, 30, &mut rng);
        let want = v.matmul(&full).unwrap().matmul_tr(&v).unwrap();
        assert!(project_cov(&g, &s0, &v).unwrap().rel_diff(&want) < 1e-10);
        let all = project_cov(&g, &s0, &DenseMatrix::identity(30)).unwrap();
        assert!(all.rel_diff(&full) < 1e-10);
        let zero = project_cov(&g, &s0, &DenseMatrix::zeros(2, 30)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn blocked_passes_match_unblocked() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = spd(150, &mut rng);
        let (g, dense) = gs_linear(&a);
        let m = rand_mat(150, 150, &mut rng);
        let f = forward_matmat(&g, &m).unwrap();
        assert!(f.rel_diff(&dense.matmul(&m).unwrap()) < 1e-10);
        let r = reverse_matmat(&g, &m).unwrap();
        assert!(r.rel_diff(&m.matmul(&dense).unwrap()) < 1e-10);
    }
}
