//! Symbolic tracing of affine solver programs into graphs.

mod graph;
mod trace;

pub use graph::{compose, eval_affine, strip_shifts, AffineGraph, NodeId, NodeKind, TraceNode};
pub use trace::{run_numeric, trace, AffineProgram, Program, Tracer, TracerValue};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linops::{DenseMatrix, LinearOperator, Vector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn a22() -> LinearOperator {
        LinearOperator::dense(
            "A",
            DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap(),
        )
    }

    fn gs_program(
        a: &LinearOperator,
        b: &Vector,
    ) -> impl Fn(&mut Tracer, TracerValue) -> crate::Result<TracerValue> {
        let l_inv =
            LinearOperator::inverse_of(&LinearOperator::lower_tri_of(a, false).unwrap()).unwrap();
        let u = LinearOperator::upper_tri_of(a, true).unwrap();
        let b = b.clone();
        move |t: &mut Tracer, x| {
            let ux = t.apply(&u, x)?;
            let r = t.scale(-1.0, ux)?;
            let r = t.shift(r, &b)?;
            t.apply(&l_inv, r)
        }
    }

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut s = b.matmul_tr(&b).unwrap();
        s.add_identity(1.0);
        s
    }

    /// Hand-written sweep used as an oracle.
    fn gs_sweep(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut y = x.to_vec();
        for i in 0..n {
            let mut s = b[i];
            for j in 0..n {
                if j != i {
                    s -= a.get(i, j) * y[j];
                }
            }
            y[i] = s / a.get(i, i);
        }
        y
    }

    #[test]
    fn identity_program() {
        let g = trace(&|_: &mut Tracer, x| Ok(x), 2).unwrap();
        assert_eq!(g.len(), 1);
        let out = eval_affine(&g, &Vector::from(vec![1.0, 2.0])).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
        let g1 = trace(&|_: &mut Tracer, x| Ok(x), 1).unwrap();
        assert_eq!(
            eval_affine(&g1, &Vector::from(vec![3.0]))
                .unwrap()
                .as_slice(),
            &[3.0]
        );
    }

    #[test]
    fn gauss_seidel_chain() {
        let b = Vector::from(vec![1.0, 1.0]);
        let g = trace(&gs_program(&a22(), &b), 2).unwrap();
        let kinds: Vec<_> = g.nodes().iter().map(|n| n.kind.label()).collect();
        assert_eq!(kinds, ["input", "linear", "scale", "shift", "linear"]);
        let out = eval_affine(&g, &Vector::zeros(2)).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!((out[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_graph() {
        let a = a22();
        let d = LinearOperator::diagonal_of(&a).unwrap();
        let off = LinearOperator::sum(vec![a.clone(), LinearOperator::scaled(&d, -1.0)]).unwrap();
        let d_inv = LinearOperator::inverse_of(&d).unwrap();
        let b = Vector::from(vec![1.0, 1.0]);
        let g = trace(
            &|t: &mut Tracer, x| {
                let r = t.apply(&off, x)?;
                let r = t.neg(r)?;
                let r = t.shift(r, &b)?;
                t.apply(&d_inv, r)
            },
            2,
        )
        .unwrap();
        let out = eval_affine(&g, &Vector::zeros(2)).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15 && (out[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn non_affine_rejected() {
        let err = trace(&|t: &mut Tracer, x| t.mul(x, x), 2).unwrap_err();
        assert!(matches!(err, Error::NonAffineOperation(_)));
        let err = trace(&|t: &mut Tracer, x| t.map(x, f64::sin), 2).unwrap_err();
        assert!(matches!(err, Error::NonAffineOperation(_)));
        let err = trace(
            &|t: &mut Tracer, x| {
                if t.branch_on(x)? {
                    Ok(x)
                } else {
                    t.neg(x)
                }
            },
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonAffineOperation(_)));
        let err = trace(&|t: &mut Tracer, x| t.gather(x, x), 2).unwrap_err();
        assert!(matches!(err, Error::NonAffineOperation(_)));
    }

    #[test]
    fn foreign_values_rejected() {
        let (mut t1, x1) = Tracer::symbolic(2);
        let (_t2, x2) = Tracer::symbolic(2);
        assert_eq!(t1.add(x1, x2), Err(Error::ForeignTracerValue));
    }

    #[test]
    fn dead_nodes_pruned() {
        let a = a22();
        let g = trace(
            &|t: &mut Tracer, x| {
                let _unused = t.apply(&a, x)?;
                let _also = t.scale(3.0, x)?;
                t.neg(x)
            },
            2,
        )
        .unwrap();
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn strip_shift_of_translation() {
        let b = Vector::from(vec![4.0, -1.0]);
        let g = trace(&|t: &mut Tracer, x| t.shift(x, &b), 2).unwrap();
        let lin = strip_shifts(&g);
        assert_eq!(lin.len(), 1);
        assert!(lin.is_linear());
        assert_eq!(
            eval_affine(&lin, &Vector::zeros(2)).unwrap().as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn stripped_gs_is_iteration_matrix() {
        let s = random_spd(4, 1);
        let a = LinearOperator::dense("A", s.clone());
        let g = trace(&gs_program(&a, &Vector::from(vec![1.0, 2.0, 3.0, 4.0])), 4).unwrap();
        let lin = strip_shifts(&g);
        let dense_g = crate::covgraph::forward_matmat(&lin, &DenseMatrix::identity(4)).unwrap();
        let l = DenseMatrix::from_fn(4, 4, |i, j| if j <= i { s.get(i, j) } else { 0.0 });
        let u = DenseMatrix::from_fn(4, 4, |i, j| if j > i { s.get(i, j) } else { 0.0 });
        let oracle = crate::linops::dense_inverse(&l)
            .unwrap()
            .matmul(&u)
            .unwrap()
            .scaled(-1.0);
        assert!(dense_g.rel_diff(&oracle) < 1e-12);
    }

    #[test]
    fn compose_gs_twice() {
        let s = random_spd(4, 2);
        let a = LinearOperator::dense("A", s.clone());
        let b = Vector::from(vec![1.0, -1.0, 0.5, 2.0]);
        let g = trace(&gs_program(&a, &b), 4).unwrap();
        let gg = compose(&g, &g).unwrap();
        assert_eq!(gg.stages().len(), 1);
        let x = Vector::from(vec![0.3, 0.1, -0.2, 0.9]);
        let want = gs_sweep(&s, &b, &gs_sweep(&s, &b, &x));
        let got = eval_affine(&gg, &x).unwrap();
        assert!(got.rel_diff(&Vector::from(want)) < 1e-12);
        let id = AffineGraph::identity(4);
        let gi = compose(&id, &g).unwrap();
        assert!(
            eval_affine(&gi, &x)
                .unwrap()
                .rel_diff(&eval_affine(&g, &x).unwrap())
                < 1e-15
        );
        assert!(compose(&g, &AffineGraph::identity(3)).is_err());
    }

    #[test]
    fn power_matches_dense_power() {
        let s = random_spd(4, 3);
        let a = LinearOperator::dense("A", s.clone());
        let g = trace(&gs_program(&a, &Vector::zeros(4)), 4).unwrap();
        let lin = strip_shifts(&g);
        let g1 = crate::covgraph::forward_matmat(&lin, &DenseMatrix::identity(4)).unwrap();
        let g3 = g1.matmul(&g1).unwrap().matmul(&g1).unwrap();
        let lin3 = strip_shifts(&g.power(3).unwrap());
        let got = crate::covgraph::forward_matmat(&lin3, &DenseMatrix::identity(4)).unwrap();
        assert!(got.rel_diff(&g3) < 1e-12);
    }

    #[test]
    fn split_stages_recomposes() {
        let s = random_spd(5, 4);
        let a = LinearOperator::dense("A", s);
        let b = Vector::from_fn(5, |i| i as f64);
        let g = trace(&gs_program(&a, &b), 5).unwrap();
        let g3 = g.power(3).unwrap();
        let pieces = g3.split_stages();
        assert_eq!(pieces.len(), 3);
        let x = Vector::from_fn(5, |i| 1.0 - i as f64);
        let mut y = x.clone();
        for p in &pieces {
            y = eval_affine(p, &y).unwrap();
        }
        assert!(y.rel_diff(&eval_affine(&g3, &x).unwrap()) < 1e-14);
    }

    #[test]
    fn skip_connection_is_not_split() {
        let a = a22();
        let g = trace(
            &|t: &mut Tracer, x| {
                let y = t.apply(&a, x)?;
                let y = t.checkpoint(y)?;
                let z = t.apply(&a, y)?;
                t.add(z, x)
            },
            2,
        )
        .unwrap();
        assert_eq!(g.stages().len(), 1);
        assert_eq!(g.split_stages().len(), 1);
    }

    #[test]
    fn json_dump_shape() {
        let g = trace(&gs_program(&a22(), &Vector::from(vec![1.0, 1.0])), 2).unwrap();
        let j = g.to_json();
        assert_eq!(j["nodes"].as_array().unwrap().len(), 5);
        assert_eq!(j["nodes"][1]["op"]["name"], "U_A");
        assert_eq!(j["nodes"][4]["op"]["cost_class"], "triangular-solve");
        assert_eq!(j["nodes"][2]["alpha"], -1.0);
    }

    fn random_affine_graph(seed: u64, d: usize) -> AffineGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m1 = LinearOperator::dense(
            "M1",
            DenseMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)),
        );
        let s = random_spd(d, seed + 1);
        let a = LinearOperator::dense("A", s);
        let l_inv =
            LinearOperator::inverse_of(&LinearOperator::lower_tri_of(&a, false).unwrap()).unwrap();
        let b = Vector::from_fn(d, |_| rng.random_range(-2.0..2.0));
        let c = Vector::from_fn(d, |_| rng.random_range(-2.0..2.0));
        let alpha = rng.random_range(-3.0..3.0);
        trace(
            &move |t: &mut Tracer, x| {
                let y = t.apply(&m1, x)?;
                let y = t.shift(y, &b)?;
                let z = t.scale(alpha, x)?;
                let w = t.add(y, z)?;
                let w = t.apply(&l_inv, w)?;
                let w = t.shift(w, &c)?;
                let v = t.neg(x)?;
                t.add(w, v)
            },
            d,
        )
        .unwrap()
    }

    fn vec_close(a: &Vector, b: &Vector, tol: f64) -> bool {
        let scale = a.norm().max(b.norm()).max(1e-300);
        a.sub(b).unwrap().norm() <= tol * scale
    }

    proptest! {
        #[test]
        fn affinity(seed in 0u64..200, t in 0.0f64..1.0) {
            let d = 6;
            let g = random_affine_graph(seed, d);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
            let x = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let y = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let mix = x.scaled(t).add(&y.scaled(1.0 - t)).unwrap();
            let lhs = eval_affine(&g, &mix).unwrap();
            let rhs = eval_affine(&g, &x).unwrap().scaled(t)
                .add(&eval_affine(&g, &y).unwrap().scaled(1.0 - t)).unwrap();
            prop_assert!(vec_close(&lhs, &rhs, 1e-10));
        }

        #[test]
        fn stripped_is_linear(seed in 0u64..200, alpha in -5.0f64..5.0) {
            let d = 5;
            let lin = random_affine_graph(seed, d).strip_shifts();
            prop_assert!(lin.is_linear());
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
            let x = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let y = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let lx = eval_affine(&lin, &x).unwrap();
            let ly = eval_affine(&lin, &y).unwrap();
            let lxy = eval_affine(&lin, &x.add(&y).unwrap()).unwrap();
            prop_assert!(vec_close(&lxy, &lx.add(&ly).unwrap(), 1e-10));
            let lax = eval_affine(&lin, &x.scaled(alpha)).unwrap();
            prop_assert!(vec_close(&lax, &lx.scaled(alpha), 1e-10));
            prop_assert_eq!(eval_affine(&lin, &Vector::zeros(d)).unwrap().norm(), 0.0);
        }

        #[test]
        fn shift_decomposition(seed in 0u64..200) {
            let d = 5;
            let g = random_affine_graph(seed, d);
            let lin = g.strip_shifts();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
            let x = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let lhs = eval_affine(&g, &x).unwrap();
            let rhs = eval_affine(&lin, &x).unwrap().add(&eval_affine(&g, &Vector::zeros(d)).unwrap()).unwrap();
            prop_assert!(vec_close(&lhs, &rhs, 1e-10));
        }

        #[test]
        fn graph_matches_numeric_run(seed in 0u64..100) {
            let d = 4;
            let s = random_spd(d, seed);
            let a = LinearOperator::dense("A", s);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let prog = gs_program(&a, &b);
            let g = trace(&prog, d).unwrap();
            let x = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
            let direct = run_numeric(&prog, &x).unwrap();
            prop_assert!(vec_close(&eval_affine(&g, &x).unwrap(), &direct, 1e-14));
        }
    }
}
