use super::*;
use crate::cagp::Kernel;
use crate::linops::{dense_inverse, dense_solve, DenseMatrix, LinearOperator, Vector};
use crate::simplify::{derive_step_programs, StepOptions};
use crate::tracer::eval_affine;
use proptest::prelude::*;

fn small() -> (LinearOperator, Vector) {
    let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
    (LinearOperator::dense("A", a), Vector::from(vec![1.0, 1.0]))
}

fn matern_system(n: usize) -> LinearOperator {
    let k = Kernel::matern32(0.1, 1.0).unwrap();
    LinearOperator::dense("A", k.gram(&Grid::line(n).unwrap().coordinates()))
}

fn tridiag(n: usize, diag: f64) -> LinearOperator {
    LinearOperator::dense(
        "A",
        DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => diag,
            1 => -1.0,
            _ => 0.0,
        }),
    )
}

fn dense_iteration(program: &crate::tracer::Program) -> (DenseMatrix, Vector) {
    let g = program.trace().unwrap();
    let d = g.input_dim();
    let f = eval_affine(&g, &Vector::zeros(d)).unwrap();
    let cols: Vec<Vector> = (0..d)
        .map(|j| {
            let e = Vector::from_fn(d, |i| f64::from(u8::from(i == j)));
            eval_affine(&g, &e).unwrap().sub(&f).unwrap()
        })
        .collect();
    (DenseMatrix::from_fn(d, d, |i, j| cols[j][i]), f)
}

fn spectral_radius(g: &DenseMatrix) -> f64 {
    let eig = g.to_nalgebra().complex_eigenvalues();
    eig.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn single_sweeps_on_a_2x2_system() {
    let (a, b) = small();
    let x0 = Vector::zeros(2);
    let gs = gauss_seidel_step(&a, &b).unwrap().run_numeric(&x0).unwrap();
    assert!(gs.rel_diff(&Vector::from(vec![0.5, 1.0 / 6.0])) < 1e-15);
    let jac = jacobi_step(&a, &b, 1.0).unwrap().run_numeric(&x0).unwrap();
    assert!(jac.rel_diff(&Vector::from(vec![0.5, 1.0 / 3.0])) < 1e-15);
    let graph = gauss_seidel_step(&a, &b).unwrap().trace().unwrap();
    assert!(eval_affine(&graph, &x0).unwrap().rel_diff(&gs) < 1e-15);
}

#[test]
fn smoothers_fix_the_solution() {
    for d in [5, 17, 50] {
        let a = matern_system(d);
        let b = Vector::from_fn(d, |i| 1.0 + (i as f64 * 0.37).sin());
        let xs = dense_solve(&a.to_dense().unwrap(), &b).unwrap();
        for prog in [
            gauss_seidel_step(&a, &b).unwrap(),
            jacobi_step(&tridiag(d, 2.5), &b, 2.0 / 3.0).unwrap(),
        ] {
            let sys = if prog.name() == "jacobi" {
                tridiag(d, 2.5)
            } else {
                a.clone()
            };
            let x = dense_solve(&sys.to_dense().unwrap(), &b).unwrap();
            let out = prog.run_numeric(&x).unwrap();
            assert!(out.rel_diff(&x) < 1e-9, "{} at d={d}", prog.name());
        }
        let gs = gauss_seidel_step(&a, &b).unwrap();
        assert!(gs.run_numeric(&xs).unwrap().rel_diff(&xs) < 1e-9);
    }
}

#[test]
fn gauss_seidel_contracts_on_spd_systems() {
    let a = matern_system(30);
    let b = Vector::from(vec![1.0; 30]);
    let (g, _) = dense_iteration(&gauss_seidel_step(&a, &b).unwrap());
    assert!(spectral_radius(&g) < 1.0);
}

#[test]
fn smoother_dense_form_matches_the_trace() {
    let a = tridiag(8, 2.5);
    let b = Vector::from_fn(8, |i| i as f64);
    for kind in [
        SmootherKind::GaussSeidel,
        SmootherKind::Jacobi { omega: 0.6 },
    ] {
        let (g, f) = Smoother::new(&a, kind).unwrap().dense_affine(&b).unwrap();
        let prog = match kind {
            SmootherKind::GaussSeidel => gauss_seidel_step(&a, &b).unwrap(),
            SmootherKind::Jacobi { omega } => jacobi_step(&a, &b, omega).unwrap(),
        };
        let (gt, ft) = dense_iteration(&prog);
        assert!(g.rel_diff(&gt) < 1e-13, "{}", kind.label());
        assert!(f.rel_diff(&ft) < 1e-13);
    }
    assert!(Smoother::new(&a, SmootherKind::Jacobi { omega: 1.5 }).is_err());
}

fn two_level(d: usize, coarse: usize, config: CycleConfig) -> (GridHierarchy, Vector) {
    let a = matern_system(d);
    let h = GridHierarchy::galerkin(
        &a,
        &[Grid::line(d).unwrap(), Grid::line(coarse).unwrap()],
        config,
    )
    .unwrap();
    (h, Vector::from(vec![1.0; d]))
}

#[test]
fn two_grid_iteration_matrix_matches_dense_formula() {
    let (h, b) = two_level(20, 4, CycleConfig::default());
    let (g_tg, _) = dense_iteration(&two_grid_cycle(&h, &b).unwrap());
    let (g, _) = Smoother::new(h.fine(), SmootherKind::GaussSeidel)
        .unwrap()
        .dense_affine(&b)
        .unwrap();
    let a = h.fine().to_dense().unwrap();
    let r = h.transfers()[0].restrictor.to_dense().unwrap();
    let p = h.transfers()[0].interpolator.to_dense().unwrap();
    let a2inv = dense_inverse(&r.matmul(&a).unwrap().matmul(&p).unwrap()).unwrap();
    let mut cgc = p
        .matmul(&a2inv)
        .unwrap()
        .matmul(&r)
        .unwrap()
        .matmul(&a)
        .unwrap()
        .scaled(-1.0);
    cgc.add_identity(1.0);
    let g3 = g.matmul(&g).unwrap().matmul(&g).unwrap();
    let want = g3.matmul(&cgc).unwrap().matmul(&g3).unwrap();
    assert!(g_tg.rel_diff(&want) < 1e-9);
}

#[test]
fn coarse_equal_to_fine_solves_exactly() {
    let d = 12;
    let a = matern_system(d);
    let id = DenseMatrix::identity(d);
    let h = GridHierarchy::from_transfers(
        &a,
        vec![(id.clone(), id)],
        &[None, None],
        CycleConfig::default(),
    )
    .unwrap();
    let b = Vector::from_fn(d, |i| (i as f64).cos());
    let x = two_grid_cycle(&h, &b)
        .unwrap()
        .run_numeric(&Vector::zeros(d))
        .unwrap();
    let xs = dense_solve(&a.to_dense().unwrap(), &b).unwrap();
    assert!(x.rel_diff(&xs) < 1e-8);
}

#[test]
fn three_level_v_cycle_fixes_and_contracts() {
    let a = matern_system(45);
    let grids = [
        Grid::line(45).unwrap(),
        Grid::line(15).unwrap(),
        Grid::line(5).unwrap(),
    ];
    let h = GridHierarchy::galerkin(&a, &grids, CycleConfig::default()).unwrap();
    assert_eq!(h.depth(), 3);
    assert!(h.galerkin_defect().unwrap() <= 1e-12);
    let b = Vector::from(vec![1.0; 45]);
    let prog = v_cycle(&h, &b).unwrap();
    let xs = dense_solve(&a.to_dense().unwrap(), &b).unwrap();
    assert!(prog.run_numeric(&xs).unwrap().rel_diff(&xs) < 1e-9);
    let graph = prog.trace().unwrap();
    let mut x = Vector::zeros(45);
    let mut err = x.sub(&xs).unwrap().norm();
    for _ in 0..10 {
        x = eval_affine(&graph, &x).unwrap();
        let e = x.sub(&xs).unwrap().norm();
        assert!(e < err);
        err = e;
    }
    assert!(err < 0.5 * xs.norm());
}

#[test]
fn hand_two_grid_matches_the_traced_pushforward() {
    let (h, b) = two_level(20, 4, CycleConfig::default());
    let graph = two_grid_cycle(&h, &b).unwrap().trace().unwrap();
    let x0 = Vector::from_fn(20, |i| 0.1 * i as f64);
    let l = DenseMatrix::from_fn(20, 20, |i, j| {
        if j <= i {
            1.0 / (1.0 + (i - j) as f64)
        } else {
            0.0
        }
    });
    let sigma0 = l.matmul_tr(&l).unwrap();
    let hand = HandTwoGrid::new(&h, &b)
        .unwrap()
        .run(&x0, &sigma0, 2)
        .unwrap();
    let g2 = graph.power(2).unwrap();
    let mean = eval_affine(&g2, &x0).unwrap();
    let cov = crate::covgraph::posterior_cov(&g2.strip_shifts(), &sigma0).unwrap();
    assert!(hand.mean.rel_diff(&mean) < 1e-8);
    assert!(hand.dense_cov().unwrap().rel_diff(&cov) < 1e-8);
}

#[test]
fn hand_two_grid_without_uncertainty_is_classical() {
    let (h, b) = two_level(15, 5, CycleConfig::default());
    let x0 = Vector::zeros(15);
    let out = prob_two_grid_hand(&x0, &DenseMatrix::zeros(15, 15), &h, &b).unwrap();
    let classical = two_grid_cycle(&h, &b).unwrap().run_numeric(&x0).unwrap();
    assert!(out.mean.rel_diff(&classical) < 1e-12);
    assert!(out.dense_cov().unwrap().max_abs() == 0.0);
}

#[test]
fn two_grid_cancellation_drops_the_fine_inverse() {
    let (h, b) = two_level(25, 5, CycleConfig::default());
    let graph = two_grid_cycle(&h, &b).unwrap().trace().unwrap();
    let steps = derive_step_programs(&graph, h.fine(), &b, &StepOptions::default()).unwrap();
    let reports = steps.reports();
    assert_eq!(reports.len(), graph.stages().len() + 1);
    let correction = &reports[3];
    assert!(correction.extracted.contains("P1") && correction.extracted.contains("inv A2"));
    assert!(!correction.extracted.contains("inv A)"));

    let (g, _) = dense_iteration(&two_grid_cycle(&h, &b).unwrap());
    let a = h.fine().to_dense().unwrap();
    let mut want = dense_inverse(&a).unwrap();
    want = DenseMatrix::identity(25)
        .sub(&g)
        .unwrap()
        .matmul(&want)
        .unwrap();
    assert!(steps.m_dense().unwrap().rel_diff(&want) < 1e-7);
}

#[test]
fn jacobi_smoothed_cycles_build() {
    let cfg = CycleConfig {
        smoother: SmootherKind::Jacobi { omega: 0.5 },
        nu_pre: 1,
        nu_post: 2,
    };
    let (h, b) = two_level(16, 4, cfg);
    let xs = dense_solve(&h.fine().to_dense().unwrap(), &b).unwrap();
    let x = two_grid_cycle(&h, &b).unwrap().run_numeric(&xs).unwrap();
    assert!(x.rel_diff(&xs) < 1e-9);
}

#[test]
fn hierarchy_validation() {
    let a = matern_system(10);
    assert!(
        GridHierarchy::galerkin(&a, &[Grid::line(10).unwrap()], CycleConfig::default()).is_err()
    );
    assert!(GridHierarchy::galerkin(
        &a,
        &[Grid::line(9).unwrap(), Grid::line(3).unwrap()],
        CycleConfig::default()
    )
    .is_err());
    let (h, _) = two_level(10, 5, CycleConfig::default());
    assert!(two_grid_cycle(&h, &Vector::zeros(3)).is_err());
}

#[test]
fn square_grid_transfers_have_tensor_shape() {
    let a = LinearOperator::dense(
        "A",
        Kernel::matern32(0.5, 1.0)
            .unwrap()
            .gram(&Grid::square(6).unwrap().coordinates()),
    );
    let h = GridHierarchy::galerkin(
        &a,
        &[Grid::square(6).unwrap(), Grid::square(3).unwrap()],
        CycleConfig::default(),
    )
    .unwrap();
    assert_eq!(h.levels()[1].dense.shape(), (9, 9));
    assert!(h.galerkin_defect().unwrap() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cycle_graph_matches_numeric_run(seed in 0u64..1000, d in 6usize..20) {
        let a = tridiag(d, 2.5);
        let coarse = 2 + (seed as usize % 3);
        let h = GridHierarchy::galerkin(&a, &[Grid::line(d).unwrap(), Grid::line(coarse).unwrap()], CycleConfig::default()).unwrap();
        let b = Vector::from_fn(d, |i| ((i as u64 + seed) % 7) as f64 - 3.0);
        let prog = two_grid_cycle(&h, &b).unwrap();
        let x = Vector::from_fn(d, |i| ((i as u64 * 31 + seed) % 11) as f64 / 5.0);
        let via_graph = eval_affine(&prog.trace().unwrap(), &x).unwrap();
        let eager = prog.run_numeric(&x).unwrap();
        prop_assert!(via_graph.rel_diff(&eager) < 1e-12);
    }
}
