//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when a hard criterion fails. The timing comparison only
//! runs when `AFFINE_PIM_BENCH=1` is set.

use std::time::Instant;

use affine_pim::cagp::{
    cagp_at, cagp_multigrid, exact_gp, metrics, synth_dataset, system_operator, Kernel,
};
use affine_pim::linops::{dense_inverse, DenseMatrix, Gaussian, LinearOperator, Vector};
use affine_pim::methods::{
    gauss_seidel_step, interpolator_matrix, jacobi_step, restrictor_matrix, two_grid_cycle,
    CycleConfig, Grid, GridHierarchy, HandTwoGrid, Smoother, SmootherKind,
};
use affine_pim::pim::{
    bayes_pls_posterior, calibration_test, downdate_nonstationary, downdate_stationary,
    projection_pim, CalibrationOptions, Pim, PimSteps,
};
use affine_pim::simplify::{derive_step_programs, verify_ruleset, StepOptions, StepPrograms};
use affine_pim::tracer::Program;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Box<dyn std::error::Error>>;

enum Status {
    Pass,
    Fail,
    SoftSkip,
    SoftFail,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn matern_line(d: usize) -> Res<LinearOperator> {
    let k = Kernel::matern32(0.1, 1.0)?;
    Ok(LinearOperator::dense(
        "A",
        k.gram(&Grid::line(d)?.coordinates()),
    ))
}

fn tridiag(d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d, d, |i, j| match i.abs_diff(j) {
        0 => 2.5,
        1 => -1.0,
        _ => 0.0,
    })
}

fn line_hierarchy(a: &LinearOperator, coarse: usize) -> Res<GridHierarchy> {
    let d = a.rows();
    Ok(GridHierarchy::galerkin(
        a,
        &[Grid::line(d)?, Grid::line(coarse)?],
        CycleConfig::default(),
    )?)
}

/// Dense iteration matrix of the two-grid cycle, formed without the tracer.
fn dense_two_grid(a: &DenseMatrix, coarse: usize, b: &Vector) -> Res<DenseMatrix> {
    let d = a.rows();
    let op = LinearOperator::dense("A", a.clone());
    let (g, _) = Smoother::new(&op, SmootherKind::GaussSeidel)?.dense_affine(b)?;
    let r = restrictor_matrix(&Grid::line(d)?, &Grid::line(coarse)?)?;
    let p = interpolator_matrix(&Grid::line(coarse)?, &Grid::line(d)?)?;
    let a2inv = dense_inverse(&r.matmul(a)?.matmul(&p)?)?;
    let mut cgc = p.matmul(&a2inv)?.matmul(&r)?.matmul(a)?.scaled(-1.0);
    cgc.add_identity(1.0);
    let g3 = g.matmul(&g)?.matmul(&g)?;
    Ok(g3.matmul(&cgc)?.matmul(&g3)?)
}

fn dense_smoother(a: &DenseMatrix, kind: SmootherKind) -> Res<DenseMatrix> {
    let d = a.rows();
    let m = match kind {
        SmootherKind::GaussSeidel => dense_inverse(&DenseMatrix::from_fn(d, d, |i, j| {
            if j <= i {
                a.get(i, j)
            } else {
                0.0
            }
        }))?,
        SmootherKind::Jacobi { omega } => {
            DenseMatrix::diag(&a.diagonal().iter().map(|v| omega / v).collect::<Vec<_>>())
        }
    };
    let mut g = m.matmul(a)?.scaled(-1.0);
    g.add_identity(1.0);
    Ok(g)
}

fn c1_traced_vs_hand() -> Res<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [50, 200, 500] {
        let a = matern_line(d)?;
        let h = line_hierarchy(&a, d / 5)?;
        let b = Vector::from(vec![1.0; d]);
        let prior = Gaussian::standard(d);
        let traced = Pim::from_program(&two_grid_cycle(&h, &b)?, prior.clone())?.iterate(20)?;
        let hand = HandTwoGrid::new(&h, &b)?.run(&prior.mean, &DenseMatrix::identity(d), 20)?;
        let em = traced.mean.rel_diff(&hand.mean);
        let ec = traced.dense_cov()?.rel_diff(&hand.dense_cov()?);
        ok &= em <= 1e-8 && ec <= 1e-8;
        parts.push(format!("d={d}: mean {em:.1e}, cov {ec:.1e}"));
    }
    Ok(judge(ok, format!("{} (tol 1e-8)", parts.join("; "))))
}

fn c2_timing() -> Res<Outcome> {
    if std::env::var("AFFINE_PIM_BENCH").as_deref() != Ok("1") {
        return Ok(Outcome {
            status: Status::SoftSkip,
            detail: "set AFFINE_PIM_BENCH=1 to time d=1000 (10 runs)".into(),
        });
    }
    let d = 1000;
    let a = matern_line(d)?;
    let h = line_hierarchy(&a, d / 5)?;
    let b = Vector::from(vec![1.0; d]);
    let prior = Gaussian::standard(d);
    let median = |mut t: Vec<f64>| {
        t.sort_by(f64::total_cmp);
        0.5 * (t[4] + t[5])
    };
    let mut traced = Vec::new();
    let mut hand = Vec::new();
    for _ in 0..10 {
        let s = Instant::now();
        Pim::from_program(&two_grid_cycle(&h, &b)?, prior.clone())?.iterate(20)?;
        traced.push(s.elapsed().as_secs_f64());
        let s = Instant::now();
        HandTwoGrid::new(&h, &b)?.run(&prior.mean, &DenseMatrix::identity(d), 20)?;
        hand.push(s.elapsed().as_secs_f64());
    }
    let (t, hd) = (median(traced), median(hand));
    Ok(Outcome {
        status: if t <= hd {
            Status::Pass
        } else {
            Status::SoftFail
        },
        detail: format!("median traced {t:.2} s vs hand {hd:.2} s"),
    })
}

fn c3_projection_equals_conditioning() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(2..=15);
        let i = rng.random_range(1..=d / 2);
        let spd = |rng: &mut ChaCha8Rng| {
            let m = DenseMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let mut s = m.matmul_tr(&m).unwrap();
            s.add_identity(0.1);
            s
        };
        let a = spd(&mut rng);
        let sigma0 = spd(&mut rng);
        let s = DenseMatrix::from_fn(d, i, |_, _| rng.random_range(-1.0..1.0));
        let x0 = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
        let b = Vector::from_fn(d, |_| rng.random_range(-1.0..1.0));
        let want = bayes_pls_posterior(&x0, &sigma0, &a, &b, &s)?;
        let prior = Gaussian::new(x0, sigma0.clone())?;
        let got = projection_pim(&sigma0, &a, &b, &s)?.apply(&prior)?;
        worst = worst
            .max(got.mean.rel_diff(&want.mean))
            .max(got.dense_cov()?.rel_diff(&want.dense_cov()?));
    }
    Ok(judge(
        worst <= 1e-8,
        format!("50 trials, worst relative difference {worst:.1e} (tol 1e-8)"),
    ))
}

fn calibration_prior(d: usize) -> Res<Gaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bm = DenseMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut s = bm.matmul_tr(&bm)?.scaled(1.0 / d as f64);
    s.add_identity(1.0);
    Ok(Gaussian::new(Vector::zeros(d), s)?)
}

fn c4_calibration() -> Res<Outcome> {
    let d = 10;
    let a = tridiag(d);
    let op = LinearOperator::dense("A", a.clone());
    let prior = calibration_prior(d)?;
    let h = line_hierarchy(&op, 2)?;
    let opts = CalibrationOptions::default();
    type Build<'a> = Box<dyn Fn(&Vector) -> affine_pim::Result<Program> + 'a>;
    let methods: Vec<(&str, Build)> = vec![
        ("gs", Box::new(|b: &Vector| gauss_seidel_step(&op, b))),
        ("jacobi", Box::new(|b: &Vector| jacobi_step(&op, b, 1.0))),
        ("two-grid", Box::new(|b: &Vector| two_grid_cycle(&h, b))),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, build) in &methods {
        for i in [1, 4] {
            let rep = calibration_test(
                &prior,
                &a,
                |b: &Vector| Ok(PimSteps::Stationary(build(b)?.trace()?.into())),
                i,
                &opts,
            )?;
            ok &= rep.passes();
            parts.push(format!(
                "{name} i={i}: r={} mean|w|²={:.3}±{:.3} null {:.0e}",
                rep.rank, rep.mean_sq_whitened_norm, rep.chi_square_tol, rep.null_residual_max
            ));
        }
    }
    Ok(judge(ok, parts.join("; ")))
}

fn c5_downdate_identity() -> Res<Outcome> {
    let d = 20;
    let a = matern_line(d)?;
    let ad = a.to_dense()?;
    let b = Vector::from_fn(d, |i| 1.0 + (i as f64).sin());
    let ainv = dense_inverse(&ad)?;
    let h = line_hierarchy(&a, 4)?;
    let cases: Vec<(&str, Program, DenseMatrix)> = vec![
        (
            "gs",
            gauss_seidel_step(&a, &b)?,
            dense_smoother(&ad, SmootherKind::GaussSeidel)?,
        ),
        (
            "jacobi",
            jacobi_step(&a, &b, 2.0 / 3.0)?,
            dense_smoother(&ad, SmootherKind::Jacobi { omega: 2.0 / 3.0 })?,
        ),
        (
            "two-grid",
            two_grid_cycle(&h, &b)?,
            dense_two_grid(&ad, 4, &b)?,
        ),
    ];
    let eye = DenseMatrix::identity(d);
    let (mut identity_worst, mut path_worst): (f64, f64) = (0.0, 0.0);
    for (_, prog, g) in &cases {
        let step = derive_step_programs(&prog.trace()?, &a, &b, &StepOptions::default())?;
        let mut gi = eye.clone();
        for i in 1..=5 {
            gi = g.matmul(&gi)?;
            let seq = downdate_nonstationary(&vec![step.clone(); i], &eye)?;
            let stat = downdate_stationary(&step, &eye, i)?;
            let want = gi.matmul(&ainv)?.matmul_tr(&gi)?;
            identity_worst = identity_worst.max(ainv.sub(&seq)?.rel_diff(&want));
            path_worst = path_worst.max(stat.rel_diff(&seq));
        }
    }
    Ok(judge(
        identity_worst <= 1e-8 && path_worst <= 1e-10,
        format!("identity {identity_worst:.1e} (tol 1e-8), stationary vs sum {path_worst:.1e} (tol 1e-10)"),
    ))
}

fn c6_cancellation() -> Res<Outcome> {
    let d = 30;
    let k = Kernel::matern32(0.1, 1.0)?;
    let mut ad = k.gram(&Grid::line(d)?.coordinates());
    ad.add_identity(0.1);
    let a = LinearOperator::dense("A", ad.clone());
    let b = Vector::from(vec![1.0; d]);
    let ainv = dense_inverse(&ad)?;
    let h = line_hierarchy(&a, 6)?;
    let cases: Vec<(&str, Program, DenseMatrix)> = vec![
        (
            "jacobi",
            jacobi_step(&a, &b, 1.0)?,
            dense_smoother(&ad, SmootherKind::Jacobi { omega: 1.0 })?,
        ),
        (
            "weighted-jacobi",
            jacobi_step(&a, &b, 2.0 / 3.0)?,
            dense_smoother(&ad, SmootherKind::Jacobi { omega: 2.0 / 3.0 })?,
        ),
        (
            "gs",
            gauss_seidel_step(&a, &b)?,
            dense_smoother(&ad, SmootherKind::GaussSeidel)?,
        ),
        (
            "two-grid",
            two_grid_cycle(&h, &b)?,
            dense_two_grid(&ad, 6, &b)?,
        ),
    ];
    let v = DenseMatrix::from_fn(3, d, |r, c| ((r * d + c) as f64 * 0.37).cos());
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, prog, g) in &cases {
        let step: StepPrograms =
            match derive_step_programs(&prog.trace()?, &a, &b, &StepOptions::default()) {
                Ok(s) => s,
                Err(e) => {
                    ok = false;
                    parts.push(format!("{name}: {e}"));
                    continue;
                }
            };
        let inv_a = step
            .reports()
            .iter()
            .filter(|r| r.extracted.contains("(inv A)"))
            .count();
        let want = v.matmul(&DenseMatrix::identity(d).sub(g)?)?.matmul(&ainv)?;
        let got = step.vm(&v)?;
        let dev = got.sub(&want)?.max_abs() / want.max_abs().max(1.0);
        worst = worst.max(dev);
        ok &= inv_a == 0 && dev <= 1e-10;
    }
    let rules = verify_ruleset(20, 0);
    ok &= rules.failures.is_empty();
    parts.push(format!(
        "V·M vs dense oracle {worst:.1e} (tol 1e-10); {} rules × 20 instances, worst {:.1e}, {} failures",
        rules.rules,
        rules.worst,
        rules.failures.len()
    ));
    Ok(judge(ok, parts.join("; ")))
}

fn c7_cagp_convergence() -> Res<Outcome> {
    let kernel = Kernel::matern32(0.8, 1.0)?;
    let data = synth_dataset(&Grid::square(15)?, &Grid::square(5)?, &kernel, 0.1, 0)?;
    let a = system_operator(&data, &kernel);
    let step = derive_step_programs(
        &gauss_seidel_step(&a, &data.y)?.trace()?,
        &a,
        &data.y,
        &StepOptions::default(),
    )?;
    let exact = exact_gp(&data, &kernel)?;
    let posts = cagp_at(&data, &kernel, &step, &[0, 1, 10, 50, 100, 200, 500])?;
    let tr: f64 = exact.cov.diagonal().iter().sum();
    let widest_violation = posts
        .iter()
        .map(|p| p.cov.sub(&exact.cov).map(|g| g.min_eigenvalue()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let last = posts.last().expect("m=500 recorded");
    let em = last.mean.rel_diff(&exact.mean);
    let ec = last.cov.rel_diff(&exact.cov);
    let psd = widest_violation >= -1e-8 * tr;
    Ok(judge(
        em <= 1e-6 && ec <= 1e-6 && psd,
        format!(
            "m=500: mean {em:.1e}, cov {ec:.1e} (tol 1e-6); min eig(k̃−k̄) {widest_violation:.1e} over recorded m"
        ),
    ))
}

fn c8_multigrid_advantage() -> Res<Outcome> {
    let kernel = Kernel::matern32(0.8, 1.0)?;
    let data = synth_dataset(&Grid::square(20)?, &Grid::square(5)?, &kernel, 0.1, 0)?;
    let truth = data.test_f.clone().expect("synthetic truth");
    let a = system_operator(&data, &kernel);
    let opts = StepOptions::default();
    let ms = [1, 2, 3, 4, 5];
    let gs = derive_step_programs(
        &gauss_seidel_step(&a, &data.y)?.trace()?,
        &a,
        &data.y,
        &opts,
    )?;
    let gs = cagp_at(&data, &kernel, &gs, &ms)?;
    let h = GridHierarchy::galerkin(
        &a,
        &[Grid::square(20)?, Grid::square(8)?],
        CycleConfig::default(),
    )?;
    let mg = cagp_multigrid(&data, &kernel, &h, &ms, &opts)?;
    let exact = metrics(&exact_gp(&data, &kernel)?, &truth, data.noise)?.rmse;
    let r = |p: &[affine_pim::cagp::CagpPosterior]| -> Res<Vec<f64>> {
        p.iter()
            .map(|x| Ok(metrics(x, &truth, data.noise)?.rmse))
            .collect()
    };
    let (rg, rm) = (r(&gs)?, r(&mg)?);
    let ok = rg.iter().zip(&rm).all(|(g, m)| m < g) && rm[4] <= 2.0 * exact;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    Ok(judge(
        ok,
        format!(
            "RMSE gs [{}] mg-2 [{}] exact {exact:.3}",
            fmt(&rg),
            fmt(&rm)
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Res<Outcome>, f64); 8] = [
        ("C1 traced vs hand two-grid", c1_traced_vs_hand, 120.0),
        ("C2 traced path timing", c2_timing, f64::INFINITY),
        (
            "C3 projection PIM equals conditioning",
            c3_projection_equals_conditioning,
            30.0,
        ),
        ("C4 strong calibration", c4_calibration, 60.0),
        ("C5 downdate identity", c5_downdate_identity, f64::INFINITY),
        ("C6 inverse cancellation", c6_cancellation, f64::INFINITY),
        (
            "C7 CAGP convergence and width",
            c7_cagp_convergence,
            f64::INFINITY,
        ),
        ("C8 multigrid advantage", c8_multigrid_advantage, 180.0),
    ];
    let mut hard_failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            status: Status::Fail,
            detail: format!("error: {e}"),
        });
        let secs = start.elapsed().as_secs_f64();
        let mut status = outcome.status;
        let mut detail = outcome.detail;
        if secs > budget && matches!(status, Status::Pass) {
            status = Status::Fail;
            detail.push_str(&format!("; over the {budget:.0} s budget"));
        }
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => {
                hard_failures += 1;
                "FAIL"
            }
            Status::SoftSkip => "SOFT-SKIP",
            Status::SoftFail => "SOFT-FAIL",
        };
        println!("{tag} {name}: {detail} [{secs:.1} s]");
    }
    if hard_failures > 0 {
        println!("{hard_failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
