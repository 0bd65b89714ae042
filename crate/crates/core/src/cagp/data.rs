use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::linops::{chol_factor_jittered, DenseMatrix, Vector};
use crate::methods::Grid;

/// Relative jitter used when a Gram matrix fails to factor.
pub const GRAM_JITTER: f64 = 1e-10;

const SAME_POINT_TOL: f64 = 1e-12;

/// Regression data: training inputs and targets, test inputs, and the
/// latent function values at the test inputs when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_x: Vec<Vec<f64>>,
    pub y: Vector,
    pub test_x: Vec<Vec<f64>>,
    pub test_f: Option<Vector>,
    pub noise: f64,
}

impl Dataset {
    pub fn new(
        train_x: Vec<Vec<f64>>,
        y: Vector,
        test_x: Vec<Vec<f64>>,
        test_f: Option<Vector>,
        noise: f64,
    ) -> Result<Self> {
        if train_x.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset needs at least one training point".into(),
            ));
        }
        if train_x.len() != y.len() {
            return Err(crate::error::dim_err(
                "Dataset targets",
                train_x.len(),
                y.len(),
            ));
        }
        if let Some(f) = &test_f {
            if f.len() != test_x.len() {
                return Err(crate::error::dim_err(
                    "Dataset test values",
                    test_x.len(),
                    f.len(),
                ));
            }
        }
        if !(noise >= 0.0) || !noise.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance {noise} must be finite and ≥ 0"
            )));
        }
        let dim = train_x[0].len();
        let finite = |p: &Vec<f64>| p.len() == dim && p.iter().all(|v| v.is_finite());
        if !train_x.iter().all(finite) || !test_x.iter().all(finite) {
            return Err(Error::InvalidArgument(
                "inputs must be finite and share one spatial dimension".into(),
            ));
        }
        Ok(Self {
            train_x,
            y,
            test_x,
            test_f,
            noise,
        })
    }

    pub fn n_train(&self) -> usize {
        self.train_x.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_x.len()
    }

    pub fn spatial_dim(&self) -> usize {
        self.train_x[0].len()
    }

    /// Writes training points as `x0,…,y` and test points as `x0,…,f`
    /// (the `f` column only when test values are known).
    pub fn write_csv(&self, train: &Path, test: &Path) -> Result<()> {
        write_points(train, &self.train_x, Some(("y", &self.y)))?;
        write_points(test, &self.test_x, self.test_f.as_ref().map(|f| ("f", f)))
    }

    /// Reads files written by [`Dataset::write_csv`].
    pub fn read_csv(train: &Path, test: &Path, noise: f64) -> Result<Self> {
        let (train_x, y) = read_points(train)?;
        let y =
            y.ok_or_else(|| Error::Parse(format!("{}: missing target column", train.display())))?;
        let (test_x, test_f) = read_points(test)?;
        Self::new(train_x, y, test_x, test_f, noise)
    }
}

fn write_points(path: &Path, xs: &[Vec<f64>], target: Option<(&str, &Vector)>) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let dim = xs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    if let Some((name, _)) = target {
        header.push(name.to_string());
    }
    w.write_record(&header).map_err(io)?;
    for (i, p) in xs.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        if let Some((_, t)) = target {
            row.push(format!("{:e}", t[i]));
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

type Points = (Vec<Vec<f64>>, Option<Vector>);

fn read_points(path: &Path) -> Result<Points> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let has_target = matches!(header.iter().next_back(), Some("y") | Some("f"));
    let dim = header.len() - usize::from(has_target);
    let mut xs = Vec::new();
    let mut t = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if vals.len() != header.len() {
            return Err(Error::Parse(format!(
                "{} row {}: wrong column count",
                path.display(),
                line + 2
            )));
        }
        xs.push(vals[..dim].to_vec());
        if has_target {
            t.push(vals[dim]);
        }
    }
    Ok((xs, has_target.then(|| Vector::from(t))))
}

/// One draw from `N(0, k(X, X))` at `points`.
pub fn sample_prior(points: &[Vec<f64>], kernel: &Kernel, rng: &mut ChaCha8Rng) -> Result<Vector> {
    let f = chol_factor_jittered(&kernel.gram(points), GRAM_JITTER)?;
    let z: Vec<f64> = (0..points.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let lz = f.tr_matmul(&DenseMatrix::column(&Vector::from(z)))?;
    Ok(Vector::from(lz.into_data()))
}

/// Well-specified synthetic problem: the latent function is one prior
/// sample drawn jointly over the training and test grids, and training
/// targets carry independent `N(0, γ)` noise.
pub fn synth_dataset(
    train: &Grid,
    test: &Grid,
    kernel: &Kernel,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    let train_x = train.coordinates();
    let test_x = test.coordinates();
    let mut joint = train_x.clone();
    let mut test_slot = Vec::with_capacity(test_x.len());
    for p in &test_x {
        let hit = joint.iter().position(|q| {
            q.iter()
                .zip(p)
                .all(|(a, b)| (a - b).abs() <= SAME_POINT_TOL)
        });
        test_slot.push(hit.unwrap_or_else(|| {
            joint.push(p.clone());
            joint.len() - 1
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = sample_prior(&joint, kernel, &mut rng)?;
    let sd = noise.sqrt();
    let y: Vec<f64> = (0..train_x.len())
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            f[i] + sd * e
        })
        .collect();
    let test_f: Vec<f64> = test_slot.iter().map(|&k| f[k]).collect();
    Dataset::new(
        train_x,
        Vector::from(y),
        test_x,
        Some(Vector::from(test_f)),
        noise,
    )
}
