//! TOML configuration. Every field has a default, so an empty file (or no
//! file) reproduces the standard experiment settings.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub system: SystemConfig,
    pub method: MethodConfig,
    pub trace: TraceConfig,
    pub bench: BenchConfig,
    pub calibrate: CalibrateConfig,
    pub simplify: SimplifyConfig,
    pub cagp: CagpConfig,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `tridiag(−1, diag, −1)`.
    Tridiagonal,
    /// Matérn-3/2 Gram matrix on a uniform grid of `[0, 1]`, plus `noise·I`.
    Matern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub d: usize,
    pub diag: f64,
    pub lengthscale: f64,
    pub amplitude: f64,
    pub noise: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            kind: SystemKind::Tridiagonal,
            d: 10,
            diag: 2.5,
            lengthscale: 0.1,
            amplitude: 1.0,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    GaussSeidel,
    Jacobi,
    TwoGrid,
    VCycle,
    /// Gauss–Seidel followed by clipping; rejected by the tracer.
    ClippedGaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub omega: f64,
    /// Coarse grid sizes, finest first, for multigrid methods. Empty means
    /// one coarse grid of `d / 5` points.
    pub coarse: Vec<usize>,
    pub nu_pre: usize,
    pub nu_post: usize,
    /// Smoother used inside multigrid cycles.
    pub smoother: SmootherChoice,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kind: MethodKind::GaussSeidel,
            omega: 1.0,
            coarse: Vec::new(),
            nu_pre: 3,
            nu_post: 3,
            smoother: SmootherChoice::GaussSeidel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherChoice {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Steps applied by `--eval`.
    pub iterations: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { iterations: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub iterations: usize,
    pub lengthscale: f64,
    pub amplitude: f64,
    pub equality_tol: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200],
            runs: 10,
            iterations: 20,
            lengthscale: 0.1,
            amplitude: 1.0,
            equality_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub iterations: Vec<usize>,
    pub samples: usize,
    pub rank_tol: f64,
    /// Relative change applied to `b` before building the step. Nonzero
    /// values break the fixed-point property on purpose.
    pub rhs_perturbation: f64,
    pub null_tol: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            iterations: vec![1, 4],
            samples: 2000,
            rank_tol: 1e-10,
            rhs_perturbation: 0.0,
            null_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifyConfig {
    pub max_iterations: usize,
    pub max_nodes: usize,
    pub time_limit_secs: f64,
    pub nominal_rows: usize,
    /// Rows of the random `V` used by `--eval`.
    pub eval_rows: usize,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        Self {
            max_iterations: 24,
            max_nodes: 100_000,
            time_limit_secs: 600.0,
            nominal_rows: 2,
            eval_rows: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CagpMethod {
    Gs,
    Mg2,
    Mg3,
    Cg,
}

impl CagpMethod {
    pub fn label(self) -> &'static str {
        match self {
            CagpMethod::Gs => "gs",
            CagpMethod::Mg2 => "mg2",
            CagpMethod::Mg3 => "mg3",
            CagpMethod::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CagpConfig {
    pub train_side: usize,
    pub test_side: usize,
    pub lengthscale: f64,
    pub amplitude: f64,
    pub noise: f64,
    pub methods: Vec<CagpMethod>,
    pub m: Vec<usize>,
    pub two_grid_coarse: usize,
    pub three_grid_coarse: [usize; 2],
}

impl Default for CagpConfig {
    fn default() -> Self {
        Self {
            train_side: 20,
            test_side: 5,
            lengthscale: 0.8,
            amplitude: 1.0,
            noise: 0.1,
            methods: vec![
                CagpMethod::Gs,
                CagpMethod::Mg2,
                CagpMethod::Mg3,
                CagpMethod::Cg,
            ],
            m: vec![0, 1, 2, 3, 4, 5, 10, 20],
            two_grid_coarse: 8,
            three_grid_coarse: [12, 8],
        }
    }
}
