//! TOML description of a single solve on user-supplied matrices.
//!
//! ```toml
//! a = "A.mat.txt"          # dense text matrix files, relative to the config
//! y = "y.mat.txt"
//! l = "diff1d"             # "identity", "diff1d", "diff2d" or a file
//! penalty = "l1"           # or "nuclear" (needs nuclear_rows)
//! mu = 2.0
//! truth = "x.mat.txt"      # optional, enables the squared-error trace
//!
//! [b]
//! kind = "design"          # "zero", "design" or "file"
//! theta = 0.99
//!
//! [solver]
//! kappa = 1.001
//! max_iter = 20000
//! tol = 1e-9
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;

use crate::design::{design_b, DEFAULT_THETA};
use crate::error::{LigmeError, Result};
use crate::io::{read_matrix, read_vector};
use crate::linops::LinOp;
use crate::penalty::Problem;
use crate::prox::Penalty;
use crate::solver::SolverConfig;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub a: PathBuf,
    pub y: PathBuf,
    #[serde(default = "default_l")]
    pub l: String,
    #[serde(default = "default_penalty")]
    pub penalty: String,
    pub nuclear_rows: Option<usize>,
    pub mu: f64,
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub b: BConfig,
    #[serde(default)]
    pub solver: SolverSection,
}

fn default_l() -> String {
    "identity".into()
}

fn default_penalty() -> String {
    "l1".into()
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BConfig {
    #[serde(default = "default_b_kind")]
    pub kind: String,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub path: Option<PathBuf>,
    /// Optional square completion of `L` used by the design.
    pub tilde: Option<PathBuf>,
}

fn default_b_kind() -> String {
    "design".into()
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

impl Default for BConfig {
    fn default() -> Self {
        Self {
            kind: default_b_kind(),
            theta: DEFAULT_THETA,
            path: None,
            tilde: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default)]
    pub objective_every: usize,
}

fn default_kappa() -> f64 {
    1.001
}

fn default_max_iter() -> usize {
    20_000
}

fn default_tol() -> f64 {
    1e-9
}

fn default_relaxation() -> f64 {
    1.0
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            kappa: default_kappa(),
            sigma: None,
            tau: None,
            max_iter: default_max_iter(),
            tol: default_tol(),
            relaxation: default_relaxation(),
            objective_every: 0,
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> SolverConfig {
        use crate::solver::StepSize;
        let step = |v: Option<f64>| v.map_or(StepSize::Auto, StepSize::Explicit);
        SolverConfig {
            kappa: self.kappa,
            sigma: step(self.sigma),
            tau: step(self.tau),
            max_iter: self.max_iter,
            p_residual_tol: self.tol,
            relaxation: self.relaxation,
            objective_every: self.objective_every,
            ..SolverConfig::default()
        }
    }
}

/// A parsed config with its files loaded.
#[derive(Clone, Debug)]
pub struct LoadedSolve {
    pub problem: Problem,
    pub solver: SolverConfig,
    pub truth: Option<DVector<f64>>,
}

impl SolveConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LigmeError::Parse(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Loads the referenced files, resolving relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<LoadedSolve> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let a = read_matrix(resolve(&self.a))?;
        let y = read_vector(resolve(&self.y))?;
        let n = a.ncols();
        let l = match self.l.as_str() {
            "identity" => LinOp::identity(n),
            "diff1d" => LinOp::diff_1d(n)?,
            "diff2d" => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(LigmeError::InvalidArgument(format!(
                        "diff2d needs a square image, got {n} unknowns"
                    )));
                }
                let (dv, dh) = LinOp::diff_2d(side)?;
                LinOp::vstack(vec![dv, dh])?
            }
            other => LinOp::dense(read_matrix(resolve(Path::new(other)))?),
        };
        let psi = match self.penalty.as_str() {
            "l1" => Penalty::l1(l.rows()),
            "nuclear" => {
                let rows = self.nuclear_rows.ok_or_else(|| {
                    LigmeError::InvalidArgument("nuclear penalty needs nuclear_rows".into())
                })?;
                Penalty::nuclear_for_len(rows, l.rows())?
            }
            other => {
                return Err(LigmeError::InvalidArgument(format!(
                    "unknown penalty {other:?}; expected l1 or nuclear"
                )))
            }
        };
        let b = match self.b.kind.as_str() {
            "zero" => LinOp::zero(l.rows(), l.rows()),
            "design" => {
                let tilde = self
                    .b
                    .tilde
                    .as_ref()
                    .map(|t| read_matrix(resolve(t)))
                    .transpose()?;
                design_b(&a, &l.to_dense(), self.mu, self.b.theta, tilde.as_ref())?.op()
            }
            "file" => {
                let p = self.b.path.as_ref().ok_or_else(|| {
                    LigmeError::InvalidArgument("b.kind = \"file\" needs b.path".into())
                })?;
                LinOp::dense(read_matrix(resolve(p))?)
            }
            other => {
                return Err(LigmeError::InvalidArgument(format!(
                    "unknown b.kind {other:?}; expected zero, design or file"
                )))
            }
        };
        let truth = self
            .truth
            .as_ref()
            .map(|t| read_vector(resolve(t)))
            .transpose()?;
        let problem = Problem::new(LinOp::dense(a), y, l, b, self.mu, psi)?;
        Ok(LoadedSolve {
            problem,
            solver: self.solver.to_config(),
            truth,
        })
    }
}
