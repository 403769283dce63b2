//! Linear operators used for the observation model, the penalty map and the
//! enhancement matrix.
//!
//! Every operator has a structured `apply`/`adjoint_apply` and a dense
//! materialization ([`LinOp::to_dense`]) used for certificates and tests.
//! Vectorized images follow column-major stacking: pixel `(i, j)` of an
//! `n x n` image lives at index `j * n + i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, LigmeError, Result};

/// Default relative tolerance for [`LinOp::op_norm`].
pub const OP_NORM_TOL: f64 = 1e-9;
/// Default iteration cap for [`LinOp::op_norm`].
pub const OP_NORM_MAX_ITER: usize = 10_000;
const OP_NORM_SEED: u64 = 0x6c69_676d_6500_0001;

#[derive(Clone, Debug)]
enum Kind {
    Dense(Arc<DMatrix<f64>>),
    Identity,
    Zero,
    Diff1d(usize),
    DiffV(usize),
    DiffH(usize),
    Kronecker {
        left: Arc<DMatrix<f64>>,
        right: Arc<DMatrix<f64>>,
    },
    Mask(Arc<Vec<bool>>),
    VStack(Vec<LinOp>),
    BlockDiag(Vec<LinOp>),
}

/// An immutable bounded linear operator between coordinate spaces.
#[derive(Clone, Debug)]
pub struct LinOp {
    rows: usize,
    cols: usize,
    kind: Kind,
}

/// Result of a power-iteration norm estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNorm {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LinOp {
    pub fn dense(m: DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            kind: Kind::Dense(Arc::new(m)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            kind: Kind::Identity,
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            kind: Kind::Zero,
        }
    }

    /// First-order difference `(Dx)_i = x_{i+1} - x_i`, shape `(n-1) x n`.
    pub fn diff_1d(n: usize) -> Result<Self> {
        need_at_least_two(n)?;
        Ok(Self {
            rows: n - 1,
            cols: n,
            kind: Kind::Diff1d(n),
        })
    }

    /// Vertical and horizontal differences of a vectorized `n x n` image,
    /// each of shape `n(n-1) x n^2`.
    pub fn diff_2d(n: usize) -> Result<(Self, Self)> {
        need_at_least_two(n)?;
        let rows = n * (n - 1);
        let cols = n * n;
        Ok((
            Self {
                rows,
                cols,
                kind: Kind::DiffV(n),
            },
            Self {
                rows,
                cols,
                kind: Kind::DiffH(n),
            },
        ))
    }

    /// `left ⊗ right`, acting on column-major vectorized matrices as
    /// `vec(X) -> vec(right * X * left^T)`.
    pub fn kronecker(left: DMatrix<f64>, right: DMatrix<f64>) -> Self {
        Self {
            rows: left.nrows() * right.nrows(),
            cols: left.ncols() * right.ncols(),
            kind: Kind::Kronecker {
                left: Arc::new(left),
                right: Arc::new(right),
            },
        }
    }

    /// Separable Gaussian blur `Ā ⊗ Ā` on `n x n` images with
    /// `Ā_ij = exp(-|i-j|^2 / 1.62) / sqrt(1.62 π)` for `|i-j| < 6`.
    pub fn blur(n: usize) -> Result<Self> {
        need_at_least_two(n)?;
        let a = blur_kernel(n);
        Ok(Self::kronecker(a.clone(), a))
    }

    /// Diagonal 0/1 selector keeping the (0-based) indices in `kept`.
    pub fn mask(n: usize, kept: &[usize]) -> Result<Self> {
        need_at_least_two(n)?;
        let mut flags = vec![false; n];
        for &i in kept {
            if i >= n {
                return Err(LigmeError::InvalidArgument(format!(
                    "mask index {i} out of range for length {n}"
                )));
            }
            flags[i] = true;
        }
        Ok(Self {
            rows: n,
            cols: n,
            kind: Kind::Mask(Arc::new(flags)),
        })
    }

    /// Stacks operators sharing a domain: `x -> (L_1 x, ..., L_M x)`.
    pub fn vstack(ops: Vec<LinOp>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| LigmeError::InvalidArgument("vstack of zero operators".into()))?;
        let cols = first.cols;
        for op in &ops {
            check_len("vstack cols", cols, op.cols)?;
        }
        let rows = ops.iter().map(|o| o.rows).sum();
        Ok(Self {
            rows,
            cols,
            kind: Kind::VStack(ops),
        })
    }

    /// Block-diagonal operator `(z_1, ..., z_M) -> (B_1 z_1, ..., B_M z_M)`.
    pub fn block_diag(ops: Vec<LinOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(LigmeError::InvalidArgument(
                "block_diag of zero operators".into(),
            ));
        }
        let rows = ops.iter().map(|o| o.rows).sum();
        let cols = ops.iter().map(|o| o.cols).sum();
        Ok(Self {
            rows,
            cols,
            kind: Kind::BlockDiag(ops),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Returns the dense matrix if this operator is stored densely.
    pub fn as_dense(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// True for operators that are structurally or numerically zero.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            Kind::Zero => true,
            Kind::Dense(m) => m.iter().all(|&v| v == 0.0),
            Kind::Mask(f) => f.iter().all(|&k| !k),
            Kind::VStack(c) | Kind::BlockDiag(c) => c.iter().all(LinOp::is_zero),
            Kind::Kronecker { left, right } => {
                left.iter().all(|&v| v == 0.0) || right.iter().all(|&v| v == 0.0)
            }
            _ => false,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("apply", self.cols, x.len())?;
        Ok(self.mul(x))
    }

    pub fn adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("adjoint_apply", self.rows, y.len())?;
        Ok(self.mul_t(y))
    }

    /// Unchecked `L x`; callers guarantee `x.len() == cols`.
    pub(crate) fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.cols);
        match &self.kind {
            Kind::Dense(m) => m.as_ref() * x,
            Kind::Identity => x.clone(),
            Kind::Zero => DVector::zeros(self.rows),
            Kind::Diff1d(n) => DVector::from_fn(n - 1, |i, _| x[i + 1] - x[i]),
            Kind::DiffV(n) => {
                let n = *n;
                DVector::from_fn(self.rows, |r, _| {
                    let (c, i) = (r / (n - 1), r % (n - 1));
                    x[c * n + i + 1] - x[c * n + i]
                })
            }
            Kind::DiffH(n) => DVector::from_fn(self.rows, |r, _| x[r + n] - x[r]),
            Kind::Kronecker { left, right } => {
                let xm = DMatrix::from_column_slice(right.ncols(), left.ncols(), x.as_slice());
                let y = right.as_ref() * xm * left.transpose();
                DVector::from_column_slice(y.as_slice())
            }
            Kind::Mask(f) => DVector::from_fn(self.rows, |i, _| if f[i] { x[i] } else { 0.0 }),
            Kind::VStack(children) => {
                let mut out = DVector::zeros(self.rows);
                let mut off = 0;
                for c in children {
                    out.rows_mut(off, c.rows).copy_from(&c.mul(x));
                    off += c.rows;
                }
                out
            }
            Kind::BlockDiag(children) => {
                let mut out = DVector::zeros(self.rows);
                let (mut r, mut k) = (0, 0);
                for c in children {
                    let xi = x.rows(k, c.cols).into_owned();
                    out.rows_mut(r, c.rows).copy_from(&c.mul(&xi));
                    r += c.rows;
                    k += c.cols;
                }
                out
            }
        }
    }

    /// Unchecked `L^T y`; callers guarantee `y.len() == rows`.
    pub(crate) fn mul_t(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.rows);
        match &self.kind {
            Kind::Dense(m) => m.tr_mul(y),
            Kind::Identity => y.clone(),
            Kind::Zero => DVector::zeros(self.cols),
            Kind::Diff1d(n) => {
                let n = *n;
                DVector::from_fn(n, |j, _| {
                    let up = if j >= 1 { y[j - 1] } else { 0.0 };
                    let down = if j < n - 1 { y[j] } else { 0.0 };
                    up - down
                })
            }
            Kind::DiffV(n) => {
                let n = *n;
                DVector::from_fn(self.cols, |p, _| {
                    let (c, i) = (p / n, p % n);
                    let base = c * (n - 1);
                    let up = if i >= 1 { y[base + i - 1] } else { 0.0 };
                    let down = if i < n - 1 { y[base + i] } else { 0.0 };
                    up - down
                })
            }
            Kind::DiffH(n) => {
                let n = *n;
                let m = self.rows;
                DVector::from_fn(self.cols, |p, _| {
                    let up = if p >= n { y[p - n] } else { 0.0 };
                    let down = if p < m { y[p] } else { 0.0 };
                    up - down
                })
            }
            Kind::Kronecker { left, right } => {
                let ym = DMatrix::from_column_slice(right.nrows(), left.nrows(), y.as_slice());
                let x = right.tr_mul(&ym) * left.as_ref();
                DVector::from_column_slice(x.as_slice())
            }
            Kind::Mask(_) => self.mul(y),
            Kind::VStack(children) => {
                let mut out = DVector::zeros(self.cols);
                let mut off = 0;
                for c in children {
                    let yi = y.rows(off, c.rows).into_owned();
                    out += c.mul_t(&yi);
                    off += c.rows;
                }
                out
            }
            Kind::BlockDiag(children) => {
                let mut out = DVector::zeros(self.cols);
                let (mut r, mut k) = (0, 0);
                for c in children {
                    let yi = y.rows(r, c.rows).into_owned();
                    out.rows_mut(k, c.cols).copy_from(&c.mul_t(&yi));
                    r += c.rows;
                    k += c.cols;
                }
                out
            }
        }
    }

    /// Dense materialization.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.kind {
            Kind::Dense(m) => m.as_ref().clone(),
            Kind::Identity => DMatrix::identity(self.rows, self.cols),
            Kind::Zero => DMatrix::zeros(self.rows, self.cols),
            Kind::Kronecker { left, right } => left.kronecker(right),
            Kind::VStack(children) => {
                let mut out = DMatrix::zeros(self.rows, self.cols);
                let mut off = 0;
                for c in children {
                    out.rows_mut(off, c.rows).copy_from(&c.to_dense());
                    off += c.rows;
                }
                out
            }
            Kind::BlockDiag(children) => {
                let mut out = DMatrix::zeros(self.rows, self.cols);
                let (mut r, mut k) = (0, 0);
                for c in children {
                    out.view_mut((r, k), (c.rows, c.cols))
                        .copy_from(&c.to_dense());
                    r += c.rows;
                    k += c.cols;
                }
                out
            }
            _ => {
                let mut out = DMatrix::zeros(self.rows, self.cols);
                let mut e = DVector::zeros(self.cols);
                for j in 0..self.cols {
                    e[j] = 1.0;
                    out.set_column(j, &self.mul(&e));
                    e[j] = 0.0;
                }
                out
            }
        }
    }

    /// `L^T L` as an operator, keeping block structure where present.
    pub fn gram(&self) -> LinOp {
        match &self.kind {
            Kind::Identity => LinOp::identity(self.cols),
            Kind::Zero => LinOp::zero(self.cols, self.cols),
            Kind::Mask(_) => self.clone(),
            Kind::Dense(m) => LinOp::dense(m.tr_mul(m)),
            Kind::BlockDiag(children) => LinOp {
                rows: self.cols,
                cols: self.cols,
                kind: Kind::BlockDiag(children.iter().map(LinOp::gram).collect()),
            },
            _ => {
                let d = self.to_dense();
                LinOp::dense(d.tr_mul(&d))
            }
        }
    }

    /// Scales a dense-materializable operator.
    pub fn scaled(&self, s: f64) -> LinOp {
        match &self.kind {
            Kind::Zero => self.clone(),
            Kind::BlockDiag(children) => LinOp {
                rows: self.rows,
                cols: self.cols,
                kind: Kind::BlockDiag(children.iter().map(|c| c.scaled(s)).collect()),
            },
            _ => LinOp::dense(self.to_dense() * s),
        }
    }

    /// Largest singular value by power iteration on `L^T L`.
    ///
    /// The start vector is drawn from a fixed seed so repeated calls agree
    /// bit for bit. `converged` is false when `max_iter` ran out before the
    /// relative change of the Rayleigh quotient fell below `tol`.
    pub fn op_norm(&self, tol: f64, max_iter: usize) -> OpNorm {
        if self.cols == 0 || self.rows == 0 || self.is_zero() {
            return OpNorm {
                value: 0.0,
                converged: true,
                iterations: 0,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(OP_NORM_SEED);
        let mut v = DVector::from_fn(self.cols, |_, _| rng.random::<f64>() - 0.5);
        v.normalize_mut();
        let mut lambda = 0.0;
        for it in 1..=max_iter {
            let lv = self.mul(&v);
            let rayleigh = lv.norm_squared();
            let w = self.mul_t(&lv);
            let wn = w.norm();
            if wn == 0.0 {
                // start vector landed in the null space; the estimate is exact for that subspace
                return OpNorm {
                    value: rayleigh.sqrt(),
                    converged: true,
                    iterations: it,
                };
            }
            v = w / wn;
            if it > 1 && (rayleigh - lambda).abs() <= tol * rayleigh {
                return OpNorm {
                    value: rayleigh.sqrt(),
                    converged: true,
                    iterations: it,
                };
            }
            lambda = rayleigh;
        }
        OpNorm {
            value: lambda.sqrt(),
            converged: false,
            iterations: max_iter,
        }
    }
}

/// The 1-d kernel matrix of the separable blur.
pub fn blur_kernel(n: usize) -> DMatrix<f64> {
    let c = 1.0 / (1.62 * std::f64::consts::PI).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d < 6 {
            c * (-((d * d) as f64) / 1.62).exp()
        } else {
            0.0
        }
    })
}

fn need_at_least_two(n: usize) -> Result<()> {
    if n < 2 {
        Err(LigmeError::InvalidArgument(format!(
            "operator size must be at least 2, got {n}"
        )))
    } else {
        Ok(())
    }
}
