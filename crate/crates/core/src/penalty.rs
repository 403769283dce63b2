//! Generalized Moreau enhanced (GME) penalty, the regularized least-squares
//! objective built from it, and the overall-convexity certificate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, LigmeError, Result};
use crate::linops::LinOp;
use crate::prox::Penalty;

/// Largest dimension for which dense eigen-certificates are computed.
pub const DENSE_CAP: usize = 4096;
/// Default absolute tolerance of [`certify_convexity`].
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// The tuple `(A, y, L, B, μ, Ψ)` defining
/// `J(x) = ½‖y - Ax‖² + μ Ψ_B(Lx)`.
#[derive(Clone, Debug)]
pub struct Problem {
    a: LinOp,
    y: DVector<f64>,
    l: LinOp,
    b: LinOp,
    mu: f64,
    psi: Penalty,
}

impl Problem {
    pub fn new(
        a: LinOp,
        y: DVector<f64>,
        l: LinOp,
        b: LinOp,
        mu: f64,
        psi: Penalty,
    ) -> Result<Self> {
        check_len("observation length vs A rows", a.rows(), y.len())?;
        check_len("A cols vs L cols", a.cols(), l.cols())?;
        check_len("L rows vs penalty length", psi.total_len(), l.rows())?;
        check_len("B cols vs penalty length", psi.total_len(), b.cols())?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(LigmeError::InvalidArgument(format!(
                "mu must be positive, got {mu}"
            )));
        }
        Ok(Self {
            a,
            y,
            l,
            b,
            mu,
            psi,
        })
    }

    pub fn a(&self) -> &LinOp {
        &self.a
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn l(&self) -> &LinOp {
        &self.l
    }
    pub fn b(&self) -> &LinOp {
        &self.b
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn psi(&self) -> &Penalty {
        &self.psi
    }

    /// Same operators with a different observation.
    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        check_len("observation length vs A rows", self.a.rows(), y.len())?;
        Ok(Self { y, ..self.clone() })
    }

    /// Same problem with a different enhancement matrix.
    pub fn with_b(&self, b: LinOp) -> Result<Self> {
        check_len("B cols vs penalty length", self.psi.total_len(), b.cols())?;
        Ok(Self { b, ..self.clone() })
    }

    pub fn dim_x(&self) -> usize {
        self.a.cols()
    }

    pub fn dim_z(&self) -> usize {
        self.l.rows()
    }

    /// `J(x)`; the inner minimization of the GME penalty is solved iteratively.
    pub fn objective(&self, x: &DVector<f64>, inner: InnerSolveCfg) -> Result<InnerValue> {
        check_len("objective", self.dim_x(), x.len())?;
        let gme = GmePenalty::new(self.psi.clone(), self.b.clone())?;
        Ok(objective_with(self, &gme, x, inner))
    }
}

pub(crate) fn objective_with(
    p: &Problem,
    gme: &GmePenalty,
    x: &DVector<f64>,
    inner: InnerSolveCfg,
) -> InnerValue {
    let fit = 0.5 * (p.y() - p.a().mul(x)).norm_squared();
    let pen = gme.value_unchecked(&p.l().mul(x), inner);
    InnerValue {
        value: fit + p.mu() * pen.value,
        ..pen
    }
}

/// Settings of the forward-backward solve of `min_v Ψ(v) + ½‖B(z - v)‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolveCfg {
    /// Stop when the gradient-mapping norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerSolveCfg {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// A value computed through an inner iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerValue {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final gradient-mapping norm of the inner problem.
    pub residual: f64,
}

/// `Ψ_B(z) = Ψ(z) - min_v [Ψ(v) + ½‖B(z - v)‖²]` with `B^T B` and the
/// Lipschitz constant `‖B‖²` precomputed.
#[derive(Clone, Debug)]
pub struct GmePenalty {
    psi: Penalty,
    gram: Option<LinOp>,
    lipschitz: f64,
}

impl GmePenalty {
    pub fn new(psi: Penalty, b: LinOp) -> Result<Self> {
        check_len("B cols vs penalty length", psi.total_len(), b.cols())?;
        if b.is_zero() {
            return Ok(Self {
                psi,
                gram: None,
                lipschitz: 0.0,
            });
        }
        let gram = b.gram();
        let lipschitz = gram.op_norm(1e-12, 100_000).value;
        Ok(Self {
            psi,
            gram: Some(gram),
            lipschitz,
        })
    }

    pub fn psi(&self) -> &Penalty {
        &self.psi
    }

    pub fn value(&self, z: &DVector<f64>, inner: InnerSolveCfg) -> Result<InnerValue> {
        check_len("gme value", self.psi.total_len(), z.len())?;
        if !(inner.tol > 0.0) {
            return Err(LigmeError::InvalidArgument(
                "inner tolerance must be positive".into(),
            ));
        }
        Ok(self.value_unchecked(z, inner))
    }

    pub(crate) fn value_unchecked(&self, z: &DVector<f64>, inner: InnerSolveCfg) -> InnerValue {
        let psi_z = self.psi.eval_unchecked(z.as_slice());
        let Some(gram) = &self.gram else {
            return InnerValue {
                value: psi_z,
                converged: true,
                iterations: 0,
                residual: 0.0,
            };
        };
        let step = 1.0 / self.lipschitz;
        let mut v = z.clone();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < inner.max_iter {
            iterations += 1;
            let grad = gram.mul(&(&v - z));
            let next = self.psi.prox_unchecked(&(&v - grad * step), step);
            residual = (&v - &next).norm() / step;
            v = next;
            if residual <= inner.tol {
                converged = true;
                break;
            }
        }
        let d = z - &v;
        let inner_min = self.psi.eval_unchecked(v.as_slice()) + 0.5 * d.dot(&gram.mul(&d));
        InnerValue {
            value: psi_z - inner_min,
            converged,
            iterations,
            residual,
        }
    }
}

/// `Ψ_B(z)` for a single evaluation; see [`GmePenalty`] for repeated use.
pub fn gme_value(
    psi: &Penalty,
    b: &LinOp,
    z: &DVector<f64>,
    inner: InnerSolveCfg,
) -> Result<InnerValue> {
    GmePenalty::new(psi.clone(), b.clone())?.value(z, inner)
}

/// Minimum eigenvalue of `A^T A - μ L^T B^T B L` and whether it clears `-tolerance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexityCertificate {
    pub min_eig: f64,
    pub holds: bool,
    pub tolerance: f64,
}

impl ConvexityCertificate {
    fn from_min_eig(min_eig: f64, tolerance: f64) -> Self {
        Self {
            min_eig,
            holds: min_eig >= -tolerance,
            tolerance,
        }
    }
}

/// `A^T A - μ L^T B^T B L` as a dense symmetric matrix.
pub fn convexity_matrix(a: &LinOp, l: &LinOp, b: &LinOp, mu: f64) -> DMatrix<f64> {
    let ad = a.to_dense();
    let mut m = ad.tr_mul(&ad);
    if !b.is_zero() {
        let bl = b.to_dense() * l.to_dense();
        m -= bl.tr_mul(&bl) * mu;
    }
    (&m + m.transpose()) * 0.5
}

/// Dense eigen-certificate of overall convexity.
pub fn certify_convexity(p: &Problem, tol: f64) -> Result<ConvexityCertificate> {
    let n = p.dim_x();
    if n > DENSE_CAP {
        return Err(LigmeError::SizeCap {
            size: n,
            cap: DENSE_CAP,
        });
    }
    let m = convexity_matrix(p.a(), p.l(), p.b(), p.mu());
    Ok(ConvexityCertificate::from_min_eig(min_eigenvalue(m), tol))
}

/// Matrix-free estimate of the same certificate by power iteration on
/// `c I - M`, where `c = ‖A‖²` bounds the spectrum of `M` from above.
///
/// Power iteration approaches the extreme eigenvalue from inside, so the
/// returned `min_eig` can overestimate the true value when not converged.
pub fn probe_convexity(p: &Problem, tol: f64, max_iter: usize) -> ConvexityCertificate {
    let (a, l, b, mu) = (p.a(), p.l(), p.b(), p.mu());
    let c = a.op_norm(1e-12, max_iter).value.powi(2);
    let shifted = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = x * c - a.mul_t(&a.mul(x));
        if !b.is_zero() {
            let lx = l.mul(x);
            out += l.mul_t(&b.mul_t(&b.mul(&lx))) * mu;
        }
        out
    };
    let n = p.dim_x();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = shifted(&v);
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / wn;
        if (next - lambda).abs() <= 1e-12 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    ConvexityCertificate::from_min_eig(c - lambda, tol)
}

/// For Ψ = ℓ1: `Ψ_B(Lx) = ‖Lx‖₁ - ½‖BLx‖²` exactly when `‖B^T B L x‖_∞ ≤ 1`.
pub fn check_l1_linear_region(b: &LinOp, l: &LinOp, x: &DVector<f64>) -> Result<bool> {
    let lx = l.apply(x)?;
    check_len("B cols vs L rows", l.rows(), b.cols())?;
    let t = b.mul_t(&b.mul(&lx));
    Ok(t.amax() <= 1.0)
}

pub(crate) fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m).eigenvalues.min()
}

pub(crate) fn max_eigenvalue(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m).eigenvalues.max()
}
