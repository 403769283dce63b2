//! Construction of enhancement matrices `B` that keep the whole objective
//! convex, for a single penalty map and for block (product-space) penalties.
//!
//! Given `A` and a full-row-rank `L`, `L` is completed to a nonsingular square
//! matrix `L̃` whose last `l` rows are `L`. With `[Ã₁ Ã₂] = A L̃⁻¹`, the Schur
//! complement `S = Ã₂ᵀÃ₂ - Ã₂ᵀÃ₁(Ã₁ᵀÃ₁)†Ã₁ᵀÃ₂ = UΛUᵀ` gives
//! `B_θ = sqrt(θ/μ) Λ^{1/2} Uᵀ`, for which `AᵀA - μ LᵀB_θᵀB_θL ⪰ 0` whenever
//! `θ ∈ [0, 1]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LigmeError, Result};
use crate::linops::LinOp;

/// Default enhancement level used by every reference experiment.
pub const DEFAULT_THETA: f64 = 0.99;

const RANK_CUTOFF: f64 = 1e-10;
const CLAMP_TOL: f64 = 1e-10;

/// Output of [`design_b`].
#[derive(Clone, Debug)]
pub struct BDesign {
    /// `l x l` enhancement matrix.
    pub b: DMatrix<f64>,
    pub theta: f64,
    pub tilde_l: DMatrix<f64>,
    /// Eigenvalues `Λ` of the Schur complement (clamped at zero), matching the
    /// rows of `b`.
    pub spectrum: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl BDesign {
    pub fn op(&self) -> LinOp {
        LinOp::dense(self.b.clone())
    }
}

/// Numerical rank from singular values with relative cutoff `1e-10`.
fn rank_of(m: &DMatrix<f64>) -> usize {
    let s = m.singular_values();
    let smax = s.max();
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_CUTOFF * smax).count()
}

/// `L̃ = [T; L]` where the rows of `T` are an orthonormal basis of `null(L)`.
pub fn complete_to_square(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, n) = l.shape();
    let rank = if rows > n {
        rank_of(l).min(n)
    } else {
        rank_of(l)
    };
    if rows > n || rank < rows {
        return Err(LigmeError::RankDeficient { rank, rows });
    }
    if rows == n {
        return Ok(l.clone());
    }
    // Full SVD of the zero-padded square matrix exposes all of null(L).
    let mut padded = DMatrix::zeros(n, n);
    padded.rows_mut(0, rows).copy_from(l);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let k = n - rows;
    let mut tilde = DMatrix::zeros(n, n);
    for (r, &idx) in order.iter().take(k).enumerate() {
        tilde.set_row(r, &v_t.row(idx));
    }
    tilde.rows_mut(k, rows).copy_from(l);
    Ok(tilde)
}

/// `[e₁ᵀ; D]` for the `(n-1) x n` first-order difference `D`.
pub fn tilde_diff_1d(n: usize) -> Result<DMatrix<f64>> {
    let d = LinOp::diff_1d(n)?.to_dense();
    let mut t = DMatrix::zeros(n, n);
    t[(0, 0)] = 1.0;
    t.rows_mut(1, n - 1).copy_from(&d);
    Ok(t)
}

/// Completions of the vertical and horizontal image differences:
/// `[E; D_V]` with `E` picking the first pixel of every column, and
/// `[I_n 0; D_H]` picking the first image column.
pub fn tilde_diff_2d(n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (dv, dh) = LinOp::diff_2d(n)?;
    let nn = n * n;
    let mut tv = DMatrix::zeros(nn, nn);
    for i in 0..n {
        tv[(i, i * n)] = 1.0;
    }
    tv.rows_mut(n, nn - n).copy_from(&dv.to_dense());
    let mut th = DMatrix::zeros(nn, nn);
    for i in 0..n {
        th[(i, i)] = 1.0;
    }
    th.rows_mut(n, nn - n).copy_from(&dh.to_dense());
    Ok((tv, th))
}

fn check_tilde(l: &DMatrix<f64>, tilde: &DMatrix<f64>) -> Result<()> {
    let (rows, n) = l.shape();
    if tilde.shape() != (n, n) {
        return Err(LigmeError::InvalidArgument(format!(
            "completion must be {n}x{n}, got {:?}",
            tilde.shape()
        )));
    }
    if tilde.rows(n - rows, rows) != *l {
        return Err(LigmeError::InvalidArgument(
            "the last rows of the completion must equal L".into(),
        ));
    }
    let s = tilde.singular_values();
    if !(s.min() > RANK_CUTOFF * s.max()) {
        return Err(LigmeError::Singular(format!(
            "completion has singular values in [{:e}, {:e}]",
            s.min(),
            s.max()
        )));
    }
    Ok(())
}

/// Moore–Penrose inverse of a symmetric PSD matrix by SVD with relative cutoff.
fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let eps = RANK_CUTOFF * svd.singular_values.max();
    svd.pseudo_inverse(eps.max(f64::MIN_POSITIVE))
        .expect("pseudo-inverse with nonnegative eps")
}

/// `B_θ` for `J = ½‖y - Ax‖² + μ Ψ_B(Lx)`.
pub fn design_b(
    a: &DMatrix<f64>,
    l: &DMatrix<f64>,
    mu: f64,
    theta: f64,
    tilde_override: Option<&DMatrix<f64>>,
) -> Result<BDesign> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(LigmeError::InvalidArgument(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(LigmeError::InvalidArgument(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let (rows, n) = l.shape();
    if a.ncols() != n {
        return Err(LigmeError::Dimension {
            context: "A cols vs L cols",
            expected: n,
            got: a.ncols(),
        });
    }
    let tilde_l = match tilde_override {
        Some(t) => {
            let rank = rank_of(l);
            if rank < rows {
                return Err(LigmeError::RankDeficient { rank, rows });
            }
            check_tilde(l, t)?;
            t.clone()
        }
        None => complete_to_square(l)?,
    };

    // Ã = A L̃⁻¹, computed as Ãᵀ = L̃⁻ᵀ Aᵀ.
    let a_tilde = tilde_l
        .transpose()
        .lu()
        .solve(&a.transpose())
        .ok_or_else(|| LigmeError::Singular("completion of L".into()))?
        .transpose();
    let k = n - rows;
    let a1 = a_tilde.columns(0, k).into_owned();
    let a2 = a_tilde.columns(k, rows).into_owned();
    let mut schur = a2.tr_mul(&a2);
    if k > 0 {
        let cross = a1.tr_mul(&a2);
        schur -= cross.tr_mul(&(pinv(&a1.tr_mul(&a1)) * &cross));
    }
    let schur = (&schur + schur.transpose()) * 0.5;

    let eig = SymmetricEigen::new(schur);
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut spectrum = eig.eigenvalues.clone();
    for lam in spectrum.iter_mut() {
        if *lam < 0.0 {
            if *lam < -CLAMP_TOL * scale {
                return Err(LigmeError::IndefiniteSchur(*lam));
            }
            *lam = 0.0;
        }
    }
    let u = eig.eigenvectors;
    let mut b = u.transpose();
    for (i, lam) in spectrum.iter().enumerate() {
        let s = (theta / mu * lam).sqrt();
        b.row_mut(i).scale_mut(s);
    }
    Ok(BDesign {
        b,
        theta,
        tilde_l,
        spectrum,
        eigenvectors: u,
    })
}

/// One block of a product-space penalty.
#[derive(Clone, Debug)]
pub struct DesignPart {
    pub l: DMatrix<f64>,
    /// Weight `μ_i` of this block inside Ψ.
    pub weight: f64,
    pub theta: f64,
    /// Share `ω_i` of the data-fit curvature given to this block.
    pub omega: f64,
    pub tilde_override: Option<DMatrix<f64>>,
}

/// Output of [`design_b_multi`].
#[derive(Clone, Debug)]
pub struct MultiDesign {
    /// Per-block designs `B⟨i⟩` (before the `sqrt(μ_i)` scaling).
    pub blocks: Vec<BDesign>,
    /// Assembled block-diagonal `(z_i) -> (sqrt(μ_i) B⟨i⟩ z_i)`.
    pub b: LinOp,
}

/// Block design for `Ψ = ⊕ μ_i Ψ⟨i⟩`, `L = (L_1; ...; L_M)`: each block is
/// designed for `(sqrt(ω_i/μ) A, L_i, μ_i)` and scaled by `sqrt(μ_i)`.
pub fn design_b_multi(a: &DMatrix<f64>, parts: &[DesignPart], mu: f64) -> Result<MultiDesign> {
    if parts.is_empty() {
        return Err(LigmeError::InvalidArgument("no design parts".into()));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(LigmeError::InvalidArgument(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let total: f64 = parts.iter().map(|p| p.omega).sum();
    if parts.iter().any(|p| !(p.omega > 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(LigmeError::InvalidArgument(format!(
            "curvature shares must be positive and sum to 1, got sum {total}"
        )));
    }
    let mut blocks = Vec::with_capacity(parts.len());
    let mut ops = Vec::with_capacity(parts.len());
    for p in parts {
        let scaled_a = a * (p.omega / mu).sqrt();
        let d = design_b(
            &scaled_a,
            &p.l,
            p.weight,
            p.theta,
            p.tilde_override.as_ref(),
        )?;
        ops.push(if p.theta == 0.0 {
            LinOp::zero(p.l.nrows(), p.l.nrows())
        } else {
            LinOp::dense(&d.b * p.weight.sqrt())
        });
        blocks.push(d);
    }
    Ok(MultiDesign {
        blocks,
        b: LinOp::block_diag(ops)?,
    })
}
