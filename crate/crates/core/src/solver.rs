//! Fixed-point proximal splitting for `min ½‖y - Ax‖² + μ Ψ_B(Lx)`.
//!
//! One step maps `(x, v, w)` to `(ξ, ζ, η)`:
//!
//! ```text
//! ξ = x - (1/σ) [AᵀA x - Aᵀy - μ LᵀBᵀB(Lx - v) + μ Lᵀw]
//! ζ = prox_{(μ/τ)Ψ}( v + (μ/τ) BᵀB (2Lξ - Lx - v) )
//! η = prox_{Ψ*}( 2Lξ - Lx + w )
//! ```
//!
//! Under the step-size condition `σI - (κ/2)AᵀA - μLᵀL ≻ 0`,
//! `τ ≥ (κ/2 + 2/κ) μ ‖B‖²` the map is `κ/(2κ-1)`-averaged in the metric
//! `𝔓` (see [`PMetric`]), so plain or relaxed iteration converges to a fixed
//! point whose `x` part minimizes the objective.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_len, LigmeError, Result};
use crate::linops::LinOp;
use crate::penalty::{
    certify_convexity, max_eigenvalue, min_eigenvalue, objective_with, ConvexityCertificate,
    GmePenalty, InnerSolveCfg, Problem, CERTIFICATE_TOL, DENSE_CAP,
};
use crate::prox::soft_threshold;

/// Explicit value or the automatic choice from `κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Auto,
    Explicit(f64),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub kappa: f64,
    pub sigma: StepSize,
    pub tau: StepSize,
    pub max_iter: usize,
    /// Stop once `‖u_{k+1} - u_k‖_𝔓 ≤ tol (1 + ‖u_k‖_𝔓)`; `0` runs all `max_iter` steps.
    pub p_residual_tol: f64,
    /// Constant Krasnosel'skiĭ–Mann relaxation `α ∈ (0, 1]`.
    pub relaxation: f64,
    /// Record the objective every this many iterations (0 = final only).
    pub objective_every: usize,
    /// Also evaluate the objective at the last iterate.
    pub final_objective: bool,
    pub inner: InnerSolveCfg,
    /// Check `𝔓 ≻ 0` by Cholesky at setup.
    pub verify_metric: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa: 1.001,
            sigma: StepSize::Auto,
            tau: StepSize::Auto,
            max_iter: 100_000,
            p_residual_tol: 1e-9,
            relaxation: 1.0,
            objective_every: 0,
            final_objective: true,
            inner: InnerSolveCfg::default(),
            verify_metric: true,
        }
    }
}

impl SolverConfig {
    /// Fixed iteration budget with no early stop.
    pub fn fixed_iterations(max_iter: usize) -> Self {
        Self {
            max_iter,
            p_residual_tol: 0.0,
            ..Self::default()
        }
    }
}

/// The iterate `(x, v, w) ∈ X × Z × Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub k: usize,
}

impl SolverState {
    pub fn zeros(dim_x: usize, dim_z: usize) -> Self {
        Self {
            x: DVector::zeros(dim_x),
            v: DVector::zeros(dim_z),
            w: DVector::zeros(dim_z),
            k: 0,
        }
    }

    pub fn for_problem(p: &Problem) -> Self {
        Self::zeros(p.dim_x(), p.dim_z())
    }

    fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.v.iter())
            .chain(self.w.iter())
            .all(|v| v.is_finite())
    }

    fn relax(&self, next: SolverState, alpha: f64) -> SolverState {
        if alpha == 1.0 {
            return next;
        }
        SolverState {
            x: &self.x * (1.0 - alpha) + next.x * alpha,
            v: &self.v * (1.0 - alpha) + next.v * alpha,
            w: &self.w * (1.0 - alpha) + next.w * alpha,
            k: next.k,
        }
    }

    pub fn difference(&self, other: &SolverState) -> SolverState {
        SolverState {
            x: &self.x - &other.x,
            v: &self.v - &other.v,
            w: &self.w - &other.w,
            k: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub sigma: f64,
    pub tau: f64,
    pub kappa: f64,
}

/// Largest eigenvalue of a symmetric PSD operator, dense when small enough.
fn spectral_radius(op: &LinOp) -> f64 {
    if op.is_zero() {
        return 0.0;
    }
    if op.cols() <= DENSE_CAP {
        max_eigenvalue(op.to_dense())
    } else {
        // ‖G‖ = sqrt(λmax(GᵀG)) = λmax(G) for symmetric PSD G
        op.op_norm(1e-12, 100_000).value
    }
}

fn curvature_operator(p: &Problem, kappa: f64) -> DMatrix<f64> {
    let a = p.a().to_dense();
    let l = p.l().to_dense();
    a.tr_mul(&a) * (kappa / 2.0) + l.tr_mul(&l) * p.mu()
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 1.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(LigmeError::InvalidArgument(format!(
            "kappa must exceed 1, got {kappa}"
        )))
    }
}

/// `σ = ‖(κ/2)AᵀA + μLᵀL‖ + (κ-1)`, `τ = (κ/2 + 2/κ) μ ‖B‖² + (κ-1)`.
pub fn auto_step_sizes(p: &Problem, kappa: f64) -> Result<StepSizes> {
    check_kappa(kappa)?;
    if p.dim_x() > DENSE_CAP {
        return Err(LigmeError::SizeCap {
            size: p.dim_x(),
            cap: DENSE_CAP,
        });
    }
    let sigma = max_eigenvalue(curvature_operator(p, kappa)) + (kappa - 1.0);
    let b_sq = spectral_radius(&p.b().gram());
    let tau = (kappa / 2.0 + 2.0 / kappa) * p.mu() * b_sq + (kappa - 1.0);
    Ok(StepSizes { sigma, tau, kappa })
}

/// Verifies the step-size condition; returns `λmin(σI - (κ/2)AᵀA - μLᵀL)`.
pub fn verify_step_sizes(p: &Problem, s: &StepSizes) -> Result<f64> {
    check_kappa(s.kappa)?;
    let n = p.dim_x();
    if n > DENSE_CAP {
        return Err(LigmeError::SizeCap {
            size: n,
            cap: DENSE_CAP,
        });
    }
    let m = DMatrix::identity(n, n) * s.sigma - curvature_operator(p, s.kappa);
    let margin = min_eigenvalue(m);
    if !(margin > 0.0) {
        return Err(LigmeError::StepSize(format!(
            "sigma = {} leaves min eigenvalue {margin:e}",
            s.sigma
        )));
    }
    let b_sq = spectral_radius(&p.b().gram());
    let tau_min = (s.kappa / 2.0 + 2.0 / s.kappa) * p.mu() * b_sq;
    if s.tau < tau_min {
        return Err(LigmeError::StepSize(format!(
            "tau = {} is below the bound {tau_min}",
            s.tau
        )));
    }
    Ok(margin)
}

/// The metric operator
///
/// ```text
/// 𝔓 = [ σI        -μLᵀBᵀB   -μLᵀ ]
///     [ -μBᵀBL     τI         0  ]
///     [ -μL        0         μI  ]
/// ```
///
/// applied blockwise.
#[derive(Clone, Debug)]
pub struct PMetric {
    sigma: f64,
    tau: f64,
    mu: f64,
    l: LinOp,
    gram_b: Option<LinOp>,
}

impl PMetric {
    pub fn new(p: &Problem, s: &StepSizes) -> Self {
        Self {
            sigma: s.sigma,
            tau: s.tau,
            mu: p.mu(),
            l: p.l().clone(),
            gram_b: (!p.b().is_zero()).then(|| p.b().gram()),
        }
    }

    pub fn inner(&self, a: &SolverState, b: &SolverState) -> f64 {
        let la = self.l.mul(&a.x);
        let lb = self.l.mul(&b.x);
        let mut s = self.sigma * a.x.dot(&b.x) + self.tau * a.v.dot(&b.v) + self.mu * a.w.dot(&b.w);
        s -= self.mu * (la.dot(&b.w) + lb.dot(&a.w));
        if let Some(g) = &self.gram_b {
            s -= self.mu * (la.dot(&g.mul(&b.v)) + lb.dot(&g.mul(&a.v)));
        }
        s
    }

    pub fn norm_squared(&self, u: &SolverState) -> f64 {
        let lx = self.l.mul(&u.x);
        let mut s = self.sigma * u.x.norm_squared()
            + self.tau * u.v.norm_squared()
            + self.mu * u.w.norm_squared()
            - 2.0 * self.mu * lx.dot(&u.w);
        if let Some(g) = &self.gram_b {
            s -= 2.0 * self.mu * lx.dot(&g.mul(&u.v));
        }
        s
    }

    pub fn norm(&self, u: &SolverState) -> f64 {
        self.norm_squared(u).max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.l.cols();
        let l = self.l.rows();
        let ld = self.l.to_dense();
        let mut m = DMatrix::zeros(n + 2 * l, n + 2 * l);
        m.view_mut((0, 0), (n, n)).fill_diagonal(self.sigma);
        m.view_mut((n, n), (l, l)).fill_diagonal(self.tau);
        m.view_mut((n + l, n + l), (l, l)).fill_diagonal(self.mu);
        if let Some(g) = &self.gram_b {
            let gl = g.to_dense() * &ld * (-self.mu);
            m.view_mut((n, 0), (l, n)).copy_from(&gl);
            m.view_mut((0, n), (n, l)).copy_from(&gl.transpose());
        }
        let ml = &ld * (-self.mu);
        m.view_mut((n + l, 0), (l, n)).copy_from(&ml);
        m.view_mut((0, n + l), (n, l)).copy_from(&ml.transpose());
        m
    }

    /// Cholesky test of `𝔓 ≻ 0`.
    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.to_dense()).is_some()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self.to_dense())
    }
}

/// Trace and result of [`LigmeSolver::run`].
#[derive(Clone, Debug)]
pub struct RunReport {
    pub x: DVector<f64>,
    pub state: SolverState,
    pub iterations: usize,
    pub converged: bool,
    /// `‖u_{k+1} - u_k‖_𝔓` per iteration.
    pub p_residuals: Vec<f64>,
    /// `(iteration, J(x_k))` at the recorded strides and at the end.
    pub objectives: Vec<(usize, f64)>,
    /// `‖x_k - x⋆‖²` per iteration when a ground truth was supplied.
    pub se: Vec<f64>,
    pub steps: StepSizes,
    pub certificate: Option<ConvexityCertificate>,
}

impl RunReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objectives.last().map(|&(_, v)| v)
    }

    /// CSV with header `iter,p_residual,objective[,se]`; objective cells are
    /// empty on iterations where it was not recorded.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,p_residual,objective");
        let with_se = !self.se.is_empty();
        if with_se {
            out.push_str(",se");
        }
        out.push('\n');
        let mut obj = self.objectives.iter().peekable();
        for (i, r) in self.p_residuals.iter().enumerate() {
            let k = i + 1;
            let o = match obj.peek() {
                Some(&&(it, v)) if it == k => {
                    obj.next();
                    format!("{v}")
                }
                _ => String::new(),
            };
            out.push_str(&format!("{k},{r},{o}"));
            if with_se {
                out.push_str(&format!(",{}", self.se[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Precomputed solver for a fixed `(A, L, B, μ, Ψ)`; observations vary per run.
#[derive(Clone, Debug)]
pub struct LigmeSolver {
    problem: Problem,
    gram_b: Option<LinOp>,
    gme: GmePenalty,
    steps: StepSizes,
    metric: PMetric,
    cfg: SolverConfig,
    certificate: Option<ConvexityCertificate>,
}

impl LigmeSolver {
    pub fn new(p: &Problem, cfg: SolverConfig) -> Result<Self> {
        check_kappa(cfg.kappa)?;
        if !(cfg.relaxation > 0.0 && cfg.relaxation <= 1.0) {
            return Err(LigmeError::InvalidArgument(format!(
                "relaxation must lie in (0, 1], got {}",
                cfg.relaxation
            )));
        }
        let auto = auto_step_sizes(p, cfg.kappa)?;
        let steps = StepSizes {
            sigma: match cfg.sigma {
                StepSize::Auto => auto.sigma,
                StepSize::Explicit(s) => s,
            },
            tau: match cfg.tau {
                StepSize::Auto => auto.tau,
                StepSize::Explicit(t) => t,
            },
            kappa: cfg.kappa,
        };
        verify_step_sizes(p, &steps)?;
        let metric = PMetric::new(p, &steps);
        if cfg.verify_metric && !metric.is_positive_definite() {
            return Err(LigmeError::MetricNotPositive);
        }
        let certificate = certify_convexity(p, CERTIFICATE_TOL).ok();
        Ok(Self {
            problem: p.clone(),
            gram_b: (!p.b().is_zero()).then(|| p.b().gram()),
            gme: GmePenalty::new(p.psi().clone(), p.b().clone())?,
            steps,
            metric,
            cfg,
            certificate,
        })
    }

    pub fn steps(&self) -> StepSizes {
        self.steps
    }

    pub fn metric(&self) -> &PMetric {
        &self.metric
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn certificate(&self) -> Option<ConvexityCertificate> {
        self.certificate
    }

    /// One application of the fixed-point operator; `aty = Aᵀy`.
    pub fn step(&self, s: &SolverState, aty: &DVector<f64>) -> SolverState {
        let p = &self.problem;
        let (a, l, mu, psi) = (p.a(), p.l(), p.mu(), p.psi());
        let StepSizes { sigma, tau, .. } = self.steps;

        let lx = l.mul(&s.x);
        let mut dual = s.w.clone();
        if let Some(g) = &self.gram_b {
            dual -= g.mul(&(&lx - &s.v));
        }
        let grad = a.mul_t(&a.mul(&s.x)) - aty + l.mul_t(&dual) * mu;
        let xi = &s.x - grad / sigma;

        let lxi = l.mul(&xi);
        let extrapolated = &lxi * 2.0 - &lx;
        let mut v_arg = s.v.clone();
        if let Some(g) = &self.gram_b {
            v_arg += g.mul(&(&extrapolated - &s.v)) * (mu / tau);
        }
        let zeta = psi.prox_unchecked(&v_arg, mu / tau);
        let eta = psi.prox_conjugate_unchecked(&(extrapolated + &s.w));
        SolverState {
            x: xi,
            v: zeta,
            w: eta,
            k: s.k + 1,
        }
    }

    fn check_state(&self, s: &SolverState) -> Result<()> {
        check_len("state x", self.problem.dim_x(), s.x.len())?;
        check_len("state v", self.problem.dim_z(), s.v.len())?;
        check_len("state w", self.problem.dim_z(), s.w.len())
    }

    /// Runs with the problem's own observation.
    pub fn solve(&self, init: SolverState, truth: Option<&DVector<f64>>) -> Result<RunReport> {
        self.run(self.problem.y(), init, truth)
    }

    /// Iterates `u ← (1-α)u + αT(u)` from `init` for observation `y`.
    pub fn run(
        &self,
        y: &DVector<f64>,
        init: SolverState,
        truth: Option<&DVector<f64>>,
    ) -> Result<RunReport> {
        check_len("observation", self.problem.a().rows(), y.len())?;
        self.check_state(&init)?;
        if let Some(t) = truth {
            check_len("ground truth", self.problem.dim_x(), t.len())?;
        }
        let problem = if y == self.problem.y() {
            None
        } else {
            Some(self.problem.with_y(y.clone())?)
        };
        let problem = problem.as_ref().unwrap_or(&self.problem);
        let aty = self.problem.a().mul_t(y);
        let cfg = &self.cfg;

        let mut u = init;
        let mut p_residuals = Vec::with_capacity(cfg.max_iter.min(1 << 20));
        let mut se = Vec::new();
        let mut objectives = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..=cfg.max_iter {
            let next = u.relax(self.step(&u, &aty), cfg.relaxation);
            let r = self.metric.norm(&next.difference(&u));
            if !r.is_finite() || !next.is_finite() {
                return Err(LigmeError::NonFinite { iter: k });
            }
            p_residuals.push(r);
            if let Some(t) = truth {
                se.push((&next.x - t).norm_squared());
            }
            if cfg.objective_every > 0 && k % cfg.objective_every == 0 {
                objectives.push((
                    k,
                    objective_with(problem, &self.gme, &next.x, cfg.inner).value,
                ));
            }
            let stop =
                cfg.p_residual_tol > 0.0 && r <= cfg.p_residual_tol * (1.0 + self.metric.norm(&u));
            u = next;
            iterations = k;
            if stop {
                converged = true;
                break;
            }
        }
        if cfg.final_objective && objectives.last().map(|&(k, _)| k) != Some(iterations) {
            objectives.push((
                iterations,
                objective_with(problem, &self.gme, &u.x, cfg.inner).value,
            ));
        }
        Ok(RunReport {
            x: u.x.clone(),
            state: u,
            iterations,
            converged,
            p_residuals,
            objectives,
            se,
            steps: self.steps,
            certificate: self.certificate,
        })
    }
}

/// One application of the fixed-point operator for problem `p`.
pub fn t_step(p: &Problem, cfg: &SolverConfig, s: &SolverState) -> Result<SolverState> {
    let solver = LigmeSolver::new(
        p,
        SolverConfig {
            verify_metric: false,
            ..cfg.clone()
        },
    )?;
    solver.check_state(s)?;
    Ok(solver.step(s, &p.a().mul_t(p.y())))
}

/// Builds the solver and runs it on the problem's observation.
pub fn solve(p: &Problem, cfg: SolverConfig, init: SolverState) -> Result<RunReport> {
    LigmeSolver::new(p, cfg)?.solve(init, None)
}

#[derive(Clone, Copy, Debug)]
pub struct SelesnickConfig {
    pub max_iter: usize,
    /// Stop once `‖(x,v)_{k+1} - (x,v)_k‖ ≤ tol (1 + ‖(x,v)_k‖)`; 0 disables.
    pub tol: f64,
    /// Fraction of the admissible step bound used.
    pub step_fraction: f64,
}

impl Default for SelesnickConfig {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-12,
            step_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelesnickReport {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
    pub residuals: Vec<f64>,
}

/// Forward-backward iteration for `½‖y - Ax‖² + μ(‖·‖₁)_B(x)` valid when
/// `BᵀB = (θ/μ)AᵀA`:
///
/// ```text
/// ξ = soft_{τμ}( x - τ Aᵀ(A(x + θ(v - x)) - y) )
/// ζ = soft_{τμ}( v - τθ AᵀA(v - x) )
/// ```
///
/// with `τ` a fraction of `2 / (max{1, θ/(1-θ)} ρ(AᵀA))`.
pub fn selesnick_solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    mu: f64,
    theta: f64,
    init: (DVector<f64>, DVector<f64>),
    cfg: SelesnickConfig,
) -> Result<SelesnickReport> {
    if !(0.0..1.0).contains(&theta) {
        return Err(LigmeError::InvalidArgument(format!(
            "theta must lie in [0, 1), got {theta}"
        )));
    }
    if !(mu > 0.0) {
        return Err(LigmeError::InvalidArgument(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let n = a.ncols();
    check_len("observation", a.nrows(), y.len())?;
    check_len("B cols", n, b.ncols())?;
    check_len("initial x", n, init.0.len())?;
    check_len("initial v", n, init.1.len())?;
    let ata = a.tr_mul(a);
    let target = &ata * (theta / mu);
    let gap = (b.tr_mul(b) - &target).norm();
    if gap > 1e-8 * target.norm().max(f64::MIN_POSITIVE) && gap > 1e-12 {
        return Err(LigmeError::InvalidArgument(format!(
            "requires BᵀB = (θ/μ)AᵀA; Frobenius gap {gap:e}"
        )));
    }
    let rho = LinOp::dense(a.clone())
        .op_norm(1e-12, 100_000)
        .value
        .powi(2);
    let tau = cfg.step_fraction * 2.0 / (f64::max(1.0, theta / (1.0 - theta)) * rho);
    let thr = tau * mu;
    let aty = a.tr_mul(y);

    let (mut x, mut v) = init;
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iter {
        let mix = &x + (&v - &x) * theta;
        let xi = (&x - (&ata * mix - &aty) * tau).map(|t| soft_threshold(t, thr));
        let zeta = (&v - &ata * (&v - &x) * (tau * theta)).map(|t| soft_threshold(t, thr));
        let r = ((&xi - &x).norm_squared() + (&zeta - &v).norm_squared()).sqrt();
        if !r.is_finite() {
            return Err(LigmeError::NonFinite { iter: k });
        }
        let scale = (x.norm_squared() + v.norm_squared()).sqrt();
        residuals.push(r);
        x = xi;
        v = zeta;
        iterations = k;
        if cfg.tol > 0.0 && r <= cfg.tol * (1.0 + scale) {
            converged = true;
            break;
        }
    }
    Ok(SelesnickReport {
        x,
        v,
        iterations,
        converged,
        step: tau,
        residuals,
    })
}
