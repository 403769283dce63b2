//! Reference experiments: piecewise-constant signal recovery, image
//! deblurring, matrix completion, and completion with mixed penalties.
//!
//! Each experiment pairs a convex baseline (`B = 0`) with its enhanced
//! counterpart, solves both for every noise replication and reports the
//! squared error trace, the mean squared error, and for the matrix scenarios
//! the singular values of the estimate.
//!
//! Images are vectorized column by column: pixel `(r, c)` of an `n x n` image
//! sits at index `r + c n`.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with stream `0`
//! for the measurement operator (Gaussian `A` or the missing set) and stream
//! `r + 1` for the noise of replication `r`, so results do not depend on the
//! number of worker threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::design::{design_b, design_b_multi, tilde_diff_1d, tilde_diff_2d, DesignPart};
use crate::error::{LigmeError, Result};
use crate::linops::LinOp;
use crate::penalty::{certify_convexity, ConvexityCertificate, Problem, CERTIFICATE_TOL};
use crate::prox::Penalty;
use crate::solver::{LigmeSolver, SolverConfig, SolverState};

/// Singular values above this count toward the numerical rank.
pub const NUM_RANK_TOL: f64 = 1e-8;

/// Plateau height of the 1-d reference signal.
pub const TV1D_AMPLITUDE: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    Tv1d,
    Deblur2d,
    Completion,
    CompletionTv,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Tv1d,
        Scenario::Deblur2d,
        Scenario::Completion,
        Scenario::CompletionTv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Tv1d => "tv1d",
            Scenario::Deblur2d => "deblur2d",
            Scenario::Completion => "completion",
            Scenario::CompletionTv => "completion_tv",
        }
    }

    /// Whether the unknown is an `n x n` matrix.
    pub fn is_matrix(self) -> bool {
        !matches!(self, Scenario::Tv1d)
    }

    fn has_rank(self) -> bool {
        matches!(self, Scenario::Completion | Scenario::CompletionTv)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = LigmeError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| {
                LigmeError::InvalidArgument(format!(
                    "unknown scenario {s:?}; expected tv1d, deblur2d, completion or completion_tv"
                ))
            })
    }
}

/// Which blocks of the mixed completion penalty are enhanced: none (I), the
/// two difference blocks (II), the nuclear block (III), or all (IV).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    I,
    II,
    III,
    IV,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::I, Variant::II, Variant::III, Variant::IV];

    /// Enhancement levels of the (vertical, horizontal, nuclear) blocks.
    pub fn thetas(self, theta: f64) -> [f64; 3] {
        match self {
            Variant::I => [0.0, 0.0, 0.0],
            Variant::II => [theta, theta, 0.0],
            Variant::III => [0.0, 0.0, theta],
            Variant::IV => [theta, theta, theta],
        }
    }

    /// Weights `(μ_a, μ_b)` that minimize the mean squared error in the
    /// reference setup.
    pub fn default_weights(self) -> Weights {
        match self {
            Variant::I => Weights::Pair(0.015, 0.1),
            Variant::II => Weights::Pair(0.03, 0.15),
            Variant::III => Weights::Pair(0.015, 0.15),
            Variant::IV => Weights::Pair(0.035, 0.1),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::I => "I",
            Variant::II => "II",
            Variant::III => "III",
            Variant::IV => "IV",
        })
    }
}

impl FromStr for Variant {
    type Err = LigmeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Variant::I),
            "II" | "2" => Ok(Variant::II),
            "III" | "3" => Ok(Variant::III),
            "IV" | "4" => Ok(Variant::IV),
            _ => Err(LigmeError::InvalidArgument(format!(
                "unknown variant {s:?}"
            ))),
        }
    }
}

/// Regularization weight: `μ` alone, or `(μ_a, μ_b)` for the mixed penalty
/// (difference blocks, nuclear block) with overall `μ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weights {
    Single(f64),
    Pair(f64, f64),
}

impl Weights {
    fn values(self) -> Vec<f64> {
        match self {
            Weights::Single(m) => vec![m],
            Weights::Pair(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weights::Single(m) => write!(f, "{m}"),
            Weights::Pair(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

impl FromStr for Weights {
    type Err = LigmeError;

    /// `"0.5"` or `"0.015:0.1"` (a comma also separates the pair).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split([':', ',']).map(str::trim).collect();
        let parse = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| LigmeError::InvalidArgument(format!("bad weight {t:?}: {e}")))
        };
        match parts[..] {
            [m] => Ok(Weights::Single(parse(m)?)),
            [a, b] => Ok(Weights::Pair(parse(a)?, parse(b)?)),
            _ => Err(LigmeError::InvalidArgument(format!("bad weights {s:?}"))),
        }
    }
}

/// Convex baseline or enhanced penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Convex,
    Ligme,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Convex => "convex",
            Side::Ligme => "ligme",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Signal length (1-d) or image side (2-d).
    pub n: usize,
    /// Measurements (1-d) or number of missing entries (completion).
    pub m: usize,
    pub snr_db: f64,
    pub mu_convex: Weights,
    pub mu_ligme: Weights,
    pub theta: f64,
    /// Enhanced variant of the mixed completion penalty.
    pub variant: Variant,
    pub seed: u64,
    pub replications: usize,
    pub iters: usize,
    pub kappa: f64,
}

impl ExperimentSpec {
    /// Reference setup of each scenario with 20 replications.
    pub fn new(scenario: Scenario) -> Self {
        let base = ExperimentSpec {
            scenario,
            n: 16,
            m: 64,
            snr_db: 20.0,
            mu_convex: Weights::Single(1.0),
            mu_ligme: Weights::Single(1.0),
            theta: crate::design::DEFAULT_THETA,
            variant: Variant::IV,
            seed: 0,
            replications: 20,
            iters: 1000,
            kappa: 1.001,
        };
        match scenario {
            Scenario::Tv1d => ExperimentSpec {
                n: 128,
                m: 100,
                snr_db: -5.0,
                mu_convex: Weights::Single(60.0),
                mu_ligme: Weights::Single(900.0),
                iters: 15_000,
                ..base
            },
            Scenario::Deblur2d => ExperimentSpec {
                m: 256,
                mu_convex: Weights::Single(0.013),
                mu_ligme: Weights::Single(0.03),
                iters: 5000,
                ..base
            },
            Scenario::Completion => ExperimentSpec {
                snr_db: 30.0,
                mu_convex: Weights::Single(0.034),
                mu_ligme: Weights::Single(0.1),
                iters: 500,
                ..base
            },
            Scenario::CompletionTv => ExperimentSpec {
                mu_convex: Variant::I.default_weights(),
                mu_ligme: Variant::IV.default_weights(),
                ..base
            },
        }
    }

    /// Length of the unknown.
    pub fn dim_x(&self) -> usize {
        if self.scenario.is_matrix() {
            self.n * self.n
        } else {
            self.n
        }
    }

    pub fn weights(&self, side: Side) -> Weights {
        match side {
            Side::Convex => self.mu_convex,
            Side::Ligme => self.mu_ligme,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LigmeError::InvalidArgument(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad(format!("snr must be finite, got {}", self.snr_db));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        match self.scenario {
            Scenario::Tv1d if self.m == 0 => return bad("m must be positive".into()),
            Scenario::Completion | Scenario::CompletionTv if self.m >= self.n * self.n => {
                return bad(format!(
                    "cannot drop {} of {} entries",
                    self.m,
                    self.n * self.n
                ))
            }
            _ => {}
        }
        for w in [self.mu_convex, self.mu_ligme] {
            check_weights(self.scenario, w)?;
        }
        Ok(())
    }
}

fn check_weights(scenario: Scenario, w: Weights) -> Result<()> {
    let ok_shape = matches!(
        (scenario, w),
        (Scenario::CompletionTv, Weights::Pair(..))
            | (
                Scenario::Tv1d | Scenario::Deblur2d | Scenario::Completion,
                Weights::Single(_)
            )
    );
    if !ok_shape {
        return Err(LigmeError::InvalidArgument(format!(
            "{scenario} takes {} weights, got {w}",
            if scenario == Scenario::CompletionTv {
                "paired"
            } else {
                "single"
            }
        )));
    }
    if w.values().iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(LigmeError::InvalidArgument(format!(
            "weights must be positive, got {w}"
        )));
    }
    Ok(())
}

/// `ChaCha8` generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian noise of length `len` rescaled so that
/// `10 log10(reference_sq / ‖ε‖²) = snr_db` exactly.
pub fn noise_for_snr(
    reference_sq: f64,
    len: usize,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    if !(reference_sq > 0.0) {
        return Err(LigmeError::InvalidArgument(
            "SNR reference signal is zero".into(),
        ));
    }
    if len == 0 {
        return Err(LigmeError::InvalidArgument("empty noise vector".into()));
    }
    let mut e: DVector<f64> = DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
    let target = reference_sq / 10f64.powf(snr_db / 10.0);
    e *= (target / e.norm_squared()).sqrt();
    Ok(e)
}

/// `clean + ε` with the realized SNR (relative to `clean`) equal to `snr_db`.
pub fn add_noise_snr(
    clean: &DVector<f64>,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    Ok(clean + noise_for_snr(clean.norm_squared(), clean.len(), snr_db, rng)?)
}

/// Realized `10 log10(‖reference‖² / ‖noise‖²)`.
pub fn snr_db(reference: &DVector<f64>, noise: &DVector<f64>) -> f64 {
    10.0 * (reference.norm_squared() / noise.norm_squared()).log10()
}

/// Piecewise-constant signal: zero outside a plateau of height
/// [`TV1D_AMPLITUDE`] covering the middle 40% of the samples.
pub fn piecewise_signal(n: usize) -> DVector<f64> {
    let (lo, hi) = (3 * n / 10, 7 * n / 10);
    DVector::from_fn(n, |i, _| {
        if (lo..hi).contains(&i) {
            TV1D_AMPLITUDE
        } else {
            0.0
        }
    })
}

/// Rank-3 piecewise-constant image with pixels in `{0.25, 0.5, 0.75}`:
/// a constant background plus two overlapping rectangles.
pub fn piecewise_image(n: usize) -> DMatrix<f64> {
    let span = |lo: usize, hi: usize| (lo * n / 16, (hi * n / 16).max(lo * n / 16 + 1));
    let (r1, c1) = (span(3, 13), span(4, 10));
    let (r2, c2) = (span(5, 11), span(0, 10));
    let inside = |(lo, hi): (usize, usize), i: usize| (lo..hi).contains(&i);
    DMatrix::from_fn(n, n, |r, c| {
        let mut v = 0.25;
        if inside(r1, r) && inside(c1, c) {
            v += 0.25;
        }
        if inside(r2, r) && inside(c2, c) {
            v += 0.25;
        }
        v
    })
}

/// Singular values of the `n x n` matrix stored column-major in `x`.
pub fn singular_values(x: &DVector<f64>, n: usize) -> Vec<f64> {
    let m = DMatrix::from_column_slice(n, x.len() / n, x.as_slice());
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above [`NUM_RANK_TOL`].
pub fn num_rank(singular_values: &[f64]) -> usize {
    singular_values
        .iter()
        .filter(|&&s| s > NUM_RANK_TOL)
        .count()
}

/// Measurement setup shared by all replications of one seed.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: ExperimentSpec,
    pub a: LinOp,
    pub truth: DVector<f64>,
    /// `A x⋆`.
    pub clean: DVector<f64>,
    /// Observed entries (0-based, column-major) for completion scenarios.
    pub kept: Option<Vec<usize>>,
}

impl Instance {
    /// Replaces the ground truth (and `A x⋆`).
    pub fn with_truth(mut self, truth: DVector<f64>) -> Result<Self> {
        self.clean = self.a.apply(&truth)?;
        self.truth = truth;
        Ok(self)
    }

    /// Draws the measurement operator from `rng`.
    pub fn build(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let (a, truth, kept) = match spec.scenario {
            Scenario::Tv1d => {
                let a = DMatrix::from_fn(spec.m, n, |_, _| StandardNormal.sample(rng));
                (LinOp::dense(a), piecewise_signal(n), None)
            }
            Scenario::Deblur2d => (LinOp::blur(n)?, image_vec(n), None),
            Scenario::Completion | Scenario::CompletionTv => {
                let nn = n * n;
                let mut missing = vec![false; nn];
                for i in sample(rng, nn, spec.m) {
                    missing[i] = true;
                }
                let kept: Vec<usize> = (0..nn).filter(|&i| !missing[i]).collect();
                (LinOp::mask(nn, &kept)?, image_vec(n), Some(kept))
            }
        };
        let clean = a.apply(&truth)?;
        Ok(Self {
            spec: spec.clone(),
            a,
            truth,
            clean,
            kept,
        })
    }

    /// `A x⋆ + ε` with `10 log10(‖x⋆‖²/‖ε‖²)` equal to the spec's SNR.
    pub fn observe(&self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        let e = noise_for_snr(
            self.truth.norm_squared(),
            self.clean.len(),
            self.spec.snr_db,
            rng,
        )?;
        Ok(&self.clean + e)
    }

    /// Problem for one side with the given weights and observation.
    pub fn problem(&self, side: Side, weights: Weights, y: DVector<f64>) -> Result<Problem> {
        let spec = &self.spec;
        check_weights(spec.scenario, weights)?;
        let n = spec.n;
        let theta = match side {
            Side::Convex => 0.0,
            Side::Ligme => spec.theta,
        };
        let a = &self.a;
        match (spec.scenario, weights) {
            (Scenario::Tv1d, Weights::Single(mu)) => {
                let d = LinOp::diff_1d(n)?;
                let b = if theta == 0.0 {
                    LinOp::zero(n - 1, n - 1)
                } else {
                    let tilde = tilde_diff_1d(n)?;
                    design_b(&a.to_dense(), &d.to_dense(), mu, theta, Some(&tilde))?.op()
                };
                Problem::new(a.clone(), y, d, b, mu, Penalty::l1(n - 1))
            }
            (Scenario::Deblur2d, Weights::Single(mu)) => {
                let (dv, dh) = LinOp::diff_2d(n)?;
                let (tv, th) = tilde_diff_2d(n)?;
                let len = n * (n - 1);
                let psi =
                    Penalty::separable(vec![(1.0, Penalty::l1(len)), (1.0, Penalty::l1(len))])?;
                let b = if theta == 0.0 {
                    LinOp::zero(2 * len, 2 * len)
                } else {
                    let parts = vec![
                        part(&dv, 1.0, theta, 0.5, Some(tv)),
                        part(&dh, 1.0, theta, 0.5, Some(th)),
                    ];
                    design_b_multi(&a.to_dense(), &parts, mu)?.b
                };
                Problem::new(a.clone(), y, LinOp::vstack(vec![dv, dh])?, b, mu, psi)
            }
            (Scenario::Completion, Weights::Single(mu)) => {
                let nn = n * n;
                let b = if theta == 0.0 {
                    LinOp::zero(nn, nn)
                } else {
                    design_b(&a.to_dense(), &DMatrix::identity(nn, nn), mu, theta, None)?.op()
                };
                Problem::new(
                    a.clone(),
                    y,
                    LinOp::identity(nn),
                    b,
                    mu,
                    Penalty::nuclear(n, n),
                )
            }
            (Scenario::CompletionTv, Weights::Pair(mu_a, mu_b)) => {
                let variant = match side {
                    Side::Convex => Variant::I,
                    Side::Ligme => spec.variant,
                };
                let nn = n * n;
                let len = n * (n - 1);
                let (dv, dh) = LinOp::diff_2d(n)?;
                let (tv, th) = tilde_diff_2d(n)?;
                let psi = Penalty::separable(vec![
                    (mu_a, Penalty::l1(len)),
                    (mu_a, Penalty::l1(len)),
                    (mu_b, Penalty::nuclear(n, n)),
                ])?;
                let [t1, t2, t3] = variant.thetas(spec.theta);
                let b = if variant == Variant::I {
                    LinOp::zero(2 * len + nn, 2 * len + nn)
                } else {
                    let third = 1.0 / 3.0;
                    let parts = vec![
                        part(&dv, mu_a, t1, third, Some(tv)),
                        part(&dh, mu_a, t2, third, Some(th)),
                        part(&LinOp::identity(nn), mu_b, t3, 1.0 - 2.0 * third, None),
                    ];
                    design_b_multi(&a.to_dense(), &parts, 1.0)?.b
                };
                let l = LinOp::vstack(vec![dv, dh, LinOp::identity(nn)])?;
                Problem::new(a.clone(), y, l, b, 1.0, psi)
            }
            _ => unreachable!("weights checked above"),
        }
    }
}

fn part(l: &LinOp, weight: f64, theta: f64, omega: f64, tilde: Option<DMatrix<f64>>) -> DesignPart {
    DesignPart {
        l: l.to_dense(),
        weight,
        theta,
        omega,
        tilde_override: tilde,
    }
}

fn image_vec(n: usize) -> DVector<f64> {
    let img = piecewise_image(n);
    DVector::from_column_slice(img.as_slice())
}

/// Builds the measurement setup and one noisy observation from `rng`, and
/// returns `(convex problem, enhanced problem, ground truth)` sharing `y`.
pub fn gen_scenario(
    spec: &ExperimentSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Problem, Problem, DVector<f64>)> {
    let inst = Instance::build(spec, rng)?;
    let y = inst.observe(rng)?;
    let convex = inst.problem(Side::Convex, spec.mu_convex, y.clone())?;
    let ligme = inst.problem(Side::Ligme, spec.mu_ligme, y)?;
    Ok((convex, ligme, inst.truth))
}

/// Aggregate of one penalty over all replications.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub side: Side,
    pub weights: Weights,
    /// Mean over replications of `‖x_k - x⋆‖²`, `k = 1..iters`.
    pub se_trace: Vec<f64>,
    /// Estimate of the first replication.
    pub final_x: DVector<f64>,
    /// Final squared error of every replication.
    pub final_se: Vec<f64>,
    /// Mean of `final_se`.
    pub mse: f64,
    /// Singular values of `final_x` (matrix scenarios).
    pub singular_values: Option<Vec<f64>>,
    pub num_rank: Option<usize>,
    /// Numerical rank of every replication's estimate.
    pub num_ranks: Option<Vec<usize>>,
    pub certificate: ConvexityCertificate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub truth: DVector<f64>,
    pub convex: RunReport,
    pub ligme: RunReport,
}

impl ExperimentReport {
    pub fn certificates_hold(&self) -> bool {
        self.convex.certificate.holds && self.ligme.certificate.holds
    }

    /// `iter,se_convex,se_ligme`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,se_convex,se_ligme\n");
        for (k, (c, l)) in self
            .convex
            .se_trace
            .iter()
            .zip(&self.ligme.se_trace)
            .enumerate()
        {
            out.push_str(&format!("{},{c},{l}\n", k + 1));
        }
        out
    }

    /// `penalty,mu,mse` rows for both sides.
    pub fn mse_csv(&self) -> String {
        let mut out = String::from("penalty,mu,mse\n");
        for r in [&self.convex, &self.ligme] {
            out.push_str(&format!("{},{},{}\n", r.side, r.weights, r.mse));
        }
        out
    }

    /// `index,truth,convex,ligme` singular values (matrix scenarios only).
    pub fn singvals_csv(&self) -> Option<String> {
        let c = self.convex.singular_values.as_ref()?;
        let l = self.ligme.singular_values.as_ref()?;
        let t = singular_values(&self.truth, self.spec.n);
        let mut out = String::from("index,truth,convex,ligme\n");
        for i in 0..t.len() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, t[i], c[i], l[i]));
        }
        out.push_str(&format!(
            "num_rank,{},{},{}\n",
            num_rank(&t),
            num_rank(c),
            num_rank(l)
        ));
        Some(out)
    }

    /// An estimate as a dense matrix: `n x n` for images, a column otherwise.
    pub fn estimate_matrix(&self, side: Side) -> DMatrix<f64> {
        let x = match side {
            Side::Convex => &self.convex.final_x,
            Side::Ligme => &self.ligme.final_x,
        };
        if self.spec.scenario.is_matrix() {
            DMatrix::from_column_slice(self.spec.n, self.spec.n, x.as_slice())
        } else {
            DMatrix::from_column_slice(x.len(), 1, x.as_slice())
        }
    }
}

fn solver_config(spec: &ExperimentSpec) -> SolverConfig {
    SolverConfig {
        kappa: spec.kappa,
        final_objective: false,
        ..SolverConfig::fixed_iterations(spec.iters)
    }
}

/// Solves one side for every replication's observation in parallel.
fn run_side(
    inst: &Instance,
    observations: &[DVector<f64>],
    side: Side,
    weights: Weights,
) -> Result<RunReport> {
    let spec = &inst.spec;
    let problem = inst.problem(side, weights, observations[0].clone())?;
    let certificate = certify_convexity(&problem, CERTIFICATE_TOL)?;
    let solver = LigmeSolver::new(&problem, solver_config(spec))?;
    let runs = observations
        .par_iter()
        .map(|y| {
            let r = solver.run(y, SolverState::for_problem(&problem), Some(&inst.truth))?;
            Ok((r.se, r.x))
        })
        .collect::<Result<Vec<_>>>()?;

    let reps = runs.len() as f64;
    let mut se_trace = vec![0.0; spec.iters];
    for (se, _) in &runs {
        for (acc, v) in se_trace.iter_mut().zip(se) {
            *acc += v;
        }
    }
    se_trace.iter_mut().for_each(|v| *v /= reps);
    let final_se: Vec<f64> = runs
        .iter()
        .map(|(se, x)| {
            se.last()
                .copied()
                .unwrap_or_else(|| (x - &inst.truth).norm_squared())
        })
        .collect();
    let mse = final_se.iter().sum::<f64>() / reps;

    let (singular, rank, ranks) = if spec.scenario.has_rank() {
        let svs: Vec<Vec<f64>> = runs
            .iter()
            .map(|(_, x)| singular_values(x, spec.n))
            .collect();
        let ranks: Vec<usize> = svs.iter().map(|s| num_rank(s)).collect();
        (Some(svs[0].clone()), Some(ranks[0]), Some(ranks))
    } else {
        (None, None, None)
    };
    let final_x = runs
        .into_iter()
        .next()
        .map(|(_, x)| x)
        .expect("at least one replication");
    Ok(RunReport {
        side,
        weights,
        se_trace,
        final_x,
        final_se,
        mse,
        singular_values: singular,
        num_rank: rank,
        num_ranks: ranks,
        certificate,
    })
}

fn observations(inst: &Instance) -> Result<Vec<DVector<f64>>> {
    (0..inst.spec.replications)
        .map(|r| inst.observe(&mut stream_rng(inst.spec.seed, r as u64 + 1)))
        .collect()
}

/// Runs both penalties over all replications.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_instance(&Instance::build(spec, &mut stream_rng(spec.seed, 0))?)
}

/// Like [`run_experiment`] for a prepared (possibly modified) instance.
pub fn run_instance(inst: &Instance) -> Result<ExperimentReport> {
    let spec = &inst.spec;
    let ys = observations(inst)?;
    let convex = run_side(inst, &ys, Side::Convex, spec.mu_convex)?;
    let ligme = run_side(inst, &ys, Side::Ligme, spec.mu_ligme)?;
    Ok(ExperimentReport {
        spec: spec.clone(),
        truth: inst.truth.clone(),
        convex,
        ligme,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub weights: Weights,
    pub mse: f64,
    pub certificate_holds: bool,
}

/// Mean squared error of one side across a grid of weights.
pub fn sweep_mu(spec: &ExperimentSpec, side: Side, grid: &[Weights]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(LigmeError::InvalidArgument("empty weight grid".into()));
    }
    sweep_instance(
        &Instance::build(spec, &mut stream_rng(spec.seed, 0))?,
        side,
        grid,
    )
}

/// Like [`sweep_mu`] for a prepared instance.
pub fn sweep_instance(inst: &Instance, side: Side, grid: &[Weights]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(LigmeError::InvalidArgument("empty weight grid".into()));
    }
    let ys = observations(inst)?;
    grid.iter()
        .map(|&w| {
            let r = run_side(inst, &ys, side, w)?;
            Ok(SweepPoint {
                weights: w,
                mse: r.mse,
                certificate_holds: r.certificate.holds,
            })
        })
        .collect()
}

/// `mu_a,mu_b,mse` with `mu_b` empty for single weights.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("mu_a,mu_b,mse\n");
    for p in points {
        let (a, b) = match p.weights {
            Weights::Single(m) => (m.to_string(), String::new()),
            Weights::Pair(a, b) => (a.to_string(), b.to_string()),
        };
        out.push_str(&format!("{a},{b},{}\n", p.mse));
    }
    out
}

/// `count` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) {
        return Err(LigmeError::InvalidArgument(format!(
            "bad grid [{lo}, {hi}] x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::blur_kernel;

    fn small(scenario: Scenario) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(scenario);
        s.replications = 3;
        s.iters = 40;
        if scenario == Scenario::Tv1d {
            s.n = 32;
            s.m = 24;
        } else {
            s.n = 8;
            s.m = 16;
        }
        s
    }

    #[test]
    fn snr_rescale_is_exact() {
        let mut rng = stream_rng(1, 0);
        let clean = DVector::from_fn(50, |i, _| (i as f64).sin());
        for db in [-5.0, 0.0, 20.0, 30.0] {
            let y = add_noise_snr(&clean, db, &mut rng).unwrap();
            assert!((snr_db(&clean, &(&y - &clean)) - db).abs() < 1e-10);
        }
        let twice = &clean * 2.0;
        let e1 = add_noise_snr(&clean, 3.0, &mut stream_rng(2, 0)).unwrap() - &clean;
        let e2 = add_noise_snr(&twice, 3.0, &mut stream_rng(2, 0)).unwrap() - &twice;
        assert!((e2.norm() - 2.0 * e1.norm()).abs() < 1e-12);
        assert!(add_noise_snr(&DVector::zeros(4), 0.0, &mut rng).is_err());
    }

    #[test]
    fn observation_snr_is_relative_to_truth() {
        let spec = small(Scenario::Completion);
        let inst = Instance::build(&spec, &mut stream_rng(3, 0)).unwrap();
        let y = inst.observe(&mut stream_rng(3, 1)).unwrap();
        let e = &y - &inst.clean;
        assert!((snr_db(&inst.truth, &e) - spec.snr_db).abs() < 1e-10);
    }

    #[test]
    fn image_is_rank_three_with_three_levels() {
        let img = piecewise_image(16);
        let s = singular_values(&DVector::from_column_slice(img.as_slice()), 16);
        assert_eq!(num_rank(&s), 3);
        assert!((s[0] - 6.48).abs() < 0.01);
        assert!((s[1] - 0.901).abs() < 0.001);
        assert!((s[2] - 0.385).abs() < 0.001);
        let mut levels: Vec<f64> = img.iter().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn signal_differences_are_sparse() {
        let x = piecewise_signal(128);
        let dx = LinOp::diff_1d(128).unwrap().apply(&x).unwrap();
        assert_eq!(dx.iter().filter(|v| v.abs() > 0.0).count(), 2);
    }

    #[test]
    fn deblur_operator_condition() {
        let spec = ExperimentSpec::new(Scenario::Deblur2d);
        let inst = Instance::build(&spec, &mut stream_rng(0, 0)).unwrap();
        let s = inst.a.to_dense().singular_values();
        assert!((s.max() / s.min() - 593.0).abs() < 1.0);
        let k = blur_kernel(16);
        assert!((k[(0, 0)] - 1.0 / (1.62 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn missing_set_size() {
        let spec = ExperimentSpec::new(Scenario::Completion);
        let inst = Instance::build(&spec, &mut stream_rng(5, 0)).unwrap();
        let kept = inst.kept.as_ref().unwrap();
        assert_eq!(kept.len(), 192);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn paired_problems_share_observation_and_certify() {
        for sc in Scenario::ALL {
            let spec = small(sc);
            let (c, l, truth) = gen_scenario(&spec, &mut stream_rng(7, 0)).unwrap();
            assert_eq!(c.y(), l.y());
            assert_eq!(truth.len(), spec.dim_x());
            assert!(c.b().is_zero());
            assert!(!l.b().is_zero());
            assert!(
                certify_convexity(&l, CERTIFICATE_TOL).unwrap().holds,
                "{sc}"
            );
        }
    }

    #[test]
    fn every_variant_certifies() {
        for v in Variant::ALL {
            let mut spec = small(Scenario::CompletionTv);
            spec.variant = v;
            spec.mu_ligme = v.default_weights();
            let inst = Instance::build(&spec, &mut stream_rng(8, 0)).unwrap();
            let p = inst
                .problem(Side::Ligme, spec.mu_ligme, inst.clean.clone())
                .unwrap();
            assert_eq!(p.b().is_zero(), v == Variant::I);
            assert!(certify_convexity(&p, CERTIFICATE_TOL).unwrap().holds);
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let spec = small(Scenario::Tv1d);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        let mean = a.ligme.final_se.iter().sum::<f64>() / spec.replications as f64;
        assert_eq!(a.ligme.mse, mean);
        assert_eq!(*a.ligme.se_trace.last().unwrap(), a.ligme.mse);
        assert_eq!(a.trace_csv().lines().count(), spec.iters + 1);
    }

    #[test]
    fn completion_reports_rank() {
        let rep = run_experiment(&small(Scenario::Completion)).unwrap();
        assert_eq!(rep.ligme.num_ranks.as_ref().unwrap().len(), 3);
        assert_eq!(rep.ligme.singular_values.as_ref().unwrap().len(), 8);
        assert!(rep.singvals_csv().unwrap().contains("num_rank,3,"));
        assert_eq!(rep.estimate_matrix(Side::Ligme).shape(), (8, 8));
    }

    #[test]
    fn noiseless_tiny_weight_fits_observed_entries() {
        let mut spec = small(Scenario::Completion);
        spec.snr_db = 300.0;
        spec.replications = 1;
        spec.iters = 3000;
        spec.kappa = 1.5;
        spec.mu_convex = Weights::Single(1e-9);
        let rep = run_experiment(&spec).unwrap();
        let inst = Instance::build(&spec, &mut stream_rng(spec.seed, 0)).unwrap();
        let fit = inst.a.apply(&rep.convex.final_x).unwrap() - &inst.clean;
        assert!(fit.amax() < 1e-6);
    }

    #[test]
    fn weights_parse_and_validate() {
        assert_eq!("0.5".parse::<Weights>().unwrap(), Weights::Single(0.5));
        assert_eq!(
            "0.015:0.1".parse::<Weights>().unwrap(),
            Weights::Pair(0.015, 0.1)
        );
        assert!("a".parse::<Weights>().is_err());
        let mut spec = ExperimentSpec::new(Scenario::Tv1d);
        spec.mu_ligme = Weights::Pair(1.0, 1.0);
        assert!(spec.validate().is_err());
        spec.mu_ligme = Weights::Single(-1.0);
        assert!(spec.validate().is_err());
        spec.mu_ligme = Weights::Single(1.0);
        spec.replications = 0;
        assert!(spec.validate().is_err());
        assert!("bogus".parse::<Scenario>().is_err());
        assert_eq!(
            "completion-tv".parse::<Scenario>().unwrap(),
            Scenario::CompletionTv
        );
        assert!(sweep_mu(&small(Scenario::Tv1d), Side::Convex, &[]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 100.0, 3).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!((g[2] - 100.0).abs() < 1e-9);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
