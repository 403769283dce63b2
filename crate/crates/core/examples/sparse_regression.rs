//! Sparse regression with the generalized minimax concave penalty: the
//! splitting solver against the two-variable GMC iteration and plain LASSO.

use ligme::design::design_b;
use ligme::linops::LinOp;
use ligme::penalty::{InnerSolveCfg, Problem};
use ligme::prox::Penalty;
use ligme::solver::{selesnick_solve, solve, SelesnickConfig, SolverConfig, SolverState};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ligme::error::Result<()> {
    let (m, n) = (40, 60);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng)) / (m as f64).sqrt();
    let mut truth = DVector::zeros(n);
    for (i, v) in [(3, 2.0), (17, -1.5), (29, 1.0), (44, -2.5), (52, 1.2)] {
        truth[i] = v;
    }
    let noise = DVector::from_fn(m, |_, _| {
        let s: f64 = StandardNormal.sample(&mut rng);
        0.05 * s
    });
    let y = &a * &truth + noise;
    let (mu, theta) = (0.08, 0.8);

    let cfg = SolverConfig {
        max_iter: 50_000,
        p_residual_tol: 1e-12,
        ..SolverConfig::default()
    };
    let lasso = Problem::new(
        LinOp::dense(a.clone()),
        y.clone(),
        LinOp::identity(n),
        LinOp::zero(n, n),
        mu,
        Penalty::l1(n),
    )?;
    let x_lasso = solve(&lasso, cfg.clone(), SolverState::for_problem(&lasso))?.x;

    let b = design_b(&a, &DMatrix::identity(n, n), mu, theta, None)?;
    let gmc = lasso.with_b(b.op())?;
    let rep = solve(&gmc, cfg, SolverState::for_problem(&gmc))?;
    let ref_run = selesnick_solve(
        &a,
        &b.b,
        &y,
        mu,
        theta,
        (DVector::zeros(n), DVector::zeros(n)),
        SelesnickConfig::default(),
    )?;

    let inner = InnerSolveCfg::default();
    println!("LASSO          error {:.4}", (&x_lasso - &truth).norm());
    println!(
        "GMC (splitting) error {:.4}, objective {:.8}, {} iterations",
        (&rep.x - &truth).norm(),
        gmc.objective(&rep.x, inner)?.value,
        rep.iterations
    );
    println!(
        "GMC (two-var)   error {:.4}, objective {:.8}, {} iterations",
        (&ref_run.x - &truth).norm(),
        gmc.objective(&ref_run.x, inner)?.value,
        ref_run.iterations
    );
    let support =
        |x: &DVector<f64>| -> Vec<usize> { (0..n).filter(|&i| x[i].abs() > 1e-6).collect() };
    println!(
        "support LASSO {:?}\nsupport GMC   {:?}",
        support(&x_lasso),
        support(&rep.x)
    );
    Ok(())
}
