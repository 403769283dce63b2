//! Designing enhancement matrices for a difference penalty and checking
//! overall convexity as the enhancement level grows.

use ligme::design::{design_b, tilde_diff_1d};
use ligme::linops::LinOp;
use ligme::penalty::{certify_convexity, Problem, CERTIFICATE_TOL};
use ligme::prox::Penalty;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ligme::error::Result<()> {
    let (m, n, mu) = (30, 40, 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
    let d = LinOp::diff_1d(n)?;
    let tilde = tilde_diff_1d(n)?;

    println!("theta   ‖B‖_F     min eig(AᵀA - μ DᵀBᵀBD)   certified");
    for theta in [0.0, 0.5, 0.9, 0.99, 1.0] {
        let design = design_b(&a, &d.to_dense(), mu, theta, Some(&tilde))?;
        let p = Problem::new(
            LinOp::dense(a.clone()),
            DVector::zeros(m),
            d.clone(),
            design.op(),
            mu,
            Penalty::l1(n - 1),
        )?;
        let cert = certify_convexity(&p, CERTIFICATE_TOL)?;
        println!(
            "{theta:5.2}   {:7.4}   {:+.3e}                {}",
            design.b.norm(),
            cert.min_eig,
            cert.holds
        );
    }

    // A completion from the null space of D gives the same BᵀB.
    let auto = design_b(&a, &d.to_dense(), mu, 0.99, None)?;
    let explicit = design_b(&a, &d.to_dense(), mu, 0.99, Some(&tilde))?;
    let gap = (auto.b.tr_mul(&auto.b) - explicit.b.tr_mul(&explicit.b)).norm();
    println!("\nBᵀB difference between completions: {gap:.2e}");

    // Doubling B breaks the certificate.
    let p = Problem::new(
        LinOp::dense(a),
        DVector::zeros(m),
        d,
        LinOp::dense(&explicit.b * 2.0),
        mu,
        Penalty::l1(n - 1),
    )?;
    let cert = certify_convexity(&p, CERTIFICATE_TOL)?;
    println!(
        "with 2B: min eigenvalue {:.3e}, certified {}",
        cert.min_eig, cert.holds
    );
    Ok(())
}
