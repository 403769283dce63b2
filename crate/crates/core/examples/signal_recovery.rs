//! Piecewise-constant signal recovery from compressed Gaussian measurements:
//! total variation against its enhanced version.
//!
//! `cargo run --release --example signal_recovery -- [replications]`

use ligme::harness::{run_experiment, ExperimentSpec, Scenario};

fn main() -> ligme::error::Result<()> {
    let mut spec = ExperimentSpec::new(Scenario::Tv1d);
    spec.replications = std::env::args()
        .nth(1)
        .map_or(5, |s| s.parse().unwrap_or(5));
    let rep = run_experiment(&spec)?;
    println!(
        "N = {}, M = {}, SNR {} dB, {} iterations, {} replications",
        spec.n, spec.m, spec.snr_db, spec.iters, spec.replications
    );
    println!(
        "MSE total variation (μ = {}): {:.4}",
        spec.mu_convex, rep.convex.mse
    );
    println!(
        "MSE enhanced       (μ = {}): {:.4}",
        spec.mu_ligme, rep.ligme.mse
    );
    for k in [10, 100, 1000, spec.iters] {
        println!(
            "  iteration {k:>6}: SE {:.4} vs {:.4}",
            rep.convex.se_trace[k - 1],
            rep.ligme.se_trace[k - 1]
        );
    }
    let show = |x: &nalgebra::DVector<f64>| {
        x.iter()
            .step_by(8)
            .map(|v| format!("{v:5.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("truth    {}", show(&rep.truth));
    println!("TV       {}", show(&rep.convex.final_x));
    println!("enhanced {}", show(&rep.ligme.final_x));
    Ok(())
}
