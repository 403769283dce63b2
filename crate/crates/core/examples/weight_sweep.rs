//! Mean squared error against the regularization weight, written as CSV
//! for plotting.
//!
//! `cargo run --release --example weight_sweep -- out.csv`

use ligme::harness::{log_grid, sweep_csv, sweep_mu, ExperimentSpec, Scenario, Side, Weights};

fn main() -> ligme::error::Result<()> {
    let mut spec = ExperimentSpec::new(Scenario::Completion);
    spec.replications = 5;
    let mut csv = String::new();
    for side in [Side::Convex, Side::Ligme] {
        let grid: Vec<Weights> = log_grid(0.005, 0.5, 9)?
            .into_iter()
            .map(Weights::Single)
            .collect();
        let points = sweep_mu(&spec, side, &grid)?;
        csv.push_str(&format!("# {side}\n{}", sweep_csv(&points)));
    }
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
