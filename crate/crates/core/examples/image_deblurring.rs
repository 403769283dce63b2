//! Deblurring a piecewise-constant image with anisotropic total variation
//! and its enhanced version (two difference blocks, one design each).

use ligme::harness::{run_experiment, ExperimentSpec, Scenario, Side};

fn main() -> ligme::error::Result<()> {
    let mut spec = ExperimentSpec::new(Scenario::Deblur2d);
    spec.replications = 4;
    let rep = run_experiment(&spec)?;
    println!(
        "MSE TV {:.4}, enhanced {:.4}",
        rep.convex.mse, rep.ligme.mse
    );
    let img = rep.estimate_matrix(Side::Ligme);
    println!("enhanced estimate (rounded to 0.05):");
    for r in 0..img.nrows() {
        let row: Vec<String> = (0..img.ncols())
            .map(|c| format!("{:4.2}", (img[(r, c)] * 20.0).round() / 20.0))
            .collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
