//! Proximity operators, Moreau envelopes and the generalized Moreau
//! enhanced penalty on scalars and small matrices.

use ligme::linops::LinOp;
use ligme::penalty::{gme_value, InnerSolveCfg};
use ligme::prox::Penalty;
use nalgebra::{DMatrix, DVector};

fn main() -> ligme::error::Result<()> {
    let l1 = Penalty::l1(5);
    let z = DVector::from_vec(vec![-2.0, -0.3, 0.0, 0.7, 1.5]);
    println!("soft threshold at 0.5: {:?}", l1.prox(&z, 0.5)?.as_slice());
    println!(
        "conjugate prox (clip to [-1, 1]): {:?}",
        l1.prox_conjugate(&z)?.as_slice()
    );
    println!(
        "Moreau envelope (Huber) at γ = 1: {:.4}",
        l1.moreau_envelope(&z, 1.0)?
    );

    let nuc = Penalty::nuclear(3, 3);
    let m = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.2]);
    let shrunk = nuc.prox(&DVector::from_column_slice(m.as_slice()), 0.5)?;
    let shrunk = DMatrix::from_column_slice(3, 3, shrunk.as_slice());
    println!(
        "singular values after thresholding at 0.5: {:?}",
        shrunk.singular_values().as_slice()
    );

    // With B = 1/sqrt(γ), (2/γ) times the enhanced |x| is the normalized
    // minimax concave penalty: a bridge between |x| and the counting function.
    println!("\n  x      |x|    normalized MC (γ = 1)   (γ = 0.01)");
    for x in [0.0, 0.005, 0.25, 0.5, 1.0, 2.0] {
        let value = |gamma: f64| -> ligme::error::Result<f64> {
            let b = LinOp::dense(DMatrix::from_element(1, 1, 1.0 / gamma.sqrt()));
            let v = gme_value(
                &Penalty::l1(1),
                &b,
                &DVector::from_element(1, x),
                InnerSolveCfg::default(),
            )?;
            Ok(2.0 / gamma * v.value)
        };
        println!(
            "{x:5.3}  {:5.3}    {:8.4}              {:8.4}",
            x,
            value(1.0)?,
            value(0.01)?
        );
    }
    Ok(())
}
