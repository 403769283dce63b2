//! Structured operators: differences, blur, masks and stacks, with spectral
//! norms from power iteration checked against closed forms.

use ligme::linops::{LinOp, OP_NORM_MAX_ITER, OP_NORM_TOL};
use nalgebra::DVector;

fn main() -> ligme::error::Result<()> {
    let n = 64;
    let d = LinOp::diff_1d(n)?;
    let est = d.op_norm(OP_NORM_TOL, OP_NORM_MAX_ITER);
    let exact = 2.0 * ((n - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).sin();
    println!(
        "‖D‖ for n = {n}: power iteration {:.9} ({} iterations), closed form {exact:.9}",
        est.value, est.iterations
    );

    let blur = LinOp::blur(16)?;
    let s = blur.to_dense().singular_values();
    println!(
        "16x16 image blur: condition number {:.2}",
        s.max() / s.min()
    );

    let (dv, dh) = LinOp::diff_2d(8)?;
    let grad = LinOp::vstack(vec![dv, dh])?;
    let ramp = DVector::from_fn(64, |i, _| (i / 8) as f64); // constant down each column
    let g = grad.apply(&ramp)?;
    println!(
        "image gradient of a column-wise ramp: vertical part {:.1}, horizontal part {:.1}",
        g.rows(0, 56).norm(),
        g.rows(56, 56).norm()
    );

    let mask = LinOp::mask(9, &[0, 2, 4, 8])?;
    let x = DVector::from_fn(9, |i, _| i as f64);
    println!(
        "mask zeroes the unobserved entries: {:?}",
        mask.apply(&x)?.as_slice()
    );
    println!(
        "and is its own adjoint: {:?}",
        mask.adjoint_apply(&x)?.as_slice()
    );
    Ok(())
}
