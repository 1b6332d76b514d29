//! Spectral-norm projection of a weight matrix and Euclidean projection of a
//! readout vector, the two constraint maps of the windowed optimizer.
//!
//! cargo run --example svd_projection

use online_rnn::linalg::{clip_singular_values, spectral_norm, svd, Mat, Vec64};
use online_rnn::optim::project_l2_ball;

fn main() -> online_rnn::Result<()> {
    let m = Mat::from_rows(&[&[2.0, 0.5, 0.0], &[0.3, -1.2, 0.8], &[0.0, 0.4, 0.1]])?;
    let d = svd(&m)?;
    println!("singular values: {:?}", &d.sigma[..]);
    println!(
        "reconstruction error: {:.2e}",
        d.reconstruct().max_abs_diff(&m)
    );

    for lambda in [0.5, 0.95, 3.0] {
        let p = clip_singular_values(&m, lambda)?;
        let moved = m.sub(&p).frobenius_norm();
        let again = clip_singular_values(&p, lambda)?.max_abs_diff(&p);
        println!(
            "lambda {lambda:>4}: ||P(M)||_2 = {:.4}, moved {moved:.4}, reprojection drift {again:.1e}",
            spectral_norm(&p)?
        );
    }

    let v: Vec64 = vec![3.0, -4.0, 0.0].into();
    for radius in [2.5, 10.0] {
        let q = project_l2_ball(&v, radius);
        println!("radius {radius:>4}: {:?} (norm {:.3})", &q[..], q.norm());
    }
    Ok(())
}
