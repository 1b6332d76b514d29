//! Two networks inside the spectral ball read the same inputs. Their hidden
//! states can drift apart by no more than the weight gap allows.
//!
//! cargo run --example state_sensitivity

use online_rnn::analysis::state_divergence_bound;
use online_rnn::linalg::{clip_singular_values, Mat, Vec64};
use online_rnn::models::{srnn_step, HiddenState, SrnnParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn main() -> online_rnn::Result<()> {
    let (n_h, n_x, lambda, steps) = (6, 4, 0.9, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let w = clip_singular_values(&random_mat(&mut rng, n_h, n_h, 1.0), lambda)?;
    let u = clip_singular_values(&random_mat(&mut rng, n_h, n_x, 1.0), lambda)?;
    let w2 = clip_singular_values(
        &w.add_scaled(&random_mat(&mut rng, n_h, n_h, 1.0), 0.05),
        lambda,
    )?;
    let u2 = clip_singular_values(
        &u.add_scaled(&random_mat(&mut rng, n_h, n_x, 1.0), 0.05),
        lambda,
    )?;
    let dw = w.sub(&w2).frobenius_norm();
    let du = u.sub(&u2).frobenius_norm();

    let a = SrnnParams::new(w, u, Vec64::zeros(n_h))?;
    let b = SrnnParams::new(w2, u2, Vec64::zeros(n_h))?;
    let (mut ha, mut hb) = (
        HiddenState::zeros(n_h, false),
        HiddenState::zeros(n_h, false),
    );
    println!("||dW||_F = {dw:.4}, ||dU||_F = {du:.4}");
    println!("   t      gap    bound");
    for t in 1..=steps {
        let x: Vec<f64> = (0..n_x).map(|_| rng.random_range(-1.0..1.0)).collect();
        ha = srnn_step(&a, &ha, &x)?;
        hb = srnn_step(&b, &hb, &x)?;
        let gap =
            ha.h.iter()
                .zip(hb.h.iter())
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
        let bound = state_divergence_bound(n_h, n_x, lambda, t, dw, du)?;
        if t <= 5 || t % 10 == 0 {
            println!("{t:>4} {gap:>8.4} {bound:>8.4}");
        }
        assert!(gap <= bound * (1.0 + 1e-12));
    }
    Ok(())
}
