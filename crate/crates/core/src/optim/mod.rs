//! Windowed online gradient descent with spectral constraints, and the
//! unconstrained first-order baselines.

mod baseline;

pub use baseline::{baseline_step, Baseline, BaselineConfig, BaselineKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{clip_singular_values, Mat, Vec64};
use crate::models::SrnnParams;
use crate::wingrad::{GradMode, GradientTriple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WogdConfig {
    /// Step size for `W` and `U`.
    pub eta: f64,
    /// Window size of the smoothed loss.
    pub w: usize,
    /// Radius of the spectral-norm ball for `W` and `U`.
    pub lambda: f64,
    /// Projection is only performed when the Frobenius norm after the step exceeds this.
    pub alpha: f64,
    /// `c` in the readout schedule `c / √t`.
    pub out_lr_scale: f64,
    /// Maximum Euclidean norm of the readout.
    pub out_radius: f64,
    pub grad_mode: GradMode,
}

impl Default for WogdConfig {
    fn default() -> Self {
        Self {
            eta: 0.03,
            w: 200,
            lambda: 0.95,
            alpha: 7.5,
            out_lr_scale: 8.0,
            out_radius: 2.5,
            grad_mode: GradMode::Replay,
        }
    }
}

impl WogdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.w == 0 {
            return Err(Error::Config("window size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.lambda) || self.lambda == 0.0 {
            return Err(Error::Config(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if !(self.out_radius > 0.0) || !(self.out_lr_scale > 0.0) {
            return Err(Error::Config(
                "readout radius and step scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `v` rescaled onto the closed ball of the given radius if it lies outside.
pub fn project_l2_ball(v: &Vec64, radius: f64) -> Vec64 {
    let n = v.norm();
    if n <= radius {
        v.clone()
    } else {
        v.scaled(radius / n)
    }
}

/// Optimizer state for one run: counts how often the lazy projection fired.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Wogd {
    pub projections: usize,
}

impl Wogd {
    pub fn step(
        &mut self,
        cfg: &WogdConfig,
        params: &mut SrnnParams,
        grads: &GradientTriple,
        t: usize,
    ) -> Result<()> {
        let fired = wogd_step(cfg, params, grads, t)?;
        self.projections += fired;
        Ok(())
    }
}

/// One update at timestep `t ≥ 1`. Returns how many of `W`, `U` were projected.
pub fn wogd_step(
    cfg: &WogdConfig,
    params: &mut SrnnParams,
    grads: &GradientTriple,
    t: usize,
) -> Result<usize> {
    if t == 0 {
        return Err(Error::contract("timesteps start at 1"));
    }
    if !grads.g_w.is_finite() || !grads.g_u.is_finite() || !grads.g_out.is_finite() {
        return Err(Error::NumericOverflow {
            t,
            context: "gradient",
        });
    }
    let out_lr = cfg.out_lr_scale / (t as f64).sqrt();
    let mut theta = params.theta_out.clone();
    for (v, g) in theta.iter_mut().zip(grads.g_out.iter()) {
        *v -= out_lr * g;
    }
    let theta = project_l2_ball(&theta, cfg.out_radius);

    let mut fired = 0;
    let mut lazy = |m: &Mat, g: &Mat| -> Result<Mat> {
        let stepped = m.add_scaled(g, -cfg.eta);
        if stepped.frobenius_norm() > cfg.alpha {
            let clipped = clip_singular_values(&stepped, cfg.lambda)?;
            if clipped != stepped {
                fired += 1;
            }
            Ok(clipped)
        } else {
            Ok(stepped)
        }
    };
    let w = lazy(&params.w, &grads.g_w)?;
    let u = lazy(&params.u, &grads.g_u)?;
    if !w.is_finite() || !u.is_finite() || !theta.is_finite() {
        return Err(Error::NumericOverflow {
            t,
            context: "parameter update",
        });
    }
    params.w = w;
    params.u = u;
    params.theta_out = theta;
    Ok(fired)
}

/// `(θ − Π[θ − η g]) / η` for the `W` and `U` blocks, always with the exact
/// spectral projection. The readout block is returned unchanged.
pub fn projected_gradient(
    before: &SrnnParams,
    grads: &GradientTriple,
    cfg: &WogdConfig,
) -> Result<GradientTriple> {
    let proj = |m: &Mat, g: &Mat| -> Result<Mat> {
        let target = clip_singular_values(&m.add_scaled(g, -cfg.eta), cfg.lambda)?;
        Ok(m.sub(&target).scaled(1.0 / cfg.eta))
    };
    Ok(GradientTriple {
        g_w: proj(&before.w, &grads.g_w)?,
        g_u: proj(&before.u, &grads.g_u)?,
        g_out: grads.g_out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use crate::models::Params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
        Mat::from_fn(r, c, |_, _| scale * rng.random_range(-1.0..1.0))
    }

    fn random_grads(rng: &mut ChaCha8Rng, n_h: usize, n_x: usize, scale: f64) -> GradientTriple {
        GradientTriple {
            g_w: random_mat(rng, n_h, n_h, scale),
            g_u: random_mat(rng, n_h, n_x, scale),
            g_out: (0..n_h)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>()
                .into(),
        }
    }

    #[test]
    fn ball_examples() {
        let v: Vec64 = vec![0.3, 0.4].into();
        assert_eq!(project_l2_ball(&v, 1.0), v);
        let p = project_l2_ball(&vec![3.0, 4.0].into(), 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ball_is_nearest_point_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let v: Vec64 = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)].into();
            let p = project_l2_ball(&v, 1.0);
            let dist = |a: f64, b: f64| ((v[0] - a).powi(2) + (v[1] - b).powi(2)).sqrt();
            let mut best = f64::INFINITY;
            let n = 400;
            for i in 0..=n {
                for j in 0..=n {
                    let (a, b) = (
                        -1.0 + 2.0 * i as f64 / n as f64,
                        -1.0 + 2.0 * j as f64 / n as f64,
                    );
                    if a * a + b * b <= 1.0 {
                        best = best.min(dist(a, b));
                    }
                }
            }
            assert!(p.norm() <= 1.0 + 1e-12);
            assert!(dist(p[0], p[1]) <= best + 1e-12);
            assert!(best - dist(p[0], p[1]) < 1e-2);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = SrnnParams::gaussian(4, 3, 0.1, &mut rng);
        let before = p.clone();
        let cfg = WogdConfig::default();
        wogd_step(&cfg, &mut p, &GradientTriple::zeros(4, 3), 5).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn lazy_projection_fires_above_alpha() {
        // ‖W − ηG‖_F = 8 > 7.5 after the step.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = random_mat(&mut rng, 5, 5, 1.0);
        let target = raw.scaled(8.0 / raw.frobenius_norm());
        let cfg = WogdConfig {
            eta: 0.5,
            ..WogdConfig::default()
        };
        let mut p = SrnnParams::zeros(5, 2);
        let grads = GradientTriple {
            g_w: target.scaled(-1.0 / cfg.eta),
            ..GradientTriple::zeros(5, 2)
        };
        let mut opt = Wogd::default();
        opt.step(&cfg, &mut p, &grads, 1).unwrap();
        assert_eq!(opt.projections, 1);
        assert!(spectral_norm(&p.w).unwrap() <= 0.95 + 1e-9);
    }

    #[test]
    fn lazy_projection_skips_below_alpha() {
        let mut p = SrnnParams::zeros(2, 1);
        let grads = GradientTriple {
            g_w: Mat::diag(&[-10.0, 0.0]),
            ..GradientTriple::zeros(2, 1)
        };
        let cfg = WogdConfig {
            eta: 0.3,
            ..WogdConfig::default()
        };
        assert_eq!(wogd_step(&cfg, &mut p, &grads, 1).unwrap(), 0);
        // Spectral norm 3 exceeds λ, but the Frobenius trigger 7.5 was not reached.
        assert!((p.w[(0, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn readout_schedule_and_radius() {
        let mut p = SrnnParams::zeros(2, 1);
        let grads = GradientTriple {
            g_out: vec![-0.1, 0.0].into(),
            ..GradientTriple::zeros(2, 1)
        };
        let cfg = WogdConfig {
            out_lr_scale: 1.0,
            out_radius: 1.0,
            ..WogdConfig::default()
        };
        wogd_step(&cfg, &mut p, &grads, 4).unwrap();
        assert!((p.theta_out[0] - 0.05).abs() < 1e-15);
        let big = GradientTriple {
            g_out: vec![-100.0, 0.0].into(),
            ..GradientTriple::zeros(2, 1)
        };
        wogd_step(&cfg, &mut p, &big, 1).unwrap();
        assert!((p.theta_out.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degrades_to_sgd_without_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = SrnnParams::gaussian(3, 2, 0.3, &mut rng);
        let mut q = p.clone();
        let grads = random_grads(&mut rng, 3, 2, 1.0);
        let cfg = WogdConfig {
            eta: 0.1,
            alpha: 1e12,
            out_radius: 1e12,
            out_lr_scale: 0.1,
            ..WogdConfig::default()
        };
        wogd_step(&cfg, &mut p, &grads, 1).unwrap();
        let sgd = BaselineConfig {
            kind: BaselineKind::Sgd,
            lr: 0.1,
            ..BaselineConfig::default()
        };
        let mut state = Baseline::new(sgd, &q).unwrap();
        state.step(&mut q, &grads, 1).unwrap();
        for (a, b) in p.flat().iter().zip(q.flat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = SrnnParams::zeros(2, 1);
        let mut g = GradientTriple::zeros(2, 1);
        g.g_u[(0, 0)] = f64::NAN;
        assert!(matches!(
            wogd_step(&WogdConfig::default(), &mut p, &g, 3),
            Err(Error::NumericOverflow { t: 3, .. })
        ));
        assert!(wogd_step(
            &WogdConfig::default(),
            &mut p,
            &GradientTriple::zeros(2, 1),
            0
        )
        .is_err());
    }

    #[test]
    fn projected_gradient_interior_equals_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = SrnnParams::gaussian(3, 2, 0.05, &mut rng);
        let g = random_grads(&mut rng, 3, 2, 0.1);
        let cfg = WogdConfig {
            eta: 0.1,
            ..WogdConfig::default()
        };
        let pg = projected_gradient(&p, &g, &cfg).unwrap();
        assert!(pg.g_w.max_abs_diff(&g.g_w) < 1e-12);
        assert!(pg.g_u.max_abs_diff(&g.g_u) < 1e-12);
        let z = projected_gradient(&p, &GradientTriple::zeros(3, 2), &cfg).unwrap();
        assert!(z.squared_norm() < 1e-24);
    }

    #[test]
    fn projected_gradient_is_no_larger_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = WogdConfig {
            eta: 0.5,
            lambda: 0.5,
            ..WogdConfig::default()
        };
        for _ in 0..50 {
            // Feasible start on the boundary, step pushes outside.
            let w = clip_singular_values(&random_mat(&mut rng, 3, 3, 2.0), 0.5).unwrap();
            let u = clip_singular_values(&random_mat(&mut rng, 3, 2, 2.0), 0.5).unwrap();
            let p = SrnnParams::new(w, u, Vec64::zeros(3)).unwrap();
            let g = random_grads(&mut rng, 3, 2, 3.0);
            let pg = projected_gradient(&p, &g, &cfg).unwrap();
            assert!(pg.g_w.frobenius_norm() <= g.g_w.frobenius_norm() + 1e-12);
            assert!(pg.g_u.frobenius_norm() <= g.g_u.frobenius_norm() + 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(WogdConfig::default().validate().is_ok());
        assert!(WogdConfig {
            lambda: 1.0,
            ..WogdConfig::default()
        }
        .validate()
        .is_err());
        assert!(WogdConfig {
            w: 0,
            ..WogdConfig::default()
        }
        .validate()
        .is_err());
        assert!(WogdConfig {
            eta: -1.0,
            ..WogdConfig::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn step_keeps_readout_in_ball_and_projects_when_triggered(
            seed in any::<u64>(),
            scale in 0.1f64..20.0,
            t in 1usize..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = SrnnParams::gaussian(4, 3, 0.3, &mut rng);
            let g = random_grads(&mut rng, 4, 3, scale);
            let cfg = WogdConfig { eta: 0.5, alpha: 1.0, ..WogdConfig::default() };
            let stepped_w = p.w.add_scaled(&g.g_w, -cfg.eta);
            wogd_step(&cfg, &mut p, &g, t).unwrap();
            prop_assert!(p.theta_out.norm() <= cfg.out_radius + 1e-12);
            if stepped_w.frobenius_norm() > cfg.alpha {
                prop_assert!(spectral_norm(&p.w).unwrap() <= cfg.lambda + 1e-9);
            }
        }

        #[test]
        fn ball_projection_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..8), r in 0.01f64..5.0) {
            let v: Vec64 = v.into();
            let once = project_l2_ball(&v, r);
            prop_assert!(once.norm() <= r * (1.0 + 1e-12));
            let twice = project_l2_ball(&once, r);
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * r.max(1.0));
            }
        }
    }
}
