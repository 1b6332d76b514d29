//! Local-regret accounting, the closed-form smoothness and regret bounds for
//! spectrally constrained Elman networks, and a finite-difference estimate of
//! the smoothness actually encountered along a training trajectory.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::models::SrnnParams;
use crate::wingrad::GradientTriple;

/// Worst-case smoothness constants of the smoothed loss with respect to
/// `W` (θ), `U` (μ) and the cross term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessBounds {
    pub beta_theta: f64,
    pub beta_mu: f64,
    pub beta_thetamu: f64,
    pub beta: f64,
}

pub fn smoothness_bounds(n_h: usize, n_x: usize, lambda: f64) -> Result<SmoothnessBounds> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "spectral radius {lambda} must lie in [0, 1)"
        )));
    }
    if n_h == 0 || n_x == 0 {
        return Err(Error::contract("dimensions must be positive"));
    }
    let (nh, nx) = (n_h as f64, n_x as f64);
    let denom = (1.0 - lambda).powi(3);
    let beta_theta = 4.0 * nh * nh.sqrt() / denom;
    let beta_mu = 4.0 * nx * nh.sqrt() / denom;
    let beta_thetamu = 4.0 * nh * nx.sqrt() / denom;
    Ok(SmoothnessBounds {
        beta_theta,
        beta_mu,
        beta_thetamu,
        beta: beta_theta.max(beta_mu).max(beta_thetamu),
    })
}

/// Upper bound on the local regret after `t` steps when `η ≤ 1/β`:
/// `(16√n_h/η)(T/w) + 16√n_h/η`.
pub fn regret_bound(eta: f64, w: usize, t: usize, n_h: usize) -> f64 {
    let c = 16.0 * (n_h as f64).sqrt() / eta;
    c * (t as f64 / w as f64) + c
}

/// Bound on how far two state trajectories can drift apart after `t` steps
/// when both runs start from the same state, read the same inputs in
/// `[-1, 1]`, and all weight matrices have spectral norm at most `lambda`:
/// `‖Δh_t‖ ≤ Σ_{i<t} λ^i (√n_h‖ΔW‖_F + √n_x‖ΔU‖_F)`.
pub fn state_divergence_bound(
    n_h: usize,
    n_x: usize,
    lambda: f64,
    t: usize,
    dw_frob: f64,
    du_frob: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "spectral radius {lambda} must lie in [0, 1)"
        )));
    }
    let geometric = (1.0 - lambda.powi(t as i32)) / (1.0 - lambda);
    Ok(geometric * ((n_h as f64).sqrt() * dw_frob + (n_x as f64).sqrt() * du_frob))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRow {
    pub t: usize,
    pub grad_sq_theta: f64,
    pub grad_sq_mu: f64,
    /// Running sum up to and including `t`.
    pub regret: f64,
    pub normalized_regret: f64,
    pub beta_exp: Option<f64>,
}

/// Running sum of squared projected-gradient norms.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub eta: f64,
    pub w: usize,
    pub lambda: f64,
    pub n_h: usize,
    pub n_x: usize,
    rows: Vec<RegretRow>,
}

impl RegretLedger {
    pub fn new(eta: f64, w: usize, lambda: f64, n_h: usize, n_x: usize) -> Self {
        Self {
            eta,
            w,
            lambda,
            n_h,
            n_x,
            rows: Vec::new(),
        }
    }

    /// Appends step `t` (1-based, strictly increasing).
    pub fn record(&mut self, t: usize, projected: &GradientTriple) -> Result<()> {
        let sq = |m: &Mat| m.as_slice().iter().map(|v| v * v).sum::<f64>();
        self.record_norms(t, sq(&projected.g_w), sq(&projected.g_u))
    }

    pub fn record_norms(&mut self, t: usize, grad_sq_theta: f64, grad_sq_mu: f64) -> Result<()> {
        if t == 0 || self.rows.last().is_some_and(|r| r.t >= t) {
            return Err(Error::contract(format!(
                "regret timestep {t} is not increasing"
            )));
        }
        if !(grad_sq_theta.is_finite() && grad_sq_mu.is_finite()) {
            return Err(Error::NumericOverflow {
                t,
                context: "regret accounting",
            });
        }
        let regret = self.total() + grad_sq_theta + grad_sq_mu;
        self.rows.push(RegretRow {
            t,
            grad_sq_theta,
            grad_sq_mu,
            regret,
            normalized_regret: regret / t as f64,
            beta_exp: None,
        });
        Ok(())
    }

    /// Attaches a smoothness estimate to the newest row.
    pub fn set_beta_exp(&mut self, beta: Option<f64>) {
        if let Some(row) = self.rows.last_mut() {
            row.beta_exp = beta;
        }
    }

    pub fn total(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    pub fn rows(&self) -> &[RegretRow] {
        &self.rows
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.normalized_regret).collect()
    }

    pub fn bound(&self) -> f64 {
        regret_bound(
            self.eta,
            self.w,
            self.rows.last().map_or(0, |r| r.t),
            self.n_h,
        )
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("writing regret table: {e}"));
        wtr.write_record([
            "t",
            "grad_sq_theta",
            "grad_sq_mu",
            "regret",
            "normalized_regret",
            "beta_exp",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            wtr.write_record([
                r.t.to_string(),
                r.grad_sq_theta.to_string(),
                r.grad_sq_mu.to_string(),
                r.regret.to_string(),
                r.normalized_regret.to_string(),
                r.beta_exp.map_or(String::new(), |b| b.to_string()),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<regret table>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Mean of the first and last quarter of a series.
pub fn quarter_means(series: &[f64]) -> Option<(f64, f64)> {
    let q = series.len() / 4;
    if q == 0 {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&series[..q]), mean(&series[series.len() - q..])))
}

/// Finite-difference smoothness along one update. `None` marks a block whose
/// parameters did not move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessEstimate {
    pub beta_theta: Option<f64>,
    pub beta_mu: Option<f64>,
}

impl SmoothnessEstimate {
    pub fn beta(&self) -> Option<f64> {
        match (self.beta_theta, self.beta_mu) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

/// `‖∇L(θ_{t+1}) − ∇L(θ_t)‖ / ‖θ_{t+1} − θ_t‖` per block, with both
/// gradients taken of the same smoothed loss.
pub fn estimate_smoothness(
    grad_t: &GradientTriple,
    grad_t1: &GradientTriple,
    params_t: &SrnnParams,
    params_t1: &SrnnParams,
) -> SmoothnessEstimate {
    let ratio = |g0: &Mat, g1: &Mat, p0: &Mat, p1: &Mat| {
        let step = p1.sub(p0).frobenius_norm();
        (step > 0.0).then(|| g1.sub(g0).frobenius_norm() / step)
    };
    SmoothnessEstimate {
        beta_theta: ratio(&grad_t.g_w, &grad_t1.g_w, &params_t.w, &params_t1.w),
        beta_mu: ratio(&grad_t.g_u, &grad_t1.g_u, &params_t.u, &params_t1.u),
    }
}

/// Per-run collection of smoothness estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothnessTrace {
    /// `(t, estimate)` for each instrumented step.
    pub entries: Vec<(usize, SmoothnessEstimate)>,
}

impl SmoothnessTrace {
    pub fn push(&mut self, t: usize, e: SmoothnessEstimate) {
        self.entries.push((t, e));
    }

    /// Steps where neither block moved.
    pub fn skipped(&self) -> usize {
        self.entries
            .iter()
            .filter(|(_, e)| e.beta().is_none())
            .count()
    }

    fn values<F: Fn(&SmoothnessEstimate) -> Option<f64> + 'static>(
        &self,
        f: F,
    ) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().filter_map(move |(_, e)| f(e))
    }

    pub fn max_theta(&self) -> Option<f64> {
        self.values(|e| e.beta_theta).reduce(f64::max)
    }

    pub fn max_mu(&self) -> Option<f64> {
        self.values(|e| e.beta_mu).reduce(f64::max)
    }

    pub fn max(&self) -> Option<f64> {
        self.values(|e| e.beta()).reduce(f64::max)
    }

    pub fn min(&self) -> Option<f64> {
        self.values(|e| e.beta()).reduce(f64::min)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Config(format!("writing smoothness table: {e}"));
        let opt = |v: Option<f64>| v.map_or(String::new(), |b| b.to_string());
        wtr.write_record(["t", "beta_theta", "beta_mu", "beta"])
            .map_err(csv_err)?;
        for (t, e) in &self.entries {
            wtr.write_record([
                t.to_string(),
                opt(e.beta_theta),
                opt(e.beta_mu),
                opt(e.beta()),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<smoothness table>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn bounds_examples() {
        let b = smoothness_bounds(10, 9, 0.95).unwrap();
        assert!(close(b.beta_theta, 1.0119288e6, 1e-7));
        assert!(close(b.beta_mu, 9.107360e5, 1e-6));
        assert!(close(b.beta_thetamu, 9.6e5, 1e-12));
        assert_eq!(b.beta, b.beta_theta);
        let b = smoothness_bounds(4, 2, 0.0).unwrap();
        assert_eq!(b.beta_theta, 32.0);
        let b = smoothness_bounds(1, 1, 0.5).unwrap();
        assert_eq!(
            (b.beta_theta, b.beta_mu, b.beta_thetamu),
            (32.0, 32.0, 32.0)
        );
        assert!(matches!(
            smoothness_bounds(3, 3, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bounds_grow_with_lambda() {
        let mut prev = 0.0;
        for k in 0..99 {
            let b = smoothness_bounds(5, 3, k as f64 / 100.0).unwrap().beta;
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn regret_bound_examples() {
        assert!(close(regret_bound(0.03, 200, 7000, 10), 60_715.7, 1e-6));
        let c = 16.0 * 3f64.sqrt() / 0.2;
        assert!(close(regret_bound(0.2, 40, 40, 3), 2.0 * c, 1e-15));
        assert_eq!(regret_bound(1.0, 9, 9, 1), 32.0);
    }

    #[test]
    fn ledger_arithmetic() {
        let mut l = RegretLedger::new(0.1, 5, 0.5, 2, 2);
        for t in 1..=10 {
            l.record_norms(t, 0.0, 0.0).unwrap();
        }
        assert_eq!(l.total(), 0.0);
        let mut l = RegretLedger::new(0.1, 5, 0.5, 2, 2);
        for t in 1..=8 {
            l.record_norms(t, 0.25, 0.5).unwrap();
        }
        assert_eq!(l.total(), 6.0);
        assert!(l.normalized().iter().all(|v| *v == 0.75));
        assert!(l.record_norms(8, 0.0, 0.0).is_err());
    }

    #[test]
    fn ledger_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<(f64, f64)> = (0..300)
            .map(|_| (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)))
            .collect();
        let mut l = RegretLedger::new(0.1, 5, 0.5, 2, 2);
        for (t, (a, b)) in values.iter().enumerate() {
            l.record_norms(t + 1, *a, *b).unwrap();
        }
        let naive: f64 = values.iter().map(|(a, b)| a + b).sum();
        assert!((l.total() - naive).abs() < 1e-12);
        assert!(l.rows().windows(2).all(|w| w[1].regret >= w[0].regret));
    }

    #[test]
    fn ledger_records_frobenius_norms() {
        let mut l = RegretLedger::new(0.1, 5, 0.5, 2, 1);
        let g = GradientTriple {
            g_w: Mat::diag(&[3.0, 4.0]),
            g_u: Mat::from_fn(2, 1, |_, _| 1.0),
            g_out: Vec64::zeros(2),
        };
        l.record(1, &g).unwrap();
        assert_eq!(
            (l.rows()[0].grad_sq_theta, l.rows()[0].grad_sq_mu),
            (25.0, 2.0)
        );
    }

    #[test]
    fn csv_round_trip() {
        let mut l = RegretLedger::new(0.1, 5, 0.5, 2, 2);
        l.record_norms(1, 0.1, 0.2).unwrap();
        l.set_beta_exp(Some(3.5));
        l.record_norms(2, 1.0 / 3.0, 0.0).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][5].parse::<f64>().unwrap(), 3.5);
        assert_eq!(&rows[1][5], "");
        assert_eq!(rows[1][3].parse::<f64>().unwrap(), l.rows()[1].regret);
    }

    #[test]
    fn quarter_mean_examples() {
        assert_eq!(quarter_means(&[4.0, 3.0, 2.0, 1.0]), Some((4.0, 1.0)));
        assert_eq!(quarter_means(&[1.0, 2.0]), None);
    }

    #[test]
    fn smoothness_of_quadratic() {
        // For q(θ) = 0.5 c‖θ‖² the gradient is cθ, so the ratio is exactly c.
        let c = 2.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p0 = SrnnParams::gaussian(3, 2, 1.0, &mut rng);
        let p1 = SrnnParams::gaussian(3, 2, 1.0, &mut rng);
        let grad = |p: &SrnnParams| GradientTriple {
            g_w: p.w.scaled(c),
            g_u: p.u.scaled(c),
            g_out: Vec64::zeros(3),
        };
        let e = estimate_smoothness(&grad(&p0), &grad(&p1), &p0, &p1);
        assert!((e.beta_theta.unwrap() - c).abs() < 1e-12);
        assert!((e.beta_mu.unwrap() - c).abs() < 1e-12);
        let same = estimate_smoothness(&grad(&p0), &grad(&p0), &p0, &p0);
        assert_eq!(same.beta(), None);
        let mut trace = SmoothnessTrace::default();
        trace.push(1, e);
        trace.push(2, same);
        assert_eq!(trace.skipped(), 1);
        assert!((trace.max().unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn divergence_bound_is_linear() {
        assert_eq!(state_divergence_bound(4, 9, 0.5, 1, 1.0, 1.0).unwrap(), 5.0);
        assert_eq!(state_divergence_bound(4, 9, 0.5, 2, 1.0, 1.0).unwrap(), 7.5);
        assert_eq!(state_divergence_bound(4, 9, 0.5, 0, 1.0, 1.0).unwrap(), 0.0);
        assert!(state_divergence_bound(4, 9, 1.0, 3, 1.0, 1.0).is_err());
    }
}
