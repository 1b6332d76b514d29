use super::{dot, norm, LinalgError, Mat, Vec64, MAX_DIM};

/// Sweep cap for one-sided Jacobi.
pub const MAX_SWEEPS: usize = 100;
/// A column pair is considered orthogonal once `|gᵢ·gⱼ| ≤ tol ‖gᵢ‖‖gⱼ‖`.
pub const SVD_TOLERANCE: f64 = 1e-12;

/// Thin singular value decomposition `m = u · diag(sigma) · vᵀ`.
///
/// For an `r×c` input, `u` is `r×k`, `v` is `c×k` with `k = min(r, c)`, both with
/// orthonormal columns, and `sigma` is non-negative and non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Mat,
    pub sigma: Vec64,
    pub v: Mat,
}

impl SvdResult {
    /// `u · diag(sigma) · vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let (r, c, k) = (self.u.rows(), self.v.rows(), self.sigma.len());
        Mat::from_fn(r, c, |i, j| {
            (0..k)
                .map(|l| self.u[(i, l)] * self.sigma[l] * self.v[(j, l)])
                .sum()
        })
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(m: &Mat) -> Result<SvdResult, LinalgError> {
    if m.rows().max(m.cols()) > MAX_DIM {
        return Err(LinalgError::Shape(format!(
            "{}x{} exceeds the {MAX_DIM} dimension limit",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// Requires `rows >= cols`. Columns of `m` are rotated until mutually orthogonal;
/// their norms are then the singular values.
fn jacobi_tall(m: &Mat) -> Result<SvdResult, LinalgError> {
    let (rows, cols) = (m.rows(), m.cols());
    // Stored transposed so each working column is a contiguous slice.
    let mut g: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| m[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = cols == 1;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        converged = true;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if gamma == 0.0 || gamma.abs() <= SVD_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }

    let sigma: Vec<f64> = g.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let sigma_max = sigma[order[0]];
    // Columns this small carry no reliable direction; they get completed below.
    let floor = sigma_max * f64::EPSILON * rows as f64;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > floor && sigma[j] > 0.0 {
            u_cols.push(g[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            pending.push(slot);
        }
    }
    for slot in pending {
        u_cols[slot] = complete_basis(&u_cols, slot, rows);
    }

    let sorted_sigma: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let u = Mat::from_fn(rows, cols, |i, l| u_cols[l][i]);
    let v_mat = Mat::from_fn(cols, cols, |i, l| v[order[l]][i]);
    Ok(SvdResult {
        u,
        sigma: sorted_sigma.into(),
        v: v_mat,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (a, b) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Unit vector orthogonal to every non-zero column of `cols` other than `skip`.
fn complete_basis(cols: &[Vec<f64>], skip: usize, rows: usize) -> Vec<f64> {
    let mut best = vec![0.0; rows];
    let mut best_norm = -1.0;
    for k in 0..rows {
        let mut cand = vec![0.0; rows];
        cand[k] = 1.0;
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for (l, col) in cols.iter().enumerate() {
                if l == skip {
                    continue;
                }
                let proj = dot(&cand, col);
                for (c, x) in cand.iter_mut().zip(col) {
                    *c -= proj * x;
                }
            }
        }
        let n = norm(&cand);
        if n > best_norm {
            best_norm = n;
            best = cand;
        }
        if n > 0.5 {
            break;
        }
    }
    best.iter().map(|x| x / best_norm).collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> Result<f64, LinalgError> {
    Ok(svd(m)?.sigma[0])
}

/// Frobenius-nearest matrix whose spectral norm is at most `lambda`, obtained by
/// clamping each singular value to `lambda`. Inputs already inside the ball are
/// returned unchanged.
pub fn clip_singular_values(m: &Mat, lambda: f64) -> Result<Mat, LinalgError> {
    if !(lambda > 0.0) {
        return Err(LinalgError::Shape(format!(
            "clip radius must be positive, got {lambda}"
        )));
    }
    let d = svd(m)?;
    if d.sigma[0] <= lambda {
        return Ok(m.clone());
    }
    let clipped = SvdResult {
        sigma: d
            .sigma
            .iter()
            .map(|s| s.min(lambda))
            .collect::<Vec<_>>()
            .into(),
        ..d
    };
    Ok(clipped.reconstruct())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rel_err(a: &Mat, b: &Mat) -> f64 {
        a.sub(b).frobenius_norm() / a.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    fn assert_orthonormal_cols(m: &Mat, tol: f64) {
        let gram = m.transpose().matmul(m).unwrap();
        assert!(
            gram.max_abs_diff(&Mat::identity(m.cols())) < tol,
            "{gram:?}"
        );
    }

    /// Cyclic two-sided Jacobi eigen-solver for symmetric matrices.
    fn jacobi_eigenvalues(mut a: Mat) -> Vec<f64> {
        let n = a.rows();
        for _ in 0..200 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|ij| a[ij] * a[ij])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    #[test]
    fn diagonal_input() {
        let d = svd(&Mat::diag(&[3.0, 1.0])).unwrap();
        assert_eq!(&*d.sigma, &[3.0, 1.0]);
        for i in 0..2 {
            assert!((d.u[(i, i)].abs() - 1.0).abs() < 1e-15);
            assert!((d.v[(i, i)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let d = svd(&Mat::zeros(2, 3)).unwrap();
        assert_eq!(&*d.sigma, &[0.0, 0.0]);
        assert_orthonormal_cols(&d.u, 1e-14);
        assert_orthonormal_cols(&d.v, 1e-14);
    }

    #[test]
    fn rank_deficient_input() {
        let m = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 0.0, 0.0]]).unwrap();
        let d = svd(&m).unwrap();
        assert_orthonormal_cols(&d.u, 1e-12);
        assert_orthonormal_cols(&d.v, 1e-12);
        assert!(rel_err(&m, &d.reconstruct()) < 1e-14);
        assert!(d.sigma[1] < 1e-14);
    }

    #[test]
    fn singular_values_match_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random(&mut rng, 5, 5);
            let ev = jacobi_eigenvalues(m.transpose().matmul(&m).unwrap());
            let d = svd(&m).unwrap();
            for (s, e) in d.sigma.iter().zip(&ev) {
                assert!((s - e.max(0.0).sqrt()).abs() < 1e-9, "{s} vs {}", e.sqrt());
            }
        }
    }

    #[test]
    fn non_square_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, c) in [(3, 7), (7, 3), (1, 5), (5, 1), (10, 9)] {
            let m = random(&mut rng, r, c);
            let d = svd(&m).unwrap();
            assert_eq!((d.u.rows(), d.u.cols()), (r, r.min(c)));
            assert_eq!((d.v.rows(), d.v.cols()), (c, r.min(c)));
            assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert_orthonormal_cols(&d.u, 1e-11);
            assert_orthonormal_cols(&d.v, 1e-11);
            assert!(rel_err(&m, &d.reconstruct()) < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&Mat::identity(3)).unwrap(), 1.0);
        assert_eq!(spectral_norm(&Mat::diag(&[0.5, 0.95])).unwrap(), 0.95);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random(&mut rng, 4, 4);
            let mtm = m.transpose().matmul(&m).unwrap();
            let mut x = vec![1.0, 0.5, -0.25, 0.125];
            let mut lambda = 0.0;
            for _ in 0..20_000 {
                let y = mtm.matvec(&x);
                let n = norm(&y);
                x = y.iter().map(|v| v / n).collect();
                lambda = n;
            }
            let s = spectral_norm(&m).unwrap();
            assert!((s - lambda.sqrt()).abs() < 1e-8, "{s} vs {}", lambda.sqrt());
        }
    }

    #[test]
    fn clip_diagonal() {
        let c = clip_singular_values(&Mat::diag(&[2.0, 0.5]), 0.95).unwrap();
        assert!(c.max_abs_diff(&Mat::diag(&[0.95, 0.5])) < 1e-15);
    }

    #[test]
    fn clip_interior_is_identity() {
        let m = Mat::from_rows(&[&[0.1, 0.2], &[-0.3, 0.05]]).unwrap();
        assert_eq!(clip_singular_values(&m, 0.9).unwrap(), m);
    }

    #[test]
    fn clip_rejects_non_positive_radius() {
        assert!(clip_singular_values(&Mat::identity(2), 0.0).is_err());
    }

    /// `R(a) diag(s1, s2) R(b)ᵀ` as a row-major 2x2 array.
    fn param_matrix(a: f64, b: f64, s1: f64, s2: f64) -> [f64; 4] {
        let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
        [
            ca * s1 * cb + sa * s2 * sb,
            ca * s1 * sb - sa * s2 * cb,
            sa * s1 * cb - ca * s2 * sb,
            sa * s1 * sb + ca * s2 * cb,
        ]
    }

    fn dist(m: &Mat, x: &[f64; 4]) -> f64 {
        m.as_slice()
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn clip_matches_grid_search() {
        // Every 2x2 matrix with spectral norm ≤ λ is R(a) diag(s1, s2) R(b)ᵀ with
        // |s1|, |s2| ≤ λ. Coarse grid over that set, then pattern-search refinement.
        use std::f64::consts::PI;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lambda = 0.9;
        for _ in 0..5 {
            let m = random(&mut rng, 2, 2).scaled(2.0);
            let clipped = clip_singular_values(&m, lambda).unwrap();

            let (na, ns) = (48, 12);
            let mut best = (f64::INFINITY, [0.0; 4]);
            for ia in 0..na {
                let a = PI * ia as f64 / na as f64;
                for ib in 0..2 * na {
                    let b = PI * ib as f64 / na as f64;
                    for i1 in 0..=ns {
                        for i2 in 0..=ns {
                            let s1 = lambda * (2.0 * i1 as f64 / ns as f64 - 1.0);
                            let s2 = lambda * (2.0 * i2 as f64 / ns as f64 - 1.0);
                            let d = dist(&m, &param_matrix(a, b, s1, s2));
                            if d < best.0 {
                                best = (d, [a, b, s1, s2]);
                            }
                        }
                    }
                }
            }
            let mut p = best.1;
            let mut f = best.0;
            let mut step = [
                PI / na as f64,
                PI / na as f64,
                lambda / ns as f64,
                lambda / ns as f64,
            ];
            while step.iter().any(|s| *s > 1e-10) {
                let mut improved = false;
                for k in 0..4 {
                    for dir in [-1.0, 1.0] {
                        let mut q = p;
                        q[k] += dir * step[k];
                        if k >= 2 {
                            q[k] = q[k].clamp(-lambda, lambda);
                        }
                        let fq = dist(&m, &param_matrix(q[0], q[1], q[2], q[3]));
                        if fq < f {
                            p = q;
                            f = fq;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step.iter_mut().for_each(|s| *s *= 0.5);
                }
            }
            let oracle = param_matrix(p[0], p[1], p[2], p[3]);
            assert!(
                dist(&clipped, &oracle) < 1e-3,
                "clip {clipped:?} vs oracle {oracle:?}"
            );
            assert!(dist(&m, &clipped.as_slice().try_into().unwrap()) <= f + 1e-12);
        }
    }
}
