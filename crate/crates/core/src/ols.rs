//! Ordinary / ridge least squares shared by the regression models and the
//! additive Fourier model.
//!
//! `(XᵀX + λI) w = Xᵀy` is solved as the least-squares problem on the
//! augmented system `[X; √λ I] w ≈ [y; 0]` with a Householder QR
//! decomposition, so the normal equations are never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_ii| / max |R_jj|` below which a column is
/// considered linearly dependent.
const RANK_TOL: f64 = 1e-11;

/// Solves the ridge problem for a dense design matrix.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::shape(format!("{n} targets"), y.len()));
    }
    if p == 0 {
        return Err(Error::shape("at least one column", 0));
    }
    if n < p {
        return Err(Error::shape(format!("at least {p} rows"), n));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Domain(format!("ridge penalty must be >= 0, got {ridge}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("design matrix or targets contain non-finite values".into()));
    }

    let (a, mut b) = if ridge > 0.0 {
        let mut a = DMatrix::zeros(n + p, p);
        a.view_mut((0, 0), (n, p)).copy_from(x);
        let s = ridge.sqrt();
        for j in 0..p {
            a[(n + j, j)] = s;
        }
        let mut b = DVector::zeros(n + p);
        b.rows_mut(0, n).copy_from_slice(y);
        (a, b)
    } else {
        (x.clone(), DVector::from_column_slice(y))
    };

    let qr = a.qr();
    qr.q_tr_mul(&mut b);
    let r = qr.r();
    let max_diag = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= RANK_TOL * max_diag) {
        return Err(Error::Singular(format!(
            "column {j} is linearly dependent on the others"
        )));
    }
    let rhs = b.rows(0, p).into_owned();
    let w = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("zero pivot in triangular solve".into()))?;
    Ok(w.iter().copied().collect())
}

/// Convenience wrapper taking row slices.
pub fn fit_ols_rows<R: AsRef<[f64]>>(rows: &[R], y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if let Some(r) = rows.iter().find(|r| r.as_ref().len() != p) {
        return Err(Error::shape(format!("{p} features per row"), r.as_ref().len()));
    }
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i].as_ref()[j]);
    fit_ols(&x, y, ridge)
}

/// Sum of squared residuals of `weights` on the given rows.
pub fn sse<R: AsRef<[f64]>>(rows: &[R], y: &[f64], weights: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, t)| {
            let pred: f64 = r.as_ref().iter().zip(weights).map(|(a, b)| a * b).sum();
            (t - pred).powi(2)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent route: form XᵀX + λI and Xᵀy, then Gaussian elimination
    /// with partial pivoting.
    fn normal_equations(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
        let p = rows[0].len();
        let mut m = vec![vec![0.0; p + 1]; p];
        for (r, t) in rows.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    m[i][j] += r[i] * r[j];
                }
                m[i][p] += r[i] * t;
            }
        }
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += ridge;
        }
        for c in 0..p {
            let piv = (c..p)
                .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
                .unwrap();
            m.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    for k in c..=p {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| m[i][p] / m[i][i]).collect()
    }

    #[test]
    fn one_hot_rows_interpolate() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let y = [3.0, -1.0, 0.5, 7.25];
        let w = fit_ols_rows(&rows, &y, 0.0).unwrap();
        for (a, b) in w.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_linear_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = [1.5, -2.0, 0.25];
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&truth).map(|(a, b)| a * b).sum())
            .collect();
        let w = fit_ols_rows(&rows, &y, 0.0).unwrap();
        assert!(sse(&rows, &y, &w).sqrt() < 1e-9);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-5.0..5.0)).collect();
        for ridge in [0.0, 0.3] {
            let w = fit_ols_rows(&rows, &y, ridge).unwrap();
            let oracle = normal_equations(&rows, &y, ridge);
            for (a, b) in w.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rank_deficient_needs_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ols_rows(&rows, &y, 0.0), Err(Error::Singular(_))));
        let w = fit_ols_rows(&rows, &y, 1e-6).unwrap();
        assert!(sse(&rows, &y, &w) < 1e-6);
    }

    #[test]
    fn shape_errors() {
        let rows = vec![vec![1.0, 2.0]];
        assert!(matches!(fit_ols_rows(&rows, &[1.0], 0.0), Err(Error::Shape { .. })));
        let rows = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(fit_ols_rows(&rows, &[1.0, 2.0], 0.0), Err(Error::Shape { .. })));
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(matches!(fit_ols_rows(&rows, &[1.0], 0.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn deterministic() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![1.0, (i as f64).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).exp().ln()).collect();
        assert_eq!(fit_ols_rows(&rows, &y, 1e-8).unwrap(), fit_ols_rows(&rows, &y, 1e-8).unwrap());
    }
}
