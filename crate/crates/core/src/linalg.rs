//! Small dense solvers used by the linear models and stacking.

/// Solve `A x = b` for symmetric positive definite `A` (row-major, n×n) by
/// Cholesky. Returns `None` when `A` is not numerically positive definite.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 1e-12 * a[i][i].abs().max(1e-300) || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

/// Least squares `min ||X w - y||² + ridge·||w||²` via the normal equations.
/// Returns the coefficients and whether `jitter` had to be added to the
/// diagonal to make the system solvable.
pub fn least_squares(x: &[Vec<f64>], y: &[f64], ridge: f64, jitter: f64) -> Option<(Vec<f64>, bool)> {
    let p = x.first().map_or(0, Vec::len);
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * t;
            for j in 0..=i {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[j][i] = xtx[i][j];
        }
        xtx[i][i] += ridge;
    }
    if let Some(w) = cholesky_solve(&xtx, &xty) {
        return Some((w, false));
    }
    for (i, row) in xtx.iter_mut().enumerate() {
        row[i] += jitter;
    }
    cholesky_solve(&xtx, &xty).map(|w| (w, true))
}

/// Non-negative least squares by enumerating active sets. Only meant for a
/// handful of columns (the stacking problem has three).
pub fn nnls_small(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x.first().map_or(0, Vec::len);
    assert!(p <= 12, "nnls_small enumerates 2^p subsets");
    let mut best = vec![0.0; p];
    let mut best_err: f64 = y.iter().map(|v| v * v).sum();
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let sub: Vec<Vec<f64>> = x.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect();
        let Some((w, _)) = least_squares(&sub, y, 0.0, 1e-10) else {
            continue;
        };
        if w.iter().any(|&v| v < 0.0) {
            continue;
        }
        let err: f64 = sub
            .iter()
            .zip(y)
            .map(|(r, t)| {
                let f: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
                (f - t).powi(2)
            })
            .sum();
        if err < best_err - 1e-15 * best_err.abs() {
            best_err = err;
            best = vec![0.0; p];
            for (k, &j) in cols.iter().enumerate() {
                best[j] = w[k];
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_exact_system() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 + 2.0 * i as f64).collect();
        let (w, jittered) = least_squares(&x, &y, 0.0, 1e-6).unwrap();
        assert!(!jittered);
        assert!((w[0] - 3.0).abs() < 1e-10 && (w[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn singular_falls_back_to_jitter() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let (w, jittered) = least_squares(&x, &y, 0.0, 1e-6).unwrap();
        assert!(jittered);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nnls_clips_negative_weight() {
        // y = c0 exactly; c1 anti-correlated
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, -(i as f64) + 3.0]).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let w = nnls_small(&x, &y);
        assert!((w[0] - 1.0).abs() < 1e-9);
        assert!(w[1].abs() < 1e-12);
    }
}
