//! Independent eigenvalue route used to check the production solver:
//! Givens-rotation reduction to tridiagonal form, then Sturm-sequence
//! bisection. Slow (cubic with a large constant) but simple.

use super::tridiag::Tridiagonal;
use super::SymmetricMatrix;

/// Tridiagonal form by plane rotations, zeroing column entries from the
/// bottom up.
pub fn givens_tridiagonalize(h: &SymmetricMatrix) -> Tridiagonal {
    let n = h.dim();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| h.row(i).to_vec()).collect();
    for k in 0..n.saturating_sub(2) {
        for i in (k + 2..n).rev() {
            let (x, y) = (a[i - 1][k], a[i][k]);
            if y == 0.0 {
                continue;
            }
            let r = x.hypot(y);
            let (c, s) = (x / r, y / r);
            // Rows i−1, i.
            let (upper, lower) = a.split_at_mut(i);
            for (p, q) in upper[i - 1].iter_mut().zip(lower[0].iter_mut()) {
                let (u, w) = (*p, *q);
                *p = c * u + s * w;
                *q = -s * u + c * w;
            }
            // Columns i−1, i.
            for row in a.iter_mut() {
                let (u, w) = (row[i - 1], row[i]);
                row[i - 1] = c * u + s * w;
                row[i] = -s * u + c * w;
            }
        }
    }
    Tridiagonal {
        diagonal: (0..n).map(|i| a[i][i]).collect(),
        off_diagonal: (0..n.saturating_sub(1)).map(|i| a[i][i + 1]).collect(),
    }
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(t: &Tridiagonal, x: f64) -> usize {
    let scale = t
        .diagonal
        .iter()
        .chain(&t.off_diagonal)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let pivot_floor = f64::EPSILON * scale;
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..t.diagonal.len() {
        let coupling = if i == 0 { 0.0 } else { t.off_diagonal[i - 1] };
        q = t.diagonal[i] - x - coupling * coupling / q;
        if q.abs() < pivot_floor {
            q = -pivot_floor;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues, ascending, each bisected to full double precision.
pub fn bisection_eigenvalues(t: &Tridiagonal) -> Vec<f64> {
    let n = t.diagonal.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { t.off_diagonal[i - 1].abs() };
        let right = if i + 1 == n { 0.0 } else { t.off_diagonal[i].abs() };
        lo = lo.min(t.diagonal[i] - left - right);
        hi = hi.max(t.diagonal[i] + left + right);
    }
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    (lo, hi) = (lo - pad, hi + pad);
    (0..n)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(t, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Oracle spectrum of a dense symmetric matrix.
pub fn eigenvalues(h: &SymmetricMatrix) -> Vec<f64> {
    bisection_eigenvalues(&givens_tridiagonalize(h))
}
