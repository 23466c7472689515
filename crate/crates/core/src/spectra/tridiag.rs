//! Householder reduction to tridiagonal form and implicit QL iteration.
//!
//! The reduction works on the upper triangle of a row-major copy. Each
//! step applies the previous rank-two update and the next matrix–vector
//! product in a single sweep over the trailing rows, so the matrix streams
//! through cache once per step. Dot products use eight fixed accumulator
//! lanes; the summation order is the same on every code path, so results
//! do not depend on which instruction set is selected at run time.

use crate::error::{Error, Result};

const LANES: usize = 8;

/// Diagonal `d` and off-diagonal `e` of an orthogonally similar tridiagonal
/// matrix; `e[i]` couples `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

/// Reduces the symmetric `dim × dim` row-major matrix `a` in place.
/// Only the upper triangle is read.
pub fn householder_tridiagonalize(a: &mut [f64], dim: usize) -> Tridiagonal {
    assert_eq!(a.len(), dim * dim, "matrix storage does not match dimension");
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            return unsafe { tridiagonalize_avx2(a, dim) };
        }
    }
    tridiagonalize_body(a, dim)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tridiagonalize_avx2(a: &mut [f64], dim: usize) -> Tridiagonal {
    tridiagonalize_body(a, dim)
}

#[inline(always)]
fn tridiagonalize_body(a: &mut [f64], dim: usize) -> Tridiagonal {
    let mut diagonal = vec![0.0; dim];
    let mut off_diagonal = vec![0.0; dim.saturating_sub(1)];
    if dim == 0 {
        return Tridiagonal { diagonal, off_diagonal };
    }
    // Pending rank-two update A ← A − v wᵀ − w vᵀ, in global indices.
    let mut vp = vec![0.0; dim];
    let mut wp = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut p = vec![0.0; dim];

    for k in 0..dim {
        let row = &mut a[k * dim + k..(k + 1) * dim];
        let (vk, wk) = (vp[k], wp[k]);
        for (j, x) in row.iter_mut().enumerate() {
            *x -= vk * wp[k + j] + wk * vp[k + j];
        }
        diagonal[k] = row[0];
        if k + 1 == dim {
            break;
        }

        // Reflector annihilating row[2..] against row[1].
        let x0 = row[1];
        let sigma: f64 = row[2..].iter().map(|x| x * x).sum();
        v[..=k].fill(0.0);
        let beta = if sigma == 0.0 {
            off_diagonal[k] = x0;
            v[k + 1..].fill(0.0);
            0.0
        } else {
            let mu = (x0 * x0 + sigma).sqrt();
            let alpha = if x0 > 0.0 { -mu } else { mu };
            off_diagonal[k] = alpha;
            v[k + 1..].copy_from_slice(&row[1..]);
            v[k + 1] = x0 - alpha;
            2.0 / (v[k + 1] * v[k + 1] + sigma)
        };

        // Fused pass: finish the pending update on each trailing row and
        // accumulate p = A₂₂ v using the upper triangle only.
        p.fill(0.0);
        for i in k + 1..dim {
            let (vpi, wpi, vi) = (vp[i], wp[i], v[i]);
            let row = &mut a[i * dim + i..(i + 1) * dim];
            row[0] -= 2.0 * vpi * wpi;
            let mut dot = row[0] * vi;
            let tail = &mut row[1..];
            let lo = i + 1;
            let acc = fused_row(
                tail,
                &vp[lo..],
                &wp[lo..],
                &v[lo..],
                &mut p[lo..],
                vpi,
                wpi,
                vi,
            );
            dot += acc;
            p[i] += dot;
        }

        if beta == 0.0 {
            vp.fill(0.0);
            wp.fill(0.0);
            continue;
        }
        let mut pv = 0.0;
        for i in k + 1..dim {
            p[i] *= beta;
            pv += p[i] * v[i];
        }
        let half = 0.5 * beta * pv;
        vp.fill(0.0);
        wp.fill(0.0);
        for i in k + 1..dim {
            vp[i] = v[i];
            wp[i] = p[i] - half * v[i];
        }
    }
    Tridiagonal { diagonal, off_diagonal }
}

/// For one row segment: `x ← x − (vpi·wp + wpi·vp)`, then returns `Σ x·v`
/// and adds `vi·x` to `p`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn fused_row(
    row: &mut [f64],
    vp: &[f64],
    wp: &[f64],
    v: &[f64],
    p: &mut [f64],
    vpi: f64,
    wpi: f64,
    vi: f64,
) -> f64 {
    let len = row.len();
    let split = len - len % LANES;
    let mut acc = [0.0f64; LANES];
    let (row_main, row_rest) = row.split_at_mut(split);
    let (p_main, p_rest) = p[..len].split_at_mut(split);
    for ((((r, a), b), c), q) in row_main
        .chunks_exact_mut(LANES)
        .zip(vp.chunks_exact(LANES))
        .zip(wp.chunks_exact(LANES))
        .zip(v.chunks_exact(LANES))
        .zip(p_main.chunks_exact_mut(LANES))
    {
        for l in 0..LANES {
            let x = r[l] - (vpi * b[l] + wpi * a[l]);
            r[l] = x;
            acc[l] += x * c[l];
            q[l] += x * vi;
        }
    }
    let mut tail = 0.0;
    for (j, x) in row_rest.iter_mut().enumerate() {
        let g = split + j;
        let y = *x - (vpi * wp[g] + wpi * vp[g]);
        *x = y;
        tail += y * v[g];
        p_rest[j] += y * vi;
    }
    let pairs = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
    (pairs[0] + pairs[2]) + (pairs[1] + pairs[3]) + tail
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-type shifts, unsorted. At most `30·n` sweeps in total.
pub fn tridiagonal_eigenvalues(t: &Tridiagonal) -> Result<Vec<f64>> {
    let n = t.diagonal.len();
    let mut d = t.diagonal.clone();
    let mut e = t.off_diagonal.clone();
    e.push(0.0);
    let cap = 30 * n.max(1);
    let mut sweeps = 0;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > cap {
                return Err(Error::NonConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> Vec<f64> {
        rows.iter().flat_map(|r| r.iter().copied()).collect()
    }

    #[test]
    fn already_tridiagonal_is_preserved() {
        let mut a = dense(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 4.0], &[0.0, 4.0, 5.0]]);
        let t = householder_tridiagonalize(&mut a, 3);
        assert_eq!(t.diagonal, vec![2.0, 3.0, 5.0]);
        assert_eq!(t.off_diagonal.iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![1.0, 4.0]);
    }

    #[test]
    fn trace_and_frobenius_preserved() {
        let n = 37;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x = ((i * 31 + j * 17) % 13) as f64 - 6.0 + 0.1 * i as f64;
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let frob: f64 = a.iter().map(|x| x * x).sum();
        let t = householder_tridiagonalize(&mut a.clone(), n);
        let t_trace: f64 = t.diagonal.iter().sum();
        let t_frob: f64 = t.diagonal.iter().map(|x| x * x).sum::<f64>()
            + 2.0 * t.off_diagonal.iter().map(|x| x * x).sum::<f64>();
        assert!((trace - t_trace).abs() < 1e-10 * frob.sqrt());
        assert!((frob - t_frob).abs() < 1e-12 * frob);
    }

    #[test]
    fn ql_on_small_cases() {
        let t = Tridiagonal {
            diagonal: vec![0.0, 0.0],
            off_diagonal: vec![1.0],
        };
        let mut ev = tridiagonal_eigenvalues(&t).unwrap();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15, "{ev:?}");
        let empty = Tridiagonal {
            diagonal: vec![],
            off_diagonal: vec![],
        };
        assert!(tridiagonal_eigenvalues(&empty).unwrap().is_empty());
    }
}
