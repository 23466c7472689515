//! Spectra of sampled matrices: eigenvalues, the normalized counting
//! function, resolvent traces and numerical checks of resolvent identities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub mod oracle;
pub mod tridiag;

pub use tridiag::Tridiagonal;

/// Dense real symmetric matrix, row-major with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds from `f(i, j)` evaluated for `i ≤ j` and mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from dense rows, rejecting non-square or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(invalid("matrix", "rows must form a square matrix"));
            }
            data.extend_from_slice(row);
        }
        let m = Self { dim, data };
        if !m.is_symmetric() {
            return Err(invalid("matrix", "matrix is not symmetric"));
        }
        Ok(m)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &x) in values.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.dim + j] = x;
        self.data[j * self.dim + i] = x;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (i + 1..self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Σ_{ij} H(i,j)²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn count_nonzero_off_diagonal(&self) -> usize {
        (0..self.dim)
            .map(|i| self.row(i).iter().enumerate().filter(|&(j, &x)| j != i && x != 0.0).count())
            .sum()
    }

    fn to_complex_shifted(&self, z: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let x = Complex64::new(self.get(i, j), 0.0);
            if i == j {
                x - z
            } else {
                x
            }
        })
    }
}

/// Sorted spectrum of one matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub eigenvalues: Vec<f64>,
    /// Half-size `n` when the dimension is `2n + 1`.
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub realization: Option<u64>,
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues_symmetric(h: &SymmetricMatrix) -> Result<SpectralSample> {
    let mut work = h.as_slice().to_vec();
    let t = tridiag::householder_tridiagonalize(&mut work, h.dim());
    let mut eigenvalues = tridiag::tridiagonal_eigenvalues(&t)?;
    eigenvalues.sort_by(f64::total_cmp);
    let dim = h.dim();
    Ok(SpectralSample {
        eigenvalues,
        n: (dim % 2 == 1).then_some(dim / 2),
        seed: None,
        realization: None,
    })
}

impl SpectralSample {
    pub fn from_sorted(eigenvalues: Vec<f64>) -> Self {
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let dim = eigenvalues.len();
        Self {
            eigenvalues,
            n: (dim % 2 == 1).then_some(dim / 2),
            seed: None,
            realization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `σ(λ) = N⁻¹ #{k : λ_k ≤ λ}`.
    pub fn counting_function(&self, lambda: f64) -> f64 {
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        let count = self.eigenvalues.partition_point(|&x| x <= lambda);
        count as f64 / self.eigenvalues.len() as f64
    }

    /// `g(z) = N⁻¹ Σ_k 1/(λ_k − z)`.
    pub fn resolvent_trace(&self, z: Complex64) -> Result<ResolventTrace> {
        if z.im == 0.0 || !z.is_finite() {
            return Err(Error::RealArgument { re: z.re, im: z.im });
        }
        let sum: Complex64 = self.eigenvalues.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum();
        Ok(ResolventTrace {
            z,
            g: sum / self.eigenvalues.len() as f64,
        })
    }

    /// Relative errors of `Σλ = tr H` (scaled by `N·‖H‖`) and
    /// `Σλ² = Σ H(i,j)²`.
    pub fn trace_identity_errors(&self, h: &SymmetricMatrix) -> (f64, f64) {
        let frob = h.frobenius_sq();
        let scale = frob.sqrt().max(f64::MIN_POSITIVE);
        let sum: f64 = self.eigenvalues.iter().sum();
        let sum_sq: f64 = self.eigenvalues.iter().map(|x| x * x).sum();
        let trace_err = (sum - h.trace()).abs() / scale;
        let frob_err = (sum_sq - frob).abs() / frob.max(f64::MIN_POSITIVE);
        (trace_err, frob_err)
    }
}

/// Normalized resolvent trace at a non-real point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventTrace {
    pub z: Complex64,
    pub g: Complex64,
}

impl ResolventTrace {
    /// Membership of `z` in `Λ_η = {|Im z| ≥ η}` with `η = 2v + 1`.
    pub fn in_lambda_eta(&self, v: f64) -> bool {
        self.z.im.abs() >= 2.0 * v + 1.0
    }

    /// `|g| ≤ 1/|Im z|` and `Im g · Im z > 0`.
    pub fn satisfies_bounds(&self) -> bool {
        self.g.norm() <= 1.0 / self.z.im.abs() * (1.0 + 1e-12) && self.g.im * self.z.im > 0.0
    }
}

fn resolvent(h: &SymmetricMatrix, z: Complex64) -> Result<DMatrix<Complex64>> {
    if z.im == 0.0 {
        return Err(Error::RealArgument { re: z.re, im: z.im });
    }
    h.to_complex_shifted(z).try_inverse().ok_or(Error::Singular)
}

/// Largest entrywise residual of
/// `(h − z)⁻¹ = (h̃ − z)⁻¹ − (h − z)⁻¹ (h − h̃) (h̃ − z)⁻¹`.
pub fn check_resolvent_identity(
    h: &SymmetricMatrix,
    h_tilde: &SymmetricMatrix,
    z: Complex64,
) -> Result<f64> {
    if h.dim() != h_tilde.dim() {
        return Err(invalid("h_tilde", "dimension differs from h"));
    }
    let g = resolvent(h, z)?;
    let g_tilde = resolvent(h_tilde, z)?;
    let diff = DMatrix::from_fn(h.dim(), h.dim(), |i, j| {
        Complex64::new(h.get(i, j) - h_tilde.get(i, j), 0.0)
    });
    let rhs = &g_tilde - &g * diff * &g_tilde;
    Ok((g - rhs).iter().map(|x| x.norm()).fold(0.0, f64::max))
}

/// Largest deviation between `∂G(s,t)/∂h(j,k) =
/// −[G(s,j)G(k,t) + G(s,k)G(j,t)]/(1 + δ_jk)` and central differences that
/// move `h(j,k)` and `h(k,j)` together.
pub fn check_resolvent_derivative(
    h: &SymmetricMatrix,
    z: Complex64,
    (j, k): (usize, usize),
) -> Result<f64> {
    let n = h.dim();
    if j >= n || k >= n {
        return Err(invalid("index", format!("({j}, {k}) outside a {n}×{n} matrix")));
    }
    let g = resolvent(h, z)?;
    let step = 1e-6 * h.get(j, k).abs().max(1.0);
    let mut plus = h.clone();
    plus.set(j, k, h.get(j, k) + step);
    let mut minus = h.clone();
    minus.set(j, k, h.get(j, k) - step);
    let fd = (resolvent(&plus, z)? - resolvent(&minus, z)?) / Complex64::new(2.0 * step, 0.0);
    let factor = if j == k { 0.5 } else { 1.0 };
    let mut worst: f64 = 0.0;
    for s in 0..n {
        for t in 0..n {
            let analytic = -(g[(s, j)] * g[(k, t)] + g[(s, k)] * g[(j, t)]) * factor;
            worst = worst.max((analytic - fd[(s, t)]).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize, salt: u64) -> SymmetricMatrix {
        let rng = crate::rng::PairRng::new(salt, 0);
        SymmetricMatrix::from_fn(n, |i, j| 2.0 * rng.uniforms(i as u32, j as u32).1 - 1.0)
    }

    #[test]
    fn diagonal_and_two_by_two() {
        let s = eigenvalues_symmetric(&SymmetricMatrix::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        let m = SymmetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = eigenvalues_symmetric(&m).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15 && (s.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_sizes() {
        assert!(eigenvalues_symmetric(&SymmetricMatrix::zeros(0)).unwrap().is_empty());
        let s = eigenvalues_symmetric(&SymmetricMatrix::diagonal(&[-4.5])).unwrap();
        assert_eq!(s.eigenvalues, vec![-4.5]);
        let s = eigenvalues_symmetric(&SymmetricMatrix::zeros(5)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0; 5]);
    }

    #[test]
    fn matches_bisection_oracle() {
        for (n, salt) in [(50, 1), (100, 2), (63, 3)] {
            let h = test_matrix(n, salt);
            let fast = eigenvalues_symmetric(&h).unwrap();
            let slow = oracle::eigenvalues(&h);
            for (a, b) in fast.eigenvalues.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
            }
            let (t, f) = fast.trace_identity_errors(&h);
            assert!(t < 1e-12 && f < 1e-12);
        }
    }

    #[test]
    fn counting_function_steps() {
        let s = SpectralSample::from_sorted(vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.counting_function(-2.0), 0.0);
        assert_eq!(s.counting_function(0.0), 2.0 / 3.0);
        assert_eq!(s.counting_function(1.0), 1.0);
    }

    #[test]
    fn resolvent_trace_of_atom() {
        let s = SpectralSample::from_sorted(vec![0.0; 3]);
        let r = s.resolvent_trace(Complex64::new(0.0, 4.0)).unwrap();
        assert!((r.g - Complex64::new(0.0, 0.25)).norm() < 1e-16);
        assert!(s.resolvent_trace(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn resolvent_identity_with_zero_reference() {
        let h = test_matrix(20, 9);
        let z = Complex64::new(0.5, 3.0);
        assert_eq!(check_resolvent_identity(&h, &h, z).unwrap(), 0.0);
        assert!(check_resolvent_identity(&h, &SymmetricMatrix::zeros(20), z).unwrap() < 1e-10);
    }

    #[test]
    fn scalar_resolvent_derivative() {
        let h = SymmetricMatrix::zeros(1);
        let d = check_resolvent_derivative(&h, Complex64::new(0.0, 1.0), (0, 0)).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn derivative_on_and_off_diagonal() {
        let h = test_matrix(20, 4);
        let z = Complex64::new(1.0, 2.0);
        assert!(check_resolvent_derivative(&h, z, (3, 3)).unwrap() < 1e-6);
        assert!(check_resolvent_derivative(&h, z, (2, 11)).unwrap() < 1e-6);
    }
}
