//! Sampling of the long-range percolation ensemble
//! `H(i,j) = a(i,j)·d(i,j)/√b`, `|i|, |j| ≤ n`.
//!
//! `d(i,j)` is a Bernoulli mask with success probability `ψ((i−j)/b)` and
//! `a(i,j)` a symmetric entry variable of variance `v²`, scaled by `√2` on the
//! diagonal. Both draws for a pair come from one Philox block keyed by the
//! seed, so a matrix is a pure function of `(spec, seed, realization)`.
//!
//! All three entry laws map the same uniform `u` through their quantile
//! function, so runs that differ only in the entry law see the same mask and
//! comonotone entries.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::profiles::Profile;
use crate::rng::PairRng;
use crate::spectra::SymmetricMatrix;

/// Law of the base entry variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Gaussian,
    Rademacher,
    Uniform,
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryKind::Gaussian => "gaussian",
            EntryKind::Rademacher => "rademacher",
            EntryKind::Uniform => "uniform",
        })
    }
}

impl FromStr for EntryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(EntryKind::Gaussian),
            "rademacher" | "bernoulli" => Ok(EntryKind::Rademacher),
            "uniform" => Ok(EntryKind::Uniform),
            other => Err(invalid("dist", format!("unknown entry distribution `{other}`"))),
        }
    }
}

/// Symmetric entry law with off-diagonal standard deviation `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: EntryKind,
    pub v: f64,
}

impl EntryDistribution {
    pub fn new(kind: EntryKind, v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid("v", format!("entry scale must be positive, got {v}")));
        }
        Ok(Self { kind, v })
    }

    pub fn v2(&self) -> f64 {
        self.v * self.v
    }

    /// `V₄ = E{a⁴}`.
    pub fn v4(&self) -> f64 {
        let v4 = self.v2() * self.v2();
        match self.kind {
            EntryKind::Gaussian => 3.0 * v4,
            EntryKind::Rademacher => v4,
            EntryKind::Uniform => 9.0 / 5.0 * v4,
        }
    }

    /// `V₆ = E{a⁶}`.
    pub fn v6(&self) -> f64 {
        let v6 = self.v2() * self.v2() * self.v2();
        match self.kind {
            EntryKind::Gaussian => 15.0 * v6,
            EntryKind::Rademacher => v6,
            EntryKind::Uniform => 27.0 / 7.0 * v6,
        }
    }

    /// Even moment `E{a^{2m}}` of the off-diagonal variable.
    pub fn even_moment(&self, m: u32) -> f64 {
        let scale = self.v.powi(2 * m as i32);
        let unit = match self.kind {
            // (2m − 1)!!
            EntryKind::Gaussian => (1..=m).map(|k| (2 * k - 1) as f64).product(),
            EntryKind::Rademacher => 1.0,
            EntryKind::Uniform => 3f64.powi(m as i32) / (2 * m + 1) as f64,
        };
        unit * scale
    }

    /// The base variable as a function of a uniform `u ∈ (0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match self.kind {
            EntryKind::Gaussian => self.v * standard_normal_quantile(u),
            EntryKind::Rademacher => {
                if u < 0.5 {
                    -self.v
                } else {
                    self.v
                }
            }
            EntryKind::Uniform => 3f64.sqrt() * self.v * (2.0 * u - 1.0),
        }
    }
}

fn standard_normal_quantile(u: f64) -> f64 {
    // Normal::standard() cannot fail; inverse_cdf is erf⁻¹ based.
    Normal::standard().inverse_cdf(u)
}

/// Full parameterization of the ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub b: f64,
    pub dist: EntryDistribution,
    pub profile: Profile,
    pub alpha_check: Option<f64>,
}

impl EnsembleSpec {
    /// Validates `b ∈ [1, N]` and warns when `alpha_check` is set and `b` is
    /// far outside `n^{1/3} ≲ b ≲ n`.
    pub fn new(n: usize, b: f64, dist: EntryDistribution, profile: Profile) -> Result<Self> {
        let spec = Self {
            n,
            b,
            dist,
            profile,
            alpha_check: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_alpha_check(mut self, alpha: f64) -> Self {
        self.alpha_check = Some(alpha);
        self.regime_warning();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let size = self.size() as f64;
        if self.n > (u32::MAX as usize - 1) / 2 {
            return Err(invalid("n", "too large for 32-bit pair counters"));
        }
        if !(self.b >= 1.0 && self.b <= size) {
            return Err(invalid("b", format!("need 1 <= b <= N = {size}, got {}", self.b)));
        }
        EntryDistribution::new(self.dist.kind, self.dist.v)?;
        Ok(())
    }

    /// Matrix dimension `N = 2n + 1`.
    pub fn size(&self) -> usize {
        2 * self.n + 1
    }

    /// Returns the warning text if the regime check fails, after logging it.
    pub fn regime_warning(&self) -> Option<String> {
        self.alpha_check?;
        let n = self.n.max(1) as f64;
        let (lo, hi) = (n.powf(1.0 / 3.0), n);
        if self.b < lo || self.b > hi {
            let msg = format!(
                "b = {} lies outside the regime n^(1/3) = {lo:.3} <= b <= n = {hi}",
                self.b
            );
            log::warn!("{msg}");
            Some(msg)
        } else {
            None
        }
    }

    /// `ψ(k/b)` for `k = 0..N`.
    pub fn mask_probabilities(&self) -> Vec<f64> {
        (0..self.size()).map(|k| self.profile.psi(k as f64 / self.b)).collect()
    }

    /// Expected number of nonzero off-diagonal entries per ordered pair,
    /// `N⁻²Σ_{i≠j}ψ((i−j)/b)`.
    pub fn expected_offdiagonal_density(&self) -> f64 {
        let size = self.size();
        let psi = self.mask_probabilities();
        let total: f64 = (1..size).map(|k| 2.0 * (size - k) as f64 * psi[k]).sum();
        total / (size * size) as f64
    }
}

/// One realization of the ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMatrix {
    pub matrix: SymmetricMatrix,
    pub seed: u64,
    pub realization: u64,
}

/// Draws realization `realization` of `spec` under `seed`.
pub fn sample_matrix(spec: &EnsembleSpec, seed: u64, realization: u64) -> SampledMatrix {
    let size = spec.size();
    let psi = spec.mask_probabilities();
    let rng = PairRng::new(seed, realization);
    let inv_sqrt_b = 1.0 / spec.b.sqrt();
    let mut matrix = SymmetricMatrix::zeros(size);
    for i in 0..size {
        for j in i..size {
            let (mask_u, value_u) = rng.uniforms(i as u32, j as u32);
            if mask_u < psi[j - i] {
                let mut a = spec.dist.quantile(value_u);
                if i == j {
                    a *= SQRT_2;
                }
                matrix.set(i, j, a * inv_sqrt_b);
            }
        }
    }
    SampledMatrix {
        matrix,
        seed,
        realization,
    }
}

/// One row of [`empirical_moment_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub quantity: String,
    pub empirical: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
    pub flagged: bool,
}

impl MomentCheck {
    fn new(quantity: &str, empirical: f64, target: f64, stderr: f64) -> Self {
        let diff = empirical - target;
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            quantity: quantity.to_string(),
            empirical,
            target,
            stderr,
            z,
            flagged: z.abs() > 4.0,
        }
    }
}

#[derive(Default)]
struct Running {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2.0 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

/// Empirical `E{a²}`, `E{a⁴}`, diagonal `E{a²}` and off-diagonal mask density
/// over `reps` realizations, with z-scores against their targets.
pub fn empirical_moment_report(spec: &EnsembleSpec, seed: u64, reps: usize) -> Result<Vec<MomentCheck>> {
    if reps < 100 {
        return Err(invalid("reps", format!("moment report needs at least 100 realizations, got {reps}")));
    }
    let size = spec.size();
    let psi = spec.mask_probabilities();
    let dist = spec.dist;
    let (mut a2, mut a4, mut diag2) = (Running::default(), Running::default(), Running::default());
    let mut mask_hits = 0.0;
    for r in 0..reps as u64 {
        let rng = PairRng::new(seed, r);
        for i in 0..size {
            for j in i..size {
                let (mask_u, value_u) = rng.uniforms(i as u32, j as u32);
                let a = dist.quantile(value_u);
                if i == j {
                    diag2.push(2.0 * a * a);
                } else {
                    a2.push(a * a);
                    a4.push(a * a * a * a);
                    if mask_u < psi[j - i] {
                        mask_hits += 1.0;
                    }
                }
            }
        }
    }
    let pairs: f64 = (1..size).map(|k| (size - k) as f64).sum();
    let expected_mask: f64 = (1..size).map(|k| (size - k) as f64 * psi[k]).sum::<f64>() / pairs;
    let mask_var: f64 = (1..size).map(|k| (size - k) as f64 * psi[k] * (1.0 - psi[k])).sum::<f64>();
    let trials = pairs * reps as f64;
    Ok(vec![
        MomentCheck::new("offdiag_a2", a2.mean, dist.v2(), a2.stderr()),
        MomentCheck::new("offdiag_a4", a4.mean, dist.v4(), a4.stderr()),
        MomentCheck::new("diag_a2", diag2.mean, 2.0 * dist.v2(), diag2.stderr()),
        MomentCheck::new(
            "mask_density",
            mask_hits / trials,
            expected_mask,
            (mask_var * reps as f64).sqrt() / trials,
        ),
    ])
}
