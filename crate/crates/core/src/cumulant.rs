//! Moment–cumulant identities for symmetric laws and a numerical check of
//! the truncated cumulant expansion
//! `E{X F(X)} = Σ_{r=0}^{q} K_{r+1}/r! · E{F^{(r)}(X)} + ε_q`,
//! `|ε_q| ≤ C_q · sup|F^{(q+1)}| · E|X|^{q+2}`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::ensemble::{EntryDistribution, EntryKind};
use crate::error::{invalid, Error, Result};
use crate::quad::{self, Tolerance};

/// Highest derivative order the test-function library provides.
pub const MAX_DERIVATIVE_ORDER: usize = 8;
/// Constant in the remainder bound.
pub const C_Q: f64 = 1.0;

/// Even central moments of a symmetric law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub mu2: f64,
    pub mu4: f64,
    pub mu6: f64,
}

impl MomentVector {
    pub fn new(mu2: f64, mu4: f64, mu6: f64) -> Result<Self> {
        if !(mu2 > 0.0) {
            return Err(invalid("mu2", format!("must be positive, got {mu2}")));
        }
        if !(mu4 >= mu2 * mu2) {
            return Err(invalid("mu4", format!("{mu4} < mu2² = {}", mu2 * mu2)));
        }
        if !(mu6 >= mu4 * mu2) {
            return Err(invalid("mu6", format!("{mu6} < mu4·mu2 = {}", mu4 * mu2)));
        }
        Ok(Self { mu2, mu4, mu6 })
    }

    pub fn of(dist: &EntryDistribution) -> Self {
        Self {
            mu2: dist.v2(),
            mu4: dist.v4(),
            mu6: dist.v6(),
        }
    }
}

/// Even cumulants; odd ones vanish for symmetric laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    pub k2: f64,
    pub k4: f64,
    pub k6: f64,
}

impl CumulantVector {
    /// `K_r` for `r = 1..=6`.
    pub fn get(&self, r: usize) -> f64 {
        match r {
            2 => self.k2,
            4 => self.k4,
            6 => self.k6,
            _ => 0.0,
        }
    }
}

/// `K₄ = μ₄ − 3μ₂²`, `K₆ = μ₆ − 15μ₄μ₂ + 30μ₂³`, the latter grouped as
/// `(μ₆ − 15μ₂³) − 15μ₂K₄` so Gaussian moments give exact zeros.
pub fn cumulants_from_moments(m: &MomentVector) -> CumulantVector {
    let sq = m.mu2 * m.mu2;
    let k4 = m.mu4 - 3.0 * sq;
    CumulantVector {
        k2: m.mu2,
        k4,
        k6: (m.mu6 - 15.0 * (sq * m.mu2)) - 15.0 * m.mu2 * k4,
    }
}

/// Cumulants of the scaled matrix entry `a·d/√b` whose mask probability is
/// `psi`, with the diagonal doubling factor when `diagonal` is set.
pub fn scaled_entry_cumulants(
    dist: &EntryDistribution,
    psi: f64,
    b: f64,
    diagonal: bool,
) -> Result<CumulantVector> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(invalid("psi", format!("mask probability must lie in (0, 1], got {psi}")));
    }
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    let f = if diagonal { 2.0 } else { 1.0 };
    let m = MomentVector::new(
        f * dist.v2() * psi / b,
        f * f * dist.v4() * psi / (b * b),
        f * f * f * dist.v6() * psi / (b * b * b),
    )?;
    Ok(cumulants_from_moments(&m))
}

/// Closed-form test functions with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `x^k`, `k ≤ 8`.
    Monomial { degree: u32 },
    /// `sin(ωx)`.
    Sin { omega: f64 },
    /// `exp(iωx)`.
    ExpI { omega: f64 },
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Monomial { degree } => write!(f, "x^{degree}"),
            TestFunction::Sin { omega } => write!(f, "sin({omega}x)"),
            TestFunction::ExpI { omega } => write!(f, "exp(i{omega}x)"),
        }
    }
}

impl TestFunction {
    pub fn monomial(degree: u32) -> Result<Self> {
        if degree as usize > MAX_DERIVATIVE_ORDER {
            return Err(invalid("degree", format!("monomials up to degree 8, got {degree}")));
        }
        Ok(TestFunction::Monomial { degree })
    }

    /// Monomials of degree 1–8, two sines and two imaginary exponentials.
    pub fn library() -> Vec<TestFunction> {
        let mut out: Vec<TestFunction> = (1..=8).map(|degree| TestFunction::Monomial { degree }).collect();
        out.extend([
            TestFunction::Sin { omega: 1.0 },
            TestFunction::Sin { omega: 2.5 },
            TestFunction::ExpI { omega: 1.0 },
            TestFunction::ExpI { omega: 3.0 },
        ]);
        out
    }

    /// `F^{(r)}(x)`.
    pub fn derivative(&self, r: usize, x: f64) -> Result<Complex64> {
        if r > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeUnavailable {
                function: self.to_string(),
                order: r,
            });
        }
        Ok(match *self {
            TestFunction::Monomial { degree } => {
                let k = degree as usize;
                if r > k {
                    Complex64::new(0.0, 0.0)
                } else {
                    let falling: f64 = ((k - r + 1)..=k).map(|j| j as f64).product();
                    Complex64::new(falling * x.powi((k - r) as i32), 0.0)
                }
            }
            TestFunction::Sin { omega } => {
                let phase = omega * x + r as f64 * PI / 2.0;
                Complex64::new(omega.powi(r as i32) * phase.sin(), 0.0)
            }
            TestFunction::ExpI { omega } => {
                Complex64::new(0.0, omega).powu(r as u32) * Complex64::new(0.0, omega * x).exp()
            }
        })
    }

    /// `sup_{|x| ≤ radius} |F^{(r)}(x)|`; `radius` may be infinite.
    pub fn derivative_sup(&self, r: usize, radius: f64) -> Result<f64> {
        self.derivative(r, 0.0)?;
        Ok(match *self {
            TestFunction::Monomial { degree } => {
                let k = degree as usize;
                if r > k {
                    0.0
                } else if r == k {
                    (1..=k).map(|j| j as f64).product()
                } else if radius.is_infinite() {
                    f64::INFINITY
                } else {
                    let falling: f64 = ((k - r + 1)..=k).map(|j| j as f64).product();
                    falling * radius.powi((k - r) as i32)
                }
            }
            TestFunction::Sin { omega } => {
                let scale = omega.abs().powi(r as i32);
                let reach = omega.abs() * radius;
                // Odd orders are cosines, maximal at 0.
                if r % 2 == 1 || reach >= PI / 2.0 {
                    scale
                } else {
                    scale * reach.sin()
                }
            }
            TestFunction::ExpI { omega } => omega.abs().powi(r as i32),
        })
    }
}

/// Radius of the support of the law, infinite for the Gaussian.
pub fn support_radius(dist: &EntryDistribution) -> f64 {
    match dist.kind {
        EntryKind::Gaussian => f64::INFINITY,
        EntryKind::Rademacher => dist.v,
        EntryKind::Uniform => 3f64.sqrt() * dist.v,
    }
}

/// `E|X|^p`.
pub fn absolute_moment(dist: &EntryDistribution, p: u32) -> f64 {
    let v = dist.v;
    let pf = p as f64;
    match dist.kind {
        EntryKind::Gaussian => v.powi(p as i32) * 2f64.powf(pf / 2.0) * gamma((pf + 1.0) / 2.0) / PI.sqrt(),
        EntryKind::Rademacher => v.powi(p as i32),
        EntryKind::Uniform => (3f64.sqrt() * v).powi(p as i32) / (pf + 1.0),
    }
}

/// `E{g(X)}`: exact two-point sum for Rademacher, quadrature otherwise.
pub fn expectation<G>(dist: &EntryDistribution, g: G) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    let v = dist.v;
    let tol = Tolerance::new(1e-13, 1e-12);
    // Both continuous laws are symmetric, so only the even part of g
    // contributes; odd integrands then vanish identically instead of
    // cancelling to roundoff.
    let even = |x: f64| 0.5 * (g(x) + g(-x));
    match dist.kind {
        EntryKind::Rademacher => Ok(0.5 * (g(v) + g(-v))),
        EntryKind::Uniform => {
            let a = 3f64.sqrt() * v;
            let r = quad::integrate(even, 0.0, a, tol).require("uniform expectation")?;
            Ok(r / a)
        }
        EntryKind::Gaussian => {
            let norm = 2.0 / (v * (2.0 * PI).sqrt());
            let weighted = |x: f64| even(x) * ((-0.5 * (x / v) * (x / v)).exp() * norm);
            let points: Vec<f64> = (0..=40).map(|k| k as f64 * v).collect();
            quad::integrate_breakpoints(weighted, &points, tol).require("gaussian expectation")
        }
    }
}

/// Result of one expansion check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub law: EntryKind,
    pub function: TestFunction,
    pub q: usize,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub gap: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Compares `E{X F(X)}` with the expansion truncated at order `q ∈ {1, 3, 5}`.
pub fn expansion_check(dist: &EntryDistribution, f: &TestFunction, q: usize) -> Result<ExpansionCheck> {
    if ![1, 3, 5].contains(&q) {
        return Err(invalid("q", format!("q must be 1, 3 or 5, got {q}")));
    }
    let sup = f.derivative_sup(q + 1, support_radius(dist))?;
    let cumulants = cumulants_from_moments(&MomentVector::of(dist));
    let lhs = expectation(dist, |x| x * f.derivative(0, x).expect("order 0 exists"))?;
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut factorial = 1.0;
    for r in 0..=q {
        if r > 0 {
            factorial *= r as f64;
        }
        let k = cumulants.get(r + 1);
        if k != 0.0 {
            let e = expectation(dist, |x| f.derivative(r, x).expect("order checked above"))?;
            rhs += e * (k / factorial);
        }
    }
    let gap = (lhs - rhs).norm();
    let bound = C_Q * sup * absolute_moment(dist, q as u32 + 2);
    Ok(ExpansionCheck {
        law: dist.kind,
        function: *f,
        q,
        lhs,
        rhs,
        gap,
        bound,
        within_bound: gap <= bound,
    })
}
