//! Closed-form predictions for the ensemble: the Stieltjes transform `w(z)`
//! of the semicircle law, its boundary values, the fourth-cumulant constant
//! `Δ`, the leading covariance term `T = Q + 2Δw₁³w₂³/((1−v²w₁²)(1−v²w₂²))`,
//! the density–density combination `Ξ` and the constant `B_ν(c₁)`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::EntryDistribution;
use crate::error::{invalid, Error, Result};
use crate::profiles::{ExpansionData, Profile, ProfileKind, ProfileMoments};
use crate::quad::{self, Tolerance};

const Q_TOL: Tolerance = Tolerance::new(1e-300, 1e-11);
/// Periods of `2·sin(p/2)/p` integrated before the analytic indicator tail.
const INDICATOR_PERIODS: usize = 200;

/// Root of `v²w² + zw + 1 = 0` with `Im w · Im z > 0`.
pub fn solve_w(v: f64, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 || !z.is_finite() {
        return Err(Error::RealArgument { re: z.re, im: z.im });
    }
    let v2 = v * v;
    let disc = (z * z - 4.0 * v2).sqrt();
    // Pick the sign that avoids cancellation; the other root is 1/(v²·w₁).
    let q = if (z.conj() * disc).re >= 0.0 {
        -0.5 * (z + disc)
    } else {
        -0.5 * (z - disc)
    };
    let w1 = q / v2;
    let w2 = q.inv();
    Ok(if w1.im * z.im > 0.0 { w1 } else { w2 })
}

/// Which `Δ` enters the second term of `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaVariant {
    /// `Δ = V₄∫ψ − 3v⁴∫ψ²`.
    #[default]
    Percolation,
    /// `Δ_band = (V₄ − 3v⁴)∫ψ²`.
    Band,
}

/// Half-plane from which a real point is approached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

/// `w(λ ± i0) = τ ± iρ` in the bulk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue {
    pub lambda: f64,
    pub tau: f64,
    pub rho: f64,
    pub side: Side,
}

impl BoundaryValue {
    pub fn w(&self) -> Complex64 {
        Complex64::new(self.tau, self.side.sign() * self.rho)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValues {
    pub delta: f64,
    pub delta_band: f64,
}

/// `T` in its canonical form next to the rewrite whose `Δ`-term carries an
/// extra `v⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TFormComparison {
    pub q: Complex64,
    pub canonical: Complex64,
    pub rewritten: Complex64,
    pub discrepancy: Complex64,
}

/// `Nb·Ξ(λ₁, λ₂)` and the finite-offset values it was extrapolated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub value: f64,
    pub epsilons: [f64; 3],
    pub raw: [f64; 3],
    pub first_order: [f64; 2],
}

/// `B_ν(c₁)` by quadrature with its closed-form counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BValue {
    pub nu: f64,
    pub c1: f64,
    pub quadrature: f64,
    pub closed_form: f64,
    pub first_integral: f64,
    pub second_integral: f64,
    pub relative_error: f64,
}

/// Least-squares line through `(log x, log |y|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub lambda_center: f64,
    pub separations: Vec<f64>,
    pub xi: Vec<f64>,
    pub fit: PowerLawFit,
    /// The exponent `−(2 − 1/ν)` the fit is compared against.
    pub predicted: Option<f64>,
}

/// Profile, entry law and cached moments needed by every prediction.
#[derive(Clone, Debug)]
pub struct TheoryContext {
    pub v: f64,
    pub dist: EntryDistribution,
    pub profile: Profile,
    pub moments: ProfileMoments,
    pub expansion: Option<ExpansionData>,
    pub eta: f64,
    pub delta_variant: DeltaVariant,
}

impl TheoryContext {
    pub fn new(profile: Profile, dist: EntryDistribution) -> Result<Self> {
        let moments = profile.moments()?;
        let expansion = match profile.expansion_data() {
            Ok(e) => Some(e),
            Err(Error::ExpansionFit { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            v: dist.v,
            dist,
            profile,
            moments,
            expansion,
            eta: 2.0 * dist.v + 1.0,
            delta_variant: DeltaVariant::Percolation,
        })
    }

    pub fn with_delta_variant(mut self, variant: DeltaVariant) -> Self {
        self.delta_variant = variant;
        self
    }

    pub fn in_lambda_eta(&self, z: Complex64) -> bool {
        z.im.abs() >= self.eta
    }

    pub fn solve_w(&self, z: Complex64) -> Result<Complex64> {
        solve_w(self.v, z)
    }

    /// `√(4v² − λ²)/(2πv²)` on `[−2v, 2v]`, zero outside.
    pub fn semicircle_density(&self, lambda: f64) -> f64 {
        let v2 = self.v * self.v;
        let r = 4.0 * v2 - lambda * lambda;
        if r <= 0.0 {
            0.0
        } else {
            r.sqrt() / (2.0 * PI * v2)
        }
    }

    /// Distribution function of the semicircle law.
    pub fn semicircle_cdf(&self, lambda: f64) -> f64 {
        let edge = 2.0 * self.v;
        if lambda <= -edge {
            return 0.0;
        }
        if lambda >= edge {
            return 1.0;
        }
        let v2 = self.v * self.v;
        0.5 + lambda * (4.0 * v2 - lambda * lambda).sqrt() / (4.0 * PI * v2)
            + (lambda / edge).asin() / PI
    }

    pub fn w_boundary(&self, lambda: f64, side: Side) -> Result<BoundaryValue> {
        let v2 = self.v * self.v;
        if !(lambda.abs() < 2.0 * self.v) {
            return Err(invalid("lambda", format!("{lambda} is outside the bulk (-2v, 2v)")));
        }
        Ok(BoundaryValue {
            lambda,
            tau: -lambda / (2.0 * v2),
            rho: (4.0 * v2 - lambda * lambda).sqrt() / (2.0 * v2),
            side,
        })
    }

    pub fn compute_delta(&self) -> DeltaValues {
        let v4 = self.dist.v4();
        let v2sq = self.dist.v2() * self.dist.v2();
        DeltaValues {
            delta: v4 * self.moments.int_psi - 3.0 * v2sq * self.moments.int_psi_sq,
            delta_band: (v4 - 3.0 * v2sq) * self.moments.int_psi_sq,
        }
    }

    /// The `Δ` selected by [`TheoryContext::delta_variant`].
    pub fn delta(&self) -> f64 {
        let d = self.compute_delta();
        match self.delta_variant {
            DeltaVariant::Percolation => d.delta,
            DeltaVariant::Band => d.delta_band,
        }
    }

    /// `Q(z₁, z₂)`; logs a warning when either point lies outside `Λ_η`.
    pub fn compute_q(&self, z1: Complex64, z2: Complex64) -> Result<Complex64> {
        self.warn_outside(z1, z2);
        let (w1, w2) = (self.solve_w(z1)?, self.solve_w(z2)?);
        self.q_from_w(w1, w2)
    }

    /// Canonical `T(z₁, z₂)`.
    pub fn compute_t(&self, z1: Complex64, z2: Complex64) -> Result<Complex64> {
        self.warn_outside(z1, z2);
        let (w1, w2) = (self.solve_w(z1)?, self.solve_w(z2)?);
        self.t_from_w(w1, w2)
    }

    /// Both forms of `T` and their difference `2Δ(v⁴ − 1)w₁³w₂³/D`.
    pub fn compare_t_forms(&self, z1: Complex64, z2: Complex64) -> Result<TFormComparison> {
        let (w1, w2) = (self.solve_w(z1)?, self.solve_w(z2)?);
        let q = self.q_from_w(w1, w2)?;
        let term = self.delta_term(w1, w2);
        let v4 = self.v.powi(4);
        let canonical = q + term;
        let rewritten = q + term * v4;
        Ok(TFormComparison {
            q,
            canonical,
            rewritten,
            discrepancy: rewritten - canonical,
        })
    }

    fn warn_outside(&self, z1: Complex64, z2: Complex64) {
        if !self.in_lambda_eta(z1) || !self.in_lambda_eta(z2) {
            log::warn!(
                "z1 = {z1}, z2 = {z2}: outside |Im z| >= {} where the leading term is established",
                self.eta
            );
        }
    }

    fn denominator(&self, w1: Complex64, w2: Complex64) -> Complex64 {
        let v2 = self.v * self.v;
        (1.0 - v2 * (w1 * w1)) * (1.0 - v2 * (w2 * w2))
    }

    fn delta_term(&self, w1: Complex64, w2: Complex64) -> Complex64 {
        let p = w1 * w2;
        2.0 * self.delta() * (p * p * p) / self.denominator(w1, w2)
    }

    fn t_from_w(&self, w1: Complex64, w2: Complex64) -> Result<Complex64> {
        Ok(self.q_from_w(w1, w2)? + self.delta_term(w1, w2))
    }

    fn q_from_w(&self, w1: Complex64, w2: Complex64) -> Result<Complex64> {
        let v2 = self.v * self.v;
        let p = w1 * w2;
        let prefactor = v2 * (p * p) / (PI * self.denominator(w1, w2));
        Ok(prefactor * self.q_integral(v2 * p)?)
    }

    /// `∫_ℝ ψ̃/(1 − Kψ̃)² dp`, written as
    /// `2πψ(0) + 2∫₀^∞ Kψ̃²(2 − Kψ̃)/(1 − Kψ̃)² dp` so that the integrand
    /// decays like `ψ̃²` even when `ψ̃` itself is not integrable.
    pub fn q_integral(&self, k: Complex64) -> Result<Complex64> {
        let failure = RefCell::new(None);
        let integrand = |p: f64| match self.profile.psi_tilde(p) {
            Ok(t) => {
                let kt = k * t;
                let one_minus = 1.0 - kt;
                kt * t * (2.0 - kt) / (one_minus * one_minus)
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex64::new(f64::NAN, f64::NAN)
            }
        };

        let (nu, c1, radius) = match self.expansion {
            Some(e) => (e.nu, e.c1, e.radius),
            None => (2.0, self.moments.int_psi_sq.max(1e-3), 1.0),
        };
        // Scale at which 1 − Kψ̃(p) departs from 1 − K.
        let p_star = if k.norm() > 0.0 {
            ((1.0 - k).norm() / (k.norm() * c1)).powf(1.0 / nu)
        } else {
            1.0
        };
        let mut points: Vec<f64> = vec![0.0, radius, 1.0, 10.0];
        for j in -2..=2 {
            points.push(p_star * 10f64.powi(j));
        }

        let half = if matches!(self.profile.kind(), ProfileKind::Indicator) {
            let end = 2.0 * PI * INDICATOR_PERIODS as f64;
            points.extend((1..=INDICATOR_PERIODS).map(|m| 2.0 * PI * m as f64));
            let points = clean_points(points, end);
            let body = quad::integrate_breakpoints(integrand, &points, Q_TOL.with_max_panels(20_000))
                .require("Q integral")?;
            // ∫_L^∞ 2Kψ̃² dp = 4K/L + O(L⁻³) at L a multiple of 2π; higher
            // powers of ψ̃ contribute O(L⁻³) as well.
            body + 4.0 * k / end
        } else {
            let end = (100.0 * p_star).max(10.0).max(2.0 * radius);
            let points = clean_points(points, end);
            let body = quad::integrate_breakpoints(&integrand, &points, Q_TOL)
                .require("Q integral")?;
            let tail_tol = 1e-14 * body.norm().max(1e-300);
            let tail = quad::integrate_to_infinity(&integrand, end, end, &[], Q_TOL, tail_tol)
                .require("Q integral tail")?;
            body + tail
        };
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(2.0 * PI * self.profile.psi_at_zero() + 2.0 * half)
    }

    /// `Nb·Ξ(λ₁, λ₂) = −¼ Σ_{δ₁,δ₂} δ₁δ₂ T(λ₁ + iδ₁ε, λ₂ + iδ₂ε)`, extrapolated
    /// to `ε → 0` from three offsets proportional to the separation.
    pub fn compute_xi(&self, lambda1: f64, lambda2: f64) -> Result<XiEstimate> {
        let s = (lambda1 - lambda2).abs();
        if !(s > 0.0) {
            return Err(invalid("lambda2", "Xi needs two distinct points"));
        }
        self.w_boundary(lambda1, Side::Upper)?;
        self.w_boundary(lambda2, Side::Upper)?;
        let base = s.min(1.0) * 1e-3;
        let epsilons = [base, base * 0.1, base * 0.01];
        let mut raw = [0.0; 3];
        for (slot, &eps) in raw.iter_mut().zip(&epsilons) {
            let mut sum = Complex64::new(0.0, 0.0);
            for d1 in [1.0, -1.0] {
                for d2 in [1.0, -1.0] {
                    let w1 = self.solve_w(Complex64::new(lambda1, d1 * eps))?;
                    let w2 = self.solve_w(Complex64::new(lambda2, d2 * eps))?;
                    sum += d1 * d2 * self.t_from_w(w1, w2)?;
                }
            }
            *slot = -0.25 * sum.re;
        }
        let first_order = [
            (10.0 * raw[1] - raw[0]) / 9.0,
            (10.0 * raw[2] - raw[1]) / 9.0,
        ];
        let value = (100.0 * first_order[1] - first_order[0]) / 99.0;
        if (value - first_order[1]).abs() > 0.01 * value.abs() {
            return Err(Error::Extrapolation {
                previous: first_order[1],
                current: value,
            });
        }
        Ok(XiEstimate {
            value,
            epsilons,
            raw,
            first_order,
        })
    }

    /// Leading small-separation behaviour
    /// `Nb·Ξ ≈ 2B_ν(c₁)/(2v²ρ)^{1/ν} · s^{−(2−1/ν)}`.
    pub fn xi_leading_asymptote(&self, lambda: f64, separation: f64) -> Result<f64> {
        let e = self
            .expansion
            .ok_or_else(|| invalid("profile", "no power-law expansion of the Fourier transform"))?;
        let rho = self.w_boundary(lambda, Side::Upper)?.rho;
        let b = compute_b(e.nu, e.c1)?.closed_form;
        Ok(2.0 * b / (2.0 * self.v * self.v * rho).powf(1.0 / e.nu)
            * separation.powf(-(2.0 - 1.0 / e.nu)))
    }

    /// Log–log slope of `|Ξ(λc − s/2, λc + s/2)|` against `s`.
    pub fn fit_scaling_exponent(&self, lambda_center: f64, separations: &[f64]) -> Result<ScalingFit> {
        if separations.len() < 4 {
            return Err(invalid("separations", "need at least 4 separations"));
        }
        let lo = separations.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = separations.iter().copied().fold(0.0, f64::max);
        if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
            return Err(invalid("separations", "separations must be positive and span two decades"));
        }
        let mut xi = Vec::with_capacity(separations.len());
        for &s in separations {
            xi.push(self.compute_xi(lambda_center - 0.5 * s, lambda_center + 0.5 * s)?.value);
        }
        let fit = fit_power_law(separations, &xi)?;
        Ok(ScalingFit {
            lambda_center,
            separations: separations.to_vec(),
            xi,
            fit,
            predicted: self.expansion.map(|e| -(2.0 - 1.0 / e.nu)),
        })
    }
}

fn clean_points(mut points: Vec<f64>, end: f64) -> Vec<f64> {
    points.retain(|p| p.is_finite() && *p >= 0.0 && *p < end);
    points.push(end);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// `B_ν(c₁) = (2πc₁^{1/ν})⁻¹[∫₀^∞ ds/(1+s^{2ν}) − 2∫₀^∞ ds/(1+s^{2ν})²]`.
pub fn compute_b(nu: f64, c1: f64) -> Result<BValue> {
    if !(nu > 1.0 && nu.is_finite()) {
        return Err(invalid("nu", format!("need nu > 1, got {nu}")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(invalid("c1", format!("need c1 > 0, got {c1}")));
    }
    let a = 2.0 * nu;
    let tol = Tolerance::new(1e-300, 1e-13);
    // [1, ∞) is folded onto (0, 1] by s = 1/x.
    let first = quad::integrate(|x: f64| 1.0 / (1.0 + x.powf(a)), 0.0, 1.0, tol).require("B first integral")?
        + quad::integrate(|x: f64| x.powf(a - 2.0) / (1.0 + x.powf(a)), 0.0, 1.0, tol)
            .require("B first integral")?;
    let second = quad::integrate(|x: f64| (1.0 + x.powf(a)).powi(-2), 0.0, 1.0, tol)
        .require("B second integral")?
        + quad::integrate(
            |x: f64| {
                let xa = x.powf(a);
                x.powf(2.0 * a - 2.0) / ((1.0 + xa) * (1.0 + xa))
            },
            0.0,
            1.0,
            tol,
        )
        .require("B second integral")?;
    let prefactor = 1.0 / (2.0 * PI * c1.powf(1.0 / nu));
    let quadrature = prefactor * (first - 2.0 * second);
    let base = (PI / a) / (PI / a).sin();
    let closed_form = prefactor * (base - 2.0 * base * (1.0 - 1.0 / a));
    Ok(BValue {
        nu,
        c1,
        quadrature,
        closed_form,
        first_integral: first,
        second_integral: second,
        relative_error: ((quadrature - closed_form) / closed_form).abs(),
    })
}

/// Ordinary least squares of `log|y|` on `log x`; all `y` must share a sign.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(invalid("points", "need at least 3 (x, y) pairs of equal length"));
    }
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("x", "abscissae must be positive"));
    }
    let positive = ys[0] > 0.0;
    if ys.iter().any(|&y| y == 0.0 || (y > 0.0) != positive || !y.is_finite()) {
        return Err(Error::SignChange);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        slope,
        intercept,
        stderr: (sse / (m - 2.0) / sxx).sqrt(),
        residual: (sse / m).sqrt(),
    })
}
