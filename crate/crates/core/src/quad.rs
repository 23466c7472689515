//! Adaptive Gauss–Kronrod quadrature.
//!
//! Every integral in the crate goes through this module: finite intervals
//! with optional breakpoints, semi-infinite intervals by panel doubling, and
//! one-sided Fourier cosine transforms of slowly decaying functions.
//!
//! The rule is the 7/15-point Gauss–Kronrod pair with the QUADPACK error
//! heuristic. Values are generic over [`QuadValue`] so that the same driver
//! integrates real and complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar type a quadrature rule can accumulate.
pub trait QuadValue:
    Copy
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Div<Output = Self>
{
    fn magnitude(self) -> f64;
    fn one() -> Self;
}

impl QuadValue for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn one() -> Self {
        1.0
    }
}

impl QuadValue for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
}

/// Error targets for an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_panels: 4000,
        }
    }

    pub const fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    fn target(&self, total: f64) -> f64 {
        self.abs.max(self.rel * total.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

/// Outcome of an integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: QuadValue> QuadResult<T> {
    /// Turns a non-converged result into [`Error::Quadrature`].
    pub fn require(self, what: &str) -> Result<T> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                what: what.to_string(),
                estimate: self.value.magnitude(),
                error: self.error,
            })
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.magnitude() * WGK[7];
    let mut fv1 = [T::default(); 7];
    let mut fv2 = [T::default(); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        resabs += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).magnitude();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let width = half.abs();
    resabs *= width;
    resasc *= width;
    let mut err = ((resk - resg) * half).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (resk * half, err)
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_breakpoints(f, &[a, b], tol)
}

/// Globally adaptive integration over consecutive segments of `points`.
///
/// `points` must be sorted ascending; degenerate segments are skipped.
pub fn integrate_breakpoints<T, F>(mut f: F, points: &[f64], tol: Tolerance) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    if heap.is_empty() {
        return QuadResult {
            value: T::default(),
            error: 0.0,
            evaluations,
            converged: true,
        };
    }
    let max_panels = tol.max_panels.max(heap.len() + 1);
    let (mut running, mut running_err) = sum_panels(&heap);
    loop {
        if running_err <= tol.target(running.magnitude()) {
            // Resynchronize to discard drift in the running sums.
            (running, running_err) = sum_panels(&heap);
            if running_err <= tol.target(running.magnitude()) {
                break;
            }
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if heap.len() + 2 > max_panels || mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (left, left_err) = gk15(&mut f, worst.a, mid);
        let (right, right_err) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        running = running - worst.value + left + right;
        running_err += left_err + right_err - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: left,
            error: left_err,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: right,
            error: right_err,
        });
    }
    let (total, total_err) = sum_panels(&heap);
    QuadResult {
        value: total,
        error: total_err,
        evaluations,
        converged: total_err <= tol.target(total.magnitude()),
    }
}

fn sum_panels<T: QuadValue>(heap: &BinaryHeap<Panel<T>>) -> (T, f64) {
    // Summation in position order keeps results independent of heap layout.
    let mut panels: Vec<&Panel<T>> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels.iter().fold((T::default(), 0.0), |(v, e), p| {
        (v + p.value, e + p.error)
    })
}

/// Integral over `[a, ∞)` by doubling panels.
///
/// The first panel is `[a, a + width]`, subdivided at any `inner` points
/// that fall inside it; each further panel doubles the distance from `a`.
/// Doubling stops once panel contributions fall below `tail_tol`, or once
/// the panel sums settle into a geometric progression (algebraic tails),
/// in which case the remaining geometric tail is added.
pub fn integrate_to_infinity<T, F>(
    mut f: F,
    a: f64,
    width: f64,
    inner: &[f64],
    tol: Tolerance,
    tail_tol: f64,
) -> QuadResult<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut points = vec![a];
    points.extend(inner.iter().copied().filter(|&x| x > a && x < a + width));
    points.push(a + width);
    let head = integrate_breakpoints(&mut f, &points, tol);
    let mut total = head.value;
    let mut error = head.error;
    let mut evaluations = head.evaluations;
    let mut converged = head.converged;

    let panel_tol = Tolerance {
        abs: tail_tol * 0.25,
        ..tol
    };
    let mut lo = a + width;
    let mut span = width;
    let mut previous: Option<T> = None;
    let mut previous_tail: Option<T> = None;
    for _ in 0..400 {
        let hi = lo + span;
        if !hi.is_finite() {
            break;
        }
        let panel = integrate(&mut f, lo, hi, panel_tol);
        evaluations += panel.evaluations;
        error += panel.error;
        converged &= panel.converged;
        total = total + panel.value;
        let size = panel.value.magnitude();
        if let Some(prev) = previous {
            if size <= tail_tol && prev.magnitude() <= tail_tol {
                return QuadResult {
                    value: total,
                    error,
                    evaluations,
                    converged,
                };
            }
            if prev.magnitude() > 0.0 {
                let ratio = panel.value / prev;
                let r = ratio.magnitude();
                if r < 1.0 - 1e-6 {
                    let tail = panel.value / (T::one() / ratio - T::one());
                    if let Some(prev_tail) = previous_tail {
                        let predicted = prev_tail - panel.value;
                        let gap = (tail - predicted).magnitude();
                        if gap <= tail_tol.max(tol.rel * total.magnitude()) {
                            return QuadResult {
                                value: total + tail,
                                error: error + gap,
                                evaluations,
                                converged,
                            };
                        }
                    }
                    previous_tail = Some(tail);
                } else {
                    previous_tail = None;
                }
            }
        }
        previous = Some(panel.value);
        lo = hi;
        span *= 2.0;
    }
    QuadResult {
        value: total,
        error: f64::INFINITY,
        evaluations,
        converged: false,
    }
}

/// `∫₀^∞ f(t)·cos(p·t) dt` for `f` decaying monotonically at infinity.
///
/// Integrates between consecutive zeros of the cosine and accelerates the
/// alternating partial sums with Wynn's epsilon algorithm.
pub fn fourier_cosine<F>(mut f: F, p: f64, inner: &[f64], tol: Tolerance) -> QuadResult<f64>
where
    F: FnMut(f64) -> f64,
{
    let p = p.abs();
    if p == 0.0 {
        return integrate_to_infinity(f, 0.0, 1.0, inner, tol, tol.abs);
    }
    let half_period = std::f64::consts::PI / p;
    let first_end = 0.5 * half_period;
    let mut g = |t: f64| f(t) * (p * t).cos();

    let mut points = vec![0.0];
    points.extend(inner.iter().copied().filter(|&x| x > 0.0 && x < first_end));
    let mut decade = 1.0;
    while decade < first_end {
        if !points.contains(&decade) {
            points.push(decade);
        }
        decade *= 10.0;
    }
    points.push(first_end);
    points.sort_by(f64::total_cmp);
    let head = integrate_breakpoints(&mut g, &points, tol);
    let mut evaluations = head.evaluations;
    let mut converged = head.converged;
    let mut error = head.error;

    let mut partial = vec![head.value];
    let mut estimate = head.value;
    let mut lo = first_end;
    let mut last_change = f64::INFINITY;
    for k in 0..300 {
        let hi = lo + half_period;
        let panel = integrate(&mut g, lo, hi, Tolerance { abs: tol.abs * 1e-2, ..tol });
        evaluations += panel.evaluations;
        converged &= panel.converged;
        error += panel.error;
        let sum = partial.last().copied().unwrap_or(0.0) + panel.value;
        partial.push(sum);
        lo = hi;
        if panel.value.abs() <= tol.abs * 1e-3 {
            return QuadResult {
                value: sum,
                error,
                evaluations,
                converged,
            };
        }
        if k >= 3 {
            let window = &partial[partial.len().saturating_sub(40)..];
            let accelerated = wynn_epsilon(window);
            let change = (accelerated - estimate).abs();
            estimate = accelerated;
            let target = tol.target(accelerated);
            if change <= target && last_change <= target {
                return QuadResult {
                    value: accelerated,
                    error: error + change,
                    evaluations,
                    converged,
                };
            }
            last_change = change;
        }
    }
    QuadResult {
        value: estimate,
        error: f64::INFINITY,
        evaluations,
        converged: false,
    }
}

/// Wynn's epsilon acceleration of a sequence of partial sums.
pub fn wynn_epsilon(seq: &[f64]) -> f64 {
    let Some(&last) = seq.last() else {
        return 0.0;
    };
    let mut best = last;
    let mut prev = vec![0.0; seq.len() + 1];
    let mut cur = seq.to_vec();
    let mut column = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 || !diff.is_finite() {
                return if column % 2 == 0 { cur[i + 1] } else { best };
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        prev = cur;
        cur = next;
        column += 1;
        if column % 2 == 0 {
            let candidate = *cur.last().expect("non-empty column");
            if candidate.is_finite() {
                best = candidate;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(6) - 2.0 * x, -1.0, 2.0, Tolerance::default());
        assert!(r.converged);
        let exact = (2f64.powi(7) + 1.0) / 7.0 - 3.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-11, 1e-11));
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn complex_integrand() {
        // ∫₀^π e^{ix} dx = 2i
        let r = integrate(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            PI,
            Tolerance::default(),
        );
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn gaussian_tail() {
        let r = integrate_to_infinity(
            |x: f64| (-x * x).exp(),
            0.0,
            1.0,
            &[],
            Tolerance::default(),
            1e-14,
        );
        assert!(r.converged);
        assert!((r.value - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_tail_uses_geometric_remainder() {
        // ∫₁^∞ x^{-1.1} dx = 10, far too slow for plain doubling.
        let r = integrate_to_infinity(
            |x: f64| x.powf(-1.1),
            1.0,
            1.0,
            &[],
            Tolerance::new(1e-13, 1e-12),
            1e-12,
        );
        assert!(r.converged);
        assert!((r.value - 10.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn cosine_transform_of_cauchy_density() {
        // ∫₀^∞ cos(pt)/(1+t²) dt = (π/2) e^{-p}
        for &p in &[0.0, 1e-3, 0.1, 1.0, 3.0] {
            let r = fourier_cosine(|t| 1.0 / (1.0 + t * t), p, &[], Tolerance::new(1e-13, 1e-12));
            assert!(r.converged, "p = {p}");
            let exact = 0.5 * PI * (-p).exp();
            assert!((r.value - exact).abs() < 1e-10, "p = {p}: {} vs {exact}", r.value);
        }
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut partial = Vec::new();
        let mut s = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            partial.push(s);
        }
        assert!((wynn_epsilon(&partial) - 2f64.ln()).abs() < 1e-12);
    }
}
