use std::f64::consts::PI;

use lrpm_core::theory::{compute_b, solve_w, Side};
use lrpm_core::{Complex64, EntryDistribution, EntryKind, Profile, ProfileKind, TheoryContext};
use proptest::prelude::*;

fn ctx(kind: ProfileKind, v: f64) -> TheoryContext {
    TheoryContext::new(
        Profile::new(kind).unwrap(),
        EntryDistribution::new(EntryKind::Gaussian, v).unwrap(),
    )
    .unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `Σ (m+1) K^m ∫ψ̃^{m+1}`, the geometric expansion of `∫ψ̃/(1 − Kψ̃)²`.
fn q_series(k: Complex64, power_integral: impl Fn(f64) -> f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut km = Complex64::new(1.0, 0.0);
    for m in 0..4000 {
        let n = (m + 1) as f64;
        sum += km * n * power_integral(n);
        km *= k;
        if km.norm() < 1e-18 {
            break;
        }
    }
    sum
}

#[test]
fn q_integral_matches_series_for_gaussian_profile() {
    let c = ctx(ProfileKind::Gaussian, 1.0);
    // ψ̃(p) = exp(−p²/4π), so ∫ψ̃ⁿ = 2π/√n.
    for k in [Complex64::new(0.0557, 0.0), Complex64::new(0.3, 0.2), Complex64::new(-0.6, 0.1), Complex64::new(0.7, -0.3)] {
        let expected = q_series(k, |n| 2.0 * PI / n.sqrt());
        let got = c.q_integral(k).unwrap();
        assert!((got - expected).norm() < 1e-9 * expected.norm(), "K={k}: {got} vs {expected}");
    }
}

#[test]
fn q_integral_matches_closed_form_for_exponential_profile() {
    let c = ctx(ProfileKind::Exponential, 1.0);
    // ∫(1+p²)/(1+p²−K)² dp = π/a + Kπ/(2a³) with a² = 1 − K.
    for k in [Complex64::new(0.0557, 0.0), Complex64::new(0.5, 0.4), Complex64::new(-2.0, 0.0), Complex64::new(0.9, 0.05)] {
        let a = (1.0 - k).sqrt();
        let expected = PI / a + k * PI / (2.0 * a * a * a);
        let got = c.q_integral(k).unwrap();
        assert!((got - expected).norm() < 1e-9 * expected.norm(), "K={k}: {got} vs {expected}");
    }
}

#[test]
fn q_integral_matches_series_for_stable_profile() {
    let nu = 1.5;
    let c = ctx(ProfileKind::Stable { nu }, 1.0);
    let g = statrs::function::gamma::gamma(1.0 + 1.0 / nu);
    // ∫exp(−n|p|^ν) dp = 2Γ(1 + 1/ν) n^{−1/ν}.
    for k in [Complex64::new(0.1, 0.0), Complex64::new(0.2, -0.4)] {
        let expected = q_series(k, |n| 2.0 * g * n.powf(-1.0 / nu));
        let got = c.q_integral(k).unwrap();
        assert!((got - expected).norm() < 1e-8 * expected.norm(), "K={k}: {got} vs {expected}");
    }
}

#[test]
fn q_integral_for_indicator_matches_series() {
    let c = ctx(ProfileKind::Indicator, 1.0);
    let k = Complex64::new(0.05, 0.0);
    // ∫(2 sin(p/2)/p)ⁿ dp = 2∫(sin x/x)ⁿ dx for n = 1..7 in closed form;
    // the omitted terms are O(K⁷).
    let powers = [
        2.0 * PI,
        2.0 * PI,
        3.0 * PI / 2.0,
        4.0 * PI / 3.0,
        115.0 * PI / 96.0,
        11.0 * PI / 10.0,
        5887.0 * PI / 5760.0,
    ];
    let mut expected = Complex64::new(0.0, 0.0);
    for (m, p) in powers.iter().enumerate() {
        expected += k.powi(m as i32) * (m as f64 + 1.0) * *p;
    }
    let got = c.q_integral(k).unwrap();
    assert!((got - expected).norm() < 1e-7, "{got} vs {expected}");
}

#[test]
fn semicircle_stieltjes_transform_is_w() {
    for v in [0.5, 1.0, 2.0] {
        let c = ctx(ProfileKind::Gaussian, v);
        for z in [Complex64::new(0.3, 1.0), Complex64::new(-1.5, 0.4), Complex64::new(0.0, -4.0)] {
            // λ = 2v sin θ removes the square-root endpoints.
            let re = simpson(|t| {
                let l = 2.0 * v * t.sin();
                (c.semicircle_density(l) * 2.0 * v * t.cos() / (l - z)).re
            }, -PI / 2.0, PI / 2.0, 20_000);
            let im = simpson(|t| {
                let l = 2.0 * v * t.sin();
                (c.semicircle_density(l) * 2.0 * v * t.cos() / (l - z)).im
            }, -PI / 2.0, PI / 2.0, 20_000);
            let w = solve_w(v, z).unwrap();
            assert!((Complex64::new(re, im) - w).norm() < 1e-9, "v={v} z={z}");
        }
        let mass = simpson(|l| c.semicircle_density(l), -2.0 * v, 2.0 * v, 200_000);
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((c.semicircle_cdf(2.0 * v) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn plancherel_for_smooth_profiles() {
    for (kind, upper, tail) in [
        (ProfileKind::Gaussian, 60.0, 0.0),
        (ProfileKind::Stable { nu: 1.5 }, 40.0, 0.0),
        // ∫_P^∞ (1+p²)^{−2} ≈ 1/(3P³).
        (ProfileKind::Exponential, 2000.0, 1.0 / (3.0 * 2000f64.powi(3))),
    ] {
        let p = Profile::new(kind).unwrap();
        let half = simpson(|x| p.psi_tilde(x).unwrap().powi(2), 0.0, upper, 400_000) + tail;
        let lhs = 2.0 * half / (2.0 * PI);
        let rhs = p.moments().unwrap().int_psi_sq;
        assert!((lhs - rhs).abs() < 1e-7 * rhs, "{kind}: {lhs} vs {rhs}");
    }
}

#[test]
fn b_nu_at_nu_two_is_minus_one_over_eight_root_two() {
    let b = compute_b(2.0, 1.0).unwrap();
    assert!((b.quadrature + 1.0 / (8.0 * 2f64.sqrt())).abs() < 1e-12);
    // c₁ enters as c₁^{−1/ν}.
    let scaled = compute_b(2.0, 4.0).unwrap();
    assert!((scaled.quadrature - b.quadrature / 2.0).abs() < 1e-13);
}

#[test]
fn xi_approaches_its_leading_asymptote() {
    let c = ctx(ProfileKind::Gaussian, 1.0);
    let s = 1e-4;
    let xi = c.compute_xi(-s / 2.0, s / 2.0).unwrap().value;
    let lead = c.xi_leading_asymptote(0.0, s).unwrap();
    assert!(((xi - lead) / lead).abs() < 1e-3, "{xi} vs {lead}");
}

#[test]
fn t_at_conjugate_points_reference_values() {
    let c = ctx(ProfileKind::Gaussian, 1.0);
    let (z1, z2) = (Complex64::new(0.0, 4.0), Complex64::new(0.0, -4.0));
    let t = c.compute_t(z1, z2).unwrap();
    let q = c.compute_q(z1, z2).unwrap();
    // Q from the series oracle, Δ = 3 − 3/√2 for gaussian entries.
    let w = solve_w(1.0, z1).unwrap();
    let (w1, w2) = (w, w.conj());
    let k = w1 * w2;
    let d = (1.0 - w1 * w1) * (1.0 - w2 * w2);
    let q_oracle = k * k / (PI * d) * q_series(k, |n| 2.0 * PI / n.sqrt());
    let delta = 3.0 - 3.0 / 2f64.sqrt();
    let t_oracle = q_oracle + 2.0 * delta * k * k * k / d;
    assert!((q - q_oracle).norm() < 1e-12);
    assert!((t - t_oracle).norm() < 1e-12);
    assert!(t.im.abs() < 1e-15 && t.re > 0.0);
}

proptest! {
    #[test]
    fn herglotz_and_resolvent_bound(re in -10.0f64..10.0, im in 1e-6f64..50.0, lower in any::<bool>(), v in 0.2f64..3.0) {
        let z = Complex64::new(re, if lower { -im } else { im });
        let w = solve_w(v, z).unwrap();
        prop_assert!(w.im * z.im > 0.0);
        prop_assert!(w.norm() <= 1.0 / im * (1.0 + 1e-12));
        prop_assert!((v * v * w * w + z * w + 1.0).norm() < 1e-12 * (1.0 + z.norm() * w.norm()));
        prop_assert_eq!(solve_w(v, z.conj()).unwrap(), w.conj());
    }

    #[test]
    fn boundary_denominator_is_four_v2_rho2(x in -0.99f64..0.99, v in 0.3f64..2.5) {
        let lambda = 2.0 * v * x;
        let c = ctx(ProfileKind::Gaussian, v);
        let b = c.w_boundary(lambda, Side::Upper).unwrap();
        let w1 = b.w();
        let w2 = w1.conj();
        let v2 = v * v;
        let d = (1.0 - v2 * w1 * w1) * (1.0 - v2 * w2 * w2);
        prop_assert!((d.re - 4.0 * v2 * b.rho * b.rho).abs() < 1e-10 * (1.0 + d.norm()));
        prop_assert!(d.im.abs() < 1e-12 * (1.0 + d.norm()));
        // The boundary value is the limit of the resolvent from above.
        let near = solve_w(v, Complex64::new(lambda, 1e-10)).unwrap();
        prop_assert!((near - w1).norm() < 1e-6);
        prop_assert!((b.rho / PI - c.semicircle_density(lambda)).abs() < 1e-12);
    }

    #[test]
    fn t_is_symmetric_and_conjugation_covariant(a in 0.0f64..3.0, ia in 3.0f64..8.0, bb in -3.0f64..3.0, ib in 3.0f64..8.0) {
        let c = ctx(ProfileKind::Exponential, 1.0);
        let z1 = Complex64::new(a, ia);
        let z2 = Complex64::new(bb, -ib);
        let t12 = c.compute_t(z1, z2).unwrap();
        let t21 = c.compute_t(z2, z1).unwrap();
        let tc = c.compute_t(z1.conj(), z2.conj()).unwrap();
        prop_assert!((t12 - t21).norm() <= 1e-13 * t12.norm());
        prop_assert!((tc - t12.conj()).norm() <= 1e-10 * t12.norm());
    }
}
