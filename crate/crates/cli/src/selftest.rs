//! Fast invariant checks run by `lrpm selftest`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use lrpm_core::cumulant::{expansion_check, TestFunction};
use lrpm_core::montecarlo::{estimate_resolvent_stats, read_csv, write_csv, McCsvRow, McOptions};
use lrpm_core::rng::PairRng;
use lrpm_core::spectra::{check_resolvent_derivative, check_resolvent_identity, eigenvalues_symmetric, oracle};
use lrpm_core::theory::{compute_b, solve_w};
use lrpm_core::{Complex64, EnsembleSpec, EntryDistribution, EntryKind, Profile, SymmetricMatrix, TheoryContext};
use serde_json::json;

use crate::commands::Artifacts;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_matrix(dim: usize, seed: u64) -> SymmetricMatrix {
    let rng = PairRng::new(seed, 0);
    SymmetricMatrix::from_fn(dim, |i, j| 2.0 * rng.uniforms(i as u32, j as u32).1 - 1.0)
}

fn fixed_point() -> Check {
    let rng = PairRng::new(17, 1);
    let mut worst: f64 = 0.0;
    for k in 0..300u32 {
        let (a, b) = rng.uniforms(k, k + 1);
        let v = [0.5, 1.0, 2.0][k as usize % 3];
        let z = Complex64::new(10.0 * a - 5.0, (8.0 * b - 4.0).exp() * if k % 2 == 0 { 1.0 } else { -1.0 });
        let w = solve_w(v, z).map_err(|e| e.to_string())?;
        if w.im * z.im <= 0.0 {
            return Err(format!("wrong branch at z = {z}"));
        }
        worst = worst.max((v * v * w * w + z * w + 1.0).norm());
    }
    ensure(worst < 1e-12, format!("max residual {worst:.1e}"))
}

fn eigensolver() -> Check {
    let mut worst: f64 = 0.0;
    for (dim, seed) in [(30, 1), (45, 2)] {
        let h = random_matrix(dim, seed);
        let fast = eigenvalues_symmetric(&h).map_err(|e| e.to_string())?;
        let slow = oracle::eigenvalues(&h);
        let scale = slow.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in fast.eigenvalues.iter().zip(&slow) {
            worst = worst.max((a - b).abs() / scale);
        }
        let (t, f) = fast.trace_identity_errors(&h);
        worst = worst.max(t).max(f);
    }
    ensure(worst < 1e-10, format!("max deviation from bisection {worst:.1e}"))
}

fn resolvent() -> Check {
    let h = random_matrix(20, 3);
    let h_tilde = random_matrix(20, 4);
    let z = Complex64::new(1.0, 2.0);
    let identity = check_resolvent_identity(&h, &h_tilde, z).map_err(|e| e.to_string())?;
    let derivative = check_resolvent_derivative(&h, z, (2, 7)).map_err(|e| e.to_string())?;
    ensure(
        identity < 1e-10 && derivative < 1e-6,
        format!("identity {identity:.1e}, derivative {derivative:.1e}"),
    )
}

fn b_constant() -> Check {
    let mut worst: f64 = 0.0;
    for nu in [1.1, 1.5, 2.0, 3.0] {
        worst = worst.max(compute_b(nu, 1.0).map_err(|e| e.to_string())?.relative_error);
    }
    let b2 = compute_b(2.0, 1.0).map_err(|e| e.to_string())?.quadrature;
    ensure(
        worst < 1e-8 && (b2 + 1.0 / (8.0 * 2f64.sqrt())).abs() < 1e-10,
        format!("max relative error {worst:.1e}"),
    )
}

fn q_integral() -> Check {
    let ctx = TheoryContext::new(
        Profile::exponential(),
        EntryDistribution::new(EntryKind::Gaussian, 1.0).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let k = Complex64::new(0.4, 0.3);
    let a = (1.0 - k).sqrt();
    let exact = PI / a + k * PI / (2.0 * a * a * a);
    let got = ctx.q_integral(k).map_err(|e| e.to_string())?;
    let err = (got - exact).norm() / exact.norm();
    ensure(err < 1e-9, format!("relative error {err:.1e}"))
}

fn cumulants() -> Check {
    let g = EntryDistribution::new(EntryKind::Gaussian, 1.0).map_err(|e| e.to_string())?;
    let r = EntryDistribution::new(EntryKind::Rademacher, 1.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for f in TestFunction::library() {
        worst = worst.max(expansion_check(&g, &f, 1).map_err(|e| e.to_string())?.gap);
    }
    let cube = TestFunction::Monomial { degree: 3 };
    let q3 = expansion_check(&r, &cube, 3).map_err(|e| e.to_string())?;
    let q1 = expansion_check(&r, &cube, 1).map_err(|e| e.to_string())?;
    ensure(
        worst < 1e-9 && q3.gap < 1e-12 && q1.within_bound,
        format!("gaussian gap {worst:.1e}, rademacher q=3 gap {:.1e}", q3.gap),
    )
}

fn reproducibility() -> Check {
    let spec = EnsembleSpec::new(
        12,
        5.0,
        EntryDistribution::new(EntryKind::Uniform, 1.0).map_err(|e| e.to_string())?,
        Profile::gaussian(),
    )
    .map_err(|e| e.to_string())?;
    let zs = [Complex64::new(0.2, 3.0), Complex64::new(0.0, -4.0)];
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let report = estimate_resolvent_stats(&spec, &zs, 10, 99, &McOptions::with_workers(workers))
            .map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_csv(&mut buf, &report.csv_rows()).map_err(|e| e.to_string())?;
        let back: Vec<McCsvRow> = read_csv(buf.as_slice()).map_err(|e| e.to_string())?;
        if back != report.csv_rows() {
            return Err("CSV round trip changed values".into());
        }
        outputs.push(buf);
    }
    ensure(outputs[0] == outputs[1], "CSV identical for 1 and 3 workers, round trip exact".into())
}

type NamedCheck = (&'static str, fn() -> Check);

pub fn run() -> Artifacts {
    let checks: [NamedCheck; 7] = [
        ("fixed point", fixed_point),
        ("eigensolver vs bisection", eigensolver),
        ("resolvent validators", resolvent),
        ("B constant", b_constant),
        ("Q integral", q_integral),
        ("cumulant expansion", cumulants),
        ("reproducibility", reproducibility),
    ];
    let mut report = String::new();
    let mut failures = 0;
    let mut results = Vec::new();
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        failures += usize::from(!ok);
        let _ = writeln!(report, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        results.push(json!({ "check": name, "passed": ok, "detail": detail }));
    }
    Artifacts {
        results: json!({ "checks": results, "failures": failures }),
        report: Some(report),
        failures,
        ..Default::default()
    }
}
