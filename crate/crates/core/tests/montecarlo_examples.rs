use lrpm_core::montecarlo::{
    correlation_vs_theory, correlation_vs_theory_adaptive, density_experiment, estimate_resolvent_stats,
    sample_spectrum, variance_scaling_experiment, write_csv, McOptions,
};
use lrpm_core::theory::solve_w;
use lrpm_core::{Complex64, EnsembleSpec, EntryDistribution, EntryKind, Profile};

fn spec(n: usize, b: f64) -> EnsembleSpec {
    EnsembleSpec::new(
        n,
        b,
        EntryDistribution::new(EntryKind::Gaussian, 1.0).unwrap(),
        Profile::gaussian(),
    )
    .unwrap()
}

fn i(y: f64) -> Complex64 {
    Complex64::new(0.0, y)
}

#[test]
fn mean_resolvent_trace_is_close_to_w() {
    let report = estimate_resolvent_stats(&spec(500, 100.0), &[i(4.0)], 200, 3, &McOptions::default()).unwrap();
    let mean = report.find("mean_g").unwrap().value;
    let w = solve_w(1.0, i(4.0)).unwrap();
    assert!((w.im - 0.236068).abs() < 1e-6);
    assert!((mean - w).norm() < 0.02, "{mean} vs {w}");
}

#[test]
fn stderr_scales_like_inverse_root_of_replications() {
    let s = spec(50, 10.0);
    let opts = McOptions::default();
    let se = |reps| {
        let r = estimate_resolvent_stats(&s, &[i(4.0)], reps, 21, &opts).unwrap();
        (r.find("mean_g").unwrap().stderr, r.find("var_g").unwrap().stderr)
    };
    let (m1, v1) = se(200);
    let (m2, v2) = se(400);
    let (m4, v4) = se(800);
    for (a, b, expected) in [(m1, m2, 2f64.sqrt()), (m1, m4, 2.0), (v1, v2, 2f64.sqrt()), (v1, v4, 2.0)] {
        let ratio = a / b;
        assert!((ratio / expected - 1.0).abs() < 0.3, "ratio {ratio}, expected {expected}");
    }
}

#[test]
fn conjugate_pair_covariance_is_real_and_equals_variance() {
    let z = Complex64::new(0.5, 4.0);
    let report = estimate_resolvent_stats(&spec(60, 12.0), &[z, z.conj()], 300, 5, &McOptions::default()).unwrap();
    let cov = report.find("cov").unwrap();
    assert!(cov.value.im.abs() <= cov.stderr);
    let var = report.rows.iter().find(|r| r.statistic == "var_g" && r.z1 == z).unwrap();
    assert_eq!(cov.value, var.value);
}

#[test]
fn repeated_point_covariance_is_the_plain_sample_variance() {
    let s = spec(30, 8.0);
    let z = Complex64::new(-0.4, 3.5);
    let reps = 40;
    let report = estimate_resolvent_stats(&s, &[z, z], reps, 8, &McOptions::with_workers(1)).unwrap();
    let cov = report.find("cov").unwrap().value;
    let g: Vec<Complex64> = (0..reps as u64)
        .map(|r| sample_spectrum(&s, 8, r).unwrap().resolvent_trace(z).unwrap().g)
        .collect();
    let mean = g.iter().sum::<Complex64>() / reps as f64;
    let var = g.iter().map(|x| (x - mean) * (x - mean)).sum::<Complex64>() / (reps as f64 - 1.0);
    assert!((cov - var).norm() <= 1e-15 * var.norm());
}

#[test]
fn variance_shrinks_deeper_in_the_region() {
    let ladder = [spec(50, 10.0), spec(100, 20.0), spec(150, 30.0)];
    let opts = McOptions::default();
    let near = variance_scaling_experiment(&ladder, i(4.0), 150, 2, &opts).unwrap();
    let far = variance_scaling_experiment(&ladder, i(10.0), 150, 2, &opts).unwrap();
    for (a, b) in near.rungs.iter().zip(&far.rungs) {
        assert!(b.nb_var < a.nb_var);
        assert_eq!(a.size, b.size);
    }
    assert!(variance_scaling_experiment(&ladder[..2], i(4.0), 10, 2, &opts).is_err());
}

#[test]
fn two_seeds_agree_within_joint_error() {
    let s = spec(50, 10.0);
    let opts = McOptions::default();
    let a = estimate_resolvent_stats(&s, &[i(4.0)], 400, 100, &opts).unwrap();
    let b = estimate_resolvent_stats(&s, &[i(4.0)], 400, 200, &opts).unwrap();
    for stat in ["mean_g", "var_g"] {
        let (x, y) = (a.find(stat).unwrap(), b.find(stat).unwrap());
        let joint = (x.stderr.powi(2) + y.stderr.powi(2)).sqrt();
        assert!((x.value - y.value).norm() <= 3.0 * joint, "{stat}");
        assert_ne!(x.value, y.value);
    }
}

#[test]
fn histogram_pools_every_eigenvalue() {
    let s = spec(40, 20.0);
    let report = density_experiment(&s, 7, 33, 1, &McOptions::default()).unwrap();
    assert_eq!(report.eigenvalue_count, 7 * 81);
    assert!((report.total_mass - 1.0).abs() < 1e-12);
    assert!((report.bins[0].lo + 3.0).abs() < 1e-15 && (report.bins[32].hi - 3.0).abs() < 1e-15);
    for r in 0..3 {
        assert_eq!(sample_spectrum(&s, 1, r).unwrap().len(), 81);
    }
}

#[test]
fn correlation_comparison_at_small_size() {
    let s = spec(100, 25.0);
    let c = correlation_vs_theory(&s, i(4.0), i(-4.0), 400, 9, &McOptions::default()).unwrap();
    assert!((c.theory.re - 0.006316928126068616).abs() < 1e-12);
    assert!(c.envelope >= 0.15 * c.theory.norm());
    assert!(c.within_envelope, "{c:?}");
    assert!((c.difference - (c.nb_cov - c.theory)).norm() == 0.0);
}

#[test]
fn adaptive_correlation_reuses_realizations() {
    let s = spec(30, 10.0);
    let opts = McOptions::with_workers(2);
    let adaptive = correlation_vs_theory_adaptive(&s, i(4.0), i(-4.0), 10, 80, 4, &opts).unwrap();
    let fixed = correlation_vs_theory(&s, i(4.0), i(-4.0), adaptive.reps, 4, &opts).unwrap();
    assert_eq!(adaptive.nb_cov, fixed.nb_cov);
    assert!(adaptive.target_reached || adaptive.reps == 80);
}

#[test]
fn experiments_are_identical_across_worker_counts() {
    let ladder = [spec(10, 4.0), spec(15, 6.0), spec(20, 8.0)];
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let opts = McOptions::with_workers(workers);
        let scaling = variance_scaling_experiment(&ladder, i(4.0), 12, 77, &opts).unwrap();
        let corr = correlation_vs_theory(&ladder[1], i(4.0), Complex64::new(1.0, -5.0), 12, 77, &opts).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &scaling.rungs).unwrap();
        outputs.push((buf, corr.nb_cov, corr.nb_stderr));
    }
    assert_eq!(outputs[0], outputs[1]);
}
