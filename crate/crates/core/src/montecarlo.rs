//! Monte Carlo experiments over independent realizations of the ensemble.
//!
//! Realization `r` is always generated from `(seed, r)`. Per-realization
//! results are collected in index order and reduced sequentially, so every
//! reported number is bit-identical for any worker count.

use std::io::{Read, Write};
use std::ops::Range;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_matrix, EnsembleSpec};
use crate::error::{invalid, Error, Result};
use crate::spectra::{eigenvalues_symmetric, SpectralSample};
use crate::theory::TheoryContext;

/// Execution options shared by all experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    /// Worker threads; 0 lets the thread pool choose.
    pub workers: usize,
}

impl McOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| invalid("workers", e.to_string()))
    }
}

/// Parameters of the sampled ensemble, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    pub n: usize,
    pub size: usize,
    pub b: f64,
    pub dist: String,
    pub v: f64,
    pub profile: String,
}

impl From<&EnsembleSpec> for SpecEcho {
    fn from(spec: &EnsembleSpec) -> Self {
        Self {
            n: spec.n,
            size: spec.size(),
            b: spec.b,
            dist: spec.dist.kind.to_string(),
            v: spec.dist.v,
            profile: spec.profile.kind().to_string(),
        }
    }
}

/// Spectrum of realization `realization`.
pub fn sample_spectrum(spec: &EnsembleSpec, seed: u64, realization: u64) -> Result<SpectralSample> {
    let m = sample_matrix(spec, seed, realization);
    let mut s = eigenvalues_symmetric(&m.matrix)?;
    s.seed = Some(seed);
    s.realization = Some(realization);
    Ok(s)
}

/// Maps `f` over realization indices on the worker pool, keeping index order.
pub fn map_realizations<T, F>(options: &McOptions, range: Range<u64>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = options.pool()?;
    pool.install(|| range.into_par_iter().map(f).collect())
}

fn resolvent_row(sample: &SpectralSample, zs: &[Complex64]) -> Result<Vec<Complex64>> {
    zs.iter().map(|&z| Ok(sample.resolvent_trace(z)?.g)).collect()
}

fn check_points(zs: &[Complex64]) -> Result<()> {
    if zs.is_empty() {
        return Err(invalid("z", "at least one point is required"));
    }
    for z in zs {
        if z.im == 0.0 || !z.is_finite() {
            return Err(invalid("z", "z must be non-real"));
        }
    }
    Ok(())
}

fn mean(xs: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

/// Sample mean with its jackknife standard error `sd/√R`.
pub fn mean_with_stderr(xs: &[Complex64]) -> (Complex64, f64) {
    let r = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).norm_sqr()).sum();
    (m, (ss / (r * (r - 1.0))).sqrt())
}

/// Unbiased sample covariance `Σ(x−x̄)(y−ȳ)/(R−1)` without conjugation, and
/// its leave-one-out jackknife standard error. With `R = 2` the leave-one-out
/// replicates are undefined and the normal-theory error
/// `√((s_x² s_y² + |C|²)/(R−1))` is reported instead.
pub fn covariance_with_stderr(xs: &[Complex64], ys: &[Complex64]) -> Result<(Complex64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("reps", "covariance needs at least 2 paired realizations"));
    }
    let r = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let cx: Vec<Complex64> = xs.iter().map(|x| x - mx).collect();
    let cy: Vec<Complex64> = ys.iter().map(|y| y - my).collect();
    let mut p = Complex64::new(0.0, 0.0);
    for (a, b) in cx.iter().zip(&cy) {
        p += a * b;
    }
    let c = p / (r - 1.0);
    if xs.len() == 2 {
        let sx: f64 = cx.iter().map(|a| a.norm_sqr()).sum::<f64>() / (r - 1.0);
        let sy: f64 = cy.iter().map(|a| a.norm_sqr()).sum::<f64>() / (r - 1.0);
        return Ok((c, ((sx * sy + c.norm_sqr()) / (r - 1.0)).sqrt()));
    }
    let leave_out: Vec<Complex64> = cx
        .iter()
        .zip(&cy)
        .map(|(a, b)| {
            // Removing one point shifts the centred sum by a·b·R/(R−1).
            let ab = a * b;
            (p - ab - ab / (r - 1.0)) / (r - 2.0)
        })
        .collect();
    let centre = mean(&leave_out);
    let spread: f64 = leave_out.iter().map(|t| (t - centre).norm_sqr()).sum();
    Ok((c, ((r - 1.0) / r * spread).sqrt()))
}

/// One reported statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub statistic: String,
    pub z1: Complex64,
    pub z2: Option<Complex64>,
    pub value: Complex64,
    pub stderr: f64,
}

/// Estimates with standard errors and replication metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub reps: usize,
    pub spec: SpecEcho,
    pub seed: u64,
    pub wall_time: f64,
}

/// Flat CSV layout of [`McRow`]: complex values as `_re`/`_im` columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCsvRow {
    pub statistic: String,
    pub z1_re: f64,
    pub z1_im: f64,
    pub z2_re: Option<f64>,
    pub z2_im: Option<f64>,
    pub value_re: f64,
    pub value_im: f64,
    pub stderr: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub b: f64,
    pub seed: u64,
}

impl McReport {
    pub fn find(&self, statistic: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.statistic == statistic)
    }

    pub fn csv_rows(&self) -> Vec<McCsvRow> {
        self.rows
            .iter()
            .map(|r| McCsvRow {
                statistic: r.statistic.clone(),
                z1_re: r.z1.re,
                z1_im: r.z1.im,
                z2_re: r.z2.map(|z| z.re),
                z2_im: r.z2.map(|z| z.im),
                value_re: r.value.re,
                value_im: r.value.im,
                stderr: r.stderr,
                reps: self.reps,
                size: self.spec.size,
                b: self.spec.b,
                seed: self.seed,
            })
            .collect()
    }
}

/// Mean and variance of `g(z)` for each `z`, and the covariance of every
/// pair `z_i, z_j` (`i < j`).
pub fn estimate_resolvent_stats(
    spec: &EnsembleSpec,
    zs: &[Complex64],
    reps: usize,
    seed: u64,
    options: &McOptions,
) -> Result<McReport> {
    check_points(zs)?;
    if reps < 2 {
        return Err(invalid("reps", "need at least 2 realizations"));
    }
    let start = Instant::now();
    let per_realization = map_realizations(options, 0..reps as u64, |r| {
        resolvent_row(&sample_spectrum(spec, seed, r)?, zs)
    })?;
    let column = |k: usize| -> Vec<Complex64> { per_realization.iter().map(|row| row[k]).collect() };
    let mut rows = Vec::new();
    for (k, &z) in zs.iter().enumerate() {
        let g = column(k);
        let (m, se) = mean_with_stderr(&g);
        rows.push(McRow {
            statistic: "mean_g".into(),
            z1: z,
            z2: None,
            value: m,
            stderr: se,
        });
        let conj: Vec<Complex64> = g.iter().map(|x| x.conj()).collect();
        let (var, var_se) = covariance_with_stderr(&g, &conj)?;
        rows.push(McRow {
            statistic: "var_g".into(),
            z1: z,
            z2: None,
            value: Complex64::new(var.re, 0.0),
            stderr: var_se,
        });
    }
    for i in 0..zs.len() {
        for j in i + 1..zs.len() {
            let (c, se) = covariance_with_stderr(&column(i), &column(j))?;
            rows.push(McRow {
                statistic: "cov".into(),
                z1: zs[i],
                z2: Some(zs[j]),
                value: c,
                stderr: se,
            });
        }
    }
    Ok(McReport {
        rows,
        reps,
        spec: spec.into(),
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One histogram bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub density: f64,
    /// Average of the semicircle density over the bin.
    pub semicircle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub bins: Vec<HistogramBin>,
    pub l1: f64,
    pub total_mass: f64,
    /// Fraction of eigenvalues with `|λ| > 2v + 0.5`.
    pub mass_outside: f64,
    /// Eigenvalues outside the histogram range `[−2v−1, 2v+1]`.
    pub out_of_range: u64,
    pub eigenvalue_count: u64,
    pub reps: usize,
    pub spec: SpecEcho,
    pub seed: u64,
    pub wall_time: f64,
}

/// Pooled eigenvalue histogram on `[−2v−1, 2v+1]` and its L1 distance to
/// the semicircle law.
pub fn density_experiment(
    spec: &EnsembleSpec,
    reps: usize,
    bins: usize,
    seed: u64,
    options: &McOptions,
) -> Result<DensityReport> {
    if bins == 0 {
        return Err(invalid("bins", "need at least one bin"));
    }
    if reps == 0 {
        return Err(invalid("reps", "need at least one realization"));
    }
    let start = Instant::now();
    let v = spec.dist.v;
    let (lo, hi) = (-2.0 * v - 1.0, 2.0 * v + 1.0);
    let width = (hi - lo) / bins as f64;
    let size = spec.size();
    let per_realization = map_realizations(options, 0..reps as u64, |r| {
        let s = sample_spectrum(spec, seed, r)?;
        if s.len() != size {
            return Err(invalid("spectrum", "eigenvalue count differs from N"));
        }
        Ok(s.eigenvalues)
    })?;
    let mut counts = vec![0u64; bins];
    let (mut out_of_range, mut outside, mut total) = (0u64, 0u64, 0u64);
    for eigenvalues in &per_realization {
        for &l in eigenvalues {
            total += 1;
            if l.abs() > 2.0 * v + 0.5 {
                outside += 1;
            }
            if l < lo || l > hi {
                out_of_range += 1;
                continue;
            }
            let k = (((l - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    let in_range = (total - out_of_range) as f64;
    let theory = TheoryContext::new(spec.profile.clone(), spec.dist)?;
    let mut histogram = Vec::with_capacity(bins);
    let (mut l1, mut mass) = (0.0, 0.0);
    for (k, &count) in counts.iter().enumerate() {
        let a = lo + k as f64 * width;
        let b = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
        let density = if in_range > 0.0 { count as f64 / (in_range * width) } else { 0.0 };
        let semicircle = (theory.semicircle_cdf(b) - theory.semicircle_cdf(a)) / width;
        l1 += (density - semicircle).abs() * width;
        mass += density * width;
        histogram.push(HistogramBin {
            lo: a,
            hi: b,
            count,
            density,
            semicircle,
        });
    }
    Ok(DensityReport {
        bins: histogram,
        l1,
        total_mass: mass,
        mass_outside: outside as f64 / total as f64,
        out_of_range,
        eigenvalue_count: total,
        reps,
        spec: spec.into(),
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `Nb·Var{g(z)}` for one `(N, b)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRung {
    #[serde(rename = "N")]
    pub size: usize,
    pub b: f64,
    pub var: f64,
    pub var_stderr: f64,
    pub nb_var: f64,
    pub nb_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceScalingReport {
    pub z: Complex64,
    pub rungs: Vec<ScalingRung>,
    /// `max/min − 1` of `Nb·Var` across rungs.
    pub spread: f64,
    pub reps: usize,
    pub seed: u64,
    pub wall_time: f64,
}

/// Runs every rung of `ladder` with `reps` realizations each.
pub fn variance_scaling_experiment(
    ladder: &[EnsembleSpec],
    z: Complex64,
    reps: usize,
    seed: u64,
    options: &McOptions,
) -> Result<VarianceScalingReport> {
    if ladder.len() < 3 {
        return Err(invalid("ladder", "need at least 3 (N, b) rungs"));
    }
    check_points(&[z])?;
    let start = Instant::now();
    let mut rungs = Vec::with_capacity(ladder.len());
    for spec in ladder {
        let report = estimate_resolvent_stats(spec, &[z], reps, seed, options)?;
        let row = report.find("var_g").expect("variance row is always present");
        let nb = spec.size() as f64 * spec.b;
        rungs.push(ScalingRung {
            size: spec.size(),
            b: spec.b,
            var: row.value.re,
            var_stderr: row.stderr,
            nb_var: nb * row.value.re,
            nb_stderr: nb * row.stderr,
        });
    }
    let max = rungs.iter().map(|r| r.nb_var).fold(f64::NEG_INFINITY, f64::max);
    let min = rungs.iter().map(|r| r.nb_var).fold(f64::INFINITY, f64::min);
    Ok(VarianceScalingReport {
        z,
        rungs,
        spread: max / min - 1.0,
        reps,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Measured `Nb·Ĉ(z₁, z₂)` against the predicted `T(z₁, z₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationComparison {
    pub z1: Complex64,
    pub z2: Complex64,
    pub nb_cov: Complex64,
    pub nb_stderr: f64,
    pub theory: Complex64,
    pub difference: Complex64,
    pub difference_in_stderr: f64,
    /// `max(3·stderr, 0.15·|T|)`.
    pub envelope: f64,
    pub within_envelope: bool,
    /// Whether the stderr fell below 20% of `|T|`.
    pub target_reached: bool,
    pub reps: usize,
    pub spec: SpecEcho,
    pub seed: u64,
    pub wall_time: f64,
}

fn pair_samples(
    spec: &EnsembleSpec,
    z1: Complex64,
    z2: Complex64,
    range: Range<u64>,
    seed: u64,
    options: &McOptions,
) -> Result<Vec<[Complex64; 2]>> {
    map_realizations(options, range, |r| {
        let s = sample_spectrum(spec, seed, r)?;
        Ok([s.resolvent_trace(z1)?.g, s.resolvent_trace(z2)?.g])
    })
}

fn compare(
    spec: &EnsembleSpec,
    samples: &[[Complex64; 2]],
    z1: Complex64,
    z2: Complex64,
    theory: Complex64,
    seed: u64,
    start: Instant,
) -> Result<CorrelationComparison> {
    let g1: Vec<Complex64> = samples.iter().map(|p| p[0]).collect();
    let g2: Vec<Complex64> = samples.iter().map(|p| p[1]).collect();
    let (c, se) = covariance_with_stderr(&g1, &g2)?;
    let nb = spec.size() as f64 * spec.b;
    let (nb_cov, nb_stderr) = (c * nb, se * nb);
    let difference = nb_cov - theory;
    let envelope = (3.0 * nb_stderr).max(0.15 * theory.norm());
    Ok(CorrelationComparison {
        z1,
        z2,
        nb_cov,
        nb_stderr,
        theory,
        difference,
        difference_in_stderr: difference.norm() / nb_stderr,
        envelope,
        within_envelope: difference.norm() <= envelope,
        target_reached: nb_stderr < 0.2 * theory.norm(),
        reps: samples.len(),
        spec: spec.into(),
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn theory_for(spec: &EnsembleSpec, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    TheoryContext::new(spec.profile.clone(), spec.dist)?.compute_t(z1, z2)
}

/// Compares `Nb·Ĉ` from exactly `reps` realizations with `T`.
pub fn correlation_vs_theory(
    spec: &EnsembleSpec,
    z1: Complex64,
    z2: Complex64,
    reps: usize,
    seed: u64,
    options: &McOptions,
) -> Result<CorrelationComparison> {
    check_points(&[z1, z2])?;
    if reps < 2 {
        return Err(invalid("reps", "need at least 2 realizations"));
    }
    let start = Instant::now();
    let theory = theory_for(spec, z1, z2)?;
    let samples = pair_samples(spec, z1, z2, 0..reps as u64, seed, options)?;
    compare(spec, &samples, z1, z2, theory, seed, start)
}

/// Like [`correlation_vs_theory`] but doubles the replication count from
/// `initial` until the stderr drops below 20% of `|T|` or `budget` is spent.
/// Missing the target is reported through `target_reached`, not as an error.
pub fn correlation_vs_theory_adaptive(
    spec: &EnsembleSpec,
    z1: Complex64,
    z2: Complex64,
    initial: usize,
    budget: usize,
    seed: u64,
    options: &McOptions,
) -> Result<CorrelationComparison> {
    check_points(&[z1, z2])?;
    if initial < 2 || budget < initial {
        return Err(invalid("reps", "need 2 <= initial <= budget"));
    }
    let start = Instant::now();
    let theory = theory_for(spec, z1, z2)?;
    let mut samples = pair_samples(spec, z1, z2, 0..initial as u64, seed, options)?;
    loop {
        let result = compare(spec, &samples, z1, z2, theory, seed, start)?;
        if result.target_reached || samples.len() >= budget {
            return Ok(result);
        }
        let next = (2 * samples.len()).min(budget);
        let more = pair_samples(spec, z1, z2, samples.len() as u64..next as u64, seed, options)?;
        samples.extend(more);
    }
}

/// Measured and predicted change of `Nb·C` between two entry laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaShift {
    pub predicted: Complex64,
    pub measured: Complex64,
    pub stderr: f64,
    pub delta_change: f64,
    pub sign_agrees: bool,
    pub baseline: CorrelationComparison,
    pub alternative: CorrelationComparison,
}

/// Runs `baseline` and `alternative` (same profile and sizes, different entry
/// law) on the same seeds, so the masks coincide and the entries are coupled
/// through their common uniforms; the shift is estimated from paired
/// differences.
pub fn delta_shift_experiment(
    baseline: &EnsembleSpec,
    alternative: &EnsembleSpec,
    z1: Complex64,
    z2: Complex64,
    reps: usize,
    seed: u64,
    options: &McOptions,
) -> Result<DeltaShift> {
    if baseline.size() != alternative.size() || baseline.b != alternative.b {
        return Err(invalid("alternative", "paired runs need identical N and b"));
    }
    check_points(&[z1, z2])?;
    if reps < 3 {
        return Err(invalid("reps", "need at least 3 realizations"));
    }
    let start = Instant::now();
    let ctx_a = TheoryContext::new(baseline.profile.clone(), baseline.dist)?;
    let ctx_b = TheoryContext::new(alternative.profile.clone(), alternative.dist)?;
    let (t_a, t_b) = (ctx_a.compute_t(z1, z2)?, ctx_b.compute_t(z1, z2)?);
    let both = map_realizations(options, 0..reps as u64, |r| {
        let a = sample_spectrum(baseline, seed, r)?;
        let b = sample_spectrum(alternative, seed, r)?;
        Ok([
            a.resolvent_trace(z1)?.g,
            a.resolvent_trace(z2)?.g,
            b.resolvent_trace(z1)?.g,
            b.resolvent_trace(z2)?.g,
        ])
    })?;
    let a: Vec<[Complex64; 2]> = both.iter().map(|x| [x[0], x[1]]).collect();
    let b: Vec<[Complex64; 2]> = both.iter().map(|x| [x[2], x[3]]).collect();
    let base = compare(baseline, &a, z1, z2, t_a, seed, start)?;
    let alt = compare(alternative, &b, z1, z2, t_b, seed, start)?;

    // Paired jackknife of the difference of the two covariances.
    let nb = baseline.size() as f64 * baseline.b;
    let r = reps as f64;
    let loo = |pairs: &[[Complex64; 2]]| -> Vec<Complex64> {
        (0..pairs.len())
            .map(|skip| {
                let xs: Vec<Complex64> =
                    pairs.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, p)| p[0]).collect();
                let ys: Vec<Complex64> =
                    pairs.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, p)| p[1]).collect();
                covariance_with_stderr(&xs, &ys).map(|c| c.0).unwrap_or_default()
            })
            .collect()
    };
    let diffs: Vec<Complex64> = loo(&b).iter().zip(loo(&a)).map(|(x, y)| (x - y) * nb).collect();
    let centre = mean(&diffs);
    let stderr = ((r - 1.0) / r * diffs.iter().map(|d| (d - centre).norm_sqr()).sum::<f64>()).sqrt();

    let predicted = t_b - t_a;
    let measured = alt.nb_cov - base.nb_cov;
    Ok(DeltaShift {
        predicted,
        measured,
        stderr,
        delta_change: ctx_b.delta() - ctx_a.delta(),
        sign_agrees: predicted.re.signum() == measured.re.signum(),
        baseline: base,
        alternative: alt,
    })
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(Error::from)
}

/// Reads rows written by [`write_csv`].
pub fn read_csv<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
