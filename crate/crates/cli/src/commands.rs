//! Dispatch of a validated [`RunConfig`] to the experiments, and the tables
//! each subcommand writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrpm_core::cumulant::{expansion_check, TestFunction};
use lrpm_core::montecarlo::{
    correlation_vs_theory, correlation_vs_theory_adaptive, delta_shift_experiment, density_experiment,
    estimate_resolvent_stats, variance_scaling_experiment, write_csv, CorrelationComparison, McCsvRow, McOptions,
};
use lrpm_core::{Complex64, EntryDistribution, EntryKind, TheoryContext};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Format, RunConfig, Subcommand};
use crate::plot;
use crate::selftest;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] lrpm_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("selftest failed: {0} check(s) did not pass")]
    SelftestFailed(usize),
}

/// Everything a run produces before it is written out.
#[derive(Debug, Default)]
pub struct Artifacts {
    /// CSV body including the header row.
    pub csv: Vec<u8>,
    /// Experiment-specific part of the JSON summary.
    pub results: Value,
    /// Human-readable report printed to stdout regardless of `--out`.
    pub report: Option<String>,
    /// Number of failed checks (selftest only).
    pub failures: usize,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}

fn options(config: &RunConfig) -> McOptions {
    McOptions::with_workers(config.workers)
}

fn reps(config: &RunConfig) -> usize {
    config.reps.expect("required key checked during validation")
}

pub fn execute(config: &RunConfig) -> Result<Artifacts, RunError> {
    match config.subcommand {
        Subcommand::Density => density(config),
        Subcommand::Stats => stats(config),
        Subcommand::Scaling => scaling(config),
        Subcommand::Correlation => correlation(config),
        Subcommand::Theory => theory(config),
        Subcommand::Exponent => exponent(config),
        Subcommand::CumulantCheck => cumulant_check(config),
        Subcommand::Selftest => Ok(selftest::run()),
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub density: f64,
    pub semicircle: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub b: f64,
    pub seed: u64,
}

fn density(config: &RunConfig) -> Result<Artifacts, RunError> {
    let spec = config.ensemble()?;
    let report = density_experiment(&spec, reps(config), config.bins, config.seed, &options(config))?;
    let rows: Vec<DensityRow> = report
        .bins
        .iter()
        .map(|bin| DensityRow {
            bin_lo: bin.lo,
            bin_hi: bin.hi,
            count: bin.count,
            density: bin.density,
            semicircle: bin.semicircle,
            reps: report.reps,
            size: report.spec.size,
            b: report.spec.b,
            seed: report.seed,
        })
        .collect();
    Ok(Artifacts {
        csv: csv_bytes(&rows)?,
        results: serde_json::to_value(&report)?,
        ..Default::default()
    })
}

fn stats(config: &RunConfig) -> Result<Artifacts, RunError> {
    let spec = config.ensemble()?;
    let report = estimate_resolvent_stats(&spec, &config.z, reps(config), config.seed, &options(config))?;
    Ok(Artifacts {
        csv: csv_bytes(&report.csv_rows())?,
        results: serde_json::to_value(&report)?,
        ..Default::default()
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub size: usize,
    pub b: f64,
    pub z_re: f64,
    pub z_im: f64,
    pub var: f64,
    pub var_stderr: f64,
    pub nb_var: f64,
    pub nb_stderr: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    pub seed: u64,
}

fn scaling(config: &RunConfig) -> Result<Artifacts, RunError> {
    let ladder = config.ladder_specs()?;
    let z = config.z[0];
    let report = variance_scaling_experiment(&ladder, z, reps(config), config.seed, &options(config))?;
    let rows: Vec<ScalingRow> = report
        .rungs
        .iter()
        .map(|r| ScalingRow {
            size: r.size,
            b: r.b,
            z_re: z.re,
            z_im: z.im,
            var: r.var,
            var_stderr: r.var_stderr,
            nb_var: r.nb_var,
            nb_stderr: r.nb_stderr,
            reps: report.reps,
            seed: report.seed,
        })
        .collect();
    Ok(Artifacts {
        csv: csv_bytes(&rows)?,
        results: serde_json::to_value(&report)?,
        ..Default::default()
    })
}

fn comparison_rows(label: &str, c: &CorrelationComparison) -> Vec<McCsvRow> {
    let row = |statistic: String, value: Complex64, stderr: f64| McCsvRow {
        statistic,
        z1_re: c.z1.re,
        z1_im: c.z1.im,
        z2_re: Some(c.z2.re),
        z2_im: Some(c.z2.im),
        value_re: value.re,
        value_im: value.im,
        stderr,
        reps: c.reps,
        size: c.spec.size,
        b: c.spec.b,
        seed: c.seed,
    };
    vec![
        row(format!("{label}nb_cov"), c.nb_cov, c.nb_stderr),
        row(format!("{label}theory_t"), c.theory, 0.0),
        row(format!("{label}difference"), c.difference, c.nb_stderr),
    ]
}

fn correlation(config: &RunConfig) -> Result<Artifacts, RunError> {
    let spec = config.ensemble()?;
    let (z1, z2) = (config.z1.expect("validated"), config.z2.expect("validated"));
    let opts = options(config);
    if let Some(alt) = config.comparison_ensemble()? {
        let shift = delta_shift_experiment(&spec, &alt, z1, z2, reps(config), config.seed, &opts)?;
        let mut rows = comparison_rows(&format!("{}:", spec.dist.kind), &shift.baseline);
        rows.extend(comparison_rows(&format!("{}:", alt.dist.kind), &shift.alternative));
        let mut shift_row = comparison_rows("shift:", &shift.baseline).remove(0);
        shift_row.statistic = "shift:measured".into();
        shift_row.value_re = shift.measured.re;
        shift_row.value_im = shift.measured.im;
        shift_row.stderr = shift.stderr;
        let mut predicted = shift_row.clone();
        predicted.statistic = "shift:predicted".into();
        predicted.value_re = shift.predicted.re;
        predicted.value_im = shift.predicted.im;
        predicted.stderr = 0.0;
        rows.push(shift_row);
        rows.push(predicted);
        return Ok(Artifacts {
            csv: csv_bytes(&rows)?,
            results: serde_json::to_value(&shift)?,
            ..Default::default()
        });
    }
    let comparison = match config.budget {
        Some(budget) => correlation_vs_theory_adaptive(&spec, z1, z2, reps(config), budget, config.seed, &opts)?,
        None => correlation_vs_theory(&spec, z1, z2, reps(config), config.seed, &opts)?,
    };
    if !comparison.target_reached {
        log::warn!(
            "stderr {:.3e} is not below 20% of |T| = {:.3e} after {} realizations",
            comparison.nb_stderr,
            comparison.theory.norm(),
            comparison.reps
        );
    }
    Ok(Artifacts {
        csv: csv_bytes(&comparison_rows("", &comparison))?,
        results: serde_json::to_value(&comparison)?,
        ..Default::default()
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TheoryRow {
    pub quantity: String,
    pub value_re: f64,
    pub value_im: f64,
}

fn context(config: &RunConfig) -> Result<TheoryContext, RunError> {
    Ok(TheoryContext::new(config.profile()?, config.entry_distribution(config.dist)?)?)
}

fn theory(config: &RunConfig) -> Result<Artifacts, RunError> {
    let ctx = context(config)?;
    let (z1, z2) = (config.z1.expect("validated"), config.z2.expect("validated"));
    let w1 = ctx.solve_w(z1)?;
    let w2 = ctx.solve_w(z2)?;
    let forms = ctx.compare_t_forms(z1, z2)?;
    let deltas = ctx.compute_delta();
    let real = |x: f64| Complex64::new(x, 0.0);
    let quantities = [
        ("w1", w1),
        ("w2", w2),
        ("Q", forms.q),
        ("T", forms.canonical),
        ("T_rewritten", forms.rewritten),
        ("delta", real(deltas.delta)),
        ("delta_band", real(deltas.delta_band)),
    ];
    let rows: Vec<TheoryRow> = quantities
        .iter()
        .map(|(q, v)| TheoryRow {
            quantity: q.to_string(),
            value_re: v.re,
            value_im: v.im,
        })
        .collect();
    let complex = |z: Complex64| json!({ "re": z.re, "im": z.im });
    Ok(Artifacts {
        csv: csv_bytes(&rows)?,
        results: json!({
            "z1": complex(z1),
            "z2": complex(z2),
            "w1": complex(w1),
            "w2": complex(w2),
            "Q": complex(forms.q),
            "T": complex(forms.canonical),
            "T_rewritten": complex(forms.rewritten),
            "delta": deltas.delta,
            "delta_band": deltas.delta_band,
            "in_lambda_eta": ctx.in_lambda_eta(z1) && ctx.in_lambda_eta(z2),
        }),
        ..Default::default()
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ExponentRow {
    pub separation: f64,
    pub xi: f64,
    pub asymptote: Option<f64>,
}

fn exponent(config: &RunConfig) -> Result<Artifacts, RunError> {
    let ctx = context(config)?;
    let fit = ctx.fit_scaling_exponent(config.lambda, &config.separations)?;
    let rows: Vec<ExponentRow> = fit
        .separations
        .iter()
        .zip(&fit.xi)
        .map(|(&s, &xi)| ExponentRow {
            separation: s,
            xi,
            asymptote: ctx.xi_leading_asymptote(config.lambda, s).ok(),
        })
        .collect();
    Ok(Artifacts {
        csv: csv_bytes(&rows)?,
        report: Some(format!(
            "slope {:.5} (stderr {:.1e}), predicted {}\n",
            fit.fit.slope,
            fit.fit.stderr,
            fit.predicted.map_or("n/a".to_string(), |p| format!("{p:.5}"))
        )),
        results: serde_json::to_value(&fit)?,
        ..Default::default()
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CumulantRow {
    pub law: String,
    pub function: String,
    pub q: usize,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub gap: f64,
    pub bound: f64,
    pub within_bound: bool,
}

fn cumulant_check(config: &RunConfig) -> Result<Artifacts, RunError> {
    let laws: Vec<EntryKind> = match config.law_filter {
        Some(k) => vec![k],
        None => vec![EntryKind::Gaussian, EntryKind::Rademacher, EntryKind::Uniform],
    };
    let mut rows = Vec::new();
    let mut table = format!(
        "{:<11} {:<12} {:>2} {:>24} {:>24} {:>10} {:>10} {}\n",
        "law", "F", "q", "lhs", "rhs", "gap", "bound", "ok"
    );
    for kind in laws {
        let dist = EntryDistribution::new(kind, config.v)?;
        for f in TestFunction::library() {
            for q in [1, 3, 5] {
                let c = expansion_check(&dist, &f, q)?;
                let _ = writeln!(
                    table,
                    "{:<11} {:<12} {:>2} {:>24} {:>24} {:>10.3e} {:>10.3e} {}",
                    kind.to_string(),
                    f.to_string(),
                    q,
                    format!("{:.6}{:+.6}i", c.lhs.re, c.lhs.im),
                    format!("{:.6}{:+.6}i", c.rhs.re, c.rhs.im),
                    c.gap,
                    c.bound,
                    if c.within_bound { "yes" } else { "NO" }
                );
                rows.push(CumulantRow {
                    law: kind.to_string(),
                    function: f.to_string(),
                    q,
                    lhs_re: c.lhs.re,
                    lhs_im: c.lhs.im,
                    rhs_re: c.rhs.re,
                    rhs_im: c.rhs.im,
                    gap: c.gap,
                    bound: c.bound,
                    within_bound: c.within_bound,
                });
            }
        }
    }
    let exceeded = rows.iter().filter(|r| !r.within_bound).count();
    if exceeded > 0 {
        let _ = writeln!(table, "{exceeded} row(s) exceed the bound taken with C_q = 1");
    }
    Ok(Artifacts {
        csv: csv_bytes(&rows)?,
        results: json!({ "rows": rows.len(), "exceeding_bound": exceeded }),
        report: Some(table),
        ..Default::default()
    })
}

/// Paths of the files written for output stem `out`.
pub fn artifact_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (out.with_extension("csv"), out.with_extension("json"), out.with_extension("gp"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| RunError::Write {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the experiment and writes its artifacts. Text meant for the
/// terminal is appended to `stdout`.
pub fn run(config: &RunConfig, stdout: &mut String) -> Result<(), RunError> {
    let start = Instant::now();
    let artifacts = execute(config)?;
    let summary = json!({
        "tool": "lrpm",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": config.subcommand,
        "seed": config.seed,
        "config": config,
        "wall_time": start.elapsed().as_secs_f64(),
        "results": artifacts.results,
    });
    let summary_text = serde_json::to_string_pretty(&summary)? + "\n";
    if let Some(report) = &artifacts.report {
        stdout.push_str(report);
    }
    match &config.out {
        Some(out) => {
            let (csv_path, json_path, plot_path) = artifact_paths(out);
            if matches!(config.format, Format::Csv | Format::Both) {
                write_file(&csv_path, &artifacts.csv)?;
            }
            if matches!(config.format, Format::Json | Format::Both) {
                write_file(&json_path, summary_text.as_bytes())?;
            }
            if config.plot {
                let script = plot::script(config.subcommand, &csv_path).ok_or_else(|| {
                    ConfigError::Malformed {
                        key: "plot".into(),
                        reason: format!("no plot is defined for `{}`", config.subcommand),
                    }
                })?;
                write_file(&plot_path, script.as_bytes())?;
            }
        }
        None if artifacts.report.is_none() => match config.format {
            Format::Csv => stdout.push_str(&String::from_utf8_lossy(&artifacts.csv)),
            _ => stdout.push_str(&summary_text),
        },
        None => {}
    }
    if artifacts.failures > 0 {
        return Err(RunError::SelftestFailed(artifacts.failures));
    }
    Ok(())
}
