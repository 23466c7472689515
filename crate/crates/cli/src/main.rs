use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use lrpm_cli::commands::{run, RunError};
use lrpm_cli::config::{read_config_file, ConfigError, KeyValues, RunConfig, Subcommand, WORKERS_ENV};

/// Long-range percolation random matrices: Monte Carlo experiments and
/// closed-form predictions.
#[derive(Parser, Debug)]
#[command(name = "lrpm", version)]
enum Cli {
    /// Pooled eigenvalue histogram against the semicircle law.
    Density(Flags),
    /// Mean, variance and pairwise covariance of g(z).
    Stats(Flags),
    /// Nb·Var{g(z)} along a ladder of (N, b) rungs.
    Scaling(Flags),
    /// Nb·Cov{g(z1), g(z2)} against the predicted leading term T.
    Correlation(Flags),
    /// w, Q, T and Δ at (z1, z2).
    Theory(Flags),
    /// Log-log slope of the density-density correlation Ξ.
    Exponent(Flags),
    /// Cumulant expansion verifier over laws, test functions and orders.
    CumulantCheck(Flags),
    /// Fast invariant suite; exits nonzero on failure.
    Selftest(Flags),
}

/// Every flag is also accepted as `key = value` in the `--config` file;
/// flags take precedence.
#[derive(Args, Debug, Default)]
struct Flags {
    /// Config file with `key = value` lines and `#` comments.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Half-size: the matrix is (2n+1)×(2n+1).
    #[arg(long)]
    n: Option<String>,
    /// Bandwidth, 1 ≤ b ≤ 2n+1.
    #[arg(long)]
    b: Option<String>,
    /// Entry standard deviation.
    #[arg(long)]
    v: Option<String>,
    /// Entry law: gaussian, rademacher or uniform.
    #[arg(long)]
    dist: Option<String>,
    /// Profile: gaussian, exponential, indicator, stable, power_law.
    #[arg(long)]
    profile: Option<String>,
    /// Tail exponent for stable and power_law profiles.
    #[arg(long)]
    nu: Option<String>,
    /// Spectral point `re,im`; repeat or separate with `;` for several.
    #[arg(long, allow_hyphen_values = true)]
    z: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    z1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    z2: Option<String>,
    /// Number of realizations.
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Histogram bins over [−2v−1, 2v+1].
    #[arg(long)]
    bins: Option<String>,
    /// Centre of the separation scan.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Comma-separated separations for the exponent fit.
    #[arg(long)]
    separations: Option<String>,
    /// Comma-separated `N:b` rungs, N = 2n+1.
    #[arg(long)]
    ladder: Option<String>,
    /// Replication budget; enables adaptive doubling from `reps`.
    #[arg(long)]
    budget: Option<String>,
    /// Second entry law for a paired Δ-shift run.
    #[arg(long)]
    compare_dist: Option<String>,
    /// Output stem; writes <out>.csv, <out>.json and with --plot <out>.gp.
    #[arg(long)]
    out: Option<String>,
    /// csv, json or both.
    #[arg(long)]
    format: Option<String>,
    /// Also write a gnuplot script.
    #[arg(long)]
    plot: bool,
    /// Worker threads (0 = all cores); defaults to $LRPM_WORKERS.
    #[arg(long)]
    workers: Option<String>,
}

impl Flags {
    fn key_values(&self) -> Result<KeyValues, ConfigError> {
        let mut kv = KeyValues::new();
        let single = [
            ("n", &self.n),
            ("b", &self.b),
            ("v", &self.v),
            ("dist", &self.dist),
            ("profile", &self.profile),
            ("nu", &self.nu),
            ("z1", &self.z1),
            ("z2", &self.z2),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("bins", &self.bins),
            ("lambda", &self.lambda),
            ("separations", &self.separations),
            ("ladder", &self.ladder),
            ("budget", &self.budget),
            ("compare_dist", &self.compare_dist),
            ("out", &self.out),
            ("format", &self.format),
            ("workers", &self.workers),
        ];
        for (key, value) in single {
            if let Some(v) = value {
                kv.insert(key, v.as_str())?;
            }
        }
        if !self.z.is_empty() {
            kv.insert("z", self.z.join(";"))?;
        }
        if self.plot {
            kv.insert("plot", "true")?;
        }
        Ok(kv)
    }
}

fn configure(cli: Cli) -> Result<RunConfig, ConfigError> {
    let (subcommand, flags) = match cli {
        Cli::Density(f) => (Subcommand::Density, f),
        Cli::Stats(f) => (Subcommand::Stats, f),
        Cli::Scaling(f) => (Subcommand::Scaling, f),
        Cli::Correlation(f) => (Subcommand::Correlation, f),
        Cli::Theory(f) => (Subcommand::Theory, f),
        Cli::Exponent(f) => (Subcommand::Exponent, f),
        Cli::CumulantCheck(f) => (Subcommand::CumulantCheck, f),
        Cli::Selftest(f) => (Subcommand::Selftest, f),
    };
    let file = flags.config.as_deref().map(read_config_file).transpose()?;
    let env_workers = std::env::var(WORKERS_ENV).ok();
    RunConfig::from_sources(subcommand, file.as_ref(), &flags.key_values()?, env_workers.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let config = match configure(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut stdout = String::new();
    let result = run(&config, &mut stdout);
    print!("{stdout}");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ RunError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
