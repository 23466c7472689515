//! Run configuration: config file plus command-line flags, validated before
//! any experiment starts.
//!
//! The file format is line oriented, `key = value` with `#` comments. Flags
//! override file values key by key. Complex numbers are written `re,im`;
//! lists of them are separated by `;`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lrpm_core::{Complex64, EnsembleSpec, EntryDistribution, EntryKind, Profile, ProfileKind};
use serde::Serialize;
use thiserror::Error;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "LRPM_WORKERS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}` is not used by `{subcommand}`")]
    NotApplicable { key: String, subcommand: Subcommand },
    #[error("missing required key `{key}` for `{subcommand}`")]
    Missing { key: &'static str, subcommand: Subcommand },
    #[error("invalid value for `{key}`: {reason}")]
    Malformed { key: String, reason: String },
    #[error("config file {path}: line {line}: {reason}")]
    File { path: PathBuf, line: usize, reason: String },
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn malformed(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Malformed {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Density,
    Stats,
    Scaling,
    Correlation,
    Theory,
    Exponent,
    CumulantCheck,
    Selftest,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Density => "density",
            Subcommand::Stats => "stats",
            Subcommand::Scaling => "scaling",
            Subcommand::Correlation => "correlation",
            Subcommand::Theory => "theory",
            Subcommand::Exponent => "exponent",
            Subcommand::CumulantCheck => "cumulant-check",
            Subcommand::Selftest => "selftest",
        })
    }
}

/// Every key the tool understands.
pub const KEYS: &[&str] = &[
    "n", "b", "v", "dist", "profile", "nu", "z", "z1", "z2", "reps", "seed", "bins", "lambda", "separations",
    "ladder", "budget", "compare_dist", "out", "format", "plot", "workers",
];

const OUTPUT: &[&str] = &["out", "format", "workers"];
const ENSEMBLE: &[&str] = &["n", "b", "v", "dist", "profile", "nu", "reps", "seed"];

impl Subcommand {
    fn keys(&self) -> Vec<&'static str> {
        let specific: &[&str] = match self {
            Subcommand::Density => &["bins", "plot"],
            Subcommand::Stats => &["z"],
            Subcommand::Scaling => &["ladder", "z", "v", "dist", "profile", "nu", "reps", "seed", "plot"],
            Subcommand::Correlation => &["z1", "z2", "budget", "compare_dist", "plot"],
            Subcommand::Theory => &["v", "dist", "profile", "nu", "z1", "z2"],
            Subcommand::Exponent => &["v", "dist", "profile", "nu", "lambda", "separations", "plot"],
            Subcommand::CumulantCheck => &["dist"],
            Subcommand::Selftest => &[],
        };
        let mut keys: Vec<&'static str> = OUTPUT.to_vec();
        if matches!(self, Subcommand::Density | Subcommand::Stats | Subcommand::Correlation) {
            keys.extend_from_slice(ENSEMBLE);
        }
        keys.extend_from_slice(specific);
        keys
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            Subcommand::Density => &["n", "b", "reps"],
            Subcommand::Stats => &["n", "b", "reps", "z"],
            Subcommand::Scaling => &["ladder", "z", "reps"],
            Subcommand::Correlation => &["n", "b", "reps", "z1", "z2"],
            Subcommand::Theory => &["z1", "z2"],
            Subcommand::Exponent => &["profile"],
            Subcommand::CumulantCheck | Subcommand::Selftest => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// Raw `key → value` pairs in the order of precedence they were merged in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pair; `-` in keys is read as `_`.
    pub fn insert(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key });
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Values from `other` replace those already present.
    pub fn override_with(&mut self, other: &KeyValues) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Parses the `key = value` file format.
pub fn parse_config_text(text: &str, path: &Path) -> Result<KeyValues, ConfigError> {
    let mut kv = KeyValues::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let file_error = |reason: String| ConfigError::File {
            path: path.to_path_buf(),
            line: index + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| file_error(format!("expected `key = value`, got `{line}`")))?;
        kv.insert(key, value.trim()).map_err(|e| file_error(e.to_string()))?;
    }
    Ok(kv)
}

pub fn read_config_file(path: &Path) -> Result<KeyValues, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text, path)
}

/// Parses `re,im`.
pub fn parse_complex(key: &str, s: &str) -> Result<Complex64, ConfigError> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| malformed(key, format!("expected `re,im`, got `{s}`")))?;
    let part = |p: &str| {
        p.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| malformed(key, format!("`{}` is not a finite number", p.trim())))
    };
    Ok(Complex64::new(part(re)?, part(im)?))
}

fn parse_non_real(key: &str, s: &str) -> Result<Complex64, ConfigError> {
    let z = parse_complex(key, s)?;
    if z.im == 0.0 {
        return Err(malformed(key, format!("{key} must be non-real, got `{s}`")));
    }
    Ok(z)
}

fn parse_value<T: FromStr>(key: &str, s: &str, what: &str) -> Result<T, ConfigError> {
    s.trim()
        .parse::<T>()
        .map_err(|_| malformed(key, format!("expected {what}, got `{s}`")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(malformed(key, format!("expected true or false, got `{s}`"))),
    }
}

fn list(s: &str, sep: char) -> impl Iterator<Item = &str> {
    s.split(sep).map(str::trim).filter(|p| !p.is_empty())
}

/// One `(N, b)` rung of a scaling ladder; `N = 2n + 1` is the matrix size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rung {
    #[serde(rename = "N")]
    pub size: usize,
    pub b: f64,
}

/// Fully validated configuration of one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub n: Option<usize>,
    pub b: Option<f64>,
    pub v: f64,
    pub dist: EntryKind,
    pub profile: ProfileKind,
    pub z: Vec<Complex64>,
    pub z1: Option<Complex64>,
    pub z2: Option<Complex64>,
    pub reps: Option<usize>,
    pub seed: u64,
    pub bins: usize,
    pub lambda: f64,
    pub separations: Vec<f64>,
    pub ladder: Vec<Rung>,
    pub budget: Option<usize>,
    pub compare_dist: Option<EntryKind>,
    pub law_filter: Option<EntryKind>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub plot: bool,
    pub workers: usize,
}

/// Nine separations log-spaced over `[1e-5, 1e-3]`.
pub fn default_separations() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-5.0 + 0.25 * k as f64)).collect()
}

impl RunConfig {
    /// Merges the optional file with the flags and validates the result.
    /// `env_workers` is the value of [`WORKERS_ENV`], if set.
    pub fn from_sources(
        subcommand: Subcommand,
        file: Option<&KeyValues>,
        flags: &KeyValues,
        env_workers: Option<&str>,
    ) -> Result<Self, ConfigError> {
        let mut kv = file.cloned().unwrap_or_default();
        kv.override_with(flags);
        let allowed = subcommand.keys();
        for key in kv.keys() {
            if !allowed.contains(&key) {
                return Err(ConfigError::NotApplicable {
                    key: key.to_string(),
                    subcommand,
                });
            }
        }
        for &key in subcommand.required() {
            if kv.get(key).is_none() {
                return Err(ConfigError::Missing { key, subcommand });
            }
        }

        let v = match kv.get("v") {
            Some(s) => parse_value::<f64>("v", s, "a positive number")?,
            None => 1.0,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(malformed("v", format!("v must be positive, got {v}")));
        }
        let kind = |key: &str| -> Result<Option<EntryKind>, ConfigError> {
            kv.get(key)
                .map(|s| EntryKind::from_str(s).map_err(|e| malformed(key, e.to_string())))
                .transpose()
        };
        let (dist, law_filter) = if subcommand == Subcommand::CumulantCheck {
            (EntryKind::Gaussian, kind("dist")?)
        } else {
            (kind("dist")?.unwrap_or(EntryKind::Gaussian), None)
        };
        let profile = parse_profile(kv.get("profile"), kv.get("nu"))?;

        let n = kv.get("n").map(|s| parse_value::<usize>("n", s, "a nonnegative integer")).transpose()?;
        let b = kv.get("b").map(|s| parse_value::<f64>("b", s, "a number")).transpose()?;
        let reps = kv.get("reps").map(|s| parse_value::<usize>("reps", s, "a positive integer")).transpose()?;
        let seed = kv.get("seed").map(|s| parse_value::<u64>("seed", s, "an unsigned integer")).transpose()?.unwrap_or(0);
        let bins = kv.get("bins").map(|s| parse_value::<usize>("bins", s, "a positive integer")).transpose()?.unwrap_or(60);
        if bins == 0 {
            return Err(malformed("bins", "need at least one bin"));
        }
        let z = match kv.get("z") {
            Some(s) => list(s, ';').map(|p| parse_non_real("z", p)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        if kv.get("z").is_some() && z.is_empty() {
            return Err(malformed("z", "no values given"));
        }
        let z1 = kv.get("z1").map(|s| parse_non_real("z1", s)).transpose()?;
        let z2 = kv.get("z2").map(|s| parse_non_real("z2", s)).transpose()?;
        let lambda = kv.get("lambda").map(|s| parse_value::<f64>("lambda", s, "a number")).transpose()?.unwrap_or(0.0);
        let separations = match kv.get("separations") {
            Some(s) => list(s, ',')
                .map(|p| parse_value::<f64>("separations", p, "a positive number"))
                .collect::<Result<Vec<_>, _>>()?,
            None => default_separations(),
        };
        if separations.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(malformed("separations", "separations must be positive"));
        }
        let ladder = match kv.get("ladder") {
            Some(s) => list(s, ',').map(parse_rung).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let budget = kv.get("budget").map(|s| parse_value::<usize>("budget", s, "a positive integer")).transpose()?;
        let compare_dist = kind("compare_dist")?;
        let plot = kv.get("plot").map(|s| parse_bool("plot", s)).transpose()?.unwrap_or(false);
        let out = kv.get("out").map(PathBuf::from);
        let format = match kv.get("format") {
            Some(s) => match s.trim().to_ascii_lowercase().as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                "both" => Format::Both,
                _ => return Err(malformed("format", format!("expected csv, json or both, got `{s}`"))),
            },
            None if out.is_some() => Format::Both,
            None => Format::Json,
        };
        if format == Format::Both && out.is_none() {
            return Err(malformed("out", "format `both` writes files and needs an output path"));
        }
        if plot && out.is_none() {
            return Err(malformed("out", "plot scripts are written next to the CSV and need an output path"));
        }
        let workers_source = kv.get("workers").map(|s| ("workers", s)).or(env_workers.map(|s| (WORKERS_ENV, s)));
        let workers = match workers_source {
            Some((key, s)) => parse_value::<usize>(key, s, "a nonnegative integer")?,
            None => 0,
        };

        let config = RunConfig {
            subcommand,
            n,
            b,
            v,
            dist,
            profile,
            z,
            z1,
            z2,
            reps,
            seed,
            bins,
            lambda,
            separations,
            ladder,
            budget,
            compare_dist,
            law_filter,
            out,
            format,
            plot,
            workers,
        };
        config.check_preconditions()?;
        Ok(config)
    }

    fn check_preconditions(&self) -> Result<(), ConfigError> {
        let min_reps = match self.subcommand {
            Subcommand::Density => 1,
            Subcommand::Correlation if self.compare_dist.is_some() => 3,
            _ => 2,
        };
        if let Some(r) = self.reps {
            if r < min_reps {
                return Err(malformed("reps", format!("need at least {min_reps} realizations")));
            }
        }
        match self.subcommand {
            Subcommand::Density | Subcommand::Stats | Subcommand::Correlation => {
                self.ensemble()?;
            }
            Subcommand::Scaling => {
                if self.ladder.len() < 3 {
                    return Err(malformed("ladder", "need at least 3 rungs"));
                }
                if self.z.len() != 1 {
                    return Err(malformed("z", "scaling takes exactly one z"));
                }
                self.ladder_specs()?;
            }
            Subcommand::Exponent => {
                if self.separations.len() < 4 {
                    return Err(malformed("separations", "need at least 4 separations"));
                }
                let lo = self.separations.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = self.separations.iter().copied().fold(0.0, f64::max);
                if hi / lo < 100.0 * (1.0 - 1e-12) {
                    return Err(malformed("separations", "separations must span two decades"));
                }
                let edge = 2.0 * self.v;
                if self.lambda.abs() + 0.5 * hi >= edge {
                    return Err(malformed("lambda", format!("lambda ± s/2 must stay inside (−{edge}, {edge})")));
                }
            }
            _ => {}
        }
        if let (Some(_), Some(_)) = (self.budget, self.compare_dist) {
            return Err(malformed("budget", "adaptive replication is not combined with compare_dist"));
        }
        if let (Some(budget), Some(reps)) = (self.budget, self.reps) {
            if budget < reps {
                return Err(malformed("budget", "budget must be at least reps"));
            }
        }
        Ok(())
    }

    pub fn entry_distribution(&self, kind: EntryKind) -> Result<EntryDistribution, ConfigError> {
        EntryDistribution::new(kind, self.v).map_err(|e| malformed("v", e.to_string()))
    }

    pub fn profile(&self) -> Result<Profile, ConfigError> {
        Profile::new(self.profile).map_err(|e| malformed("profile", e.to_string()))
    }

    fn spec_for(&self, n: usize, b: f64, kind: EntryKind) -> Result<EnsembleSpec, ConfigError> {
        EnsembleSpec::new(n, b, self.entry_distribution(kind)?, self.profile()?).map_err(|e| match e {
            lrpm_core::Error::InvalidParameter { name, reason } => malformed(name, reason),
            other => malformed("n", other.to_string()),
        })
    }

    /// The ensemble described by `n`, `b`, `v`, `dist` and `profile`.
    pub fn ensemble(&self) -> Result<EnsembleSpec, ConfigError> {
        let n = self.n.ok_or(ConfigError::Missing {
            key: "n",
            subcommand: self.subcommand,
        })?;
        let b = self.b.ok_or(ConfigError::Missing {
            key: "b",
            subcommand: self.subcommand,
        })?;
        self.spec_for(n, b, self.dist)
    }

    /// The ensemble with `compare_dist` in place of `dist`.
    pub fn comparison_ensemble(&self) -> Result<Option<EnsembleSpec>, ConfigError> {
        match self.compare_dist {
            Some(kind) => {
                let base = self.ensemble()?;
                self.spec_for(base.n, base.b, kind).map(Some)
            }
            None => Ok(None),
        }
    }

    pub fn ladder_specs(&self) -> Result<Vec<EnsembleSpec>, ConfigError> {
        self.ladder
            .iter()
            .map(|r| self.spec_for((r.size - 1) / 2, r.b, self.dist))
            .collect()
    }
}

fn parse_rung(s: &str) -> Result<Rung, ConfigError> {
    let (size, b) = s
        .split_once(':')
        .ok_or_else(|| malformed("ladder", format!("expected `N:b`, got `{s}`")))?;
    let size = parse_value::<usize>("ladder", size, "an odd matrix size")?;
    if size % 2 == 0 {
        return Err(malformed("ladder", format!("matrix size {size} must be odd (N = 2n + 1)")));
    }
    let b = parse_value::<f64>("ladder", b, "a bandwidth")?;
    Ok(Rung { size, b })
}

fn parse_profile(profile: Option<&str>, nu: Option<&str>) -> Result<ProfileKind, ConfigError> {
    let name = profile.unwrap_or("gaussian").trim();
    let spec = match nu {
        Some(nu) if !name.contains(':') => format!("{name}:nu={}", nu.trim()),
        Some(_) => return Err(malformed("nu", "given both in `profile` and as `nu`")),
        None => name.to_string(),
    };
    ProfileKind::from_str(&spec).map_err(|e| match e {
        lrpm_core::Error::InvalidParameter { name, reason } => malformed(name, reason),
        other => malformed("profile", other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> KeyValues {
        let mut kv = KeyValues::new();
        for (k, v) in pairs {
            kv.insert(k, *v).unwrap();
        }
        kv
    }

    #[test]
    fn density_happy_path() {
        let kv = flags(&[("n", "500"), ("b", "50"), ("profile", "gaussian"), ("reps", "50"), ("seed", "42")]);
        let c = RunConfig::from_sources(Subcommand::Density, None, &kv, None).unwrap();
        assert_eq!((c.n, c.b, c.reps, c.seed), (Some(500), Some(50.0), Some(50), 42));
        assert_eq!(c.format, Format::Json);
    }

    #[test]
    fn real_z_is_rejected() {
        let kv = flags(&[("n", "10"), ("b", "5"), ("reps", "4"), ("z", "0,0")]);
        let e = RunConfig::from_sources(Subcommand::Stats, None, &kv, None).unwrap_err();
        assert!(e.to_string().contains("z must be non-real"), "{e}");
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("# ensemble\nn = 500\nb = 50 # band\nreps=3\n", Path::new("run.cfg")).unwrap();
        let kv = flags(&[("n", "800")]);
        let c = RunConfig::from_sources(Subcommand::Density, Some(&file), &kv, None).unwrap();
        assert_eq!(c.n, Some(800));
        assert_eq!(c.b, Some(50.0));
    }

    #[test]
    fn errors_name_the_key() {
        assert!(parse_config_text("colour = red", Path::new("x")).unwrap_err().to_string().contains("`colour`"));
        let e = RunConfig::from_sources(Subcommand::Density, None, &flags(&[("n", "10"), ("reps", "2")]), None).unwrap_err();
        assert!(e.to_string().contains("`b`"), "{e}");
        let e = RunConfig::from_sources(Subcommand::Theory, None, &flags(&[("z1", "0,1"), ("z2", "0,1"), ("bins", "3")]), None)
            .unwrap_err();
        assert!(e.to_string().contains("`bins`"), "{e}");
        let e = RunConfig::from_sources(Subcommand::Density, None, &flags(&[("n", "x"), ("b", "1"), ("reps", "2")]), None)
            .unwrap_err();
        assert!(e.to_string().contains("`n`"), "{e}");
        let e = RunConfig::from_sources(Subcommand::Density, None, &flags(&[("n", "10"), ("b", "50"), ("reps", "2")]), None)
            .unwrap_err();
        assert!(e.to_string().contains("`b`"), "{e}");
    }

    #[test]
    fn profile_and_nu_combine() {
        assert_eq!(parse_profile(Some("stable"), Some("1.5")).unwrap(), ProfileKind::Stable { nu: 1.5 });
        assert!(parse_profile(Some("gaussian"), Some("1.5")).is_err());
        assert!(parse_profile(Some("stable"), None).is_err());
    }

    #[test]
    fn workers_come_from_flag_then_environment() {
        let base = [("z1", "0,4"), ("z2", "0,-4")];
        let c = RunConfig::from_sources(Subcommand::Theory, None, &flags(&base), Some("3")).unwrap();
        assert_eq!(c.workers, 3);
        let mut kv = flags(&base);
        kv.insert("workers", "2").unwrap();
        assert_eq!(RunConfig::from_sources(Subcommand::Theory, None, &kv, Some("3")).unwrap().workers, 2);
        let e = RunConfig::from_sources(Subcommand::Theory, None, &flags(&base), Some("many")).unwrap_err();
        assert!(e.to_string().contains(WORKERS_ENV));
    }

    #[test]
    fn ladder_parsing() {
        let kv = flags(&[("ladder", "401:40, 801:80,1601:160"), ("z", "0,4"), ("reps", "10")]);
        let c = RunConfig::from_sources(Subcommand::Scaling, None, &kv, None).unwrap();
        assert_eq!(c.ladder[2], Rung { size: 1601, b: 160.0 });
        let kv = flags(&[("ladder", "400:40,801:80,1601:160"), ("z", "0,4"), ("reps", "10")]);
        assert!(RunConfig::from_sources(Subcommand::Scaling, None, &kv, None).is_err());
    }
}
