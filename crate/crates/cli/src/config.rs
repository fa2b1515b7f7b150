//! Run configuration: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use wicknlw::dynamics::DynParams;
use wicknlw::experiments::chaos::MAX_ORDER;
use wicknlw::experiments::universality::Nonlinearity;
use wicknlw::gibbs::SamplerMethod;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Draw samples of the Gaussian measure.
    Sample,
    /// Integrate the Wick-ordered flow from one initial state.
    Evolve,
    /// Sample the truncated Gibbs measure and estimate observables.
    Gibbs,
    /// Compare observables of Gibbs samples before and after evolution.
    Invariance,
    /// Moments and Cauchy distances of Wick powers of the linear solution.
    Chaos,
    /// Distance ladder between rescaled and Wick cubic solutions.
    Universality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// A sample of the Gaussian measure.
    Mu,
    /// The zero field.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Importance,
    Metropolis,
}

impl From<Method> for SamplerMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Importance => SamplerMethod::Importance,
            Method::Metropolis => SamplerMethod::Metropolis,
        }
    }
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Debug, Parser)]
#[command(name = "wicknlw", version, about = "Wick-ordered wave dynamics and Gibbs measures on the 2-torus")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Configuration file with `key = value` lines; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spectral cutoff N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mass ρ > 0.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Nonlinearity index m (power 2m+1).
    #[arg(long)]
    pub m: Option<usize>,
    /// Time step; defaults to a fraction of the fastest mode period.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated, strictly decreasing scales ε.
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Sobolev regularity of the universality distance.
    #[arg(long)]
    pub s: Option<f64>,
    /// Nonlinearity: sin, tanh, cubic[:c], linear[:a].
    #[arg(long)]
    pub f: Option<String>,
    /// Gibbs sampler.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Largest Wick order for the chaos study.
    #[arg(long)]
    pub ell: Option<usize>,
    /// Comma-separated, strictly increasing cutoffs for the chaos study.
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
    /// Regularity loss of the chaos Cauchy distance.
    #[arg(long = "eps-reg")]
    pub eps_reg: Option<f64>,
    /// Initial data for `evolve`.
    #[arg(long, value_enum)]
    pub init: Option<InitialData>,
    /// Steps between recorded states.
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
}

/// Fully resolved and validated configuration, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub rho: f64,
    pub m: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub eps_list: Vec<f64>,
    pub s: f64,
    pub f: String,
    pub method: Method,
    pub ell: usize,
    pub cutoffs: Vec<usize>,
    pub eps_reg: f64,
    pub init: InitialData,
    pub record_every: usize,
}

/// Values before defaults are filled in.
#[derive(Debug, Default)]
struct Partial {
    n: Option<usize>,
    rho: Option<f64>,
    m: Option<usize>,
    dt: Option<f64>,
    t: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    eps_list: Option<Vec<f64>>,
    s: Option<f64>,
    f: Option<String>,
    method: Option<Method>,
    ell: Option<usize>,
    cutoffs: Option<Vec<usize>>,
    eps_reg: Option<f64>,
    init: Option<InitialData>,
    record_every: Option<usize>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(key, format!("cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|_| CliError::config(key, format!("unknown value {value:?}")))
}

impl Partial {
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "n" => self.n = Some(parse_value(key, value)?),
            "rho" => self.rho = Some(parse_value(key, value)?),
            "m" => self.m = Some(parse_value(key, value)?),
            "dt" => self.dt = Some(parse_value(key, value)?),
            "T" => self.t = Some(parse_value(key, value)?),
            "samples" => self.samples = Some(parse_value(key, value)?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse_value(key, value)?),
            "eps-list" => self.eps_list = Some(parse_list(key, value)?),
            "s" => self.s = Some(parse_value(key, value)?),
            "f" => self.f = Some(value.to_string()),
            "method" => self.method = Some(parse_enum(key, value)?),
            "ell" => self.ell = Some(parse_value(key, value)?),
            "cutoffs" => self.cutoffs = Some(parse_list(key, value)?),
            "eps-reg" => self.eps_reg = Some(parse_value(key, value)?),
            "init" => self.init = Some(parse_enum(key, value)?),
            "record-every" => self.record_every = Some(parse_value(key, value)?),
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    fn overlay(&mut self, cli: &Cli) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &cli.$field { self.$field = Some(v.clone()); })*
            };
        }
        take!(n, rho, m, dt, t, samples, seed, out, workers, eps_list, s, f, method, ell, cutoffs, eps_reg, init, record_every);
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped; a
/// repeated key keeps its last value.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(&format!("line {}", i + 1), format!("expected `key = value`, got {raw:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Usage)?;
    resolve(&cli)
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut partial = Partial::default();
    if let Some(path) = &cli.config {
        for (k, v) in read_config_file(path)? {
            partial.set(&k, &v)?;
        }
    }
    partial.overlay(cli);
    finish(cli.command, partial)
}

fn finish(command: Command, p: Partial) -> Result<RunConfig, CliError> {
    let n = p.n.unwrap_or(8);
    let rho = p.rho.unwrap_or(1.0);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(CliError::config("rho", format!("must be positive and finite, got {rho}")));
    }
    let m = p.m.unwrap_or(1);
    if m == 0 {
        return Err(CliError::config("m", "must be at least 1"));
    }
    let default_t = if command == Command::Universality { 0.5 } else { 1.0 };
    let t = p.t.unwrap_or(default_t);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::config("T", format!("must be non-negative and finite, got {t}")));
    }
    if command == Command::Evolve && t == 0.0 {
        return Err(CliError::config("T", "evolve needs a positive horizon"));
    }
    let eps_list = p.eps_list.unwrap_or_else(|| vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]);
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(CliError::config("eps-list", "every scale must lie in (0, 1]"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::config("eps-list", "scales must be strictly decreasing"));
    }
    let dt_cutoff = match command {
        Command::Universality => {
            let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
            (1.0 / eps_min + 1e-9).floor() as usize
        }
        _ => n,
    };
    let dt = p.dt.unwrap_or_else(|| DynParams::default_dt(dt_cutoff, rho));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::config("dt", format!("must be positive and finite, got {dt}")));
    }
    let samples = p.samples.unwrap_or(1000);
    if samples == 0 {
        return Err(CliError::config("samples", "must be at least 1"));
    }
    let workers = match p.workers {
        Some(0) => return Err(CliError::config("workers", "must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let s = p.s.unwrap_or(-0.1);
    if !s.is_finite() || (command == Command::Universality && s >= 0.0) {
        return Err(CliError::config("s", format!("must be negative, got {s}")));
    }
    let f = p.f.unwrap_or_else(|| "sin".to_string());
    Nonlinearity::parse(&f).map_err(|e| CliError::config("f", e.to_string()))?;
    let ell = p.ell.unwrap_or(3);
    if ell == 0 || ell > MAX_ORDER {
        return Err(CliError::config("ell", format!("must lie in 1..={MAX_ORDER}, got {ell}")));
    }
    let cutoffs = p.cutoffs.unwrap_or_else(|| vec![1, 2, 4]);
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("cutoffs", "must be non-empty and strictly increasing"));
    }
    let eps_reg = p.eps_reg.unwrap_or(0.25);
    if !(eps_reg >= 0.0 && eps_reg.is_finite()) {
        return Err(CliError::config("eps-reg", format!("must be non-negative, got {eps_reg}")));
    }
    let record_every = match p.record_every {
        Some(r) => r,
        // about a hundred records over the run
        None => ((t / dt) / 100.0).ceil().max(1.0) as usize,
    };
    Ok(RunConfig {
        command,
        n,
        rho,
        m,
        dt,
        t,
        samples,
        seed: p.seed.unwrap_or(0),
        out: p.out.unwrap_or_else(|| PathBuf::from("wicknlw-out")),
        workers,
        eps_list,
        s,
        f,
        method: p.method.unwrap_or(Method::Metropolis),
        ell,
        cutoffs,
        eps_reg,
        init: p.init.unwrap_or(InitialData::Mu),
        record_every,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_config(["wicknlw", "gibbs"]).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.rho, 1.0);
        assert_eq!(c.m, 1);
        assert_eq!(c.seed, 0);
        assert_eq!(c.t, 1.0);
        assert_eq!(c.dt, DynParams::default_dt(8, 1.0));
        let u = parse_config(["wicknlw", "universality"]).unwrap();
        assert_eq!(u.t, 0.5);
        assert_eq!(u.dt, DynParams::default_dt(32, 1.0));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(parse_config(["wicknlw", "gibbs", "--rho", "0"]), Err(CliError::Config { key, .. }) if key == "rho"));
        assert!(parse_config(["wicknlw", "evolve", "--T", "0"]).is_err());
        assert!(parse_config(["wicknlw", "universality", "--eps-list", "0.1,0.2"]).is_err());
        assert!(parse_config(["wicknlw", "universality", "--s", "0.1"]).is_err());
        assert!(parse_config(["wicknlw", "chaos", "--ell", "5"]).is_err());
        assert!(parse_config(["wicknlw", "chaos", "--cutoffs", "2,2"]).is_err());
        assert!(matches!(parse_config(["wicknlw", "gibbs", "--bogus", "1"]), Err(CliError::Usage(_))));
        assert!(matches!(parse_config(["wicknlw", "gibbs", "--n", "x"]), Err(CliError::Usage(_))));
    }

    #[test]
    fn negative_regularity_flag() {
        let c = parse_config(["wicknlw", "universality", "--s", "-0.3", "--eps-list", "0.5,0.25"]).unwrap();
        assert_eq!(c.s, -0.3);
        assert_eq!(c.eps_list, vec![0.5, 0.25]);
    }

    #[test]
    fn config_text() {
        let map = parse_config_text("# comment\nn = 4\n\nrho=2.5  # trailing\nseed = 1\nseed = 7\n").unwrap();
        assert_eq!(map["n"], "4");
        assert_eq!(map["rho"], "2.5");
        assert_eq!(map["seed"], "7");
        assert!(parse_config_text("n 4").is_err());
    }

    #[test]
    fn file_keys_are_checked() {
        let mut p = Partial::default();
        assert!(p.set("seed", "42").is_ok());
        assert!(matches!(p.set("sed", "42"), Err(CliError::Config { key, .. }) if key == "sed"));
        assert!(matches!(p.set("n", "-1"), Err(CliError::Config { key, .. }) if key == "n"));
        assert!(p.set("method", "importance").is_ok());
        assert!(p.set("method", "gibbs").is_err());
    }
}
