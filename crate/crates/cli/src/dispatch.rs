//! Runs one subcommand and writes its report and tables.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use wicknlw::dynamics::{evolve, DynParams};
use wicknlw::experiments::chaos::{chaos_convergence_study, ChaosConfig};
use wicknlw::experiments::invariance::invariance_test;
use wicknlw::experiments::universality::{universality_experiment_with, Nonlinearity, UniversalityOptions};
use wicknlw::gaussian::{sample_mu_indexed, sigma_n, MuParams, PhaseState};
use wicknlw::gibbs::{default_observables, sample_gibbs, wick_mass, wick_potential, ChainOptions};
use wicknlw::stats::mean_stderr;
use wicknlw::WickContext;

use crate::config::{Command, InitialData, RunConfig};
use crate::error::CliError;

const Z_LIMIT: f64 = 3.0;

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    status: &'static str,
    config: &'a RunConfig,
    result: Value,
}

/// One-line summary of a completed run.
pub struct Summary {
    pub status: &'static str,
    pub files: Vec<String>,
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    fn field(&mut self, stem: &str, f: &wicknlw::SpectralField) -> Result<(), CliError> {
        let mut csv = Vec::new();
        f.write_csv(&mut csv)?;
        self.write(&format!("{stem}.csv"), |w| w.write_all(&csv))?;
        let mut bin = Vec::new();
        f.write_binary(&mut bin)?;
        self.write(&format!("{stem}.bin"), |w| w.write_all(&bin))
    }

    fn report(&mut self, cfg: &RunConfig, status: &'static str, result: Value) -> Result<(), CliError> {
        let report = Report {
            tool: "wicknlw",
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command,
            status,
            config: cfg,
            result,
        };
        let body = serde_json::to_string_pretty(&report).expect("reports serialize");
        self.text("report.json", &(body + "\n"))
    }
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn dispatch(cfg: &RunConfig) -> Result<Summary, CliError> {
    let mut out = Output::new(&cfg.out)?;
    let status = match cfg.command {
        Command::Sample => sample(cfg, &mut out)?,
        Command::Evolve => run_evolve(cfg, &mut out)?,
        Command::Gibbs => gibbs(cfg, &mut out)?,
        Command::Invariance => invariance(cfg, &mut out)?,
        Command::Chaos => chaos(cfg, &mut out)?,
        Command::Universality => universality(cfg, &mut out)?,
    };
    Ok(Summary {
        status,
        files: out.files,
    })
}

fn context(cfg: &RunConfig) -> Result<(MuParams, WickContext), CliError> {
    Ok((MuParams::new(cfg.n, cfg.rho, cfg.seed)?, WickContext::new(cfg.n, cfg.rho, cfg.m)?))
}

fn sample(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let (params, ctx) = context(cfg)?;
    let rows = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<[f64; 3], CliError> {
            let s = sample_mu_indexed(&params, i);
            Ok([s.quadratic_energy(), wick_mass(&s.u, &ctx)?, wick_potential(&s.u, &ctx)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let column = |k: usize| mean_stderr(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    out.text(
        "samples.csv",
        &csv_table(
            "index,quadratic_energy,wick_mass,wick_potential",
            rows.iter().enumerate().map(|(i, r)| format!("{i},{},{},{}", r[0], r[1], r[2])),
        ),
    )?;
    let first = sample_mu_indexed(&params, 0);
    out.field("sample_u", &first.u)?;
    out.field("sample_v", &first.v)?;
    out.report(
        cfg,
        "ok",
        json!({
            "sigma_n": sigma_n(cfg.n, cfg.rho),
            "quadratic_energy": column(0),
            "wick_mass": column(1),
            "wick_potential": column(2),
        }),
    )?;
    Ok("ok")
}

fn run_evolve(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let (params, ctx) = context(cfg)?;
    let initial = match cfg.init {
        InitialData::Mu => sample_mu_indexed(&params, 0),
        InitialData::Zero => PhaseState::zeros(cfg.n, cfg.rho),
    };
    let p = DynParams::new(ctx, cfg.dt)?;
    let traj = evolve(&initial, cfg.t, &p, cfg.record_every)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv, &p)?;
    out.write("trajectory.csv", |w| w.write_all(&csv))?;
    out.field("final_u", &traj.last().u)?;
    out.field("final_v", &traj.last().v)?;
    let e0 = p.energy(&initial)?;
    let mut drift = 0.0f64;
    for s in &traj.states {
        drift = drift.max((p.energy(s)? - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
    }
    out.report(
        cfg,
        "ok",
        json!({
            "records": traj.len(),
            "energy_initial": e0,
            "energy_final": p.energy(traj.last())?,
            "max_relative_energy_drift": if e0 == 0.0 { 0.0 } else { drift },
            "lambda": p.lambda,
        }),
    )?;
    Ok("ok")
}

fn gibbs(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let (params, ctx) = context(cfg)?;
    let run = sample_gibbs(&params, &ctx, cfg.samples, cfg.method.into(), &ChainOptions::default())?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for obs in default_observables() {
        let e = run.estimate(obs, &ctx)?;
        table.push(format!("{},{},{}", obs.name(), e.mean, e.stderr));
        rows.push(json!({ "name": obs.name(), "mean": e.mean, "stderr": e.stderr }));
    }
    out.text("observables.csv", &csv_table("name,mean,stderr", table))?;
    out.report(
        cfg,
        "ok",
        json!({ "diagnostics": run.diagnostics, "observables": rows }),
    )?;
    Ok("ok")
}

fn invariance(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let (_, ctx) = context(cfg)?;
    let p = DynParams::new(ctx, cfg.dt)?;
    let r = invariance_test(&ctx, cfg.t, &p, cfg.samples, cfg.seed)?;
    out.text(
        "invariance.csv",
        &csv_table(
            "name,mean_t0,stderr_t0,mean_T,stderr_T,z_score",
            r.rows.iter().map(|row| {
                format!(
                    "{},{},{},{},{},{}",
                    row.name, row.mean_t0, row.stderr_t0, row.mean_t, row.stderr_t, row.z_score
                )
            }),
        ),
    )?;
    let status = if r.pass { "pass" } else { "fail" };
    out.report(cfg, status, serde_json::to_value(&r).expect("reports serialize"))?;
    if !r.pass {
        return Err(CliError::Statistical(format!(
            "invariance: {} failed samples, max |z| = {:.3}, max drift = {:.3e}",
            r.n_failed,
            r.rows.iter().map(|row| row.z_score.abs()).fold(0.0, f64::max),
            r.max_relative_drift
        )));
    }
    Ok(status)
}

fn chaos(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let mut cc = ChaosConfig::new(cfg.ell, cfg.cutoffs.clone(), cfg.rho, cfg.samples, cfg.seed);
    cc.time = cfg.t;
    cc.eps_reg = cfg.eps_reg;
    let r = chaos_convergence_study(&cc)?;
    out.text(
        "moments.csv",
        &csv_table(
            "order,cutoff,n1,n2,mc_estimate,stderr,analytic,z_score",
            r.moments.iter().map(|m| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    m.order, m.cutoff, m.mode.0, m.mode.1, m.mc_estimate, m.stderr, m.analytic, m.z_score
                )
            }),
        ),
    )?;
    out.text(
        "cross.csv",
        &csv_table(
            "order,cutoff,a1,a2,b1,b2,re,re_stderr,im,im_stderr",
            r.cross.iter().map(|c| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    c.order, c.cutoff, c.mode_a.0, c.mode_a.1, c.mode_b.0, c.mode_b.1, c.re.mean, c.re.stderr, c.im.mean, c.im.stderr
                )
            }),
        ),
    )?;
    out.text(
        "cauchy.csv",
        &csv_table(
            "order,cutoff,distance,stderr",
            r.cauchy
                .iter()
                .map(|c| format!("{},{},{},{}", c.order, c.cutoff, c.distance, c.stderr)),
        ),
    )?;
    let moment_z = r.moments.iter().map(|m| m.z_score.abs()).fold(0.0, f64::max);
    let cross_z = r
        .cross
        .iter()
        .flat_map(|c| [c.re.z(0.0).abs(), c.im.z(0.0).abs()])
        .fold(0.0, f64::max);
    let pass = moment_z <= Z_LIMIT && cross_z <= Z_LIMIT;
    let status = if pass { "pass" } else { "fail" };
    let mut result = serde_json::to_value(&r).expect("reports serialize");
    result["max_moment_z"] = json!(moment_z);
    result["max_cross_z"] = json!(cross_z);
    out.report(cfg, status, result)?;
    if !pass {
        return Err(CliError::Statistical(format!(
            "chaos: max moment |z| = {moment_z:.3}, max cross |z| = {cross_z:.3}"
        )));
    }
    Ok(status)
}

fn universality(cfg: &RunConfig, out: &mut Output) -> Result<&'static str, CliError> {
    let f = Nonlinearity::parse(&cfg.f)?;
    let opts = UniversalityOptions {
        record_every: cfg.record_every,
        refine: true,
    };
    let r = universality_experiment_with(f, &cfg.eps_list, cfg.rho, cfg.s, cfg.t, cfg.dt, cfg.seed, &opts)?;
    let mut table = String::from("eps,cutoff,rho_eps,distance,failure\n");
    for row in &r.rows {
        let d = row.distance.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            row.eps,
            row.cutoff,
            row.rho_eps,
            d,
            row.failure.as_deref().unwrap_or("")
        );
    }
    out.text("universality.csv", &table)?;
    let failed: Vec<f64> = r.rows.iter().filter(|row| row.failure.is_some()).map(|row| row.eps).collect();
    let distances: Vec<f64> = r.rows.iter().filter_map(|row| row.distance).collect();
    let decreasing = failed.is_empty() && distances.windows(2).all(|w| w[1] < w[0]);
    let status = if decreasing { "pass" } else { "fail" };
    let mut result = serde_json::to_value(&r).expect("reports serialize");
    result["strictly_decreasing"] = json!(decreasing);
    out.report(cfg, status, result)?;
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!("universality: evolution failed at eps {failed:?}")));
    }
    if !decreasing {
        return Err(CliError::Statistical(format!(
            "universality: distances not strictly decreasing: {distances:?}"
        )));
    }
    Ok(status)
}
