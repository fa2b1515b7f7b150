//! Invariance of the truncated Gibbs measure under the truncated flow.
//!
//! Draw Gibbs samples, record the default observables, evolve every sample
//! to `T`, and compare the two empirical means with a z-score. The samples at
//! `0` and `T` are paired, so treating the two means as independent is
//! conservative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, DynParams};
use crate::error::{Error, Result};
use crate::gaussian::{sample_mu_indexed, MuParams, PhaseState};
use crate::gibbs::{default_observables, sample_gibbs, ChainOptions, Diagnostics, Observable, SamplerMethod};
use crate::stats::{batch_means, mean_stderr, Estimate};
use crate::wick::WickContext;

/// Default bound on `|E(T) - E(0)| / (1 + |E(0)|)` per sample.
pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvarianceTarget {
    /// Metropolis samples of the Wick Gibbs measure, evolved by the Wick flow.
    Gibbs,
    /// Samples of `μ` evolved by the free flow (the Wick force is switched off).
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOptions {
    pub target: InvarianceTarget,
    pub chain: ChainOptions,
    pub z_threshold: f64,
    pub drift_tolerance: f64,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        InvarianceOptions {
            target: InvarianceTarget::Gibbs,
            chain: ChainOptions::default(),
            z_threshold: DEFAULT_Z_THRESHOLD,
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub name: String,
    pub mean_t0: f64,
    pub stderr_t0: f64,
    pub mean_t: f64,
    pub stderr_t: f64,
    pub z_score: f64,
}

impl ObservableRow {
    fn new(name: String, at0: Estimate, at_t: Estimate) -> Self {
        let diff = at_t.mean - at0.mean;
        let z_score = if diff == 0.0 {
            0.0
        } else {
            diff / (at0.stderr.powi(2) + at_t.stderr.powi(2)).sqrt()
        };
        ObservableRow {
            name,
            mean_t0: at0.mean,
            stderr_t0: at0.stderr,
            mean_t: at_t.mean,
            stderr_t: at_t.stderr,
            z_score,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub rows: Vec<ObservableRow>,
    pub target: InvarianceTarget,
    pub cutoff: usize,
    pub rho: f64,
    pub m: usize,
    pub horizon: f64,
    pub dt: f64,
    pub lambda: f64,
    pub seed: u64,
    pub n_samples: usize,
    /// Samples whose integration failed; they are excluded from every row.
    pub n_failed: usize,
    pub max_relative_drift: f64,
    pub drift_tolerance: f64,
    pub z_threshold: f64,
    pub sampler: Option<Diagnostics>,
    pub pass: bool,
}

/// [`invariance_test_with`] using Metropolis Gibbs samples and default thresholds.
pub fn invariance_test(
    ctx: &WickContext,
    horizon: f64,
    dyn_params: &DynParams,
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    invariance_test_with(ctx, horizon, dyn_params, n_samples, seed, &InvarianceOptions::default())
}

pub fn invariance_test_with(
    ctx: &WickContext,
    horizon: f64,
    dyn_params: &DynParams,
    n_samples: usize,
    seed: u64,
    opts: &InvarianceOptions,
) -> Result<InvarianceReport> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("T", format!("horizon must be non-negative, got {horizon}")));
    }
    let params = MuParams::new(ctx.n(), ctx.rho(), seed)?;
    let dyn_params = match opts.target {
        InvarianceTarget::Gibbs => DynParams { ctx: *ctx, ..*dyn_params },
        InvarianceTarget::Gaussian => DynParams { ctx: *ctx, ..*dyn_params }.with_lambda(0.0),
    };
    let (initial, sampler): (Vec<PhaseState>, Option<Diagnostics>) = match opts.target {
        InvarianceTarget::Gibbs => {
            let run = sample_gibbs(&params, ctx, n_samples, SamplerMethod::Metropolis, &opts.chain)?;
            (run.samples.into_iter().map(|s| s.state).collect(), Some(run.diagnostics))
        }
        InvarianceTarget::Gaussian => (
            (0..n_samples as u64)
                .into_par_iter()
                .map(|i| sample_mu_indexed(&params, i))
                .collect(),
            None,
        ),
    };

    let observables = default_observables();
    let evaluate = |s: &PhaseState| -> Result<Vec<f64>> {
        observables.iter().map(|o| o.evaluate(s, ctx)).collect()
    };

    struct Outcome {
        at0: Vec<f64>,
        at_t: Vec<f64>,
        drift: f64,
    }
    let outcomes: Vec<Option<Outcome>> = initial
        .par_iter()
        .map(|s| -> Result<Option<Outcome>> {
            let at0 = evaluate(s)?;
            if horizon == 0.0 {
                return Ok(Some(Outcome { at_t: at0.clone(), at0, drift: 0.0 }));
            }
            match evolve(s, horizon, &dyn_params, 0) {
                Ok(traj) => {
                    let end = traj.last();
                    let e0 = dyn_params.energy(s)?;
                    let e1 = dyn_params.energy(end)?;
                    Ok(Some(Outcome {
                        at0,
                        at_t: evaluate(end)?,
                        drift: (e1 - e0).abs() / (1.0 + e0.abs()),
                    }))
                }
                Err(Error::NonFinite { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n_failed = outcomes.iter().filter(|o| o.is_none()).count();
    let done: Vec<&Outcome> = outcomes.iter().flatten().collect();
    let max_relative_drift = done.iter().map(|o| o.drift).fold(0.0, f64::max);

    let estimate = |values: &[f64]| -> Estimate {
        match opts.target {
            InvarianceTarget::Gibbs => batch_means(values, opts.chain.batches),
            InvarianceTarget::Gaussian => mean_stderr(values),
        }
    };
    let rows: Vec<ObservableRow> = observables
        .iter()
        .enumerate()
        .map(|(k, o): (usize, &Observable)| {
            let v0: Vec<f64> = done.iter().map(|d| d.at0[k]).collect();
            let vt: Vec<f64> = done.iter().map(|d| d.at_t[k]).collect();
            ObservableRow::new(o.name(), estimate(&v0), estimate(&vt))
        })
        .collect();

    let pass = n_failed == 0
        && rows.iter().all(|r| r.z_score.abs() <= opts.z_threshold)
        && max_relative_drift <= opts.drift_tolerance;
    Ok(InvarianceReport {
        rows,
        target: opts.target,
        cutoff: ctx.n(),
        rho: ctx.rho(),
        m: ctx.m(),
        horizon,
        dt: dyn_params.dt,
        lambda: dyn_params.lambda,
        seed,
        n_samples,
        n_failed,
        max_relative_drift,
        drift_tolerance: opts.drift_tolerance,
        z_threshold: opts.z_threshold,
        sampler,
        pass,
    })
}
