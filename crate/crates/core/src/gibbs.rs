//! The truncated Gibbs measure `dP_N = Z_N⁻¹ R_N(u) dμ`, with
//! `R_N(u) = exp(-(1/(2m+2)) ∫ :(P_N u)^{2m+2}: dx)`.
//!
//! Two exact samplers are provided, both driven by draws from `μ`:
//! self-normalized importance sampling, and an independence Metropolis chain
//! whose proposals are fresh `μ` samples. `Z_N` is never computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{sample_mu_indexed, sample_mu_with, stream_rng, MuParams, PhaseState};
use crate::spectral::{Mode, SpectralField};
use crate::stats::{
    batch_means, kish_ess, mean_stderr, normalize_log_weights, series_ess, weighted_mean_stderr,
    Estimate,
};
use crate::wick::{wick_power, WickContext};

/// Streams at or above this offset belong to Metropolis chains.
pub const METROPOLIS_STREAM_BASE: u64 = 1 << 40;

/// `(1/(2m+2)) ∫ :(P_N u)^{2m+2}: dx`.
pub fn wick_potential(u: &SpectralField, ctx: &WickContext) -> Result<f64> {
    let degree = 2 * ctx.m() + 2;
    Ok(wick_power(u, degree, ctx)?.mean() / degree as f64)
}

/// `∫ :(P_N u)²: dx = ‖P_N u‖²_{L²} - σ_N`.
pub fn wick_mass(u: &SpectralField, ctx: &WickContext) -> Result<f64> {
    Ok(wick_power(u, 2, ctx)?.mean())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsSample {
    pub state: PhaseState,
    pub wick_potential: f64,
    /// `log R_N(u) = -wick_potential`.
    pub log_density: f64,
}

impl GibbsSample {
    pub fn new(state: PhaseState, ctx: &WickContext) -> Result<Self> {
        let wick_potential = wick_potential(&state.u, ctx)?;
        Ok(GibbsSample {
            state,
            wick_potential,
            log_density: -wick_potential,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Importance,
    Metropolis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub burn_in: usize,
    /// Chain steps between retained states.
    pub thin: usize,
    /// Independent chains, run concurrently.
    pub chains: usize,
    /// Below this effective sample size a warning is attached.
    pub ess_floor: f64,
    /// Batches for batch-means error bars.
    pub batches: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            burn_in: 200,
            thin: 5,
            chains: 8,
            ess_floor: 100.0,
            batches: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: SamplerMethod,
    pub acceptance_rate: Option<f64>,
    pub effective_sample_size: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct GibbsRun {
    pub samples: Vec<GibbsSample>,
    /// Normalized weights (uniform for Metropolis).
    pub weights: Vec<f64>,
    pub diagnostics: Diagnostics,
    batches: usize,
}

impl GibbsRun {
    /// Estimate of `E_P[obs]` with an error bar appropriate to the method.
    pub fn estimate(&self, obs: Observable, ctx: &WickContext) -> Result<Estimate> {
        let values = self
            .samples
            .iter()
            .map(|s| obs.evaluate_sample(s, ctx))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.estimate_values(&values))
    }

    /// Same as [`estimate`](Self::estimate) for precomputed per-sample values.
    pub fn estimate_values(&self, values: &[f64]) -> Estimate {
        match self.diagnostics.method {
            SamplerMethod::Importance => weighted_mean_stderr(values, &self.weights),
            SamplerMethod::Metropolis => batch_means(values, self.batches),
        }
    }
}

/// Independence Metropolis acceptance: `u < exp(V(current) - V(proposal))`.
pub fn metropolis_accept(current_potential: f64, proposal_potential: f64, uniform: f64) -> bool {
    let log_ratio = current_potential - proposal_potential;
    log_ratio >= 0.0 || uniform < log_ratio.exp()
}

fn check_compatible(params: &MuParams, ctx: &WickContext) -> Result<()> {
    if params.n != ctx.n() {
        return Err(Error::CutoffMismatch {
            expected: ctx.n(),
            found: params.n,
        });
    }
    if params.rho != ctx.rho() {
        return Err(Error::invalid("rho", "sampler and Wick context disagree on the mass"));
    }
    Ok(())
}

/// Draws `n_samples` states targeting the truncated Gibbs measure.
pub fn sample_gibbs(
    params: &MuParams,
    ctx: &WickContext,
    n_samples: usize,
    method: SamplerMethod,
    opts: &ChainOptions,
) -> Result<GibbsRun> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "need at least one sample"));
    }
    check_compatible(params, ctx)?;
    match method {
        SamplerMethod::Importance => importance(params, ctx, n_samples, opts),
        SamplerMethod::Metropolis => metropolis(params, ctx, n_samples, opts),
    }
}

fn importance(params: &MuParams, ctx: &WickContext, n: usize, opts: &ChainOptions) -> Result<GibbsRun> {
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| GibbsSample::new(sample_mu_indexed(params, i), ctx))
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = samples.iter().map(|s| s.log_density).collect();
    let weights = normalize_log_weights(&log_w);
    let ess = kish_ess(&weights);
    let mut warnings = Vec::new();
    if ess < opts.ess_floor {
        warnings.push(format!("effective sample size {ess:.1} below floor {}", opts.ess_floor));
    }
    Ok(GibbsRun {
        samples,
        weights,
        diagnostics: Diagnostics {
            method: SamplerMethod::Importance,
            acceptance_rate: None,
            effective_sample_size: ess,
            warnings,
        },
        batches: opts.batches,
    })
}

struct ChainOutput {
    samples: Vec<GibbsSample>,
    accepted: usize,
    proposed: usize,
}

fn run_chain(
    params: &MuParams,
    ctx: &WickContext,
    chain: usize,
    keep: usize,
    opts: &ChainOptions,
) -> Result<ChainOutput> {
    let mut rng = stream_rng(params.seed, METROPOLIS_STREAM_BASE + chain as u64);
    let mut current = GibbsSample::new(sample_mu_with(&mut rng, params.n, params.rho), ctx)?;
    let thin = opts.thin.max(1);
    let total = opts.burn_in + keep * thin;
    let mut out = Vec::with_capacity(keep);
    let (mut accepted, mut proposed) = (0, 0);
    for it in 1..=total {
        let proposal = GibbsSample::new(sample_mu_with(&mut rng, params.n, params.rho), ctx)?;
        let u: f64 = rand::Rng::random(&mut rng);
        proposed += 1;
        if metropolis_accept(current.wick_potential, proposal.wick_potential, u) {
            current = proposal;
            accepted += 1;
        }
        if it > opts.burn_in && (it - opts.burn_in).is_multiple_of(thin) {
            out.push(current.clone());
        }
    }
    Ok(ChainOutput {
        samples: out,
        accepted,
        proposed,
    })
}

fn metropolis(params: &MuParams, ctx: &WickContext, n: usize, opts: &ChainOptions) -> Result<GibbsRun> {
    let chains = opts.chains.clamp(1, n);
    let outputs = (0..chains)
        .into_par_iter()
        .map(|c| {
            let keep = n / chains + usize::from(c < n % chains);
            run_chain(params, ctx, c, keep, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let per_chain_batches = (opts.batches / chains).max(2);
    let ess: f64 = outputs
        .iter()
        .map(|o| {
            let v: Vec<f64> = o.samples.iter().map(|s| s.wick_potential).collect();
            let distinct = 1 + v.windows(2).filter(|w| w[0].to_bits() != w[1].to_bits()).count();
            series_ess(&v, per_chain_batches).min(distinct as f64)
        })
        .sum();
    let samples: Vec<GibbsSample> = outputs.into_iter().flat_map(|o| o.samples).collect();
    let weights = vec![1.0 / samples.len() as f64; samples.len()];
    let mut warnings = Vec::new();
    if ess < opts.ess_floor {
        warnings.push(format!("effective sample size {ess:.1} below floor {}", opts.ess_floor));
    }
    Ok(GibbsRun {
        samples,
        weights,
        diagnostics: Diagnostics {
            method: SamplerMethod::Metropolis,
            acceptance_rate: Some(accepted as f64 / proposed.max(1) as f64),
            effective_sample_size: ess,
            warnings,
        },
        batches: opts.batches,
    })
}

/// Scalar functions of a phase-space point used for moment comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    WickMass,
    WickPotential,
    /// `|û(n)|²`.
    ModeSquare(Mode),
    QuadraticEnergy,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::WickMass => "wick_mass".into(),
            Observable::WickPotential => "wick_potential".into(),
            Observable::ModeSquare(n) => format!("abs_u_{}_{}_sq", n.0, n.1),
            Observable::QuadraticEnergy => "quadratic_energy".into(),
        }
    }

    pub fn evaluate(&self, s: &PhaseState, ctx: &WickContext) -> Result<f64> {
        Ok(match self {
            Observable::WickMass => wick_mass(&s.u, ctx)?,
            Observable::WickPotential => wick_potential(&s.u, ctx)?,
            Observable::ModeSquare(n) => s.u.get(*n).norm_sqr(),
            Observable::QuadraticEnergy => s.quadratic_energy(),
        })
    }

    fn evaluate_sample(&self, s: &GibbsSample, ctx: &WickContext) -> Result<f64> {
        match self {
            Observable::WickPotential => Ok(s.wick_potential),
            _ => self.evaluate(&s.state, ctx),
        }
    }
}

/// Wick mass, Wick potential, `|û(n)|²` at `(0,0), (1,0), (1,1)`, quadratic energy.
pub fn default_observables() -> Vec<Observable> {
    vec![
        Observable::WickMass,
        Observable::WickPotential,
        Observable::ModeSquare((0, 0)),
        Observable::ModeSquare((1, 0)),
        Observable::ModeSquare((1, 1)),
        Observable::QuadraticEnergy,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnMomentRow {
    pub n: usize,
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo `E_μ[R_N^p]` for every context and exponent.
pub fn rn_moment_study(
    ctxs: &[WickContext],
    ps: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<RnMomentRow>> {
    if let Some(first) = ctxs.first() {
        if ctxs.iter().any(|c| c.rho() != first.rho() || c.m() != first.m()) {
            return Err(Error::invalid("contexts", "all contexts must share rho and m"));
        }
    }
    if ps.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::invalid("p", "exponents must be non-negative"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "need at least one sample"));
    }
    let mut rows = Vec::new();
    for ctx in ctxs {
        let params = MuParams::new(ctx.n(), ctx.rho(), seed)?;
        let potentials = (0..n_samples as u64)
            .into_par_iter()
            .map(|i| wick_potential(&sample_mu_indexed(&params, i).u, ctx))
            .collect::<Result<Vec<_>>>()?;
        for &p in ps {
            let values: Vec<f64> = potentials.iter().map(|v| (-p * v).exp()).collect();
            let e = mean_stderr(&values);
            rows.push(RnMomentRow {
                n: ctx.n(),
                p,
                estimate: e.mean,
                stderr: e.stderr,
            });
        }
    }
    Ok(rows)
}
