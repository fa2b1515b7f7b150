//! Weak universality: rescaled equations with a general odd nonlinearity
//! `f` and a renormalized mass converge to the Wick cubic equation.
//!
//! At scale `ε` the field evolves by
//!
//! `∂²u + (ρ - Δ)u = ε⁻³ P_N { f(εu) + ε(ε²ρ - ρ_ε) u }`,  `N = ⌊1/ε⌋`,
//!
//! with `ρ_ε = f'(0) + ε²ρ + ε² σ_N f'''(0) / 2`. Expanding `f` shows the
//! right-hand side is `λ H₃(u; σ_N)` plus a remainder of size `O(ε u⁴)`,
//! where `λ = f'''(0)/6`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with, DynParams, Forcing, Trajectory};
use crate::error::{Error, Result};
use crate::gaussian::{check_rho, sample_mu_indexed, sigma_n, MuParams, PhaseState};
use crate::spectral::{from_grid, grid_size_for_degree, sobolev_norm, to_grid, GridField, SobolevNormSpec, SpectralField};
use crate::wick::{hermite, WickContext};

/// An odd nonlinearity with `f(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Sine,
    Tanh,
    /// `f(x) = coefficient · x³`
    Cubic { coefficient: f64 },
    /// `f(x) = slope · x`
    Linear { slope: f64 },
}

impl Nonlinearity {
    /// Accepts `sin`, `tanh`, `cubic[:c]` and `linear[:a]`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::invalid("f", format!("bad coefficient {a:?}"))),
            }
        };
        match name {
            "sin" | "sine" if arg.is_none() => Ok(Nonlinearity::Sine),
            "tanh" if arg.is_none() => Ok(Nonlinearity::Tanh),
            "cubic" => Ok(Nonlinearity::Cubic { coefficient: number(-1.0 / 6.0)? }),
            "linear" => Ok(Nonlinearity::Linear { slope: number(1.0)? }),
            _ => Err(Error::invalid("f", format!("unknown nonlinearity {s:?}"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Sine => x.sin(),
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Cubic { coefficient } => coefficient * x * x * x,
            Nonlinearity::Linear { slope } => slope * x,
        }
    }

    pub fn d1_at_zero(&self) -> f64 {
        match *self {
            Nonlinearity::Sine | Nonlinearity::Tanh => 1.0,
            Nonlinearity::Cubic { .. } => 0.0,
            Nonlinearity::Linear { slope } => slope,
        }
    }

    pub fn d3_at_zero(&self) -> f64 {
        match *self {
            Nonlinearity::Sine => -1.0,
            Nonlinearity::Tanh => -2.0,
            Nonlinearity::Cubic { coefficient } => 6.0 * coefficient,
            Nonlinearity::Linear { .. } => 0.0,
        }
    }

    /// `sup_x |f''''(x)|`.
    pub fn d4_sup(&self) -> f64 {
        match *self {
            Nonlinearity::Sine => 1.0,
            Nonlinearity::Tanh => {
                // tanh'''' = 8t(2 - 3t²)(1 - t²) with t = tanh x; the extremum sits at
                // the smaller root of 15t⁴ - 15t² + 2 = 0
                let t = ((15.0 - 105f64.sqrt()) / 30.0).sqrt();
                8.0 * t * (2.0 - 3.0 * t * t) * (1.0 - t * t)
            }
            Nonlinearity::Cubic { .. } | Nonlinearity::Linear { .. } => 0.0,
        }
    }

    /// Coupling of the limiting Wick cubic, `f'''(0) / 6`.
    pub fn lambda(&self) -> f64 {
        self.d3_at_zero() / 6.0
    }

    pub fn name(&self) -> String {
        match *self {
            Nonlinearity::Sine => "sin".into(),
            Nonlinearity::Tanh => "tanh".into(),
            Nonlinearity::Cubic { coefficient } => format!("cubic:{coefficient}"),
            Nonlinearity::Linear { slope } => format!("linear:{slope}"),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("eps", format!("need 0 < eps <= 1, got {eps}")));
    }
    Ok(())
}

/// `⌊1/ε⌋`, tolerant of the rounding in `1/ε` for reciprocals of integers.
pub fn cutoff_for_eps(eps: f64) -> Result<usize> {
    check_eps(eps)?;
    Ok((1.0 / eps + 1e-9).floor() as usize)
}

/// Renormalized mass `f'(0) + ε²ρ + ε² σ_N f'''(0) / 2` with `N = ⌊1/ε⌋`.
pub fn rho_eps(f: &Nonlinearity, eps: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let sigma = sigma_n(cutoff_for_eps(eps)?, rho);
    Ok(f.d1_at_zero() + eps * eps * rho + eps * eps * sigma * f.d3_at_zero() / 2.0)
}

/// The rescaled forcing at scale `ε`, evaluated pseudospectrally.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledForcing {
    f: Nonlinearity,
    eps: f64,
    rho: f64,
    rho_eps: f64,
    sigma: f64,
    n: usize,
    grid: usize,
}

impl ScaledForcing {
    pub fn new(f: Nonlinearity, eps: f64, rho: f64) -> Result<Self> {
        let n = cutoff_for_eps(eps)?;
        Ok(ScaledForcing {
            f,
            eps,
            rho,
            rho_eps: rho_eps(&f, eps, rho)?,
            sigma: sigma_n(n, rho),
            n,
            grid: grid_size_for_degree(n, 3),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn rho_eps(&self) -> f64 {
        self.rho_eps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `ε⁻³ { f(εx) + ε(ε²ρ - ρ_ε) x }` at a single value.
    pub fn pointwise(&self, x: f64) -> f64 {
        let e = self.eps;
        (self.f.eval(e * x) + e * (e * e * self.rho - self.rho_eps) * x) / (e * e * e)
    }

    /// Pointwise difference between the rescaled forcing and `λ H₃(x; σ_N)`.
    pub fn remainder(&self, x: f64) -> f64 {
        self.pointwise(x) - self.f.lambda() * hermite(3, x, self.sigma)
    }

    pub fn grid_forcing(&self, g: &GridField) -> GridField {
        g.map(|x| self.pointwise(x))
    }
}

impl Forcing for ScaledForcing {
    fn force(&self, u: &SpectralField) -> Result<SpectralField> {
        if u.n_max() != self.n {
            return Err(Error::CutoffMismatch {
                expected: self.n,
                found: u.n_max(),
            });
        }
        from_grid(&self.grid_forcing(&to_grid(u, self.grid)?), self.n)
    }
}

/// Evolves `initial` projected to `⌊1/ε⌋` under the rescaled equation.
pub fn evolve_scaled_from(
    initial: &PhaseState,
    f: Nonlinearity,
    eps: f64,
    horizon: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let forcing = ScaledForcing::new(f, eps, initial.rho)?;
    evolve_with(&initial.project(forcing.cutoff()), horizon, dt, &forcing, record_every)
}

/// Evolves a `μ` sample (stream 0 of `seed`) at cutoff `⌊1/ε⌋`.
pub fn evolve_scaled(
    eps: f64,
    f: Nonlinearity,
    rho: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    let n = cutoff_for_eps(eps)?;
    let initial = sample_mu_indexed(&MuParams::new(n, rho, seed)?, 0);
    evolve_scaled_from(&initial, f, eps, horizon, dt, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityOptions {
    /// Steps between compared states.
    pub record_every: usize,
    /// Also solve the reference at twice its cutoff and report the gap.
    pub refine: bool,
}

impl Default for UniversalityOptions {
    fn default() -> Self {
        UniversalityOptions {
            record_every: 4,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityRow {
    pub eps: f64,
    pub cutoff: usize,
    pub rho_eps: f64,
    /// `sup_t ‖u_ε(t) - u(t)‖_{H^s}` over the recorded times; `None` if the
    /// rescaled evolution failed.
    pub distance: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub f: Nonlinearity,
    pub rho: f64,
    pub s: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub lambda: f64,
    pub reference_cutoff: usize,
    pub rows: Vec<UniversalityRow>,
    /// `sup_t` distance between the reference and the same problem at twice the cutoff.
    pub reference_refinement: Option<f64>,
}

fn sup_distance(a: &Trajectory, b: &Trajectory, norm: &SobolevNormSpec) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::invalid(
            "trajectory",
            format!("record counts differ: {} vs {}", a.times.len(), b.times.len()),
        ));
    }
    let n = a.states[0].n.max(b.states[0].n);
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| sobolev_norm(&(&x.u.embed(n) - &y.u.embed(n)), norm))
        .fold(0.0, f64::max))
}

/// [`evolve_with`], except that a zero horizon yields the initial state alone.
fn run<F: Forcing + ?Sized>(
    initial: &PhaseState,
    horizon: f64,
    dt: f64,
    forcing: &F,
    record_every: usize,
) -> Result<Trajectory> {
    if horizon == 0.0 {
        return Ok(Trajectory {
            times: vec![0.0],
            states: vec![initial.clone()],
        });
    }
    evolve_with(initial, horizon, dt, forcing, record_every)
}

pub fn universality_experiment(
    f: Nonlinearity,
    eps_list: &[f64],
    rho: f64,
    s: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<UniversalityReport> {
    universality_experiment_with(f, eps_list, rho, s, horizon, dt, seed, &UniversalityOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn universality_experiment_with(
    f: Nonlinearity,
    eps_list: &[f64],
    rho: f64,
    s: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    opts: &UniversalityOptions,
) -> Result<UniversalityReport> {
    check_rho(rho)?;
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list", "need a non-empty strictly decreasing list"));
    }
    for &e in eps_list {
        check_eps(e)?;
    }
    if !(s < 0.0) {
        return Err(Error::invalid("s", format!("need a negative regularity, got {s}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("T", format!("horizon must be non-negative, got {horizon}")));
    }
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let n_ref = cutoff_for_eps(eps_min)?;
    let norm = SobolevNormSpec::h(s);
    let lambda = f.lambda();
    let record_every = opts.record_every.max(1);

    let top = if opts.refine { 2 * n_ref } else { n_ref };
    let data = sample_mu_indexed(&MuParams::new(top, rho, seed)?, 0);
    let reference_data = data.project(n_ref);

    let ctx = WickContext::new(n_ref, rho, 1)?;
    let reference_params = DynParams::new(ctx, dt)?.with_lambda(lambda);
    let reference = run(&reference_data, horizon, dt, &reference_params, record_every)?;

    let rows = eps_list
        .par_iter()
        .map(|&eps| -> Result<UniversalityRow> {
            let forcing = ScaledForcing::new(f, eps, rho)?;
            let data = reference_data.project(forcing.cutoff());
            let (distance, failure) = match run(&data, horizon, dt, &forcing, record_every) {
                Ok(traj) => (Some(sup_distance(&traj, &reference, &norm)?), None),
                Err(e @ Error::NonFinite { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            Ok(UniversalityRow {
                eps,
                cutoff: forcing.cutoff(),
                rho_eps: forcing.rho_eps(),
                distance,
                failure,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let reference_refinement = if opts.refine {
        // substeps keep the finer problem inside its own stability range
        let sub = (dt / DynParams::default_dt(top, rho)).ceil().max(1.0) as usize;
        let fine_ctx = WickContext::new(top, rho, 1)?;
        let fine_dt = dt / sub as f64;
        let fine_params = DynParams::new(fine_ctx, fine_dt)?.with_lambda(lambda);
        let fine = run(&data, horizon, fine_dt, &fine_params, record_every * sub)?;
        Some(sup_distance(&fine, &reference, &norm)?)
    } else {
        None
    };

    Ok(UniversalityReport {
        f,
        rho,
        s,
        horizon,
        dt,
        seed,
        lambda,
        reference_cutoff: n_ref,
        rows,
        reference_refinement,
    })
}
