//! Truncated Wick-ordered wave dynamics
//!
//! ```text
//! u̇ = v,    v̇ = -(ρ - Δ) u + λ P_N :(P_N u)^{2m+1}:
//! ```
//!
//! integrated by Strang splitting: a half kick in `v` from the force, the
//! exact free Klein-Gordon rotation of each mode, and another half kick. Both
//! sub-flows are exact, so the scheme is symplectic and time reversible.
//! The default `λ = -1` is the defocusing equation whose energy is
//! [`hamiltonian_wick`].

use std::cell::RefCell;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gaussian::PhaseState;
use crate::gibbs::{wick_mass, wick_potential};
use crate::spectral::{bracket_rho, from_grid, SpectralField};
use crate::wick::{hermite_in_place, WickContext};

/// A kick field added to `v̇`, already projected to the working cutoff.
pub trait Forcing: Sync {
    fn force(&self, u: &SpectralField) -> Result<SpectralField>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynParams {
    pub ctx: WickContext,
    pub dt: f64,
    /// Coefficient of the Wick term on the right-hand side; `-1` is defocusing.
    pub lambda: f64,
}

impl DynParams {
    pub fn new(ctx: WickContext, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("time step must be positive, got {dt}")));
        }
        Ok(DynParams { ctx, dt, lambda: -1.0 })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// `min(0.1 / ⟨N√2⟩_ρ, 1e-2)`: a tenth of the fastest rotation period scale.
    pub fn default_dt(n: usize, rho: f64) -> f64 {
        let fastest = (rho + 2.0 * (n * n) as f64).sqrt();
        (0.1 / fastest).min(1e-2)
    }

    /// Conserved energy for this `λ`: quadratic part plus `-λ` times the Wick potential.
    pub fn energy(&self, s: &PhaseState) -> Result<f64> {
        Ok(s.quadratic_energy() - self.lambda * wick_potential(&s.u, &self.ctx)?)
    }
}

impl Forcing for DynParams {
    fn force(&self, u: &SpectralField) -> Result<SpectralField> {
        if self.lambda == 0.0 {
            return Ok(SpectralField::zeros(self.ctx.n()));
        }
        Ok(nonlinear_force(u, &self.ctx)?.scale(self.lambda))
    }
}

/// A linear-only forcing (the free flow).
pub struct NoForce {
    pub n: usize,
}

impl Forcing for NoForce {
    fn force(&self, _u: &SpectralField) -> Result<SpectralField> {
        Ok(SpectralField::zeros(self.n))
    }
}

/// Recorded states along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectories record the initial state")
    }

    /// CSV with columns `t,H_wick,quadratic_energy,wick_mass,wick_potential`,
    /// where `H_wick` is the energy for `params.lambda`.
    pub fn write_csv<W: Write>(&self, mut w: W, params: &DynParams) -> Result<()> {
        writeln!(w, "t,H_wick,quadratic_energy,wick_mass,wick_potential")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let quad = s.quadratic_energy();
            let pot = wick_potential(&s.u, &params.ctx)?;
            let mass = wick_mass(&s.u, &params.ctx)?;
            writeln!(w, "{t:e},{:e},{quad:e},{mass:e},{pot:e}", quad - params.lambda * pot)?;
        }
        Ok(())
    }
}

type Rotation = (usize, u64, u64, Arc<Vec<[f64; 3]>>);

thread_local! {
    static ROTATION: RefCell<Option<Rotation>> = const { RefCell::new(None) };
}

/// `(cos tω, sin tω / ω, ω sin tω)` with `ω = ⟨n⟩_ρ` for every slot of the
/// coefficient square. The most recent table is kept per thread, since a run
/// repeats one step size.
fn rotation(n: usize, rho: f64, t: f64) -> Arc<Vec<[f64; 3]>> {
    ROTATION.with(|cell| {
        let mut slot = cell.borrow_mut();
        if let Some((cn, cr, ct, table)) = slot.as_ref() {
            if *cn == n && *cr == rho.to_bits() && *ct == t.to_bits() {
                return table.clone();
            }
        }
        let c = n as i32;
        let table: Arc<Vec<[f64; 3]>> = Arc::new(
            (-c..=c)
                .flat_map(|n1| (-c..=c).map(move |n2| (n1, n2)))
                .map(|mode| {
                    let w = bracket_rho(mode, rho);
                    let (sin, cos) = (t * w).sin_cos();
                    [cos, sin / w, w * sin]
                })
                .collect(),
        );
        *slot = Some((n, rho.to_bits(), t.to_bits(), table.clone()));
        table
    })
}

/// The free flow `S(t)`: exact rotation of every mode at frequency `⟨n⟩_ρ`.
pub fn linear_propagate(s: &PhaseState, t: f64) -> PhaseState {
    let table = rotation(s.n, s.rho, t);
    let mut u = SpectralField::zeros(s.n);
    let mut v = SpectralField::zeros(s.n);
    let slots = s.u.coeffs().iter().zip(s.v.coeffs()).zip(table.iter());
    for ((out_u, out_v), ((a, b), r)) in u.coeffs_mut().iter_mut().zip(v.coeffs_mut().iter_mut()).zip(slots) {
        *out_u = a * r[0] + b * r[1];
        *out_v = -a * r[2] + b * r[0];
    }
    PhaseState {
        u,
        v,
        rho: s.rho,
        n: s.n,
    }
}

/// `P_N[H_{2m+1}(P_N u; σ_N)]`, exact on the alias-free context grid.
pub fn nonlinear_force(u: &SpectralField, ctx: &WickContext) -> Result<SpectralField> {
    let degree = 2 * ctx.m() + 1;
    ctx.check_degree(degree)?;
    let mut g = ctx.grid_of(u)?;
    let sigma = ctx.sigma();
    hermite_in_place(g.values_mut(), degree, sigma);
    from_grid(&g, ctx.n())
}

fn kick(v: &SpectralField, f: &SpectralField, h: f64) -> SpectralField {
    v.axpy(h, f)
}

/// One Strang step of signed length `h` starting at time `t` (used only for
/// error reporting).
pub fn step_by<F: Forcing + ?Sized>(s: &PhaseState, h: f64, forcing: &F, t: f64) -> Result<PhaseState> {
    let f0 = forcing.force(&s.u)?;
    let (next, _) = step_cached(s, &f0, h, forcing, t)?;
    Ok(next)
}

fn step_cached<F: Forcing + ?Sized>(
    s: &PhaseState,
    f0: &SpectralField,
    h: f64,
    forcing: &F,
    t: f64,
) -> Result<(PhaseState, SpectralField)> {
    let half = PhaseState {
        u: s.u.clone(),
        v: kick(&s.v, f0, 0.5 * h),
        rho: s.rho,
        n: s.n,
    };
    let mut rotated = linear_propagate(&half, h);
    let f1 = forcing.force(&rotated.u)?;
    rotated.v = kick(&rotated.v, &f1, 0.5 * h);
    if !rotated.is_finite() {
        return Err(Error::NonFinite { time: t + h });
    }
    Ok((rotated, f1))
}

/// One step of length `p.dt` of the Wick-ordered flow.
pub fn step(s: &PhaseState, p: &DynParams) -> Result<PhaseState> {
    check_cutoff(s, p)?;
    step_by(s, p.dt, p, 0.0)
}

fn check_cutoff(s: &PhaseState, p: &DynParams) -> Result<()> {
    if s.n != p.ctx.n() {
        return Err(Error::CutoffMismatch {
            expected: p.ctx.n(),
            found: s.n,
        });
    }
    Ok(())
}

/// Integrates the Wick-ordered flow to time `t_end`.
pub fn evolve(s: &PhaseState, t_end: f64, p: &DynParams, record_every: usize) -> Result<Trajectory> {
    check_cutoff(s, p)?;
    evolve_with(s, t_end, p.dt, p, record_every)
}

/// Integrates with an arbitrary forcing. Records the initial state, every
/// `record_every`-th step (`0` records only the endpoints), and the final
/// state at exactly `t_end`; the last step is shortened to land there.
pub fn evolve_with<F: Forcing + ?Sized>(
    s: &PhaseState,
    t_end: f64,
    dt: f64,
    forcing: &F,
    record_every: usize,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("T", format!("horizon must be positive, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("time step must be positive, got {dt}")));
    }
    let full_steps = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    let remainder = t_end - full_steps as f64 * dt;
    let partial = remainder > 1e-12 * t_end;
    let total = full_steps + usize::from(partial);

    let mut times = vec![0.0];
    let mut states = vec![s.clone()];
    let mut cur = s.clone();
    let mut force = forcing.force(&cur.u)?;
    for k in 0..total {
        let t = k as f64 * dt;
        let h = if k < full_steps { dt } else { remainder };
        let (next, f) = step_cached(&cur, &force, h, forcing, t)?;
        cur = next;
        force = f;
        let last = k + 1 == total;
        if last || (record_every > 0 && (k + 1) % record_every == 0) {
            times.push(if last { t_end } else { (k + 1) as f64 * dt });
            states.push(cur.clone());
        }
    }
    Ok(Trajectory { times, states })
}

/// Sum of the quadratic energy and the Wick potential
/// `(1/(2m+2)) ∫ :(P_N u)^{2m+2}:`.
pub fn hamiltonian_wick(s: &PhaseState, ctx: &WickContext) -> Result<f64> {
    if s.n != ctx.n() {
        return Err(Error::CutoffMismatch {
            expected: ctx.n(),
            found: s.n,
        });
    }
    Ok(s.quadratic_energy() + wick_potential(&s.u, ctx)?)
}
