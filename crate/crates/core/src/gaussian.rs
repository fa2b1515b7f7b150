//! The Gaussian measure `μ = μ₀ ⊗ μ₁` on truncated phase space, its pointwise
//! variance `σ_N`, the covariance kernel `γ_N`, and the exact second moments of
//! Wick powers of the free field.
//!
//! # Sampling contract
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`; Monte Carlo sample `i` uses stream `i`. Modes are
//! visited in the order: zero mode, then half-space modes sorted by `|n|²`
//! with lexicographic tie-break. For each mode the draws are
//! `u.re, u.im, v.re, v.im` (the zero mode draws only `u, v`). Because shells
//! come in increasing radius, a sample at cutoff `N` equals the projection of
//! the sample at any larger cutoff drawn from the same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    ball_modes, bracket_rho, in_ball, in_half_space, norm_sq, project, Mode, SpectralField,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuParams {
    pub n: usize,
    pub rho: f64,
    pub seed: u64,
}

impl MuParams {
    pub fn new(n: usize, rho: f64, seed: u64) -> Result<Self> {
        check_rho(rho)?;
        Ok(MuParams { n, rho, seed })
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must be positive and finite, got {rho}")))
    }
}

/// A point `(u, ∂_t u)` of truncated phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub u: SpectralField,
    pub v: SpectralField,
    pub rho: f64,
    pub n: usize,
}

impl PhaseState {
    pub fn new(u: SpectralField, v: SpectralField, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if u.n_max() != v.n_max() {
            return Err(Error::CutoffMismatch {
                expected: u.n_max(),
                found: v.n_max(),
            });
        }
        let n = u.n_max();
        Ok(PhaseState { u, v, rho, n })
    }

    pub fn zeros(n: usize, rho: f64) -> Self {
        PhaseState {
            u: SpectralField::zeros(n),
            v: SpectralField::zeros(n),
            rho,
            n,
        }
    }

    /// `P_N` applied to both components.
    pub fn project(&self, n: usize) -> Self {
        let u = project(&self.u, n);
        let v = project(&self.v, n);
        let n = u.n_max();
        PhaseState { u, v, rho: self.rho, n }
    }

    /// Zero-pads both components to a larger cutoff.
    pub fn embed(&self, n: usize) -> Self {
        PhaseState {
            u: self.u.embed(n),
            v: self.v.embed(n),
            rho: self.rho,
            n,
        }
    }

    pub fn negate(&self) -> Self {
        PhaseState {
            u: -&self.u,
            v: -&self.v,
            rho: self.rho,
            n: self.n,
        }
    }

    /// `(1/2) Σ (⟨n⟩²_ρ |û(n)|² + |v̂(n)|²)`.
    pub fn quadratic_energy(&self) -> f64 {
        let pot: f64 = self
            .u
            .modes()
            .map(|(n, c)| (self.rho + norm_sq(n) as f64) * c.norm_sqr())
            .sum();
        0.5 * (pot + self.v.l2_norm_sq())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Largest coefficient difference in either component.
    pub fn max_diff(&self, other: &PhaseState) -> f64 {
        (&self.u - &other.u).max_abs().max((&self.v - &other.v).max_abs())
    }
}

/// The ChaCha20 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Modes in sampling order: zero mode, then the half-space by shells.
pub fn sampling_order(n: usize) -> Vec<Mode> {
    let mut half: Vec<Mode> = ball_modes(n).filter(|&m| in_half_space(m)).collect();
    half.sort_by_key(|&m| (norm_sq(m), m.0, m.1));
    let mut order = Vec::with_capacity(half.len() + 1);
    order.push((0, 0));
    order.extend(half);
    order
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `(u, v)` from `μ` at cutoff `n` using an existing generator.
pub fn sample_mu_with<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64) -> PhaseState {
    let mut u = SpectralField::zeros(n);
    let mut v = SpectralField::zeros(n);
    for mode in sampling_order(n) {
        if mode == (0, 0) {
            let g0: f64 = rng.sample(StandardNormal);
            let g1: f64 = rng.sample(StandardNormal);
            u.set(mode, Complex64::new(g0 / rho.sqrt(), 0.0));
            v.set(mode, Complex64::new(g1, 0.0));
        } else {
            let g0 = complex_gaussian(rng);
            let g1 = complex_gaussian(rng);
            u.set(mode, g0 / bracket_rho(mode, rho));
            v.set(mode, g1);
        }
    }
    PhaseState { u, v, rho, n }
}

/// Sample `index` of the Monte Carlo family identified by `p.seed`.
pub fn sample_mu_indexed(p: &MuParams, index: u64) -> PhaseState {
    sample_mu_with(&mut stream_rng(p.seed, index), p.n, p.rho)
}

/// One draw from `μ` at cutoff `p.n`; deterministic in `p.seed`.
pub fn sample_mu(p: &MuParams) -> PhaseState {
    sample_mu_indexed(p, 0)
}

/// `σ_N = Σ_{|n| <= N} 1 / (ρ + |n|²)`, the pointwise variance of `P_N u`.
pub fn sigma_n(n: usize, rho: f64) -> f64 {
    ball_modes(n).map(|m| 1.0 / (rho + norm_sq(m) as f64)).sum()
}

/// The covariance kernel `γ_N` with coefficients `1 / ⟨n⟩²_ρ` on `|n| <= N`.
pub fn gamma_n(n: usize, rho: f64) -> SpectralField {
    let mut g = SpectralField::zeros(n);
    for m in ball_modes(n).filter(|&m| m == (0, 0) || in_half_space(m)) {
        g.set(m, Complex64::new(1.0 / (rho + norm_sq(m) as f64), 0.0));
    }
    g
}

/// `ℓ! · 𝓕[γ_N^ℓ](n)` for every `n` with `|n_i| <= ℓN`, computed by iterated
/// convolution on the full lattice square (exact, no truncation).
#[derive(Clone, Debug)]
pub struct ChaosKernel {
    order: usize,
    cutoff: usize,
    radius: usize,
    table: Vec<f64>,
}

impl ChaosKernel {
    pub fn new(order: usize, cutoff: usize, rho: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("order", "chaos order must be at least 1"));
        }
        check_rho(rho)?;
        let base: Vec<(Mode, f64)> = ball_modes(cutoff)
            .map(|m| (m, 1.0 / (rho + norm_sq(m) as f64)))
            .collect();
        let mut radius = cutoff;
        let mut table = square_from(&base, radius);
        for _ in 1..order {
            let next_radius = radius + cutoff;
            let side = 2 * next_radius + 1;
            let prev_side = 2 * radius + 1;
            let mut next = vec![0.0; side * side];
            let r = radius as i32;
            for a in -r..=r {
                for b in -r..=r {
                    let w = table[(a + r) as usize * prev_side + (b + r) as usize];
                    if w == 0.0 {
                        continue;
                    }
                    for &((j1, j2), g) in &base {
                        let k1 = (a + j1 + next_radius as i32) as usize;
                        let k2 = (b + j2 + next_radius as i32) as usize;
                        next[k1 * side + k2] += w * g;
                    }
                }
            }
            table = next;
            radius = next_radius;
        }
        let factorial: f64 = (1..=order).map(|k| k as f64).product();
        table.iter_mut().for_each(|x| *x *= factorial);
        Ok(ChaosKernel {
            order,
            cutoff,
            radius,
            table,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `E|⟨:z_N^ℓ:(t), e_n⟩|²`; zero outside the support `|n| <= ℓN`.
    pub fn at(&self, n: Mode) -> f64 {
        let r = self.radius as i32;
        if n.0.abs() > r || n.1.abs() > r {
            return 0.0;
        }
        let side = 2 * self.radius + 1;
        self.table[(n.0 + r) as usize * side + (n.1 + r) as usize]
    }
}

fn square_from(entries: &[(Mode, f64)], radius: usize) -> Vec<f64> {
    let side = 2 * radius + 1;
    let r = radius as i32;
    let mut out = vec![0.0; side * side];
    for &(m, x) in entries {
        if in_ball(m, radius) {
            out[(m.0 + r) as usize * side + (m.1 + r) as usize] = x;
        }
    }
    out
}

/// `E|⟨:z_N^ℓ:(t), e_n⟩|² = ℓ! · 𝓕[γ_N^ℓ](n)`.
pub fn chaos_second_moment(order: usize, cutoff: usize, rho: f64, n: Mode) -> Result<f64> {
    Ok(ChaosKernel::new(order, cutoff, rho)?.at(n))
}
