//! Hermite polynomials with variance parameter and pointwise Wick powers.
//!
//! `H_k(x; σ)` is generated by `exp(tx - σt²/2) = Σ tᵏ/k! H_k(x; σ)`, so
//! `:(P_N u)^k:(x) = H_k(P_N u(x); σ_N)` is evaluated node by node on a
//! collocation grid fine enough that the degree-`k` product is alias-free.

use crate::error::{Error, Result};
use crate::gaussian::{check_rho, sigma_n};
use crate::spectral::{grid_size_for_degree, to_grid, GridField, SpectralField};

/// Everything needed to evaluate Wick powers consistently at one cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WickContext {
    n: usize,
    rho: f64,
    m: usize,
    sigma: f64,
    grid: usize,
}

impl WickContext {
    /// Context with the default grid, alias-free up to degree `2m + 2`
    /// (the potential) and hence also for the force of degree `2m + 1`.
    pub fn new(n: usize, rho: f64, m: usize) -> Result<Self> {
        Self::with_grid(n, rho, m, grid_size_for_degree(n, 2 * m + 2))
    }

    pub fn with_grid(n: usize, rho: f64, m: usize, grid: usize) -> Result<Self> {
        check_rho(rho)?;
        if m < 1 {
            return Err(Error::invalid("m", "nonlinearity index must be at least 1"));
        }
        let required = (2 * m + 2) * n;
        if grid <= required {
            return Err(Error::Aliasing {
                grid,
                cutoff: n,
                degree: 2 * m + 1,
                required,
            });
        }
        Ok(WickContext {
            n,
            rho,
            m,
            sigma: sigma_n(n, rho),
            grid,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Checks that the grid represents a degree-`k` product exactly.
    pub fn check_degree(&self, k: usize) -> Result<()> {
        let required = (k + 1) * self.n;
        if k > 0 && self.grid <= required {
            return Err(Error::Aliasing {
                grid: self.grid,
                cutoff: self.n,
                degree: k,
                required,
            });
        }
        Ok(())
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if u.n_max() > self.n {
            return Err(Error::CutoffMismatch {
                expected: self.n,
                found: u.n_max(),
            });
        }
        Ok(())
    }

    /// `P_N u` sampled on the context grid.
    pub fn grid_of(&self, u: &SpectralField) -> Result<GridField> {
        self.check_field(u)?;
        to_grid(u, self.grid)
    }
}

/// `H_k(x; σ)` by the three-term recurrence
/// `H_{k+1} = x H_k - kσ H_{k-1}`, `H_0 = 1`, `H_1 = x`.
pub fn hermite(k: usize, x: f64, sigma: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 1..k {
                let next = x * cur - j as f64 * sigma * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Monomial coefficients of `H_k(·; σ)`, lowest degree first:
/// `H_k(x; σ) = Σ_j k! / (j! (k-2j)!) (-σ/2)^j x^{k-2j}`.
pub fn hermite_coefficients(k: usize, sigma: f64) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    for j in 0..=k / 2 {
        c[k - 2 * j] = fact(k) / (fact(j) * fact(k - 2 * j)) * (-sigma / 2.0).powi(j as i32);
    }
    c
}

/// Horner evaluation of a polynomial with coefficients lowest degree first.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `:(P_N u)^k:` on the context grid.
pub fn wick_power(u: &SpectralField, k: usize, ctx: &WickContext) -> Result<GridField> {
    ctx.check_field(u)?;
    ctx.check_degree(k)?;
    if k == 0 {
        return Ok(GridField::zeros(ctx.grid).map(|_| 1.0));
    }
    let g = to_grid(u, ctx.grid)?;
    Ok(wick_power_of_grid(&g, k, ctx.sigma))
}

/// Pointwise `H_k(g(x); σ)` for an already sampled field.
///
/// Runs the same recurrence as [`hermite`] for the whole grid at once.
pub fn wick_power_of_grid(g: &GridField, k: usize, sigma: f64) -> GridField {
    let mut out = g.clone();
    hermite_in_place(out.values_mut(), k, sigma);
    out
}

pub(crate) fn hermite_in_place(values: &mut [f64], k: usize, sigma: f64) {
    const CHUNK: usize = 64;
    match k {
        0 => values.fill(1.0),
        1 => {}
        _ => {
            for block in values.chunks_mut(CHUNK) {
                let len = block.len();
                let mut x = [0.0; CHUNK];
                x[..len].copy_from_slice(block);
                let mut prev = [1.0; CHUNK];
                let mut cur = x;
                for j in 1..k {
                    let c = j as f64 * sigma;
                    for i in 0..CHUNK {
                        let next = x[i] * cur[i] - c * prev[i];
                        prev[i] = cur[i];
                        cur[i] = next;
                    }
                }
                block.copy_from_slice(&cur[..len]);
            }
        }
    }
}

/// `Σ_ℓ C(k, ℓ) :z^ℓ: w^{k-ℓ}`, the expansion of `:(z + w)^k:` in which only
/// `z` is Wick ordered.
pub fn wick_binomial(
    z: &SpectralField,
    w: &SpectralField,
    k: usize,
    ctx: &WickContext,
) -> Result<GridField> {
    ctx.check_field(z)?;
    ctx.check_field(w)?;
    ctx.check_degree(k)?;
    let zg = if k == 0 { GridField::zeros(ctx.grid) } else { to_grid(z, ctx.grid)? };
    let wg = if k == 0 { GridField::zeros(ctx.grid) } else { to_grid(w, ctx.grid)? };
    let binom: Vec<f64> = (0..=k).map(|l| binomial(k, l)).collect();
    zg.zip_with(&wg, |zx, wx| {
        let mut acc = 0.0;
        for (l, b) in binom.iter().enumerate() {
            acc += b * hermite(l, zx, ctx.sigma) * wx.powi((k - l) as i32);
        }
        acc
    })
}

pub(crate) fn binomial(k: usize, l: usize) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Whether `H_k(x; σ) = σ^{k/2} H_k(x / √σ; 1)` holds to `1e-10 (1 + |H_k(x; σ)|)`.
pub fn scaling_identity_check(k: usize, x: f64, sigma: f64) -> bool {
    let lhs = hermite(k, x, sigma);
    let rhs = sigma.powf(k as f64 / 2.0) * hermite(k, x / sigma.sqrt(), 1.0);
    (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs())
}

/// `E[g^j]` for a standard real Gaussian `g`.
pub fn gaussian_moment(j: usize) -> f64 {
    if j % 2 == 1 {
        0.0
    } else {
        (1..j).step_by(2).map(|i| i as f64).product()
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact `E[p(g)]` for a polynomial `p` (lowest degree first).
pub fn gaussian_expectation(coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * gaussian_moment(j))
        .sum()
}

/// `‖H_k(g)‖_{L^p(Ω)}` for even `p`, by expanding `H_k^p` and applying
/// the Gaussian moments `(2j-1)!!`.
pub fn hermite_lp_norm(k: usize, p: usize) -> Result<f64> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::invalid("p", format!("need an even positive exponent, got {p}")));
    }
    let h = hermite_coefficients(k, 1.0);
    let mut acc = vec![1.0];
    for _ in 0..p {
        acc = poly_mul(&acc, &h);
    }
    Ok(gaussian_expectation(&acc).powf(1.0 / p as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::sigma_n;
    use num_complex::Complex64;

    #[test]
    fn closed_forms() {
        assert_eq!(hermite(0, 3.3, 0.7), 1.0);
        assert_eq!(hermite(3, 1.0, 1.0), -2.0);
        assert_eq!(hermite(4, 2.0, 3.0), -29.0);
        assert_eq!(hermite(2, 1.5, 0.5), 1.5 * 1.5 - 0.5);
        assert_eq!(hermite_coefficients(4, 3.0), vec![27.0, 0.0, -18.0, 0.0, 1.0]);
    }

    #[test]
    fn recurrence_matches_explicit_sum() {
        for k in 0..=12 {
            for &(x, s) in &[(0.3, 0.5), (-2.2, 1.7), (4.9, 4.0)] {
                let a = hermite(k, x, s);
                let b = poly_eval(&hermite_coefficients(k, s), x);
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "k={k} x={x} s={s}");
            }
        }
    }

    #[test]
    fn scaling_identity_examples() {
        assert!(scaling_identity_check(2, 2.0, 4.0));
        assert!(scaling_identity_check(3, 1.0, 1.0));
        assert!(scaling_identity_check(5, 1.7, 2.3));
    }

    #[test]
    fn derivative_identity_is_second_order() {
        for k in 1..=8 {
            let (x, s) = (0.9, 1.3);
            let exact = k as f64 * hermite(k - 1, x, s);
            let err = |h: f64| {
                ((hermite(k, x + h, s) - hermite(k, x - h, s)) / (2.0 * h) - exact).abs()
            };
            if k <= 2 {
                assert!(err(1e-2) < 1e-10);
                continue;
            }
            let ratio = err(1e-2) / err(5e-3);
            assert!((ratio - 4.0).abs() < 0.1, "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn wick_power_constants() {
        let ctx = WickContext::new(4, 1.0, 1).unwrap();
        let s = ctx.sigma();
        let zero = SpectralField::zeros(4);
        let g = wick_power(&zero, 4, &ctx).unwrap();
        assert!(g.values().iter().all(|&v| (v - 3.0 * s * s).abs() < 1e-12));
        for k in [1, 3, 5] {
            assert!(wick_power(&zero, k, &ctx).unwrap().values().iter().all(|&v| v == 0.0));
        }
        let c = SpectralField::constant(4, 1.7);
        let g = wick_power(&c, 2, &ctx).unwrap();
        assert!(g.values().iter().all(|&v| (v - (1.7 * 1.7 - s)).abs() < 1e-12));
        assert_eq!(ctx.sigma(), sigma_n(4, 1.0));
    }

    #[test]
    fn grid_guards() {
        assert!(WickContext::with_grid(8, 1.0, 1, 32).is_err());
        let ctx = WickContext::with_grid(8, 1.0, 1, 33).unwrap();
        let u = SpectralField::zeros(8);
        assert!(wick_power(&u, 3, &ctx).is_ok());
        assert!(matches!(wick_power(&u, 4, &ctx), Err(Error::Aliasing { .. })));
        assert!(matches!(
            wick_power(&SpectralField::zeros(9), 1, &ctx),
            Err(Error::CutoffMismatch { .. })
        ));
        assert!(WickContext::new(4, 0.0, 1).is_err());
        assert!(WickContext::new(4, 1.0, 0).is_err());
    }

    #[test]
    fn binomial_edge_cases() {
        let ctx = WickContext::new(3, 1.0, 2).unwrap();
        let w = SpectralField::from_modes(3, [((1, 2), Complex64::new(0.4, -0.3))]).unwrap();
        let z = SpectralField::from_modes(3, [((2, 0), Complex64::new(-0.2, 0.6))]).unwrap();
        let zero = SpectralField::zeros(3);
        for k in 0..=5 {
            let a = wick_binomial(&z, &zero, k, &ctx).unwrap();
            let b = wick_power(&z, k, &ctx).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < 1e-12));
            // with z = 0 the Hermite constants of z complete H_k(w; σ)
            let a = wick_binomial(&zero, &w, k, &ctx).unwrap();
            let b = wick_power(&w, k, &ctx).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < 1e-10 * (1.0 + y.abs())));
        }
        let a = wick_binomial(&zero, &w, 1, &ctx).unwrap();
        let wg = to_grid(&w, ctx.grid()).unwrap();
        assert_eq!(a, wg);
    }

    #[test]
    fn hypercontractive_moment_growth() {
        for k in 1..=6 {
            let l2 = hermite_lp_norm(k, 2).unwrap();
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((l2 * l2 - fact).abs() < 1e-9 * fact);
            for p in [2usize, 4, 6, 8] {
                let lp = hermite_lp_norm(k, p).unwrap();
                let bound = ((p - 1) as f64).powf(k as f64 / 2.0) * l2;
                assert!(lp <= bound * (1.0 + 1e-12), "k={k} p={p}: {lp} > {bound}");
            }
        }
        assert!(hermite_lp_norm(2, 3).is_err());
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(0), 1.0);
        assert_eq!(gaussian_moment(4), 3.0);
        assert_eq!(gaussian_moment(8), 105.0);
        assert_eq!(gaussian_moment(7), 0.0);
        // E[H_2 H_2] = 2
        let h2 = hermite_coefficients(2, 1.0);
        assert_eq!(gaussian_expectation(&poly_mul(&h2, &h2)), 2.0);
    }
}
