//! Wiener-chaos study of the Wick powers `:z_N^ℓ:` of the random linear
//! solution `z_N(t) = S(t) P_N(φ₀, φ₁)`.
//!
//! For every order and cutoff the Fourier second moments are compared with
//! the exact convolution values from [`ChaosKernel`], cross moments between
//! distinct modes are estimated (they vanish in expectation), and the Cauchy
//! distances `‖:z_N^ℓ: - :z_{2N}^ℓ:‖_{H^{-ε}}` are averaged over samples.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::linear_propagate;
use crate::error::{Error, Result};
use crate::gaussian::{sample_mu_indexed, ChaosKernel, MuParams};
use crate::spectral::{from_grid, grid_size_for_degree, project, sobolev_norm, Mode, SobolevNormSpec, SpectralField};
use crate::stats::{mean_stderr, Estimate};
use crate::wick::{wick_power, WickContext};

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    /// Wick orders `ℓ`, each in `1..=MAX_ORDER`.
    pub orders: Vec<usize>,
    /// Strictly increasing cutoffs.
    pub cutoffs: Vec<usize>,
    pub rho: f64,
    /// Time at which the linear solution is observed.
    pub time: f64,
    /// Regularity loss `ε` in the Cauchy distance `H^{-ε}`.
    pub eps_reg: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Modes whose coefficients are tracked.
    pub modes: Vec<Mode>,
    /// Whether to compute Cauchy distances (requires cutoff `2N`).
    pub cauchy: bool,
}

impl ChaosConfig {
    /// Orders `1..=max_order`, time `0`, `ε = 1/4`, modes `(0,0), (1,0), (2,1)`.
    pub fn new(max_order: usize, cutoffs: Vec<usize>, rho: f64, n_samples: usize, seed: u64) -> Self {
        ChaosConfig {
            orders: (1..=max_order).collect(),
            cutoffs,
            rho,
            time: 0.0,
            eps_reg: 0.25,
            n_samples,
            seed,
            modes: vec![(0, 0), (1, 0), (2, 1)],
            cauchy: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.iter().any(|l| !(1..=MAX_ORDER).contains(l)) {
            return Err(Error::invalid("orders", format!("need orders in 1..={MAX_ORDER}, got {:?}", self.orders)));
        }
        if self.cutoffs.is_empty() || self.cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("cutoffs", "need a non-empty strictly increasing list"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "need at least one sample"));
        }
        if !(self.eps_reg >= 0.0) {
            return Err(Error::invalid("eps_reg", "must be non-negative"));
        }
        crate::gaussian::check_rho(self.rho)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: usize,
    pub cutoff: usize,
    pub mode: Mode,
    pub mc_estimate: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub order: usize,
    pub cutoff: usize,
    pub mode_a: Mode,
    pub mode_b: Mode,
    /// Real and imaginary parts of `E[⟨:z^ℓ:, e_a⟩ conj ⟨:z^ℓ:, e_b⟩]`.
    pub re: Estimate,
    pub im: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub order: usize,
    pub cutoff: usize,
    pub distance: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub config: ChaosConfig,
    pub moments: Vec<MomentRow>,
    pub cross: Vec<CrossRow>,
    pub cauchy: Vec<CauchyRow>,
}

/// Per-sample output, indexed `[order index][cutoff index]`.
struct SampleOutput {
    coeffs: Vec<Vec<Vec<Complex64>>>,
    distances: Vec<Vec<f64>>,
}

/// Coefficients of `:z_K^ℓ:` on its full support `|n| <= ℓK`.
pub fn wick_power_coefficients(z: &SpectralField, order: usize, rho: f64) -> Result<SpectralField> {
    let k = z.n_max();
    // exact for every retained mode of the degree-ℓ product, and valid as a context grid
    let grid = grid_size_for_degree(k, (2 * order - 1).max(3));
    let ctx = WickContext::with_grid(k, rho, 1, grid)?;
    from_grid(&wick_power(z, order, &ctx)?, order * k)
}

pub fn chaos_convergence_study(cfg: &ChaosConfig) -> Result<ChaosReport> {
    cfg.validate()?;
    let top = *cfg.cutoffs.last().expect("validated non-empty");
    let sample_cutoff = if cfg.cauchy { 2 * top } else { top };
    let params = MuParams::new(sample_cutoff, cfg.rho, cfg.seed)?;
    let orders = &cfg.orders;
    let norm = SobolevNormSpec::h(-cfg.eps_reg);

    let outputs = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<SampleOutput> {
            let s = sample_mu_indexed(&params, i);
            let z = linear_propagate(&s, cfg.time).u;
            let mut coeffs = Vec::with_capacity(orders.len());
            let mut distances = Vec::with_capacity(orders.len());
            for &l in orders {
                let mut per_cut = Vec::with_capacity(cfg.cutoffs.len());
                let mut per_dist = Vec::with_capacity(cfg.cutoffs.len());
                for &n in &cfg.cutoffs {
                    let w = wick_power_coefficients(&project(&z, n), l, cfg.rho)?;
                    per_cut.push(cfg.modes.iter().map(|&m| w.get(m)).collect());
                    if cfg.cauchy {
                        let w2 = wick_power_coefficients(&project(&z, 2 * n), l, cfg.rho)?;
                        per_dist.push(sobolev_norm(&(&w2 - &w), &norm));
                    }
                }
                coeffs.push(per_cut);
                distances.push(per_dist);
            }
            Ok(SampleOutput { coeffs, distances })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut moments = Vec::new();
    let mut cross = Vec::new();
    let mut cauchy = Vec::new();
    for (li, &l) in orders.iter().enumerate() {
        for (ci, &n) in cfg.cutoffs.iter().enumerate() {
            let kernel = ChaosKernel::new(l, n, cfg.rho)?;
            for (mi, &mode) in cfg.modes.iter().enumerate() {
                let v: Vec<f64> = outputs.iter().map(|o| o.coeffs[li][ci][mi].norm_sqr()).collect();
                let e = mean_stderr(&v);
                let analytic = kernel.at(mode);
                moments.push(MomentRow {
                    order: l,
                    cutoff: n,
                    mode,
                    mc_estimate: e.mean,
                    stderr: e.stderr,
                    analytic,
                    z_score: e.z(analytic),
                });
            }
            for a in 0..cfg.modes.len() {
                for b in (a + 1)..cfg.modes.len() {
                    let prods: Vec<Complex64> = outputs
                        .iter()
                        .map(|o| o.coeffs[li][ci][a] * o.coeffs[li][ci][b].conj())
                        .collect();
                    let re: Vec<f64> = prods.iter().map(|p| p.re).collect();
                    let im: Vec<f64> = prods.iter().map(|p| p.im).collect();
                    cross.push(CrossRow {
                        order: l,
                        cutoff: n,
                        mode_a: cfg.modes[a],
                        mode_b: cfg.modes[b],
                        re: mean_stderr(&re),
                        im: mean_stderr(&im),
                    });
                }
            }
            if cfg.cauchy {
                let d: Vec<f64> = outputs.iter().map(|o| o.distances[li][ci]).collect();
                let e = mean_stderr(&d);
                cauchy.push(CauchyRow {
                    order: l,
                    cutoff: n,
                    distance: e.mean,
                    stderr: e.stderr,
                });
            }
        }
    }
    Ok(ChaosReport {
        config: cfg.clone(),
        moments,
        cross,
        cauchy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_is_the_field_itself() {
        let s = sample_mu_indexed(&MuParams::new(3, 1.0, 4).unwrap(), 0);
        let w = wick_power_coefficients(&s.u, 1, 1.0).unwrap();
        assert!((&w - &s.u).max_abs() < 1e-14);
    }

    #[test]
    fn second_order_zero_mode_is_wick_mass() {
        let s = sample_mu_indexed(&MuParams::new(3, 1.0, 4).unwrap(), 2);
        let w = wick_power_coefficients(&s.u, 2, 1.0).unwrap();
        let expect = s.u.l2_norm_sq() - crate::gaussian::sigma_n(3, 1.0);
        assert!((w.get((0, 0)).re - expect).abs() < 1e-12);
        assert_eq!(w.n_max(), 6);
    }

    #[test]
    fn config_validation() {
        let mut c = ChaosConfig::new(2, vec![1, 2], 1.0, 10, 1);
        assert!(chaos_convergence_study(&c).is_ok());
        c.cutoffs = vec![2, 2];
        assert!(chaos_convergence_study(&c).is_err());
        c.cutoffs = vec![1];
        c.orders = vec![2, 5];
        assert!(chaos_convergence_study(&c).is_err());
    }

    #[test]
    fn report_shape() {
        let c = ChaosConfig::new(2, vec![1, 2], 1.0, 20, 1);
        let r = chaos_convergence_study(&c).unwrap();
        assert_eq!(r.moments.len(), 2 * 2 * 3);
        assert_eq!(r.cross.len(), 2 * 2 * 3);
        assert_eq!(r.cauchy.len(), 4);
        let row = r.moments.iter().find(|m| m.order == 2 && m.cutoff == 1 && m.mode == (0, 0)).unwrap();
        assert!((row.analytic - 4.0).abs() < 1e-14);
    }
}
