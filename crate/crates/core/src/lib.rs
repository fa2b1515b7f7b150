//! Pseudospectral simulation and Monte Carlo verification for the truncated
//! Wick-ordered nonlinear Klein-Gordon equation on the 2-torus
//!
//! ```text
//! ∂²_t u + (ρ - Δ) u = λ P_N :(P_N u)^{2m+1}:
//! ```
//!
//! Module map:
//!
//! * [`spectral`]: Fourier and grid representations, projections, norms.
//! * [`gaussian`]: the free-field measure `μ`, `σ_N`, `γ_N`, chaos moments.
//! * [`wick`]: Hermite polynomials and pointwise Wick powers.
//! * [`dynamics`]: exact linear flow, Wick force, Strang splitting.
//! * [`gibbs`]: Wick potential, importance and independence samplers.
//! * [`experiments`]: invariance, chaos convergence, weak universality.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod gibbs;
pub mod spectral;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
pub use gaussian::{MuParams, PhaseState};
pub use spectral::{GridField, Mode, SobolevNormSpec, SpectralField};
pub use wick::WickContext;
