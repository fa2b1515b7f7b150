//! Numerical experiments built from the core modules.

pub mod chaos;
pub mod invariance;
pub mod universality;

pub use chaos::{chaos_convergence_study, ChaosConfig, ChaosReport};
pub use invariance::{invariance_test, invariance_test_with, InvarianceOptions, InvarianceReport, InvarianceTarget};
pub use universality::{
    evolve_scaled, rho_eps, universality_experiment, Nonlinearity, ScaledForcing, UniversalityReport,
};
