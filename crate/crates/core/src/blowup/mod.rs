//! Analytic apparatus for blow-up: parabolae, the subsolution family and its
//! differential inequality, steering paths and weighted embedding checks.

pub mod control;
pub mod embedding;
pub mod subsolution;

pub use control::{build_control, ControlOptions, ControlPath};
pub use embedding::{check_embedding, embedding_window, EmbeddingReport};
pub use subsolution::{
    check_harmonic_identities, chi, chi_field, delta_bar, delta_sharpness_probe, f_phi_theta, gamma_bar,
    inequality_grid, lambda_of_t, min_f_phi_theta, mu_bar, mu_bar_closed, phi_lambda, psi_ansatz,
    psi_gradient_at_origin, sup_ratio, t_lambda, theta_eps_mu, verify_differential_inequality,
    InequalityReport, SharpnessReport, SubsolutionParams,
};
