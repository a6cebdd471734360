//! Skew Normal and Extended Skew Normal approximations to the posterior
//! marginals of fixed-hyperparameter latent Gaussian models.
//!
//! The library has four layers:
//!
//! * [`esn`] — the Extended Skew Normal distribution itself: the C-function
//!   calculus on log 2Φ, log density, moments, cumulant generating function,
//!   modes and tail behaviour.
//! * [`fitters`] — third-order (Skew Normal) and fourth-order (Extended Skew
//!   Normal) fits to Taylor expansion data on a standardized scale, with the
//!   two tabulated curves they need and all fallback rules.
//! * [`lgm`] — small Bernoulli/Poisson/Gaussian GLMs with a Gaussian latent
//!   prior: the Gaussian approximation, the full Laplace marginal, Taylor
//!   coefficient extraction, and the per-strategy marginal pipeline.
//! * [`oracle`] — ground truth: tensor-grid quadrature posteriors, an
//!   adaptive random-walk Metropolis sampler, density distances and summary
//!   statistics.
//!
//! Inner loops (grid scans, replicate batches, chains, quadrature panels)
//! are data-parallel via rayon when the default `parallel` feature is on;
//! disabling it compiles the same code sequentially.

pub mod esn;
pub mod fitters;
pub mod interp;
pub mod lgm;
pub mod math;
pub mod oracle;
pub mod par;

pub use esn::{c_fun, esn_logpdf, esn_moments, EsnParams, Moments};
pub use fitters::{
    fit_esla, fit_sla_classic, fit_sla_interpolant, FitResult, Interpolants, Strategy,
    TaylorCoeffs,
};
pub use interp::Interpolant;
pub use lgm::{Family, GlmModel, GridDensity, MarginalStrategy};
pub use oracle::{summarize, McmcConfig, SummaryStats};
