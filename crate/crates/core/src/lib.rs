//! Bayesian chi-squared type hypothesis tests computed from posterior draws.
//!
//! The central quantity is the posterior expected quadratic net loss
//!
//! ```text
//! T(y, θ₀) = E[(θ − θ₀)' V_θθ⁻¹ (θ − θ₀) | y] = p + tr(A Ĥ⁻¹),   A = (θ̄ − θ₀)(θ̄ − θ₀)'
//! ```
//!
//! estimated directly from MCMC output, together with its linear-restriction
//! form `T(y, r)`, delta-method numerical standard errors built on a
//! Newey–West long-run variance, and χ²-calibrated decisions. Under the null,
//! `T − p` behaves like a Wald statistic and is asymptotically `χ²(p)`.
//!
//! Model kits:
//! - [`normal`]: closed-form normal mean with known variance.
//! - [`linreg`]: conjugate Normal–Inverse-Gamma regression.
//! - [`lsv`]: stochastic volatility with leverage, fitted by MH-within-Gibbs.
//!
//! [`harness`] runs seeded size/power studies over those kits.

pub mod error;
pub mod harness;
pub mod io;
pub mod linreg;
pub mod lsv;
pub mod normal;
pub mod statcore;
pub mod teststat;

pub use error::{Error, Result};
pub use statcore::{HacConfig, SeedSpec, SymMatrix};
pub use teststat::{DrawMatrix, RestrictionSpec, TestReport};
