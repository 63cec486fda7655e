//! Stochastic volatility with leverage.
//!
//! ```text
//! r_t     = exp(h_t / 2) ε_t
//! h_{t+1} = μ + φ(h_t − μ) + σ v_{t+1},    corr(ε_t, v_{t+1}) = ρ,   h_0 = μ
//! ```
//!
//! Writing `ε_t = ρ v_{t+1} + √(1−ρ²) ω_t` gives the conditional density
//! `y_t | h_t, h_{t+1} ~ N(ρ e^{h_t/2} v_{t+1}, e^{h_t}(1 − ρ²))`, which is the
//! kernel of every MH ratio in [`fit_lsv`]. The last observation has no
//! successor state and enters through its marginal `N(0, e^{h_T})`.

mod loglik;
mod sampler;
mod sim;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statcore::SeedSpec;
use crate::teststat::DrawMatrix;

pub use loglik::{complete_loglik, rho_score_terms};
pub use sampler::fit_lsv;
pub use sim::{simulate_lsv, simulate_lsv_with_path};
pub use stats::{lly_report, lly_statistic, lsv_power_cell, lsv_rho_test, rho_statistic_nse, PowerCell};

/// Column names of [`LsvChain::params`].
pub const PARAM_NAMES: [&str; 4] = ["mu", "phi", "sigma2", "rho"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsvParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl LsvParams {
    /// μ = −10, φ = 0.97, σ² = 0.025 with the given leverage.
    pub fn simulation_design(rho: f64) -> Self {
        LsvParams {
            mu: -10.0,
            phi: 0.97,
            sigma2: 0.025,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu.is_finite()
            && self.phi.abs() < 1.0
            && self.rho.abs() < 1.0
            && self.sigma2 > 0.0
            && self.sigma2.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid SV parameters {self:?}")))
        }
    }
}

/// Support of the Beta prior on the persistence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSupport {
    /// Beta on `(φ + 1)/2`, so Beta(1, 1) is uniform on (−1, 1).
    Symmetric,
    /// Beta on `φ` itself, restricting φ to (0, 1).
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsvPriors {
    pub mu_mean: f64,
    pub mu_var: f64,
    pub phi_beta_a: f64,
    pub phi_beta_b: f64,
    pub phi_support: PhiSupport,
    /// Shape of the Gamma prior on `σ⁻²`.
    pub sig_gamma_a: f64,
    /// Rate of the Gamma prior on `σ⁻²`.
    pub sig_gamma_b: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl Default for LsvPriors {
    fn default() -> Self {
        LsvPriors {
            mu_mean: 0.0,
            mu_var: 100.0,
            phi_beta_a: 1.0,
            phi_beta_b: 1.0,
            phi_support: PhiSupport::Symmetric,
            sig_gamma_a: 0.001,
            sig_gamma_b: 0.001,
            rho_lo: -1.0,
            rho_hi: 1.0,
        }
    }
}

impl LsvPriors {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if !(self.mu_var > 0.0) || !self.mu_mean.is_finite() {
            return bad("mu prior needs finite mean and positive variance");
        }
        if !(self.phi_beta_a > 0.0 && self.phi_beta_b > 0.0) {
            return bad("phi Beta parameters must be positive");
        }
        if !(self.sig_gamma_a > 0.0 && self.sig_gamma_b > 0.0) {
            return bad("sigma Gamma parameters must be positive");
        }
        if !(-1.0 <= self.rho_lo && self.rho_lo < self.rho_hi && self.rho_hi <= 1.0) {
            return bad("rho prior bounds must satisfy -1 <= lo < hi <= 1");
        }
        Ok(())
    }
}

/// Random-walk proposal standard deviations. Parameter blocks move on
/// μ, atanh φ, log σ² and atanh ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RwScales {
    pub h: f64,
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl Default for RwScales {
    fn default() -> Self {
        RwScales {
            h: 0.2,
            mu: 0.1,
            phi: 0.1,
            sigma2: 0.2,
            rho: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(default)]
    pub rw_scales: RwScales,
    pub seed: SeedSpec,
    /// Keep the latent path of every retained draw.
    #[serde(default)]
    pub store_paths: bool,
}

impl McmcConfig {
    /// 6000 iterations, 2000 burn-in, thin 2.
    pub fn desk_scale(seed: SeedSpec) -> Self {
        McmcConfig {
            n_iter: 6000,
            burn_in: 2000,
            thin: 2,
            rw_scales: RwScales::default(),
            seed,
            store_paths: false,
        }
    }

    pub fn retained(&self) -> usize {
        (self.n_iter.saturating_sub(self.burn_in)) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.burn_in >= self.n_iter {
            return bad(format!("burn_in {} must be below n_iter {}", self.burn_in, self.n_iter));
        }
        if self.retained() < 2 {
            return bad("fewer than 2 retained draws".into());
        }
        let s = self.rw_scales;
        if [s.h, s.mu, s.phi, s.sigma2, s.rho].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("proposal scales must be positive".into());
        }
        Ok(())
    }
}

/// Post-burn-in acceptance fractions per block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptRates {
    pub h: f64,
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsvChain {
    /// Columns `mu, phi, sigma2, rho`.
    pub params: DrawMatrix,
    /// Row `j` is the latent path `h_1..h_T` of retained draw `j`.
    pub h_draws: Option<nalgebra::DMatrix<f64>>,
    pub accept_rates: AcceptRates,
}

impl LsvChain {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .params
            .index_of(name)
            .ok_or_else(|| Error::NameMismatch(format!("chain has no column {name}")))?;
        Ok(self.params.column(idx))
    }
}
