use std::f64::consts::PI;

use super::LsvParams;
use crate::error::{Error, Result};

/// `log p(y | h, ϑ) + log p(h | ϑ)` with `h_0 = μ`.
pub fn complete_loglik(returns: &[f64], h: &[f64], params: &LsvParams) -> Result<f64> {
    let n = returns.len();
    if h.len() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{n} returns against a path of length {}",
            h.len()
        )));
    }
    if !(params.rho.abs() < 1.0 && params.sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!("invalid SV parameters {params:?}")));
    }
    let ln2pi = (2.0 * PI).ln();
    let sigma = params.sigma2.sqrt();
    let c = 1.0 - params.rho * params.rho;
    let innov = |t: usize| {
        let prev = if t == 0 { params.mu } else { h[t - 1] };
        h[t] - params.mu - params.phi * (prev - params.mu)
    };

    let mut ll = 0.0;
    for t in 0..n {
        let u = innov(t);
        ll += -0.5 * (ln2pi + params.sigma2.ln()) - u * u / (2.0 * params.sigma2);
        ll += -0.5 * ln2pi - 0.5 * h[t];
        if t + 1 < n {
            let mean = params.rho / sigma * (0.5 * h[t]).exp() * innov(t + 1);
            let e = returns[t] - mean;
            ll += -0.5 * c.ln() - e * e / (2.0 * h[t].exp() * c);
        } else {
            ll += -returns[t] * returns[t] / (2.0 * h[t].exp());
        }
    }
    Ok(ll)
}

/// `(A, B)` with `∂/∂ρ log p(y | h, ϑ) = ρ/(1−ρ²)² A + (1+ρ²)/(1−ρ²)² B + (n−1)ρ/(1−ρ²)`,
/// summing over the observations that have a successor state.
pub fn rho_score_terms(returns: &[f64], h: &[f64], mu: f64, phi: f64, sigma: f64) -> (f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    for t in 0..returns.len().saturating_sub(1) {
        let u = h[t + 1] - mu - phi * (h[t] - mu);
        a -= returns[t] * returns[t] * (-h[t]).exp() + u * u / (sigma * sigma);
        b += (-0.5 * h[t]).exp() * u * returns[t] / sigma;
    }
    (a, b)
}
