use rand_distr::{Distribution, StandardNormal};

use super::LsvParams;
use crate::error::{Error, Result};
use crate::statcore::SeedSpec;

/// Returns `r_1..r_T`.
pub fn simulate_lsv(params: &LsvParams, t_len: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    simulate_lsv_with_path(params, t_len, seed).map(|(r, _)| r)
}

/// Returns `(r_1..r_T, h_1..h_T)`.
pub fn simulate_lsv_with_path(
    params: &LsvParams,
    t_len: usize,
    seed: SeedSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    if t_len < 10 {
        return Err(Error::InvalidInput(format!("series length {t_len} < 10")));
    }
    let mut rng = seed.rng();
    let sigma = params.sigma2.sqrt();
    let tail = (1.0 - params.rho * params.rho).sqrt();
    let mut r = Vec::with_capacity(t_len);
    let mut h = Vec::with_capacity(t_len);
    let v1: f64 = StandardNormal.sample(&mut rng);
    let mut ht = params.mu + sigma * v1;
    for _ in 0..t_len {
        let eps: f64 = StandardNormal.sample(&mut rng);
        let w: f64 = StandardNormal.sample(&mut rng);
        let v_next = params.rho * eps + tail * w;
        h.push(ht);
        r.push((0.5 * ht).exp() * eps);
        ht = params.mu + params.phi * (ht - params.mu) + sigma * v_next;
    }
    Ok((r, h))
}
