use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_lsv, simulate_lsv, LsvChain, LsvParams, LsvPriors, McmcConfig};
use crate::error::{Error, Result};
use crate::harness::tally_replications;
use crate::statcore::{newey_west, HacConfig, SeedSpec};
use crate::teststat::{chi2_report, make_report, TestReport};

const MIN_POWER_REPS: usize = 20;

fn nse_from(grad: [f64; 2], series: &DMatrix<f64>, cfg: HacConfig) -> Result<f64> {
    let v = newey_west(series, cfg)?;
    let g = RowDVector::from_row_slice(&grad);
    Ok((&g * v.as_matrix() * g.transpose())[(0, 0)].max(0.0).sqrt())
}

/// `d̂₁/d̂₂ = mean(ρ²)/var(ρ)` and its delta-method NSE on the joint
/// long-run covariance of `(ρ_j², (ρ_j − ρ̄)²)`.
pub fn rho_statistic_nse(chain: &LsvChain, cfg: HacConfig) -> Result<(f64, f64)> {
    let rho = chain.column("rho")?;
    let j = rho.len();
    if j <= cfg.lag_q {
        return Err(Error::SeriesTooShort { len: j, lag: cfg.lag_q });
    }
    let mean = rho.iter().sum::<f64>() / j as f64;
    let series = DMatrix::from_fn(j, 2, |r, c| match c {
        0 => rho[r] * rho[r],
        _ => (rho[r] - mean).powi(2),
    });
    let d1 = series.column(0).mean();
    let d2 = series.column(1).mean();
    if !(d2 > 0.0) {
        return Err(Error::NotPositiveDefinite("rho draws are constant".into()));
    }
    let nse = nse_from([1.0 / d2, -d1 / (d2 * d2)], &series, cfg)?;
    Ok((d1 / d2, nse))
}

/// Test of `ρ = 0` from a leverage chain, calibrated as `1 + χ²(1)`.
pub fn lsv_rho_test(chain: &LsvChain, cfg: HacConfig, level: f64) -> Result<TestReport> {
    let (stat, nse) = rho_statistic_nse(chain, cfg)?;
    Ok(make_report(stat, 1, Some(nse), level))
}

/// Score-based comparator `d̂₃² d̂₂`: `d̂₃` averages
/// `B⁽ʲ⁾ = Σ_t σ̄₀⁻¹ e^{−h_t/2}(h_{t+1} − μ̄₀ − φ̄₀(h_t − μ̄₀)) y_t` over the
/// null chain's paths at its posterior mean, `d̂₂` is the leverage chain's
/// posterior variance of ρ. Returns `(statistic, nse)`.
pub fn lly_statistic(
    chain_h1: &LsvChain,
    chain_h0: &LsvChain,
    returns: &[f64],
    cfg: HacConfig,
) -> Result<(f64, f64)> {
    let paths = chain_h0.h_draws.as_ref().ok_or(Error::MissingLatentPaths)?;
    if paths.ncols() != returns.len() {
        return Err(Error::DimensionMismatch(format!(
            "paths have length {}, returns {}",
            paths.ncols(),
            returns.len()
        )));
    }
    let rho = chain_h1.column("rho")?;
    let j = paths.nrows();
    if rho.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "null chain has {j} draws, leverage chain {}",
            rho.len()
        )));
    }
    if j <= cfg.lag_q {
        return Err(Error::SeriesTooShort { len: j, lag: cfg.lag_q });
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mu0 = mean(&chain_h0.column("mu")?);
    let phi0 = mean(&chain_h0.column("phi")?);
    let prec0 = mean(&chain_h0.column("sigma2")?.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
    let sigma0 = 1.0 / prec0.sqrt();
    let rho_bar = mean(&rho);

    let mut series = DMatrix::zeros(j, 2);
    let mut path = vec![0.0; returns.len()];
    for r in 0..j {
        for (t, p) in path.iter_mut().enumerate() {
            *p = paths[(r, t)];
        }
        series[(r, 0)] = super::rho_score_terms(returns, &path, mu0, phi0, sigma0).1;
        series[(r, 1)] = (rho[r] - rho_bar).powi(2);
    }
    let d3 = series.column(0).mean();
    let d2 = series.column(1).mean();
    let nse = nse_from([2.0 * d3 * d2, d3 * d3], &series, cfg)?;
    Ok((d3 * d3 * d2, nse))
}

/// Score comparator report, calibrated as `χ²(1)`.
pub fn lly_report(
    chain_h1: &LsvChain,
    chain_h0: &LsvChain,
    returns: &[f64],
    cfg: HacConfig,
    level: f64,
) -> Result<TestReport> {
    let (stat, nse) = lly_statistic(chain_h1, chain_h0, returns, cfg)?;
    Ok(chi2_report(stat, 1, Some(nse), level))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub rejections: usize,
    pub completed: usize,
    pub rate: f64,
}

/// Simulate → fit with leverage → test `ρ = 0`, `reps` times. Replication
/// `i` uses stream `cfg.seed.stream_id + i` for the data and the same stream
/// with the top bit set for the sampler. Runs on the current rayon pool.
pub fn lsv_power_cell(
    true_params: &LsvParams,
    t_len: usize,
    reps: usize,
    level: f64,
    priors: &LsvPriors,
    cfg: &McmcConfig,
    hac: HacConfig,
) -> Result<PowerCell> {
    true_params.validate()?;
    cfg.validate()?;
    if reps < MIN_POWER_REPS {
        return Err(Error::ConfigInvalid(format!(
            "power cells need at least {MIN_POWER_REPS} replications, got {reps}"
        )));
    }
    let outcomes: Vec<Result<bool>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let stream = cfg.seed.stream_id + i as u64;
            let data_seed = SeedSpec::new(cfg.seed.base_seed, stream);
            let fit_cfg = McmcConfig {
                seed: SeedSpec::new(cfg.seed.base_seed, stream | (1 << 63)),
                store_paths: false,
                ..*cfg
            };
            let y = simulate_lsv(true_params, t_len, data_seed)?;
            let chain = fit_lsv(&y, priors, &fit_cfg, true)?;
            Ok(lsv_rho_test(&chain, hac, level)?.reject)
        })
        .collect();
    let (rejections, completed) = tally_replications(outcomes)?;
    Ok(PowerCell {
        rejections,
        completed,
        rate: rejections as f64 / completed as f64,
    })
}
