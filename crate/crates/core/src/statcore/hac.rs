use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::linalg::SymMatrix;
use crate::error::{Error, Result};

/// Bartlett-kernel bandwidth for the long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HacConfig {
    pub lag_q: usize,
}

impl Default for HacConfig {
    fn default() -> Self {
        HacConfig { lag_q: 10 }
    }
}

/// Newey–West variance of the column means of `series` (J × k):
///
/// ```text
/// Var(ĥ) = 1/J [Ω₀ + Σ_{k=1}^{q} (1 − k/(q+1)) (Ω_k + Ω_k')]
/// Ω_k    = 1/J Σ_{j=k+1}^{J} (h⁽ʲ⁾ − ĥ)(h⁽ʲ⁻ᵏ⁾ − ĥ)'
/// ```
///
/// No prewhitening and no automatic bandwidth.
pub fn newey_west(series: &DMatrix<f64>, cfg: HacConfig) -> Result<SymMatrix> {
    let (j, k) = series.shape();
    if k == 0 {
        return Err(Error::DimensionMismatch("series has no columns".into()));
    }
    if j <= cfg.lag_q || j == 0 {
        return Err(Error::SeriesTooShort {
            len: j,
            lag: cfg.lag_q,
        });
    }
    let jf = j as f64;
    let mut centered = series.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }

    let mut acc = centered.transpose() * &centered;
    let q = cfg.lag_q;
    for lag in 1..=q {
        let lead = centered.rows(lag, j - lag);
        let lagged = centered.rows(0, j - lag);
        let omega = lead.transpose() * lagged;
        let w = 1.0 - lag as f64 / (q as f64 + 1.0);
        acc += (&omega + omega.transpose()) * w;
    }
    SymMatrix::new(acc / (jf * jf))
}
