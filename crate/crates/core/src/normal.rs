//! Normal mean with known variance under a `N(μ₀, τ²)` prior: closed forms
//! for the test statistic, `2 log BF₁₀` and the Wald statistic.
//!
//! Everything is written in terms of the prior precision `λ = 1/τ²` so the
//! flat-prior limit `τ² = ∞` is representable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMeanSetup {
    pub n: usize,
    pub ybar: f64,
    pub sigma2: f64,
    pub mu0: f64,
    /// Prior variance; `f64::INFINITY` means a flat prior.
    pub tau2: f64,
}

impl NormalMeanSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidInput("sigma2 must be positive".into()));
        }
        if !(self.tau2 > 0.0) {
            return Err(Error::InvalidInput("tau2 must be positive".into()));
        }
        if !self.ybar.is_finite() || !self.mu0.is_finite() {
            return Err(Error::InvalidInput("ybar and mu0 must be finite".into()));
        }
        Ok(())
    }

    fn precision(&self) -> f64 {
        1.0 / self.tau2
    }

    /// `σ²τ²/(σ² + nτ²) (nȳ/σ² + μ₀/τ²)²`, shared by T and 2 log BF.
    fn quadratic_term(&self) -> f64 {
        let n = self.n as f64;
        let lam = self.precision();
        let shrink = self.sigma2 / (self.sigma2 * lam + n);
        let score = n * self.ybar / self.sigma2 + self.mu0 * lam;
        shrink * score * score
    }
}

pub fn closed_form_t(s: &NormalMeanSetup) -> f64 {
    s.quadratic_term() + 1.0
}

/// `2 log BF₁₀`; tends to −∞ as τ² grows.
pub fn closed_form_2log_bf(s: &NormalMeanSetup) -> f64 {
    let n = s.n as f64;
    // log(σ²/(σ² + nτ²)) = −log(1 + nτ²/σ²)
    let log_ratio = -(n * s.tau2 / s.sigma2).ln_1p();
    s.quadratic_term() + log_ratio
}

pub fn closed_form_wald(s: &NormalMeanSetup) -> f64 {
    s.n as f64 * s.ybar * s.ybar / s.sigma2
}

/// Sample mean that reproduces a given Wald value: `ȳ = √(W σ²/n)`.
pub fn ybar_from_wald(wald: f64, n: usize, sigma2: f64) -> f64 {
    (wald * sigma2 / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindleyRow {
    pub tau2: f64,
    pub t: f64,
    pub two_log_bf: f64,
    pub wald: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindleyCheck {
    pub rows: Vec<LindleyRow>,
    /// `|T − (Wald + 1)|` at the largest τ².
    pub limit_gap: f64,
    /// `|T − (Wald + 1)|` is non-increasing along the grid.
    pub gap_monotone: bool,
    /// 2 log BF at the largest τ² is below its value at the smallest.
    pub bf_diverges: bool,
}

/// Evaluates T and 2 log BF along an increasing τ² grid.
pub fn lindley_limit_check(s: &NormalMeanSetup, tau2_grid: &[f64]) -> Result<LindleyCheck> {
    s.validate()?;
    if tau2_grid.is_empty() {
        return Err(Error::InvalidInput("empty tau2 grid".into()));
    }
    if tau2_grid.windows(2).any(|w| !(w[1] > w[0])) || !(tau2_grid[0] > 0.0) {
        return Err(Error::InvalidInput("tau2 grid must be positive and increasing".into()));
    }
    let rows: Vec<LindleyRow> = tau2_grid
        .iter()
        .map(|&tau2| {
            let point = NormalMeanSetup { tau2, ..*s };
            LindleyRow {
                tau2,
                t: closed_form_t(&point),
                two_log_bf: closed_form_2log_bf(&point),
                wald: closed_form_wald(&point),
            }
        })
        .collect();
    let gaps: Vec<f64> = rows.iter().map(|r| (r.t - (r.wald + 1.0)).abs()).collect();
    let gap_monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let first = &rows[0];
    let last = rows.last().unwrap();
    Ok(LindleyCheck {
        limit_gap: *gaps.last().unwrap(),
        gap_monotone,
        bf_diverges: last.two_log_bf < first.two_log_bf,
        rows,
    })
}

/// `T` minus its four-term large-n expansion
/// `1 + nȳ²/σ² + 2ȳμ₀/τ² − ȳ²/τ² + (μ₀/τ²)² σ²/n`.
pub fn expansion_check(s: &NormalMeanSetup) -> Result<f64> {
    s.validate()?;
    let n = s.n as f64;
    let lam = s.precision();
    let y = s.ybar;
    let expansion = 1.0 + n * y * y / s.sigma2 + 2.0 * y * s.mu0 * lam - y * y * lam
        + (s.mu0 * lam).powi(2) * s.sigma2 / n;
    Ok(closed_form_t(s) - expansion)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn informative(n: usize, wald: f64) -> NormalMeanSetup {
        NormalMeanSetup {
            n,
            ybar: ybar_from_wald(wald, n, 1.0),
            sigma2: 1.0,
            mu0: 0.1,
            tau2: 1e-3,
        }
    }

    fn vague(n: usize, wald: f64) -> NormalMeanSetup {
        NormalMeanSetup {
            mu0: 0.0,
            tau2: 1e50,
            ..informative(n, wald)
        }
    }

    #[test]
    fn t_cells() {
        assert!((closed_form_t(&informative(10, 0.01)) - 10.96).abs() < 0.01);
        assert!((closed_form_t(&informative(1000, 11.32)) - 22.30).abs() < 0.02);
        let zero = NormalMeanSetup {
            n: 25,
            ybar: 0.0,
            sigma2: 2.0,
            mu0: 0.0,
            tau2: 3.0,
        };
        assert_eq!(closed_form_t(&zero), 1.0);
    }

    #[test]
    fn bf_cells() {
        assert!((closed_form_2log_bf(&vague(10, 0.01)) + 117.42).abs() < 0.05);
        assert!((closed_form_2log_bf(&informative(1000, 11.32)) - 20.60).abs() < 0.02);
    }

    #[test]
    fn bf_minus_t_is_the_log_term() {
        for s in [informative(100, 1.23), vague(1000, 11.32)] {
            let lhs = closed_form_2log_bf(&s) - closed_form_t(&s) + 1.0;
            let n = s.n as f64;
            let rhs = (s.sigma2 / (s.sigma2 + n * s.tau2)).ln();
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn wald_is_prior_free() {
        let s = NormalMeanSetup {
            ybar: 0.0,
            ..informative(10, 0.0)
        };
        assert_eq!(closed_form_wald(&s), 0.0);
        let s = informative(10_000, 86.03);
        assert!((closed_form_wald(&s) - 86.03).abs() < 1e-10);
        assert_eq!(closed_form_wald(&s), closed_form_wald(&vague(10_000, 86.03)));
    }

    #[test]
    fn lindley_limit() {
        let s = NormalMeanSetup {
            n: 50,
            ybar: 0.2,
            sigma2: 1.0,
            mu0: 0.0,
            tau2: 1.0,
        };
        let grid: Vec<f64> = (0..=50).map(|k| 10f64.powi(k)).collect();
        let check = lindley_limit_check(&s, &grid).unwrap();
        assert!(check.limit_gap < 1e-6);
        assert!(check.gap_monotone);
        assert!(check.bf_diverges);
        assert!(check.rows.last().unwrap().two_log_bf < check.rows[0].two_log_bf);
        assert!(lindley_limit_check(&s, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn t_is_at_least_one_and_unit_invariant() {
        let s = NormalMeanSetup {
            n: 37,
            ybar: -0.3,
            sigma2: 2.5,
            mu0: 0.7,
            tau2: 0.4,
        };
        assert!(closed_form_t(&s) >= 1.0);
        let c: f64 = 3.7;
        let scaled = NormalMeanSetup {
            ybar: c * s.ybar,
            sigma2: c * c * s.sigma2,
            mu0: c * s.mu0,
            tau2: c * c * s.tau2,
            ..s
        };
        let (a, b) = (closed_form_t(&s), closed_form_t(&scaled));
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn expansion_exact_in_flat_limit() {
        let s = NormalMeanSetup {
            n: 1000,
            ybar: 0.05,
            sigma2: 1.0,
            mu0: 0.0,
            tau2: f64::INFINITY,
        };
        assert!(expansion_check(&s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn expansion_residual_shrinks_fast() {
        // ȳ ∝ n^{-1/2}, as under the null
        let setup = |n: usize| NormalMeanSetup {
            n,
            ybar: 0.1 * (1e4 / n as f64).sqrt(),
            sigma2: 1.0,
            mu0: 0.1,
            tau2: 0.01,
        };
        let ns: Vec<usize> = (0..11).map(|k| 1000 << k).collect();
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| ((n as f64).ln(), expansion_check(&setup(n)).unwrap().abs().ln()))
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 1.5).abs() < 0.4, "slope {slope}");
        for n in [16_000, 64_000, 256_000] {
            let r1 = expansion_check(&setup(n)).unwrap().abs();
            let r2 = expansion_check(&setup(2 * n)).unwrap().abs();
            assert!(r2 / r1 < 0.5);
        }
    }
}
