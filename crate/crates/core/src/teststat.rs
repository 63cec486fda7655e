//! Point-null and linear-restriction statistics computed from posterior
//! draws, with delta-method numerical standard errors and χ² calibration.
//!
//! With `Ĥ` the 1/J covariance of the draws and `θ̄` their mean:
//!
//! ```text
//! T̂(y, θ₀) = p + tr(A Ĥ⁻¹),             A = (θ̄ − θ₀)(θ̄ − θ₀)'
//! T̂(y, r)  = m + tr(A (R Ĥ R')⁻¹),       A = (Rθ̄ − r)(Rθ̄ − r)'
//! ```
//!
//! Under the null `T̂ − df` is asymptotically `χ²(df)`, so the decision
//! threshold is `df + χ²_{1−level}(df)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::statcore::{
    chi2_quantile, chi2_sf, duplication_map, kron, newey_west, row_rank, sym_inverse, vec_of,
    HacConfig, SymMatrix,
};

/// Tolerance for the full-row-rank check on `R`.
pub const RANK_TOL: f64 = 1e-10;

/// J × d posterior draws, one row per retained draw, with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    names: Vec<String>,
    draws: DMatrix<f64>,
}

impl DrawMatrix {
    pub fn new(names: Vec<String>, draws: DMatrix<f64>) -> Result<Self> {
        let (j, d) = draws.shape();
        if d == 0 || names.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                d
            )));
        }
        if j < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 draws, got {j}")));
        }
        if let Some(pos) = draws.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite draw at row {}, column {}",
                pos % j,
                pos / j
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate parameter name '{n}'")));
            }
        }
        Ok(DrawMatrix { names, draws })
    }

    /// Unnamed draws; columns are called `x1..xd`.
    pub fn from_matrix(draws: DMatrix<f64>) -> Result<Self> {
        let names = (1..=draws.ncols()).map(|i| format!("x{i}")).collect();
        DrawMatrix::new(names, draws)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.draws.column(idx).iter().cloned().collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.draws.select_columns(idx)
    }
}

/// Null hypothesis: a point value for a subset of columns, or `Rϑ = r`.
#[derive(Debug, Clone, PartialEq)]
pub enum RestrictionSpec {
    PointNull {
        selector: Vec<usize>,
        theta0: Vec<f64>,
    },
    Linear {
        r_mat: DMatrix<f64>,
        r_vec: DVector<f64>,
    },
}

impl RestrictionSpec {
    pub fn point(selector: Vec<usize>, theta0: Vec<f64>) -> Self {
        RestrictionSpec::PointNull { selector, theta0 }
    }

    pub fn linear(r_mat: DMatrix<f64>, r_vec: DVector<f64>) -> Self {
        RestrictionSpec::Linear { r_mat, r_vec }
    }

    pub fn df(&self) -> usize {
        match self {
            RestrictionSpec::PointNull { selector, .. } => selector.len(),
            RestrictionSpec::Linear { r_mat, .. } => r_mat.nrows(),
        }
    }

    /// Checks the restriction against a parameter dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            RestrictionSpec::PointNull { selector, theta0 } => validate_selector(selector, theta0, d),
            RestrictionSpec::Linear { r_mat, r_vec } => validate_linear(r_mat, r_vec, d),
        }
    }

    /// The equivalent `(R, r)` pair.
    pub fn to_linear(&self, d: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.validate(d)?;
        match self {
            RestrictionSpec::PointNull { selector, theta0 } => {
                Ok((selector_matrix(selector, d), DVector::from_column_slice(theta0)))
            }
            RestrictionSpec::Linear { r_mat, r_vec } => Ok((r_mat.clone(), r_vec.clone())),
        }
    }
}

/// Rows of the d × d identity picked by `selector`.
pub fn selector_matrix(selector: &[usize], d: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(selector.len(), d);
    for (row, &col) in selector.iter().enumerate() {
        r[(row, col)] = 1.0;
    }
    r
}

fn validate_selector(selector: &[usize], theta0: &[f64], d: usize) -> Result<()> {
    if selector.is_empty() {
        return Err(Error::DimensionMismatch("empty selector".into()));
    }
    if selector.len() != theta0.len() {
        return Err(Error::DimensionMismatch(format!(
            "selector has {} entries but theta0 has {}",
            selector.len(),
            theta0.len()
        )));
    }
    let mut seen = HashSet::new();
    for &s in selector {
        if s >= d {
            return Err(Error::DimensionMismatch(format!(
                "selector index {s} out of range for {d} columns"
            )));
        }
        if !seen.insert(s) {
            return Err(Error::InvalidInput(format!("selector index {s} repeated")));
        }
    }
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("theta0 has non-finite entries".into()));
    }
    Ok(())
}

fn validate_linear(r_mat: &DMatrix<f64>, r_vec: &DVector<f64>, d: usize) -> Result<()> {
    let (m, cols) = r_mat.shape();
    if cols != d {
        return Err(Error::DimensionMismatch(format!(
            "R has {cols} columns, draws have {d}"
        )));
    }
    if m == 0 || m > d {
        return Err(Error::DimensionMismatch(format!("R has {m} rows for {d} parameters")));
    }
    if r_vec.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "r has {} entries, R has {m} rows",
            r_vec.len()
        )));
    }
    if r_mat.iter().chain(r_vec.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("R or r has non-finite entries".into()));
    }
    let rank = row_rank(r_mat, RANK_TOL);
    if rank < m {
        return Err(Error::RankDeficientR { rank, rows: m });
    }
    Ok(())
}

/// Column means and 1/J covariance.
pub fn mean_and_covariance(x: &DMatrix<f64>) -> Result<(DVector<f64>, SymMatrix)> {
    let j = x.nrows() as f64;
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let centered = center_columns(x, &mean);
    let cov = SymMatrix::new(centered.transpose() * &centered / j)?;
    Ok((mean, cov))
}

fn center_columns(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for (k, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[k]);
    }
    c
}

/// Per-draw `vech((ϑ⁽ʲ⁾ − ϑ̄)(ϑ⁽ʲ⁾ − ϑ̄)')`, one row per draw.
fn vech_outer_series(centered: &DMatrix<f64>) -> DMatrix<f64> {
    let (j, d) = centered.shape();
    let pstar = d * (d + 1) / 2;
    let mut out = DMatrix::zeros(j, pstar);
    for row in 0..j {
        let mut k = 0;
        for c in 0..d {
            for r in c..d {
                out[(row, k)] = centered[(row, r)] * centered[(row, c)];
                k += 1;
            }
        }
    }
    out
}

/// `p + tr(A Ĥ⁻¹)` on the selected columns.
pub fn point_null_statistic(draws: &DrawMatrix, selector: &[usize], theta0: &[f64]) -> Result<f64> {
    validate_selector(selector, theta0, draws.dim())?;
    let sub = draws.select_columns(selector);
    let (mean, h) = mean_and_covariance(&sub)?;
    let h_inv = sym_inverse(&h)?;
    let diff = mean - DVector::from_column_slice(theta0);
    let a = &diff * diff.transpose();
    Ok(selector.len() as f64 + (a * h_inv.as_matrix()).trace())
}

/// Delta-method NSE of [`point_null_statistic`]:
/// gradient `−vec(A')'(Ĥ⁻¹ ⊗ Ĥ⁻¹) D` applied to the Newey–West variance of
/// the per-draw `vech` series.
pub fn point_null_nse(
    draws: &DrawMatrix,
    selector: &[usize],
    theta0: &[f64],
    cfg: HacConfig,
) -> Result<f64> {
    validate_selector(selector, theta0, draws.dim())?;
    check_length(draws.n_draws(), cfg)?;
    let sub = draws.select_columns(selector);
    let (mean, h) = mean_and_covariance(&sub)?;
    let h_inv = sym_inverse(&h)?;
    let diff = mean.clone() - DVector::from_column_slice(theta0);
    let a = &diff * diff.transpose();
    let p = selector.len();

    let grad = -vec_of(&a.transpose()).transpose()
        * kron(h_inv.as_matrix(), h_inv.as_matrix())
        * duplication_map(p);
    let series = vech_outer_series(&center_columns(&sub, &mean));
    let var_h = newey_west(&series, cfg)?;
    Ok(quadratic_nse(&grad, &var_h))
}

/// `m + tr(A (RĤR')⁻¹)`, `Ĥ` over all columns.
pub fn restriction_statistic(
    draws: &DrawMatrix,
    r_mat: &DMatrix<f64>,
    r_vec: &DVector<f64>,
) -> Result<f64> {
    validate_linear(r_mat, r_vec, draws.dim())?;
    let (mean, h) = mean_and_covariance(draws.draws())?;
    let rhr = SymMatrix::new(r_mat * h.as_matrix() * r_mat.transpose())?;
    let rhr_inv = sym_inverse(&rhr)?;
    let diff = r_mat * mean - r_vec;
    let a = &diff * diff.transpose();
    Ok(r_mat.nrows() as f64 + (a * rhr_inv.as_matrix()).trace())
}

/// Delta-method NSE of [`restriction_statistic`], gradient
/// `−vec(A')'[(RĤR')⁻¹ ⊗ (RĤR')⁻¹](R ⊗ R) D`, on the vech series of all d columns.
pub fn restriction_nse(
    draws: &DrawMatrix,
    r_mat: &DMatrix<f64>,
    r_vec: &DVector<f64>,
    cfg: HacConfig,
) -> Result<f64> {
    validate_linear(r_mat, r_vec, draws.dim())?;
    check_length(draws.n_draws(), cfg)?;
    let (mean, h) = mean_and_covariance(draws.draws())?;
    let rhr = SymMatrix::new(r_mat * h.as_matrix() * r_mat.transpose())?;
    let rhr_inv = sym_inverse(&rhr)?;
    let diff = r_mat * &mean - r_vec;
    let a = &diff * diff.transpose();

    let grad = -vec_of(&a.transpose()).transpose()
        * kron(rhr_inv.as_matrix(), rhr_inv.as_matrix())
        * kron(r_mat, r_mat)
        * duplication_map(draws.dim());
    let series = vech_outer_series(&center_columns(draws.draws(), &mean));
    let var_h = newey_west(&series, cfg)?;
    Ok(quadratic_nse(&grad, &var_h))
}

fn check_length(j: usize, cfg: HacConfig) -> Result<()> {
    if j <= cfg.lag_q {
        return Err(Error::SeriesTooShort {
            len: j,
            lag: cfg.lag_q,
        });
    }
    Ok(())
}

fn quadratic_nse(grad: &nalgebra::RowDVector<f64>, var: &SymMatrix) -> f64 {
    let v = (grad * var.as_matrix() * grad.transpose())[(0, 0)];
    v.max(0.0).sqrt()
}

/// Frequentist Wald quadratic form for an estimate with covariance `cov`.
pub fn wald_statistic(estimate: &DVector<f64>, cov: &SymMatrix, spec: &RestrictionSpec) -> Result<f64> {
    let d = estimate.len();
    if cov.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {d} entries, covariance is {0}x{0}",
            cov.dim()
        )));
    }
    let (r_mat, r_vec) = spec.to_linear(d)?;
    let diff = &r_mat * estimate - r_vec;
    let middle = SymMatrix::new(&r_mat * cov.as_matrix() * r_mat.transpose())?;
    let inv = sym_inverse(&middle)?;
    Ok((diff.transpose() * inv.as_matrix() * &diff)[(0, 0)])
}

/// Calibrated decision for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub df: usize,
    pub nse: Option<f64>,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
    pub level: f64,
}

fn check_level(level: f64) {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1), got {level}");
}

/// Report for `T̂`, whose null law is `df + χ²(df)`. Ties at the threshold
/// accept.
pub fn make_report(statistic: f64, df: usize, nse: Option<f64>, level: f64) -> TestReport {
    check_level(level);
    let threshold = df as f64 + chi2_quantile(1.0 - level, df);
    let p_value = chi2_sf((statistic - df as f64).max(0.0), df);
    TestReport {
        statistic,
        df,
        nse,
        p_value,
        threshold,
        reject: statistic > threshold,
        level,
    }
}

/// Report for a statistic calibrated against a plain `χ²(df)` (Wald, LLY).
pub fn chi2_report(statistic: f64, df: usize, nse: Option<f64>, level: f64) -> TestReport {
    check_level(level);
    let threshold = chi2_quantile(1.0 - level, df);
    TestReport {
        statistic,
        df,
        nse,
        p_value: chi2_sf(statistic.max(0.0), df),
        threshold,
        reject: statistic > threshold,
        level,
    }
}
