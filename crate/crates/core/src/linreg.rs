//! Conjugate Normal–Inverse-Gamma linear regression.
//!
//! Prior `β | σ² ~ N(μ₀, σ²V₀)`, `σ² ~ IG(a, b)` with density
//! `∝ x^{-(a+1)} e^{-b/x}`. The posterior is
//!
//! ```text
//! V* = (V₀⁻¹ + X'X)⁻¹        μ* = V*(V₀⁻¹μ₀ + X'y)
//! v  = 2a + n                s  = b + ½(μ₀'V₀⁻¹μ₀ + y'y − μ*'V*⁻¹μ*)
//! β | y ~ t(μ*, 2sV*/v, v),  σ² | y ~ IG(v/2, s)
//! ```

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::statcore::{cholesky_lower, row_rank, sym_inverse, SeedSpec, SymMatrix};
use crate::teststat::{self, DrawMatrix, RestrictionSpec, RANK_TOL};

/// Regression coefficients of the size/power design, before scaling by γ.
pub const DESIGN_BETA: [f64; 4] = [0.3, 0.2, 0.1, 0.5];
/// Noise standard deviation of the size/power design (σ² = 0.01).
pub const DESIGN_NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct NigPrior {
    pub mu0: DVector<f64>,
    pub v0: SymMatrix,
    pub a: f64,
    pub b: f64,
}

impl NigPrior {
    /// `μ₀ = 0`, `V₀ = 1000·I`, `a = b = 1e-4`.
    pub fn weak(d: usize) -> Self {
        NigPrior::isotropic(d, 1000.0, 1e-4, 1e-4)
    }

    pub fn isotropic(d: usize, v0_scale: f64, a: f64, b: f64) -> Self {
        NigPrior {
            mu0: DVector::zeros(d),
            v0: SymMatrix::from_diagonal(&vec![v0_scale; d]),
            a,
            b,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    fn validate(&self) -> Result<()> {
        if self.v0.dim() != self.mu0.len() {
            return Err(Error::DimensionMismatch("mu0 and V0 sizes differ".into()));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidInput("a and b must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NigPosterior {
    pub mu_star: DVector<f64>,
    pub v_star: SymMatrix,
    pub v: f64,
    pub s: f64,
}

impl NigPosterior {
    pub fn dim(&self) -> usize {
        self.mu_star.len()
    }

    /// `Var(β | y) = 2s/(v − 2) V*`.
    pub fn beta_covariance(&self) -> Result<SymMatrix> {
        self.require_variance()?;
        SymMatrix::new(self.v_star.as_matrix() * (2.0 * self.s / (self.v - 2.0)))
    }

    fn require_variance(&self) -> Result<()> {
        if !(self.v > 2.0) {
            return Err(Error::InvalidInput(format!(
                "posterior variance undefined for v = {} <= 2",
                self.v
            )));
        }
        Ok(())
    }
}

/// Design matrix (first column all ones) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!("X has {n} rows, y has {}", y.len())));
        }
        if d == 0 || n <= d {
            return Err(Error::InvalidInput(format!("need n > d, got n = {n}, d = {d}")));
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidInput("first design column must be all ones".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite regression data".into()));
        }
        let rank = row_rank(&x.transpose(), RANK_TOL);
        if rank < d {
            return Err(Error::RankDeficient(format!("X has rank {rank} < {d} columns")));
        }
        Ok(RegressionData { x, y })
    }

    /// Prepends the intercept column to `covariates`.
    pub fn with_intercept(covariates: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = covariates.nrows();
        let x = covariates.insert_column(0, 1.0);
        debug_assert_eq!(x.nrows(), n);
        RegressionData::new(x, y)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

pub fn posterior_nig(data: &RegressionData, prior: &NigPrior) -> Result<NigPosterior> {
    prior.validate()?;
    if prior.dim() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "prior has dimension {}, design has {} columns",
            prior.dim(),
            data.dim()
        )));
    }
    let x = data.x();
    let y = data.y();
    let v0_inv = sym_inverse(&prior.v0)?;
    let precision = SymMatrix::new(v0_inv.as_matrix() + x.transpose() * x)?;
    let v_star = sym_inverse(&precision)?;
    let mu_star = v_star.as_matrix() * (v0_inv.as_matrix() * &prior.mu0 + x.transpose() * y);

    let quad = |m: &DMatrix<f64>, v: &DVector<f64>| (v.transpose() * m * v)[(0, 0)];
    let s = prior.b
        + 0.5
            * (quad(v0_inv.as_matrix(), &prior.mu0) + y.dot(y)
                - quad(precision.as_matrix(), &mu_star));
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("posterior scale s = {s} is not positive")));
    }
    Ok(NigPosterior {
        mu_star,
        v_star,
        v: 2.0 * prior.a + data.n() as f64,
        s,
    })
}

/// `p + (v−2)/(2s) (μ̌* − β̌₀)' V̌*⁻¹ (μ̌* − β̌₀)`.
pub fn analytic_t_point(post: &NigPosterior, selector: &[usize], beta0: &[f64]) -> Result<f64> {
    RestrictionSpec::point(selector.to_vec(), beta0.to_vec()).validate(post.dim())?;
    post.require_variance()?;
    let block = sym_inverse(&post.v_star.select(selector))?;
    let diff = DVector::from_iterator(
        selector.len(),
        selector.iter().zip(beta0).map(|(&i, b)| post.mu_star[i] - b),
    );
    let q = (diff.transpose() * block.as_matrix() * &diff)[(0, 0)];
    Ok(selector.len() as f64 + (post.v - 2.0) / (2.0 * post.s) * q)
}

/// `m + (v−2)/(2s) (Rμ* − r)' (RV*R')⁻¹ (Rμ* − r)`.
pub fn analytic_t_restriction(
    post: &NigPosterior,
    r_mat: &DMatrix<f64>,
    r_vec: &DVector<f64>,
) -> Result<f64> {
    let spec = RestrictionSpec::linear(r_mat.clone(), r_vec.clone());
    spec.validate(post.dim())?;
    post.require_variance()?;
    let middle = sym_inverse(&SymMatrix::new(r_mat * post.v_star.as_matrix() * r_mat.transpose())?)?;
    let diff = r_mat * &post.mu_star - r_vec;
    let q = (diff.transpose() * middle.as_matrix() * &diff)[(0, 0)];
    Ok(r_mat.nrows() as f64 + (post.v - 2.0) / (2.0 * post.s) * q)
}

/// Analytic statistic for either hypothesis form.
pub fn analytic_t(post: &NigPosterior, spec: &RestrictionSpec) -> Result<f64> {
    match spec {
        RestrictionSpec::PointNull { selector, theta0 } => analytic_t_point(post, selector, theta0),
        RestrictionSpec::Linear { r_mat, r_vec } => analytic_t_restriction(post, r_mat, r_vec),
    }
}

/// Exact i.i.d. posterior draws: `σ² ~ IG(v/2, s)`, then
/// `β | σ² ~ N(μ*, σ²V*)`. Columns `beta1..betad, sigma2`.
pub fn sample_posterior(post: &NigPosterior, j: usize, seed: SeedSpec) -> Result<DrawMatrix> {
    if j < 2 {
        return Err(Error::InvalidInput("need at least 2 draws".into()));
    }
    let d = post.dim();
    let chol = cholesky_lower(&post.v_star)?;
    let gamma = Gamma::new(post.v / 2.0, 1.0)
        .map_err(|e| Error::InvalidInput(format!("bad gamma shape: {e}")))?;
    let mut rng = seed.rng();
    let mut out = DMatrix::zeros(j, d + 1);
    let mut z = DVector::zeros(d);
    for row in 0..j {
        let sigma2 = post.s / gamma.sample(&mut rng);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let beta = &post.mu_star + (&chol * &z) * sigma2.sqrt();
        for c in 0..d {
            out[(row, c)] = beta[c];
        }
        out[(row, d)] = sigma2;
    }
    let mut names: Vec<String> = (1..=d).map(|i| format!("beta{i}")).collect();
    names.push("sigma2".into());
    DrawMatrix::new(names, out)
}

/// Maximum-likelihood fit: `β̂ = (X'X)⁻¹X'y`, `σ̂² = RSS/n`, `cov = σ̂²(X'X)⁻¹`.
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub cov: SymMatrix,
}

pub fn ols(data: &RegressionData) -> Result<OlsFit> {
    let x = data.x();
    let xtx = SymMatrix::new(x.transpose() * x)?;
    let xtx_inv = sym_inverse(&xtx).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let beta = xtx_inv.as_matrix() * (x.transpose() * data.y());
    let resid = data.y() - x * &beta;
    let sigma2 = resid.dot(&resid) / data.n() as f64;
    let cov = SymMatrix::new(xtx_inv.as_matrix() * sigma2)?;
    Ok(OlsFit { beta, sigma2, cov })
}

pub fn ols_wald(data: &RegressionData, spec: &RestrictionSpec) -> Result<f64> {
    let fit = ols(data)?;
    teststat::wald_statistic(&fit.beta, &fit.cov, spec)
}

/// True coefficients of the design for a given γ.
pub fn design_beta(gamma: f64) -> DVector<f64> {
    DVector::from_column_slice(&[
        DESIGN_BETA[0],
        DESIGN_BETA[1],
        DESIGN_BETA[2] * gamma,
        DESIGN_BETA[3] * gamma,
    ])
}

/// Intercept plus three standard-normal covariates, noise sd 0.1.
pub fn simulate_design(n: usize, gamma: f64, seed: SeedSpec) -> Result<RegressionData> {
    if n < 5 {
        return Err(Error::InvalidInput(format!("design needs n >= 5, got {n}")));
    }
    let mut rng = seed.rng();
    let beta = design_beta(gamma);
    let mut x = DMatrix::from_element(n, 4, 1.0);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        for c in 1..4 {
            x[(i, c)] = StandardNormal.sample(&mut rng);
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] = (x.row(i) * &beta)[0] + DESIGN_NOISE_SD * e;
    }
    RegressionData::new(x, y)
}

/// The four hypotheses of the size/power study, on the 3rd and 4th
/// coefficients: `β₃ = 0`, `β₄ = 0`, `β₃ = β₄ = 0`, `β₃ + β₄ = 0`.
pub fn design_hypotheses() -> Vec<(&'static str, RestrictionSpec)> {
    vec![
        ("beta3=0", RestrictionSpec::point(vec![2], vec![0.0])),
        ("beta4=0", RestrictionSpec::point(vec![3], vec![0.0])),
        ("beta3=beta4=0", RestrictionSpec::point(vec![2, 3], vec![0.0, 0.0])),
        (
            "beta3+beta4=0",
            RestrictionSpec::linear(
                DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 1.0, 1.0]),
                DVector::zeros(1),
            ),
        ),
    ]
}
