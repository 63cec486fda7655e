//! Single-site random-walk MH on each `h_t`, then random-walk MH on
//! μ, atanh φ, log σ² and atanh ρ in turn. Proposal scales adapt toward
//! [`TARGET_ACCEPT`] during burn-in and are frozen afterwards.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AcceptRates, LsvChain, LsvPriors, McmcConfig, PhiSupport, RwScales, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::statcore::StreamRng;
use crate::teststat::DrawMatrix;

const TARGET_ACCEPT: f64 = 0.3;
const ADAPT_WINDOW: usize = 50;
const MIN_RETURNS: usize = 50;

#[derive(Debug, Clone, Copy)]
struct Theta {
    mu: f64,
    phi: f64,
    sigma2: f64,
    rho: f64,
}

struct State<'a> {
    y: &'a [f64],
    h: Vec<f64>,
    /// `y_t e^{−h_t/2}`
    z: Vec<f64>,
    th: Theta,
}

impl State<'_> {
    /// Terms of the joint density that involve `h_t = x`, given `z_t(x)`.
    fn local_h(&self, t: usize, x: f64, zx: f64) -> f64 {
        let Theta { mu, phi, sigma2, rho } = self.th;
        let n = self.h.len();
        let rs = rho / sigma2.sqrt();
        let c = 1.0 - rho * rho;
        let prev = if t == 0 { mu } else { self.h[t - 1] };
        let u_in = x - mu - phi * (prev - mu);
        let mut lp = -0.5 * x - u_in * u_in / (2.0 * sigma2);
        if t > 0 {
            let e = self.z[t - 1] - rs * u_in;
            lp -= e * e / (2.0 * c);
        }
        if t + 1 < n {
            let u_out = self.h[t + 1] - mu - phi * (x - mu);
            let e = zx - rs * u_out;
            lp -= u_out * u_out / (2.0 * sigma2) + e * e / (2.0 * c);
        } else {
            lp -= 0.5 * zx * zx;
        }
        lp
    }

    /// Terms of the joint density that involve the parameters.
    fn param_loglik(&self, th: &Theta) -> f64 {
        let n = self.h.len();
        let rs = th.rho / th.sigma2.sqrt();
        let c = 1.0 - th.rho * th.rho;
        let mut quad_u = 0.0;
        let mut quad_e = 0.0;
        let mut prev = th.mu;
        for t in 0..n {
            let u = self.h[t] - th.mu - th.phi * (prev - th.mu);
            quad_u += u * u;
            if t > 0 {
                let e = self.z[t - 1] - rs * u;
                quad_e += e * e;
            }
            prev = self.h[t];
        }
        -0.5 * n as f64 * th.sigma2.ln()
            - quad_u / (2.0 * th.sigma2)
            - 0.5 * (n - 1) as f64 * c.ln()
            - quad_e / (2.0 * c)
    }
}

/// Log prior in the sampling coordinates (μ, atanh φ, log σ², atanh ρ),
/// Jacobians included.
fn log_prior(th: &Theta, pr: &LsvPriors, leverage: bool) -> f64 {
    let mut lp = -(th.mu - pr.mu_mean).powi(2) / (2.0 * pr.mu_var);

    let x = match pr.phi_support {
        PhiSupport::Symmetric => 0.5 * (th.phi + 1.0),
        PhiSupport::Unit => th.phi,
    };
    if !(x > 0.0 && x < 1.0 && th.phi.abs() < 1.0) {
        return f64::NEG_INFINITY;
    }
    lp += (pr.phi_beta_a - 1.0) * x.ln() + (pr.phi_beta_b - 1.0) * (1.0 - x).ln();
    lp += (1.0 - th.phi * th.phi).ln();

    // Gamma(a, rate b) on σ⁻², expressed in log σ²
    lp += -pr.sig_gamma_a * th.sigma2.ln() - pr.sig_gamma_b / th.sigma2;

    if leverage {
        if !(th.rho > pr.rho_lo && th.rho < pr.rho_hi && th.rho.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        lp += (1.0 - th.rho * th.rho).ln();
    }
    lp
}

#[derive(Default, Clone, Copy)]
struct Counter {
    accepted: u64,
    tried: u64,
}

impl Counter {
    fn record(&mut self, ok: bool) {
        self.tried += 1;
        self.accepted += ok as u64;
    }
    fn rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Counters {
    h: Counter,
    mu: Counter,
    phi: Counter,
    sigma2: Counter,
    rho: Counter,
}

fn accept(rng: &mut StreamRng, log_ratio: f64) -> bool {
    if !log_ratio.is_finite() {
        return log_ratio == f64::INFINITY;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn adapt(scale: &mut f64, c: &Counter) {
    *scale *= (2.0 * (c.rate() - TARGET_ACCEPT)).exp();
}

/// Posterior sampler for `(μ, φ, σ², ρ, h_1..h_T)`. With `leverage = false`
/// ρ is held at 0 and its column is constant.
pub fn fit_lsv(
    returns: &[f64],
    priors: &LsvPriors,
    cfg: &McmcConfig,
    leverage: bool,
) -> Result<LsvChain> {
    cfg.validate()?;
    priors.validate()?;
    if returns.len() < MIN_RETURNS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_RETURNS} returns, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("non-finite return".into()));
    }
    let n = returns.len();
    let ms = returns.iter().map(|r| r * r).sum::<f64>() / n as f64;
    if !(ms > 0.0) {
        return Err(Error::InvalidInput("returns are identically zero".into()));
    }

    let h0 = ms.ln();
    let mut st = State {
        y: returns,
        h: vec![h0; n],
        z: returns.iter().map(|r| r * (-0.5 * h0).exp()).collect(),
        th: Theta {
            mu: h0,
            phi: 0.9,
            sigma2: 0.05,
            rho: 0.0,
        },
    };
    let mut cur_param = st.param_loglik(&st.th) + log_prior(&st.th, priors, leverage);
    if !cur_param.is_finite() {
        return Err(Error::ChainDiverged {
            iteration: 0,
            detail: "non-finite initial log-density".into(),
        });
    }

    let mut rng = cfg.seed.rng();
    let mut scales: RwScales = cfg.rw_scales;
    let mut window = Counters::default();
    let mut kept = Counters::default();

    let j_total = cfg.retained();
    let mut params = DMatrix::zeros(j_total, 4);
    let mut paths = cfg.store_paths.then(|| DMatrix::zeros(j_total, n));
    let mut j = 0;

    for iter in 0..cfg.n_iter {
        let burning = iter < cfg.burn_in;
        let mut it = Counters::default();

        for t in 0..n {
            let x = st.h[t] + scales.h * normal(&mut rng);
            let zx = st.y[t] * (-0.5 * x).exp();
            let ratio = st.local_h(t, x, zx) - st.local_h(t, st.h[t], st.z[t]);
            let ok = accept(&mut rng, ratio);
            if ok {
                st.h[t] = x;
                st.z[t] = zx;
            }
            it.h.record(ok);
        }
        cur_param = st.param_loglik(&st.th) + log_prior(&st.th, priors, leverage);

        let mut step = |st: &mut State, prop: Theta, c: &mut Counter, rng: &mut StreamRng| {
            let val = st.param_loglik(&prop) + log_prior(&prop, priors, leverage);
            let ok = accept(rng, val - cur_param);
            if ok {
                st.th = prop;
                cur_param = val;
            }
            c.record(ok);
        };

        let prop = Theta { mu: st.th.mu + scales.mu * normal(&mut rng), ..st.th };
        step(&mut st, prop, &mut it.mu, &mut rng);
        let prop = Theta {
            phi: (st.th.phi.atanh() + scales.phi * normal(&mut rng)).tanh(),
            ..st.th
        };
        step(&mut st, prop, &mut it.phi, &mut rng);
        let prop = Theta {
            sigma2: (st.th.sigma2.ln() + scales.sigma2 * normal(&mut rng)).exp(),
            ..st.th
        };
        step(&mut st, prop, &mut it.sigma2, &mut rng);
        if leverage {
            let prop = Theta {
                rho: (st.th.rho.atanh() + scales.rho * normal(&mut rng)).tanh(),
                ..st.th
            };
            step(&mut st, prop, &mut it.rho, &mut rng);
        }

        if !cur_param.is_finite() || st.th.phi.abs() >= 1.0 || st.th.rho.abs() >= 1.0 {
            return Err(Error::ChainDiverged {
                iteration: iter,
                detail: format!("state left the support: {:?}", st.th),
            });
        }

        let tallies = if burning { &mut window } else { &mut kept };
        for (acc, new) in [
            (&mut tallies.h, it.h),
            (&mut tallies.mu, it.mu),
            (&mut tallies.phi, it.phi),
            (&mut tallies.sigma2, it.sigma2),
            (&mut tallies.rho, it.rho),
        ] {
            acc.accepted += new.accepted;
            acc.tried += new.tried;
        }

        if burning && (iter + 1) % ADAPT_WINDOW == 0 {
            adapt(&mut scales.h, &window.h);
            adapt(&mut scales.mu, &window.mu);
            adapt(&mut scales.phi, &window.phi);
            adapt(&mut scales.sigma2, &window.sigma2);
            if leverage {
                adapt(&mut scales.rho, &window.rho);
            }
            window = Counters::default();
        }

        if !burning && (iter + 1 - cfg.burn_in) % cfg.thin == 0 && j < j_total {
            params[(j, 0)] = st.th.mu;
            params[(j, 1)] = st.th.phi;
            params[(j, 2)] = st.th.sigma2;
            params[(j, 3)] = st.th.rho;
            if let Some(p) = paths.as_mut() {
                for t in 0..n {
                    p[(j, t)] = st.h[t];
                }
            }
            j += 1;
        }
    }
    debug_assert_eq!(j, j_total);

    let names = PARAM_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(LsvChain {
        params: DrawMatrix::new(names, params)?,
        h_draws: paths,
        accept_rates: AcceptRates {
            h: kept.h.rate(),
            mu: kept.mu.rate(),
            phi: kept.phi.rate(),
            sigma2: kept.sigma2.rate(),
            rho: if leverage { kept.rho.rate() } else { 0.0 },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsv::{simulate_lsv, LsvParams};
    use crate::statcore::SeedSpec;

    fn short_cfg(seed: u64) -> McmcConfig {
        McmcConfig {
            n_iter: 600,
            burn_in: 200,
            thin: 2,
            rw_scales: RwScales::default(),
            seed: SeedSpec::new(seed, 0),
            store_paths: true,
        }
    }

    fn data() -> Vec<f64> {
        simulate_lsv(&LsvParams::simulation_design(-0.4), 300, SeedSpec::new(1, 0)).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let y = data();
        let a = fit_lsv(&y, &LsvPriors::default(), &short_cfg(3), true).unwrap();
        let b = fit_lsv(&y, &LsvPriors::default(), &short_cfg(3), true).unwrap();
        assert_eq!(a, b);
        let c = fit_lsv(&y, &LsvPriors::default(), &short_cfg(4), true).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn shapes_and_bounds() {
        let y = data();
        let c = fit_lsv(&y, &LsvPriors::default(), &short_cfg(5), true).unwrap();
        assert_eq!(c.params.n_draws(), 200);
        assert_eq!(c.h_draws.as_ref().unwrap().shape(), (200, 300));
        assert!(c.column("phi").unwrap().iter().all(|p| p.abs() < 1.0));
        assert!(c.column("rho").unwrap().iter().all(|p| p.abs() < 1.0));
        assert!(c.column("sigma2").unwrap().iter().all(|p| *p > 0.0));
        let a = c.accept_rates;
        for r in [a.h, a.mu, a.phi, a.sigma2, a.rho] {
            assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn null_fit_has_zero_rho() {
        let y = data();
        let c = fit_lsv(&y, &LsvPriors::default(), &short_cfg(6), false).unwrap();
        assert!(c.column("rho").unwrap().iter().all(|r| *r == 0.0));
        assert_eq!(c.accept_rates.rho, 0.0);
    }

    #[test]
    fn unit_phi_support_stays_positive() {
        let y = data();
        let pr = LsvPriors { phi_support: PhiSupport::Unit, ..LsvPriors::default() };
        let c = fit_lsv(&y, &pr, &short_cfg(7), true).unwrap();
        assert!(c.column("phi").unwrap().iter().all(|p| *p > 0.0));
    }

    #[test]
    fn narrowed_rho_prior_is_respected() {
        let y = data();
        let pr = LsvPriors { rho_lo: -0.2, rho_hi: 0.5, ..LsvPriors::default() };
        let c = fit_lsv(&y, &pr, &short_cfg(8), true).unwrap();
        assert!(c.column("rho").unwrap().iter().all(|r| *r > -0.2 && *r < 0.5));
    }

    #[test]
    fn invalid_inputs() {
        let y = data();
        let mut cfg = short_cfg(1);
        cfg.burn_in = 600;
        assert!(matches!(
            fit_lsv(&y, &LsvPriors::default(), &cfg, true),
            Err(Error::ConfigInvalid(_))
        ));
        let mut cfg = short_cfg(1);
        cfg.thin = 0;
        assert!(matches!(
            fit_lsv(&y, &LsvPriors::default(), &cfg, true),
            Err(Error::ConfigInvalid(_))
        ));
        assert!(fit_lsv(&y[..40], &LsvPriors::default(), &short_cfg(1), true).is_err());
        assert!(fit_lsv(&vec![0.0; 100], &LsvPriors::default(), &short_cfg(1), true).is_err());
        let pr = LsvPriors { rho_lo: 0.5, rho_hi: 0.1, ..LsvPriors::default() };
        assert!(matches!(fit_lsv(&y, &pr, &short_cfg(1), true), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn prior_jacobians() {
        // With Beta(1,1) on (φ+1)/2 the atanh-coordinate density is 1 − φ².
        let pr = LsvPriors::default();
        let th = |phi| Theta { mu: 0.0, phi, sigma2: 1.0, rho: 0.0 };
        let d = log_prior(&th(0.5), &pr, false) - log_prior(&th(0.0), &pr, false);
        assert!((d - (0.75f64).ln()).abs() < 1e-14);
        let unit = LsvPriors { phi_support: PhiSupport::Unit, ..pr };
        assert_eq!(log_prior(&th(-0.1), &unit, false), f64::NEG_INFINITY);
        // σ⁻² ~ Gamma(a, b): in log σ² the density is (σ²)^{−a} e^{−b/σ²}
        let s = |sigma2| Theta { mu: 0.0, phi: 0.0, sigma2, rho: 0.0 };
        let d = log_prior(&s(2.0), &pr, false) - log_prior(&s(1.0), &pr, false);
        let want = -pr.sig_gamma_a * 2f64.ln() - pr.sig_gamma_b * (0.5 - 1.0);
        assert!((d - want).abs() < 1e-14);
    }
}
