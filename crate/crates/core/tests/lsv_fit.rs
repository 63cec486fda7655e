use bayestest::lsv::{
    fit_lsv, lly_report, lsv_rho_test, simulate_lsv, LsvChain, LsvParams, LsvPriors, McmcConfig,
};
use bayestest::{HacConfig, SeedSpec};

fn fit(returns: &[f64], seed: SeedSpec, leverage: bool, paths: bool) -> LsvChain {
    let mut cfg = McmcConfig::desk_scale(seed);
    cfg.store_paths = paths;
    fit_lsv(returns, &LsvPriors::default(), &cfg, leverage).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[test]
fn credible_interval_for_rho_excludes_zero_under_moderate_leverage() {
    let truth = LsvParams::simulation_design(-0.4);
    let mut excluded = 0;
    let mut covered = 0;
    for rep in 0..20u64 {
        let y = simulate_lsv(&truth, 2000, SeedSpec::new(404, rep)).unwrap();
        let chain = fit(&y, SeedSpec::new(404, rep | 1 << 63), true, false);
        let rho = chain.column("rho").unwrap();
        let (lo, hi) = (quantile(&rho, 0.025), quantile(&rho, 0.975));
        if hi < 0.0 || lo > 0.0 {
            excluded += 1;
        }
        if lo <= -0.4 && -0.4 <= hi {
            covered += 1;
        }
    }
    assert!(excluded >= 18, "interval excluded zero in {excluded}/20 runs");
    assert!(covered >= 15, "interval covered the truth in {covered}/20 runs");
}

#[test]
fn persistence_is_recovered_on_a_daily_fx_sized_series() {
    // Persistent, low-leverage volatility with 945 observations.
    let truth = LsvParams {
        mu: -0.6,
        phi: 0.985,
        sigma2: 0.155f64.powi(2),
        rho: -0.1,
    };
    let y = simulate_lsv(&truth, 945, SeedSpec::new(945, 0)).unwrap();
    let chain = fit(&y, SeedSpec::new(945, 1), true, false);
    let phi = mean(&chain.column("phi").unwrap());
    assert!(phi > 0.9 && phi < 1.0, "posterior mean phi {phi}");
    let mu = mean(&chain.column("mu").unwrap());
    assert!((mu - truth.mu).abs() < 1.0, "posterior mean mu {mu}");
}

#[test]
fn no_leverage_data_is_not_rejected_by_either_statistic() {
    let truth = LsvParams::simulation_design(0.0);
    let y = simulate_lsv(&truth, 1500, SeedSpec::new(77, 0)).unwrap();
    let h1 = fit(&y, SeedSpec::new(77, 1), true, false);
    let h0 = fit(&y, SeedSpec::new(77, 2), false, true);
    let hac = HacConfig::default();

    let t = lsv_rho_test(&h1, hac, 0.05).unwrap();
    assert!(!t.reject, "T = {} > {}", t.statistic, t.threshold);
    let lly = lly_report(&h1, &h0, &y, hac, 0.05).unwrap();
    assert!(lly.statistic < 3.84, "LLY = {}", lly.statistic);
    assert!(h0.column("rho").unwrap().iter().all(|r| *r == 0.0));
}

#[test]
fn strong_leverage_is_rejected_by_a_wide_margin() {
    let truth = LsvParams::simulation_design(-0.7);
    let y = simulate_lsv(&truth, 2000, SeedSpec::new(88, 0)).unwrap();
    let h1 = fit(&y, SeedSpec::new(88, 1), true, false);
    let h0 = fit(&y, SeedSpec::new(88, 2), false, true);
    let hac = HacConfig::default();

    let t = lsv_rho_test(&h1, hac, 0.05).unwrap();
    assert!(t.reject);
    assert!(t.statistic > 5.0 * t.threshold, "T = {}", t.statistic);
    let nse = t.nse.unwrap();
    assert!(nse > 0.0 && nse < t.statistic, "NSE {nse}");
    let rho = mean(&h1.column("rho").unwrap());
    assert!(rho < -0.4, "posterior mean rho {rho}");

    let lly = lly_report(&h1, &h0, &y, hac, 0.05).unwrap();
    assert!(lly.reject, "LLY = {}", lly.statistic);
}
