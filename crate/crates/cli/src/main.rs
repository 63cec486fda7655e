//! `bayestest` command-line tool.
//!
//! Exit codes: 0 = accept (or success), 2 = reject, 1 = error. Errors are
//! reported on stderr as a single `error=<Category> detail=<message>` line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bayestest::harness::{self, ExperimentPlan, ResultTable};
use bayestest::io::{self, HypothesisFile};
use bayestest::linreg::{analytic_t, posterior_nig, sample_posterior, NigPrior};
use bayestest::lsv::{
    fit_lsv, lly_report, lsv_rho_test, simulate_lsv, LsvParams, LsvPriors, McmcConfig, PhiSupport,
};
use bayestest::teststat::{
    make_report, point_null_nse, point_null_statistic, restriction_nse, restriction_statistic,
    DrawMatrix,
};
use bayestest::{Error, HacConfig, RestrictionSpec, Result, SeedSpec, TestReport};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bayestest", version, about = "Bayesian chi-squared type tests from posterior draws")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Base seed for every random stream (default 1; overrides a plan file's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significance level
    #[arg(long, global = true, default_value_t = 0.05)]
    level: f64,
    /// Newey–West bandwidth for NSEs
    #[arg(long = "lag-q", global = true, default_value_t = 10)]
    lag_q: usize,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for simulation studies
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

impl Global {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Test a hypothesis from a posterior draw file
    Test {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// Also write the report as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recompute the normal-mean comparison panel
    Lindley,
    /// Regression size/power study
    Table2 {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Stochastic-volatility size/power study
    Table3 {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Fit the leverage SV model to a returns file and test rho = 0
    LsvFit {
        #[arg(long)]
        returns: PathBuf,
        /// Fix rho = 0
        #[arg(long)]
        no_leverage: bool,
        /// Also fit the null model and report the score comparator
        #[arg(long)]
        lly: bool,
        /// Write the retained latent paths
        #[arg(long)]
        store_paths: bool,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Simulate a return series from the SV model
    LsvSim {
        #[arg(long, allow_hyphen_values = true, default_value_t = -10.0)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.97)]
        phi: f64,
        #[arg(long, default_value_t = 0.025)]
        sigma2: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        rho: f64,
        #[arg(long = "length", default_value_t = 1000)]
        length: usize,
    },
    /// Conjugate regression fit, exact posterior draws, optional test
    LinregFit {
        /// CSV with a `y` column and covariates
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 20000)]
        draws: usize,
        #[arg(long)]
        hypothesis: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, default_value_t = 6000)]
    n_iter: usize,
    #[arg(long, default_value_t = 2000)]
    burn_in: usize,
    #[arg(long, default_value_t = 2)]
    thin: usize,
    /// Beta prior on phi itself instead of (phi + 1)/2
    #[arg(long)]
    phi_unit: bool,
}

impl ChainArgs {
    fn config(&self, seed: SeedSpec, store_paths: bool) -> McmcConfig {
        McmcConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            store_paths,
            ..McmcConfig::desk_scale(seed)
        }
    }

    fn priors(&self) -> LsvPriors {
        LsvPriors {
            phi_support: if self.phi_unit { PhiSupport::Unit } else { PhiSupport::Symmetric },
            ..LsvPriors::default()
        }
    }
}

enum Outcome {
    Done,
    Accept,
    Reject,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done | Outcome::Accept) => ExitCode::SUCCESS,
        Ok(Outcome::Reject) => ExitCode::from(2),
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("error={} detail={}", e.category(), detail);
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = cli.global;
    if !(g.level > 0.0 && g.level < 1.0) {
        return Err(Error::ConfigInvalid(format!("level {} outside (0, 1)", g.level)));
    }
    let hac = HacConfig { lag_q: g.lag_q };
    match cli.command {
        Command::Test { draws, hypothesis, report } => {
            let d = io::read_draws(&draws)?;
            let spec = HypothesisFile::read(&hypothesis)?.resolve(d.names())?;
            let r = test_draws(&d, &spec, hac, g.level)?;
            print_report(&r);
            if let Some(p) = report {
                std::fs::write(p, serde_json::to_string_pretty(&r)? + "\n")?;
            }
            Ok(decision(&r))
        }
        Command::Lindley => {
            std::fs::create_dir_all(&g.out)?;
            let cells = harness::run_table1();
            let mut csv = String::from("prior,n,quantity,value,reference,pass\n");
            for c in &cells {
                println!(
                    "{:<12} n={:<6} {:<7} {:>10.4} ref {:>8.2} {}",
                    c.prior,
                    c.n,
                    c.quantity,
                    c.value,
                    c.reference,
                    if c.pass { "PASS" } else { "FAIL" }
                );
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.prior, c.n, c.quantity, c.value, c.reference, c.pass
                ));
            }
            std::fs::write(g.out.join("table1.csv"), csv)?;
            Ok(Outcome::Done)
        }
        Command::Table2 { plan, reps } => {
            let plan = load_plan(plan.as_deref(), ExperimentPlan::regression_default(g.seed()), &g, reps)?;
            run_study(&plan, &g.out.join("table2.csv"), harness::run_table2)
        }
        Command::Table3 { plan, reps } => {
            let plan = load_plan(plan.as_deref(), ExperimentPlan::volatility_default(g.seed()), &g, reps)?;
            run_study(&plan, &g.out.join("table3.csv"), harness::run_table3)
        }
        Command::LsvFit { returns, no_leverage, lly, store_paths, chain } => {
            let y = io::read_returns(&returns)?;
            std::fs::create_dir_all(&g.out)?;
            let priors = chain.priors();
            let fit = fit_lsv(&y, &priors, &chain.config(SeedSpec::new(g.seed(), 0), store_paths), !no_leverage)?;
            io::write_draws(&g.out.join("chain.csv"), &fit.params)?;
            if let Some(p) = &fit.h_draws {
                io::write_paths(&g.out.join("paths.csv"), p)?;
            }
            print_means(&fit.params);
            let a = fit.accept_rates;
            println!(
                "accept h={:.3} mu={:.3} phi={:.3} sigma2={:.3} rho={:.3}",
                a.h, a.mu, a.phi, a.sigma2, a.rho
            );
            if no_leverage {
                println!("rho fixed at 0; no test");
                return Ok(Outcome::Done);
            }
            let r = lsv_rho_test(&fit, hac, g.level)?;
            print_report(&r);
            if lly {
                let null = fit_lsv(&y, &priors, &chain.config(SeedSpec::new(g.seed(), 1), true), false)?;
                io::write_draws(&g.out.join("chain_h0.csv"), &null.params)?;
                if let Some(p) = &null.h_draws {
                    io::write_paths(&g.out.join("paths_h0.csv"), p)?;
                }
                let l = lly_report(&fit, &null, &y, hac, g.level)?;
                println!("lly_statistic={}", l.statistic);
                println!("lly_nse={}", l.nse.unwrap_or(f64::NAN));
                println!("lly_p_value={}", l.p_value);
                println!("lly_threshold={}", l.threshold);
                println!("lly_decision={}", if l.reject { "reject" } else { "accept" });
            }
            Ok(decision(&r))
        }
        Command::LsvSim { mu, phi, sigma2, rho, length } => {
            let params = LsvParams { mu, phi, sigma2, rho };
            let y = simulate_lsv(&params, length, SeedSpec::new(g.seed(), 0))?;
            std::fs::create_dir_all(&g.out)?;
            let path = g.out.join("returns.csv");
            io::write_returns(&path, &y)?;
            println!("wrote {} returns to {}", y.len(), path.display());
            Ok(Outcome::Done)
        }
        Command::LinregFit { data, draws, hypothesis } => {
            let (data, names) = io::read_regression(&data)?;
            let post = posterior_nig(&data, &NigPrior::weak(data.dim()))?;
            let sample = sample_posterior(&post, draws, SeedSpec::new(g.seed(), 0))?;
            let mut cols = names.clone();
            cols.push("sigma2".into());
            let sample = DrawMatrix::new(cols, sample.draws().clone())?;
            std::fs::create_dir_all(&g.out)?;
            io::write_draws(&g.out.join("draws.csv"), &sample)?;
            for (n, m) in names.iter().zip(post.mu_star.iter()) {
                println!("mean_{n}={m}");
            }
            println!("v={} s={}", post.v, post.s);
            let Some(h) = hypothesis else {
                return Ok(Outcome::Done);
            };
            let spec = HypothesisFile::read(&h)?.resolve(sample.names())?;
            if spec.validate(data.dim()).is_err() {
                return Err(Error::NameMismatch("hypothesis must involve coefficients only".into()));
            }
            let t = analytic_t(&post, &spec)?;
            let r = make_report(t, spec.df(), None, g.level);
            print_report(&r);
            Ok(decision(&r))
        }
    }
}

/// Sampled statistic with its NSE (omitted when the chain is shorter than
/// the HAC bandwidth).
fn test_draws(d: &DrawMatrix, spec: &RestrictionSpec, hac: HacConfig, level: f64) -> Result<TestReport> {
    let want_nse = d.n_draws() > hac.lag_q;
    let (stat, nse) = match spec {
        RestrictionSpec::PointNull { selector, theta0 } => (
            point_null_statistic(d, selector, theta0)?,
            want_nse.then(|| point_null_nse(d, selector, theta0, hac)).transpose()?,
        ),
        RestrictionSpec::Linear { r_mat, r_vec } => (
            restriction_statistic(d, r_mat, r_vec)?,
            want_nse.then(|| restriction_nse(d, r_mat, r_vec, hac)).transpose()?,
        ),
    };
    Ok(make_report(stat, spec.df(), nse, level))
}

fn decision(r: &TestReport) -> Outcome {
    if r.reject {
        Outcome::Reject
    } else {
        Outcome::Accept
    }
}

fn print_report(r: &TestReport) {
    println!("statistic={}", r.statistic);
    println!("df={}", r.df);
    match r.nse {
        Some(n) => println!("nse={n}"),
        None => println!("nse=NA"),
    }
    println!("p_value={}", r.p_value);
    println!("threshold={}", r.threshold);
    println!("decision={}", if r.reject { "reject" } else { "accept" });
}

fn print_means(d: &DrawMatrix) {
    for (i, n) in d.names().iter().enumerate() {
        let col = d.column(i);
        println!("mean_{n}={}", col.iter().sum::<f64>() / col.len() as f64);
    }
}

fn load_plan(
    path: Option<&Path>,
    default: ExperimentPlan,
    g: &Global,
    reps: Option<usize>,
) -> Result<ExperimentPlan> {
    let mut plan = match path {
        Some(p) => ExperimentPlan::read(p)?,
        None => default,
    };
    if let Some(s) = g.seed {
        plan.seed.base_seed = s;
    }
    if let Some(r) = reps {
        plan.reps = r;
    }
    if let Some(p) = g.parallelism {
        plan.parallelism = p;
    }
    plan.validate()?;
    Ok(plan)
}

fn run_study(
    plan: &ExperimentPlan,
    csv: &Path,
    f: fn(&ExperimentPlan) -> Result<ResultTable>,
) -> Result<Outcome> {
    let start = Instant::now();
    let table = f(plan)?;
    if let Some(dir) = csv.parent() {
        std::fs::create_dir_all(dir)?;
    }
    harness::write_results(&table, csv, Some(plan), start.elapsed().as_secs_f64())?;
    for r in &table.rows {
        println!(
            "{:<22} {:<15} {:<5} rate={:.4} mcse={:.4} reps={}",
            r.design, r.hypothesis, r.statistic, r.rate, r.mcse, r.reps
        );
    }
    println!("wrote {}", csv.display());
    Ok(Outcome::Done)
}
