//! Seeded size/power studies and the closed-form normal-mean panel.
//!
//! Replication `i` of grid cell `c` draws from stream
//! `seed.stream_id + c·10⁶ + i`, so results depend only on the plan, never on
//! scheduling or the number of worker threads.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linreg::{analytic_t, design_hypotheses, ols_wald, posterior_nig, simulate_design, NigPrior};
use crate::lsv::{lsv_power_cell, LsvParams, LsvPriors, McmcConfig, RwScales};
use crate::normal::{closed_form_2log_bf, closed_form_t, closed_form_wald, ybar_from_wald, NormalMeanSetup};
use crate::statcore::{HacConfig, SeedSpec};
use crate::teststat::{chi2_report, make_report};

/// Stream offset between consecutive grid cells.
pub const CELL_STREAM_STRIDE: u64 = 1_000_000;
/// Cells abort when more than this fraction of replications fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Header of every results CSV.
pub const CSV_HEADER: &str = "design,hypothesis,statistic,rate,mcse,reps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linreg,
    Lsv,
    Normal,
}

/// One design point: `value` is γ for regression and ρ for the SV model,
/// `size` is the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub value: f64,
    pub size: usize,
}

/// Chain settings for SV cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(default)]
    pub rw_scales: RwScales,
}

impl Default for ChainPlan {
    fn default() -> Self {
        ChainPlan {
            n_iter: 6000,
            burn_in: 2000,
            thin: 2,
            rw_scales: RwScales::default(),
        }
    }
}

fn default_level() -> f64 {
    0.05
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: ModelKind,
    pub grid: Vec<GridPoint>,
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: SeedSpec,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub hac: HacConfig,
    #[serde(default)]
    pub mcmc: Option<ChainPlan>,
    #[serde(default)]
    pub priors: Option<LsvPriors>,
}

impl ExperimentPlan {
    /// γ ∈ {0, 0.1, 0.3, 0.5} × n ∈ {50, 100, 150}, 1000 replications.
    pub fn regression_default(seed: u64) -> Self {
        let mut grid = Vec::new();
        for gamma in [0.0, 0.1, 0.3, 0.5] {
            for n in [50, 100, 150] {
                grid.push(GridPoint { value: gamma, size: n });
            }
        }
        ExperimentPlan {
            model: ModelKind::Linreg,
            grid,
            reps: 1000,
            level: 0.05,
            seed: SeedSpec::new(seed, 0),
            parallelism: 1,
            hac: HacConfig::default(),
            mcmc: None,
            priors: None,
        }
    }

    /// ρ ∈ {0, −0.4} × T ∈ {1000, 1500, 2000}, 100 replications of short chains.
    pub fn volatility_default(seed: u64) -> Self {
        let mut grid = Vec::new();
        for t in [1000, 1500, 2000] {
            for rho in [0.0, -0.4] {
                grid.push(GridPoint { value: rho, size: t });
            }
        }
        ExperimentPlan {
            model: ModelKind::Lsv,
            grid,
            reps: 100,
            level: 0.05,
            seed: SeedSpec::new(seed, 0),
            parallelism: 1,
            hac: HacConfig::default(),
            mcmc: Some(ChainPlan::default()),
            priors: Some(LsvPriors::default()),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let plan: ExperimentPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::ConfigInvalid("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::ConfigInvalid(format!("level {} outside (0, 1)", self.level)));
        }
        if self.parallelism == 0 {
            return Err(Error::ConfigInvalid("parallelism must be at least 1".into()));
        }
        if self.reps as u64 >= CELL_STREAM_STRIDE {
            return Err(Error::ConfigInvalid(format!("reps must be below {CELL_STREAM_STRIDE}")));
        }
        Ok(())
    }

    /// SHA-256 of the plan's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("plan serializes");
        hex(&Sha256::digest(bytes))
    }

    fn cell_stream(&self, cell: usize) -> u64 {
        self.seed.stream_id + cell as u64 * CELL_STREAM_STRIDE
    }

    fn require(&self, model: ModelKind) -> Result<()> {
        self.validate()?;
        if self.model != model {
            return Err(Error::ConfigInvalid(format!(
                "plan is for {:?}, expected {:?}",
                self.model, model
            )));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub design: String,
    pub hypothesis: String,
    pub statistic: String,
    pub rate: f64,
    pub mcse: f64,
    pub reps: usize,
}

impl ResultRow {
    fn new(design: String, hypothesis: &str, statistic: &str, rejections: usize, reps: usize) -> Self {
        let rate = rejections as f64 / reps as f64;
        ResultRow {
            design,
            hypothesis: hypothesis.to_string(),
            statistic: statistic.to_string(),
            rate,
            mcse: (rate * (1.0 - rate) / reps as f64).sqrt(),
            reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, design: &str, hypothesis: &str, statistic: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.design == design && r.hypothesis == hypothesis && r.statistic == statistic)
    }
}

pub fn regression_design_label(gamma: f64, n: usize) -> String {
    format!("gamma={gamma};n={n}")
}

pub fn volatility_design_label(rho: f64, t: usize) -> String {
    format!("rho={rho};T={t}")
}

/// Successful replication outputs, in index order. Fails with the first
/// failing index once more than 1% of replications have failed.
pub(crate) fn collect_replications<T>(outcomes: Vec<Result<T>>) -> Result<Vec<T>> {
    let reps = outcomes.len();
    let mut ok = Vec::with_capacity(reps);
    let mut first_failure = None;
    let mut failures = 0usize;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert((i, e));
            }
        }
    }
    if failures as f64 > MAX_FAILURE_FRACTION * reps as f64 || ok.is_empty() {
        return Err(match first_failure {
            Some((index, source)) => Error::Replication { index, source: Box::new(source) },
            None => Error::InvalidInput("no replications to tally".into()),
        });
    }
    Ok(ok)
}

/// `(rejections, completed)` under the same failure budget.
pub(crate) fn tally_replications(outcomes: Vec<Result<bool>>) -> Result<(usize, usize)> {
    let ok = collect_replications(outcomes)?;
    Ok((ok.iter().filter(|r| **r).count(), ok.len()))
}

/// Regression size/power: for each `(γ, n)` cell and each of the four
/// hypotheses, the analytic statistic (calibrated as `df + χ²(df)`) and the
/// ML Wald statistic (`χ²(df)`).
pub fn run_table2(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.require(ModelKind::Linreg)?;
    let hyps = design_hypotheses();
    let pool = plan.pool()?;
    let mut rows = Vec::new();
    for (cell, gp) in plan.grid.iter().enumerate() {
        let stream0 = plan.cell_stream(cell);
        let outcomes: Vec<Result<Vec<(bool, bool)>>> = pool.install(|| {
            (0..plan.reps)
                .into_par_iter()
                .map(|i| {
                    let seed = SeedSpec::new(plan.seed.base_seed, stream0 + i as u64);
                    let data = simulate_design(gp.size, gp.value, seed)?;
                    let post = posterior_nig(&data, &NigPrior::weak(data.dim()))?;
                    hyps.iter()
                        .map(|(_, spec)| {
                            let t = analytic_t(&post, spec)?;
                            let w = ols_wald(&data, spec)?;
                            Ok((
                                make_report(t, spec.df(), None, plan.level).reject,
                                chi2_report(w, spec.df(), None, plan.level).reject,
                            ))
                        })
                        .collect()
                })
                .collect()
        });
        let done = collect_replications(outcomes)?;
        let design = regression_design_label(gp.value, gp.size);
        for (k, (label, _)) in hyps.iter().enumerate() {
            let t_rej = done.iter().filter(|v| v[k].0).count();
            let w_rej = done.iter().filter(|v| v[k].1).count();
            rows.push(ResultRow::new(design.clone(), label, "T", t_rej, done.len()));
            rows.push(ResultRow::new(design.clone(), label, "Wald", w_rej, done.len()));
        }
    }
    Ok(ResultTable { rows })
}

/// SV power study: one rejection rate of the `ρ = 0` test per `(ρ, T)` cell.
pub fn run_table3(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.require(ModelKind::Lsv)?;
    let chain = plan.mcmc.unwrap_or_default();
    let priors = plan.priors.unwrap_or_default();
    let pool = plan.pool()?;
    let mut rows = Vec::new();
    for (cell, gp) in plan.grid.iter().enumerate() {
        let cfg = McmcConfig {
            n_iter: chain.n_iter,
            burn_in: chain.burn_in,
            thin: chain.thin,
            rw_scales: chain.rw_scales,
            seed: SeedSpec::new(plan.seed.base_seed, plan.cell_stream(cell)),
            store_paths: false,
        };
        let params = LsvParams::simulation_design(gp.value);
        let out = pool.install(|| {
            lsv_power_cell(&params, gp.size, plan.reps, plan.level, &priors, &cfg, plan.hac)
        })?;
        rows.push(ResultRow::new(
            volatility_design_label(gp.value, gp.size),
            "rho=0",
            "T",
            out.rejections,
            out.completed,
        ));
    }
    Ok(ResultTable { rows })
}

/// Published normal-mean panel: `(n, Wald, [2logBF, T] informative, [2logBF, T] vague)`.
pub const NORMAL_PANEL: [(usize, f64, [f64; 2], [f64; 2]); 4] = [
    (10, 0.01, [9.96, 10.96], [-117.42, 1.01]),
    (100, 1.23, [11.12, 12.22], [-118.50, 2.23]),
    (1000, 11.32, [20.60, 22.30], [-110.72, 12.32]),
    (10000, 86.03, [93.58, 96.98], [-38.00, 87.03]),
];
/// Cells of the panel must match to this absolute tolerance.
pub const NORMAL_PANEL_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCell {
    pub prior: String,
    pub n: usize,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub pass: bool,
}

/// Recomputes the 24 cells of the normal-mean panel (σ² = 1, informative
/// prior N(0.1, 10⁻³), vague prior N(0, 10⁵⁰)) with ȳ backed out of the
/// Wald row.
pub fn run_table1() -> Vec<PanelCell> {
    let mut cells = Vec::with_capacity(24);
    for (prior, mu0, tau2) in [("informative", 0.1, 1e-3), ("vague", 0.0, 1e50)] {
        for &(n, wald, inf, vag) in &NORMAL_PANEL {
            let refs = if prior == "informative" { inf } else { vag };
            let s = NormalMeanSetup {
                n,
                ybar: ybar_from_wald(wald, n, 1.0),
                sigma2: 1.0,
                mu0,
                tau2,
            };
            for (quantity, value, reference) in [
                ("2logBF", closed_form_2log_bf(&s), refs[0]),
                ("T", closed_form_t(&s), refs[1]),
                ("Wald", closed_form_wald(&s), wald),
            ] {
                cells.push(PanelCell {
                    prior: prior.to_string(),
                    n,
                    quantity: quantity.to_string(),
                    value,
                    reference,
                    pass: (value - reference).abs() <= NORMAL_PANEL_TOL,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<SeedSpec>,
    pub plan_sha256: Option<String>,
    pub version: String,
    pub wall_time_secs: f64,
    pub csv_sha256: String,
    pub rows: usize,
}

/// `foo.csv` → `foo.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

pub fn results_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.design, r.hypothesis, r.statistic, r.rate, r.mcse, r.reps
        ));
    }
    out
}

/// Writes the CSV and a JSON manifest next to it. The CSV depends only on
/// the table; the manifest also records timing.
pub fn write_results(
    table: &ResultTable,
    path: &Path,
    plan: Option<&ExperimentPlan>,
    wall_time_secs: f64,
) -> Result<Manifest> {
    let csv = results_csv(table);
    std::fs::write(path, &csv)?;
    let manifest = Manifest {
        seed: plan.map(|p| p.seed),
        plan_sha256: plan.map(ExperimentPlan::hash),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs,
        csv_sha256: hex(&Sha256::digest(csv.as_bytes())),
        rows: table.rows.len(),
    };
    let mut f = File::create(manifest_path(path))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    Ok(manifest)
}

pub fn read_results(path: &Path) -> Result<ResultTable> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 1, column: 1, message: format!("{other:?}") },
    })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, column: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse { line: 1, column: 1, message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: 0, column: 0, message: e.to_string() })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |c: usize| -> Result<f64> {
            rec[c].parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("not a number: '{}'", &rec[c]),
            })
        };
        rows.push(ResultRow {
            design: rec[0].to_string(),
            hypothesis: rec[1].to_string(),
            statistic: rec[2].to_string(),
            rate: num(3)?,
            mcse: num(4)?,
            reps: num(5)? as usize,
        });
    }
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            grid: vec![GridPoint { value: 0.0, size: 50 }, GridPoint { value: 0.3, size: 60 }],
            reps: 40,
            ..ExperimentPlan::regression_default(11)
        }
    }

    #[test]
    fn smoke_cell_single_rep() {
        let plan = ExperimentPlan { reps: 1, ..small_plan() };
        let t = run_table2(&plan).unwrap();
        assert_eq!(t.rows.len(), 16);
        for r in &t.rows {
            assert!(r.rate == 0.0 || r.rate == 1.0);
            assert_eq!(r.reps, 1);
            assert_eq!(r.mcse, 0.0);
        }
    }

    #[test]
    fn parallel_invariance() {
        let a = run_table2(&small_plan()).unwrap();
        let b = run_table2(&ExperimentPlan { parallelism: 3, ..small_plan() }).unwrap();
        assert_eq!(a, b);
        assert!(a.find("gamma=0.3;n=60", "beta4=0", "T").unwrap().rate > 0.9);
    }

    #[test]
    fn wrong_model_rejected() {
        let plan = ExperimentPlan { model: ModelKind::Lsv, ..small_plan() };
        assert!(matches!(run_table2(&plan), Err(Error::ConfigInvalid(_))));
        assert!(matches!(run_table3(&small_plan()), Err(Error::ConfigInvalid(_))));
        let plan = ExperimentPlan { level: 1.0, ..small_plan() };
        assert!(run_table2(&plan).is_err());
    }

    #[test]
    fn failure_budget() {
        let mut outcomes: Vec<Result<bool>> = (0..200).map(|i| Ok(i % 2 == 0)).collect();
        outcomes[7] = Err(Error::ConfigInvalid("x".into()));
        outcomes[9] = Err(Error::ConfigInvalid("y".into()));
        assert_eq!(tally_replications(outcomes).unwrap(), (100, 198));
        let mut outcomes: Vec<Result<bool>> = (0..200).map(|_| Ok(true)).collect();
        for i in [3, 5, 8] {
            outcomes[i] = Err(Error::ConfigInvalid("bad".into()));
        }
        match tally_replications(outcomes) {
            Err(Error::Replication { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn panel_shape() {
        let cells = run_table1();
        assert_eq!(cells.len(), 24);
        let t = cells.iter().find(|c| c.prior == "informative" && c.n == 100 && c.quantity == "T").unwrap();
        assert!(t.pass && (t.value - 12.22).abs() < 0.02);
        for n in [10, 100, 1000, 10000] {
            let w: Vec<f64> = cells
                .iter()
                .filter(|c| c.n == n && c.quantity == "Wald")
                .map(|c| c.value)
                .collect();
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn results_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_results(&ResultTable::default(), &p, None, 0.0).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(manifest_path(&p).exists());

        let t = run_table2(&small_plan()).unwrap();
        let m = write_results(&t, &p, Some(&small_plan()), 1.5).unwrap();
        assert_eq!(read_results(&p).unwrap(), t);
        assert_eq!(m.rows, 16);
        assert_eq!(m.plan_sha256.unwrap().len(), 64);
    }

    #[test]
    fn plan_json_defaults() {
        let text = r#"{"model": "linreg", "grid": [{"value": 0.1, "size": 50}], "reps": 10,
                       "seed": {"base_seed": 3, "stream_id": 0}}"#;
        let plan: ExperimentPlan = serde_json::from_str(text).unwrap();
        assert_eq!(plan.level, 0.05);
        assert_eq!(plan.parallelism, 1);
        assert_eq!(plan.hac.lag_q, 10);
        assert_eq!(plan.hash(), plan.clone().hash());
    }
}
