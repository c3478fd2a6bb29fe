//! Multi-seed experiment runner, on-disk reports and cross-engine comparison.
//!
//! Output layout under the output directory:
//!
//! ```text
//! <out>/<engine>/report.txt              mean and std of each indicator over seeds
//! <out>/<engine>/series_quality.csv      20-step quality means, one column per seed
//! <out>/<engine>/series_revenue.csv      20-step revenue means, one column per seed
//! <out>/<engine>/seed-<s>/report.txt     indicators of one seed
//! <out>/<engine>/seed-<s>/series_quality.csv
//! <out>/<engine>/seed-<s>/series_revenue.csv
//! <out>/<engine>/seed-<s>/transactions.log
//! ```
//!
//! Report files are `key = value` text readable as flat TOML.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;

use crate::config::{parse_table, read_text, UtilityWeights};
use crate::error::{Error, Result};
use crate::market::{write_transaction_log, World};
use crate::metrics::{ScenarioReport, SERIES_WINDOW};
use crate::num::Scalar;
use crate::reputation::Engine;
use crate::types::{GlobalParams, Transaction};

pub const DEFAULT_SEED_COUNT: u64 = 10;
pub const DEFAULT_OUT_DIR: &str = "out";

/// Config keys consumed by the runner rather than [`GlobalParams`].
const SCENARIO_KEYS: [&str; 4] = ["engine", "seeds", "out", "irl_weights"];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub engines: Vec<Engine>,
    pub params: GlobalParams<T>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Utility-weights file whose `l, o, u` replace the configured ones.
    pub irl_weights: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_engines(value: &toml::Value) -> Result<Vec<Engine>> {
    match value {
        toml::Value::String(s) if s.eq_ignore_ascii_case("all") => Ok(Engine::ALL.to_vec()),
        toml::Value::String(s) => Ok(vec![s.parse()?]),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| config_err("engine list entries must be strings"))?
                    .parse()
            })
            .collect(),
        _ => Err(config_err("engine must be a name or a list of names")),
    }
}

fn parse_seeds(value: &toml::Value, first: u64) -> Result<Vec<u64>> {
    match value {
        toml::Value::Integer(n) if *n > 0 => Ok((first..first + *n as u64).collect()),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v.as_integer() {
                Some(s) if s >= 0 => Ok(s as u64),
                _ => Err(config_err("seed list entries must be non-negative integers")),
            })
            .collect(),
        _ => Err(config_err("seeds must be a positive count or a list of seeds")),
    }
}

impl<T: Scalar + DeserializeOwned> ScenarioConfig<T> {
    /// Parses a config file body. Relative paths resolve against `base`.
    pub fn from_config_str(text: &str, base: &Path) -> Result<Self> {
        let mut table = parse_table(text)?;
        let scenario: Vec<(String, toml::Value)> = SCENARIO_KEYS
            .iter()
            .filter_map(|k| table.remove(*k).map(|v| (k.to_string(), v)))
            .collect();
        let mut params = GlobalParams::<T>::from_table(table)?;
        let mut config = Self {
            engines: Engine::ALL.to_vec(),
            seeds: (params.rng_seed..params.rng_seed + DEFAULT_SEED_COUNT).collect(),
            params: params.clone(),
            out_dir: base.join(DEFAULT_OUT_DIR),
            irl_weights: None,
        };
        for (key, value) in scenario {
            match key.as_str() {
                "engine" => config.engines = parse_engines(&value)?,
                "seeds" => config.seeds = parse_seeds(&value, params.rng_seed)?,
                "out" => {
                    let dir = value.as_str().ok_or_else(|| config_err("out must be a path"))?;
                    config.out_dir = base.join(dir);
                }
                "irl_weights" => {
                    let file = value
                        .as_str()
                        .ok_or_else(|| config_err("irl_weights must be a path"))?;
                    config.irl_weights = Some(base.join(file));
                }
                _ => unreachable!(),
            }
        }
        if let Some(path) = &config.irl_weights {
            UtilityWeights::load(path)?.apply(&mut params);
            config.params = params;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_config_str(&read_text(path)?, base)
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn new(params: GlobalParams<T>, engines: Vec<Engine>, seeds: Vec<u64>, out_dir: PathBuf) -> Self {
        Self {
            engines,
            params,
            seeds,
            out_dir,
            irl_weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.engines.is_empty() {
            return Err(config_err("no engine selected"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seed list is empty"));
        }
        self.params.validate()
    }

    /// Replaces the seeds with `n` consecutive seeds starting at the first one.
    pub fn set_seed_count(&mut self, n: u64) {
        let first = self.seeds.first().copied().unwrap_or(self.params.rng_seed);
        self.seeds = (first..first + n).collect();
    }
}

/// Outcome of one `(engine, seed)` world.
#[derive(Debug, Clone)]
pub struct SeedRun<T> {
    pub engine: Engine,
    pub seed: u64,
    pub report: ScenarioReport<T>,
    pub transactions: Vec<Transaction<T>>,
    /// Recomputes where PageRank stopped at its iteration cap.
    pub pagerank_nonconverged: usize,
}

/// Runs one world to completion.
pub fn run_seed<T: Scalar>(params: &GlobalParams<T>, engine: Engine, seed: u64) -> SeedRun<T> {
    let mut params = params.clone();
    params.rng_seed = seed;
    let mut world = World::new(params.clone(), engine);
    let steps = world.run();
    let report = ScenarioReport::from_run(world.ledger(), &steps, &params);
    SeedRun {
        engine,
        seed,
        report,
        pagerank_nonconverged: world.reputation().pagerank_nonconverged(),
        transactions: world.ledger().transactions.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    Welfare,
    AvgQuality,
    SuccessRate,
    MeanPrice,
    PlatformRevenue,
    Gini,
    PqSlope,
}

impl Indicator {
    pub const ALL: [Indicator; 7] = [
        Indicator::Welfare,
        Indicator::AvgQuality,
        Indicator::SuccessRate,
        Indicator::MeanPrice,
        Indicator::PlatformRevenue,
        Indicator::Gini,
        Indicator::PqSlope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Welfare => "welfare",
            Indicator::AvgQuality => "avg_quality",
            Indicator::SuccessRate => "success_rate",
            Indicator::MeanPrice => "mean_price",
            Indicator::PlatformRevenue => "platform_revenue",
            Indicator::Gini => "gini",
            Indicator::PqSlope => "pq_slope",
        }
    }

    /// `None` when undefined (price–quality slope with too few trades).
    pub fn value<T: Scalar>(self, r: &ScenarioReport<T>) -> Option<f64> {
        let v = match self {
            Indicator::Welfare => r.welfare,
            Indicator::AvgQuality => r.avg_quality,
            Indicator::SuccessRate => r.success_rate,
            Indicator::MeanPrice => r.mean_price,
            Indicator::PlatformRevenue => r.platform_revenue,
            Indicator::Gini => r.gini,
            Indicator::PqSlope => r.pq_slope?,
        };
        Some(v.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    /// Seeds where the indicator was defined.
    pub n: usize,
}

impl Summary {
    /// Mean and sample standard deviation; NaN mean when `values` is empty.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

/// Per-engine aggregate over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub engine: String,
    pub seeds: Vec<u64>,
    pub indicators: Vec<(Indicator, Summary)>,
    pub warnings: usize,
}

impl Aggregate {
    pub fn from_reports<T: Scalar>(engine: &str, runs: &[(u64, &ScenarioReport<T>)], warnings: usize) -> Self {
        let indicators = Indicator::ALL
            .iter()
            .map(|&ind| {
                let values: Vec<f64> = runs.iter().filter_map(|(_, r)| ind.value(r)).collect();
                (ind, Summary::of(&values))
            })
            .collect();
        Self {
            engine: engine.to_string(),
            seeds: runs.iter().map(|r| r.0).collect(),
            indicators,
            warnings,
        }
    }

    pub fn mean(&self, indicator: Indicator) -> f64 {
        self.indicators
            .iter()
            .find(|(i, _)| *i == indicator)
            .map_or(f64::NAN, |(_, s)| s.mean)
    }

    pub fn to_report_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "engine = \"{}\"", self.engine);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = [{}]", seeds.join(", "));
        let _ = writeln!(out, "warnings = {}", self.warnings);
        for (ind, s) in &self.indicators {
            let _ = writeln!(out, "{}_mean = {}", ind.name(), fmt_float(s.mean));
            let _ = writeln!(out, "{}_std = {}", ind.name(), fmt_float(s.std));
            let _ = writeln!(out, "{}_n = {}", ind.name(), s.n);
        }
        out
    }

    pub fn from_report_str(text: &str) -> Result<Self> {
        let table = parse_table(text)?;
        let engine = table
            .get("engine")
            .and_then(toml::Value::as_str)
            .ok_or_else(|| config_err("report has no engine"))?
            .to_string();
        let seeds = match table.get("seeds") {
            Some(v) => parse_seeds(v, 0)?,
            None => Vec::new(),
        };
        let int = |key: &str| table.get(key).and_then(toml::Value::as_integer).unwrap_or(0) as usize;
        let float = |key: &str| -> Result<f64> {
            match table.get(key) {
                Some(toml::Value::Float(f)) => Ok(*f),
                Some(toml::Value::Integer(i)) => Ok(*i as f64),
                _ => Err(config_err(format!("report lacks {key}"))),
            }
        };
        let mut indicators = Vec::new();
        for ind in Indicator::ALL {
            let name = ind.name();
            indicators.push((
                ind,
                Summary {
                    mean: float(&format!("{name}_mean"))?,
                    std: float(&format!("{name}_std"))?,
                    n: int(&format!("{name}_n")),
                },
            ));
        }
        Ok(Self {
            engine,
            seeds,
            indicators,
            warnings: int("warnings"),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_report_str(&read_text(path)?)
    }
}

/// Float rendering that always reads back as a TOML float.
fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        let s = v.to_string();
        if s.contains('.') { s } else { format!("{s}.0") }
    }
}

/// `key = value` text of one seed's indicators.
pub fn seed_report_string<T: Scalar>(run: &SeedRun<T>) -> String {
    let r = &run.report;
    let mut out = String::new();
    let _ = writeln!(out, "engine = \"{}\"", run.engine.name());
    let _ = writeln!(out, "seed = {}", run.seed);
    let _ = writeln!(out, "n_transactions = {}", r.n_transactions);
    for ind in Indicator::ALL {
        let _ = writeln!(out, "{} = {}", ind.name(), fmt_float(ind.value(r).unwrap_or(f64::NAN)));
    }
    let intercept = r.pq_intercept.map_or(f64::NAN, |v| v.as_f64());
    let _ = writeln!(out, "pq_intercept = {}", fmt_float(intercept));
    let _ = writeln!(out, "pagerank_nonconverged = {}", run.pagerank_nonconverged);
    out
}

/// Window table; each column is one series.
fn series_csv(headers: &[String], columns: &[Vec<f64>]) -> String {
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("window,first_step,last_step");
    for h in headers {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for w in 0..rows {
        let _ = write!(out, "{w},{},{}", w * SERIES_WINDOW + 1, (w + 1) * SERIES_WINDOW);
        for c in columns {
            out.push(',');
            out.push_str(&c.get(w).map_or(String::new(), |v| fmt_float(*v)));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn write_seed_outputs<T: Scalar>(dir: &Path, run: &SeedRun<T>) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("report.txt"), seed_report_string(run))?;
    let value = ["value".to_string()];
    write_file(
        &dir.join("series_quality.csv"),
        series_csv(&value, &[to_f64(&run.report.quality_series)]),
    )?;
    write_file(
        &dir.join("series_revenue.csv"),
        series_csv(&value, &[to_f64(&run.report.revenue_series)]),
    )?;
    let path = dir.join("transactions.log");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_transaction_log(&run.transactions, std::io::BufWriter::new(file))
}

fn mean_column(columns: &[Vec<f64>]) -> Vec<f64> {
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    (0..rows)
        .map(|w| {
            let vals: Vec<f64> = columns.iter().filter_map(|c| c.get(w).copied()).collect();
            Summary::of(&vals).mean
        })
        .collect()
}

/// Results of one engine across all seeds.
#[derive(Debug, Clone)]
pub struct EngineOutcome<T> {
    pub engine: Engine,
    pub runs: Vec<SeedRun<T>>,
    pub aggregate: Aggregate,
    /// Human-readable non-convergence warnings.
    pub warnings: Vec<String>,
}

fn write_engine_outputs<T: Scalar>(dir: &Path, outcome: &EngineOutcome<T>) -> Result<()> {
    write_file(&dir.join("report.txt"), outcome.aggregate.to_report_string())?;
    let mut headers: Vec<String> = outcome.runs.iter().map(|r| format!("seed-{}", r.seed)).collect();
    headers.push("mean".into());
    for (file, pick) in [
        ("series_quality.csv", 0usize),
        ("series_revenue.csv", 1usize),
    ] {
        let mut cols: Vec<Vec<f64>> = outcome
            .runs
            .iter()
            .map(|r| {
                to_f64(if pick == 0 {
                    &r.report.quality_series
                } else {
                    &r.report.revenue_series
                })
            })
            .collect();
        cols.push(mean_column(&cols));
        write_file(&dir.join(file), series_csv(&headers, &cols))?;
    }
    Ok(())
}

/// Runs every `(engine, seed)` pair of the config, writes all outputs and
/// returns the per-engine results in config order.
pub fn run_scenario<T: Scalar>(config: &ScenarioConfig<T>) -> Result<Vec<EngineOutcome<T>>> {
    config.validate()?;
    create_dir(&config.out_dir)?;
    let jobs: Vec<(Engine, u64)> = config
        .engines
        .iter()
        .flat_map(|&e| config.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let runs: Vec<SeedRun<T>> = jobs
        .par_iter()
        .map(|&(engine, seed)| {
            let run = run_seed(&config.params, engine, seed);
            let dir = config.out_dir.join(engine.name()).join(format!("seed-{seed}"));
            write_seed_outputs(&dir, &run)?;
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::new();
    for &engine in &config.engines {
        let engine_runs: Vec<SeedRun<T>> = runs.iter().filter(|r| r.engine == engine).cloned().collect();
        let warnings: Vec<String> = engine_runs
            .iter()
            .filter(|r| r.pagerank_nonconverged > 0)
            .map(|r| {
                format!(
                    "{} seed {}: PageRank hit the iteration cap in {} recomputes",
                    engine, r.seed, r.pagerank_nonconverged
                )
            })
            .collect();
        let reports: Vec<(u64, &ScenarioReport<T>)> = engine_runs.iter().map(|r| (r.seed, &r.report)).collect();
        let aggregate = Aggregate::from_reports(engine.name(), &reports, warnings.len());
        let outcome = EngineOutcome {
            engine,
            aggregate,
            warnings,
            runs: engine_runs,
        };
        write_engine_outputs(&config.out_dir.join(engine.name()), &outcome)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Finds aggregate reports under `dir`: either `dir/report.txt` itself or
/// `dir/<engine>/report.txt` for each engine subdirectory, in name order.
pub fn find_aggregates(dir: impl AsRef<Path>) -> Result<Vec<Aggregate>> {
    let dir = dir.as_ref();
    let own = dir.join("report.txt");
    if own.is_file() {
        return Ok(vec![Aggregate::load(own)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.txt").is_file())
        .collect();
    subdirs.sort();
    subdirs.iter().map(|p| Aggregate::load(p.join("report.txt"))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub engine: String,
    /// Indicator means in [`Indicator::ALL`] order.
    pub values: Vec<f64>,
    /// 1 = highest value; ties share the best rank; undefined values rank last.
    pub ranks: Vec<usize>,
}

pub fn compare(aggregates: &[Aggregate]) -> Vec<ComparisonRow> {
    let values: Vec<Vec<f64>> = aggregates
        .iter()
        .map(|a| Indicator::ALL.iter().map(|&i| a.mean(i)).collect())
        .collect();
    let rank = |col: usize, v: f64| {
        if v.is_nan() {
            return 1 + values.iter().filter(|r| !r[col].is_nan()).count();
        }
        1 + values.iter().filter(|r| r[col] > v).count()
    };
    aggregates
        .iter()
        .zip(&values)
        .map(|(a, vals)| ComparisonRow {
            engine: a.engine.clone(),
            ranks: vals.iter().enumerate().map(|(c, &v)| rank(c, v)).collect(),
            values: vals.clone(),
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("engine");
    for ind in Indicator::ALL {
        let _ = write!(out, ",{0},{0}_rank", ind.name());
    }
    out.push('\n');
    for row in rows {
        out.push_str(&row.engine);
        for (v, r) in row.values.iter().zip(&row.ranks) {
            let _ = write!(out, ",{},{}", fmt_float(*v), r);
        }
        out.push('\n');
    }
    out
}

/// Fixed-width table with `value (rank)` cells.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{:<11}", "engine");
    for ind in Indicator::ALL {
        let _ = write!(out, " {:>22}", ind.name());
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<11}", row.engine);
        for (v, r) in row.values.iter().zip(&row.ranks) {
            let cell = format!("{} ({r})", fmt_cell(*v));
            let _ = write!(out, " {cell:>22}");
        }
        out.push('\n');
    }
    out
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}
