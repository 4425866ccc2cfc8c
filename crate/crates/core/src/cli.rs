//! Command-line front end: `paths`, `replay`, `run` and `sweep`.
//!
//! Every command writes into the output directory and drops the resolved
//! configuration next to its files as `config.toml`; JSON outputs also embed
//! it under `config`. Either form can be passed back via `--config`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RawConfig, RunConfig, DEFAULT_SCENARIOS, DEFAULT_SWEEP_SCENARIOS};
use crate::error::{Error, Result};
use crate::fbm::GeneratorKind;
use crate::ledger::run_discrete_strategy;
use crate::market::MarketSimulator;
use crate::montecarlo::{histogram, sweep, ExperimentSummary, ScenarioOutcome, SweepRow};
use crate::strategy::PowerOrder;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "fracarb", version, about = "Arbitrage strategies in simulated fractional Black-Scholes markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write simulated fBm (and optionally price) paths as CSV.
    Paths {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of scenarios to write.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Also write price paths.
        #[arg(long)]
        prices: bool,
    },
    /// Run one scenario and write its full trading ledger.
    Replay {
        #[command(flatten)]
        common: CommonArgs,
        /// Scenario index, below `n_scenarios`.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Run an experiment and write summary statistics and histograms.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Histogram bins per outcome.
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Run one experiment per grid point of the sweep axis.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Flags mirroring the config keys; each overrides the file value.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML config file, or a JSON document written by a previous run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `shiryaev` (one asset) or `salopek` (two or more).
    #[arg(long)]
    pub strategy: Option<String>,
    /// Position scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Salopek short-leg power order; accepts `-inf`.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<PowerOrder>,
    /// Salopek long-leg power order; accepts `inf`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<PowerOrder>,
    /// Drift of every asset.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Volatility of every asset.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Hurst index of every asset.
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Initial price of every asset.
    #[arg(long)]
    pub s0: Option<f64>,
    /// Horizon in years.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Trading periods over the horizon.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Proportional cost in percent.
    #[arg(long)]
    pub p1: Option<f64>,
    /// Minimum fee per trade.
    #[arg(long)]
    pub p2: Option<f64>,
    /// Scenarios per experiment.
    #[arg(long)]
    pub n_scenarios: Option<usize>,
    /// fBm generator: `spectral` or `exact`.
    #[arg(long)]
    pub generator: Option<GeneratorKind>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Sweep axis name.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<PowerOrder>>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    fn flags(&self) -> RawConfig {
        RawConfig {
            strategy: self.strategy.clone(),
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            sigma: self.sigma,
            hurst: self.hurst,
            s0: self.s0,
            horizon: self.horizon,
            periods: self.periods,
            p1: self.p1,
            p2: self.p2,
            n_scenarios: self.n_scenarios,
            generator: self.generator,
            seed: self.seed,
            output: self.output.clone(),
            assets: None,
            sweep: None,
        }
    }

    /// File values, then flags, then defaults.
    pub fn resolve(&self, default_scenarios: usize) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let mut raw = base.overlay(self.flags());
        if let Some(axis) = &self.axis {
            let sweep = raw.sweep.get_or_insert_with(Default::default);
            if sweep.axis != *axis {
                sweep.values = None;
                sweep.pairs = None;
            }
            sweep.axis = axis.clone();
        }
        if let Some(values) = &self.values {
            let Some(sweep) = raw.sweep.as_mut() else {
                return Err(Error::config("values", "--values needs a sweep axis"));
            };
            sweep.values = Some(values.clone());
            sweep.pairs = None;
        }
        raw.resolve(default_scenarios)
    }
}

/// Runs a parsed command line; returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let common = match &cli.command {
        Command::Paths { common, .. }
        | Command::Replay { common, .. }
        | Command::Run { common, .. }
        | Command::Sweep { common } => common,
    };
    let default_scenarios = match cli.command {
        Command::Sweep { .. } => DEFAULT_SWEEP_SCENARIOS,
        _ => DEFAULT_SCENARIOS,
    };
    let config = common.resolve(default_scenarios)?;
    let work = || match &cli.command {
        Command::Paths { count, prices, .. } => cmd_paths(&config, *count, *prices),
        Command::Replay { index, .. } => cmd_replay(&config, *index),
        Command::Run { bins, .. } => cmd_run(&config, *bins),
        Command::Sweep { .. } => cmd_sweep(&config),
    };
    match common.threads {
        Some(0) => Err(Error::config("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn prepare_output(config: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&config.output)?;
    let path = config.output.join(CONFIG_FILE);
    fs::write(&path, config.to_toml_string())?;
    Ok(path)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config: RawConfig,
    results: &'a T,
}

fn write_json<T: Serialize>(path: &Path, config: &RunConfig, results: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut out,
        &Document {
            config: config.to_raw(),
            results,
        },
    )?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Writes `count` scenarios: one `fbm_<i>.csv` per scenario with a value
/// column per asset, and `prices_<i>.csv` when `prices` is set.
pub fn cmd_paths(config: &RunConfig, count: usize, prices: bool) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut written = vec![prepare_output(config)?];
    let simulator = MarketSimulator::new(config.setup.market.clone(), config.setup.generator)?;
    let d = config.setup.market.n_assets();
    for i in 0..count {
        let scenario = simulator.scenario(i as u64);
        let mut tables = vec![("fbm", "value", &scenario.fbm_values)];
        if prices {
            tables.push(("prices", "S", &scenario.prices));
        }
        for (stem, column, rows) in tables {
            let path = config.output.join(format!("{stem}_{i}.csv"));
            let mut w = csv_writer(&path)?;
            let mut header = vec!["t".to_string()];
            header.extend((1..=d).map(|j| if d == 1 && stem == "fbm" { column.to_string() } else { format!("{column}{j}") }));
            w.write_record(&header)?;
            for (n, t) in scenario.times.iter().enumerate() {
                let mut rec = vec![t.to_string()];
                rec.extend(rows.iter().map(|r| r[n].to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes the ledger of scenario `index` to `ledger_<index>.csv`.
pub fn cmd_replay(config: &RunConfig, index: u64) -> Result<Vec<PathBuf>> {
    let n = config.setup.n_scenarios as u64;
    if index >= n {
        return Err(Error::config("index", format!("must be below n_scenarios = {n}, got {index}")));
    }
    let simulator = MarketSimulator::new(config.setup.market.clone(), config.setup.generator)?;
    let scenario = simulator.scenario(index);
    let ledger = run_discrete_strategy(&scenario, &config.setup.strategy, config.setup.costs)?;
    let mut written = vec![prepare_output(config)?];
    let path = config.output.join(format!("ledger_{index}.csv"));
    let mut out = BufWriter::new(File::create(&path)?);
    ledger.write_csv(&scenario, &mut out)?;
    out.flush()?;
    written.push(path);
    Ok(written)
}

/// Writes `stats.json`, `outcomes.csv` and one `hist_<field>.csv` per field.
pub fn cmd_run(config: &RunConfig, bins: usize) -> Result<Vec<PathBuf>> {
    let experiment = config.setup.run()?;
    let mut written = vec![prepare_output(config)?];

    let path = config.output.join("stats.json");
    write_json(&path, config, &experiment.summary)?;
    written.push(path);

    let path = config.output.join("outcomes.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["scenario", "V_Phi", "V_Psi", "m", "V_Psi_minus_V_Phi"])?;
    for (i, o) in experiment.outcomes.iter().enumerate() {
        w.write_record(&[
            i.to_string(),
            o.terminal_discrete.to_string(),
            o.terminal_continuous.to_string(),
            o.running_min.to_string(),
            o.account_drain.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let fields: [(&str, fn(&ScenarioOutcome) -> f64); 4] = [
        ("terminal_discrete", |o| o.terminal_discrete),
        ("terminal_continuous", |o| o.terminal_continuous),
        ("running_min", |o| o.running_min),
        ("account_drain", |o| o.account_drain),
    ];
    for (name, f) in fields {
        let path = config.output.join(format!("hist_{name}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["left", "right", "count"])?;
        for b in histogram(&experiment.column(f), bins)? {
            w.write_record(&[b.left.to_string(), b.right.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

const STAT_COLUMNS: [&str; 9] = [
    "mean",
    "stdev",
    "min",
    "max",
    "q05",
    "median",
    "q95",
    "loss_probability",
    "n_scenarios",
];

fn stat_values(summary: &ExperimentSummary) -> Vec<String> {
    summary
        .fields()
        .iter()
        .flat_map(|(_, s)| {
            [s.mean, s.stdev, s.min, s.max, s.q05, s.median, s.q95, s.loss_probability]
                .map(|v| v.to_string())
                .into_iter()
                .chain(std::iter::once(s.n_scenarios.to_string()))
        })
        .collect()
}

/// Writes `sweep.csv` (one row per grid point) and `sweep.json`.
pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let axis = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep.axis", "the sweep command needs a sweep axis"))?;
    let rows: Vec<SweepRow> = sweep(&config.setup, axis)?;
    let mut written = vec![prepare_output(config)?];

    let path = config.output.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    let mut header: Vec<String> = axis.coordinate_names().iter().map(|s| s.to_string()).collect();
    for (field, _) in rows[0].summary.fields() {
        header.extend(STAT_COLUMNS.iter().map(|c| format!("{field}_{c}")));
    }
    w.write_record(&header)?;
    for row in &rows {
        let mut rec: Vec<String> = row.point.coordinates.iter().map(|c| c.to_string()).collect();
        rec.extend(stat_values(&row.summary));
        w.write_record(&rec)?;
    }
    w.flush()?;
    written.push(path);

    let path = config.output.join("sweep.json");
    write_json(&path, config, &rows)?;
    written.push(path);
    Ok(written)
}
