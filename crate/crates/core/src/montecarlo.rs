//! Monte Carlo experiments, summary statistics and parameter sweeps.
//!
//! Scenario `i` always uses path index `i`, so every grid point of a sweep
//! sees the same random numbers. Work is spread over the rayon pool; results
//! are collected in index order and reduced with compensated sums, which
//! makes them independent of the worker count.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::GeneratorKind;
use crate::ledger::{run_discrete_strategy, CostSchedule};
pub use crate::ledger::running_minimum;
use crate::market::{MarketConfig, MarketSimulator};
use crate::strategy::{PowerOrder, StrategySpec};

/// Trading periods per year used when a sweep changes the horizon.
pub const PERIODS_PER_YEAR: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    /// `V_T^Φ`
    pub terminal_discrete: f64,
    /// `V_T^Ψ`
    pub terminal_continuous: f64,
    /// `m_T`
    pub running_min: f64,
    /// `V_T^Ψ − V_T^Φ`
    pub account_drain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub stdev: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub loss_probability: f64,
    pub n_scenarios: usize,
}

impl SummaryStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let sorted = sorted_copy(samples)?;
        let n = sorted.len();
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let stdev = if n > 1 {
            (compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            stdev,
            min: sorted[0],
            max: sorted[n - 1],
            q05: quantile_sorted(&sorted, 0.05),
            median: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
            loss_probability: loss_probability(samples)?,
            n_scenarios: n,
        })
    }

    pub fn standard_error(&self) -> f64 {
        self.stdev / (self.n_scenarios as f64).sqrt()
    }
}

/// Summaries of the four outcome fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub terminal_discrete: SummaryStats,
    pub terminal_continuous: SummaryStats,
    pub running_min: SummaryStats,
    pub account_drain: SummaryStats,
}

impl ExperimentSummary {
    pub fn from_outcomes(outcomes: &[ScenarioOutcome]) -> Result<Self> {
        let field = |f: fn(&ScenarioOutcome) -> f64| -> Result<SummaryStats> {
            SummaryStats::from_samples(&outcomes.iter().map(f).collect::<Vec<_>>())
        };
        Ok(Self {
            terminal_discrete: field(|o| o.terminal_discrete)?,
            terminal_continuous: field(|o| o.terminal_continuous)?,
            running_min: field(|o| o.running_min)?,
            account_drain: field(|o| o.account_drain)?,
        })
    }

    /// `(name, stats)` pairs in output order.
    pub fn fields(&self) -> [(&'static str, &SummaryStats); 4] {
        [
            ("terminal_discrete", &self.terminal_discrete),
            ("terminal_continuous", &self.terminal_continuous),
            ("running_min", &self.running_min),
            ("account_drain", &self.account_drain),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub outcomes: Vec<ScenarioOutcome>,
    pub summary: ExperimentSummary,
}

impl Experiment {
    pub fn column(&self, f: fn(&ScenarioOutcome) -> f64) -> Vec<f64> {
        self.outcomes.iter().map(f).collect()
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub market: MarketConfig,
    pub strategy: StrategySpec,
    pub costs: CostSchedule,
    pub n_scenarios: usize,
    pub generator: GeneratorKind,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.strategy.validate()?;
        self.strategy.check_dimension(self.market.n_assets())?;
        self.costs.validate()?;
        if self.n_scenarios == 0 {
            return Err(Error::domain("n_scenarios must be at least 1"));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Experiment> {
        run_experiment(&self.market, &self.strategy, self.costs, self.n_scenarios, self.generator)
    }
}

/// Simulates scenarios `0 … n_scenarios − 1` and runs the strategy on each.
pub fn run_experiment(
    market: &MarketConfig,
    spec: &StrategySpec,
    p: CostSchedule,
    n_scenarios: usize,
    kind: GeneratorKind,
) -> Result<Experiment> {
    if n_scenarios == 0 {
        return Err(Error::domain("n_scenarios must be at least 1"));
    }
    spec.validate()?;
    spec.check_dimension(market.n_assets())?;
    p.validate()?;
    let simulator = MarketSimulator::new(market.clone(), kind)?;
    let outcomes = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|i| {
            let scenario = simulator.scenario(i);
            let ledger = run_discrete_strategy(&scenario, spec, p)?;
            let discrete = ledger.terminal_value();
            let continuous = ledger.terminal_continuous();
            Ok(ScenarioOutcome {
                terminal_discrete: discrete,
                terminal_continuous: continuous,
                running_min: ledger.min_value(),
                account_drain: continuous - discrete,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ExperimentSummary::from_outcomes(&outcomes)?;
    Ok(Experiment { outcomes, summary })
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::domain("statistic of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Linear-interpolation quantile at position `q (n − 1)` of the sorted sample.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level must be in [0, 1], got {q}")));
    }
    Ok(quantile_sorted(&sorted_copy(samples)?, q))
}

/// Share of strictly negative samples.
pub fn loss_probability(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("loss probability of an empty sample"));
    }
    Ok(samples.iter().filter(|&&x| x < 0.0).count() as f64 / samples.len() as f64)
}

/// Neumaier summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
pub fn histogram(samples: &[f64], n_bins: usize) -> Result<Vec<HistogramBin>> {
    if n_bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    let sorted = sorted_copy(samples)?;
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &x in samples {
        let k = if width > 0.0 {
            (((x - lo) / width).floor() as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == n_bins { hi } else { lo + (k + 1) as f64 * width },
            count,
        })
        .collect())
}

/// A sweep dimension and its grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Drift(Vec<f64>),
    Volatility(Vec<f64>),
    Hurst(Vec<f64>),
    /// `(H¹, H²)` with `H¹ ≤ H²`.
    HurstPair(Vec<(f64, f64)>),
    AlphaBeta(Vec<(PowerOrder, PowerOrder)>),
    /// Horizons in years; the period count follows as `round(250 T)`.
    Horizon(Vec<f64>),
    Periods(Vec<usize>),
    /// Proportional rates in percent.
    ProportionalCost(Vec<f64>),
    MinimumFee(Vec<f64>),
}

pub const AXIS_NAMES: [&str; 9] = [
    "drift",
    "volatility",
    "hurst",
    "hurst_pair",
    "alpha_beta",
    "horizon",
    "periods",
    "p1",
    "p2",
];

const HURST_SURFACE_GRID: [f64; 11] = [0.51, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99];

/// One grid point: the axis name plus the coordinate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub axis: String,
    pub coordinates: Vec<PowerOrder>,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coordinates.iter().map(|c| c.to_string()).collect();
        write!(f, "{}=({})", self.axis, parts.join(", "))
    }
}

impl SweepAxis {
    /// Builds an axis from its config name and grid. `values` feeds
    /// one-dimensional axes and `pairs` the two-dimensional ones; an absent
    /// grid falls back to [`SweepAxis::default_grid`].
    pub fn from_grid(
        name: &str,
        values: Option<&[PowerOrder]>,
        pairs: Option<&[(PowerOrder, PowerOrder)]>,
    ) -> Result<Self> {
        let key = "sweep.axis";
        let default = || Self::default_grid(name);
        let finite = |v: &PowerOrder| -> Result<f64> {
            match v {
                PowerOrder::Finite(x) => Ok(*x),
                other => Err(Error::config("sweep.values", format!("axis {name} needs finite values, got {other}"))),
            }
        };
        let ones = |values: &[PowerOrder]| values.iter().map(finite).collect::<Result<Vec<_>>>();
        let axis = match name {
            "drift" | "volatility" | "hurst" | "horizon" | "periods" | "p1" | "p2" => {
                if pairs.is_some() {
                    return Err(Error::config("sweep.pairs", format!("axis {name} takes `values`, not `pairs`")));
                }
                let Some(values) = values else { return default() };
                let v = ones(values)?;
                match name {
                    "drift" => SweepAxis::Drift(v),
                    "volatility" => SweepAxis::Volatility(v),
                    "hurst" => SweepAxis::Hurst(v),
                    "horizon" => SweepAxis::Horizon(v),
                    "p1" => SweepAxis::ProportionalCost(v),
                    "p2" => SweepAxis::MinimumFee(v),
                    _ => SweepAxis::Periods(
                        v.iter()
                            .map(|&x| {
                                if x >= 1.0 && x.fract() == 0.0 {
                                    Ok(x as usize)
                                } else {
                                    Err(Error::config("sweep.values", format!("period counts must be positive integers, got {x}")))
                                }
                            })
                            .collect::<Result<_>>()?,
                    ),
                }
            }
            "hurst_pair" | "alpha_beta" => {
                if values.is_some() {
                    return Err(Error::config("sweep.values", format!("axis {name} takes `pairs`, not `values`")));
                }
                let Some(pairs) = pairs else { return default() };
                if name == "alpha_beta" {
                    SweepAxis::AlphaBeta(pairs.to_vec())
                } else {
                    SweepAxis::HurstPair(
                        pairs
                            .iter()
                            .map(|(a, b)| Ok((finite(a)?, finite(b)?)))
                            .collect::<Result<_>>()?,
                    )
                }
            }
            _ => {
                return Err(Error::config(
                    key,
                    format!("unknown sweep axis {name:?}; expected one of {}", AXIS_NAMES.join(", ")),
                ))
            }
        };
        axis.check()?;
        Ok(axis)
    }

    /// Default grid for each axis name.
    pub fn default_grid(name: &str) -> Result<Self> {
        Ok(match name {
            "drift" => SweepAxis::Drift(vec![-0.2, -0.1, 0.0, 0.1, 0.2]),
            "volatility" => SweepAxis::Volatility(vec![0.05, 0.1, 0.15]),
            "hurst" => SweepAxis::Hurst(vec![0.51, 0.55, 0.6, 0.65, 0.7]),
            "hurst_pair" => {
                let mut pairs = Vec::new();
                for (i, &h1) in HURST_SURFACE_GRID.iter().enumerate() {
                    for &h2 in &HURST_SURFACE_GRID[i..] {
                        pairs.push((h1, h2));
                    }
                }
                SweepAxis::HurstPair(pairs)
            }
            "alpha_beta" => {
                let mut pairs = Vec::new();
                for alpha in (-30..30).step_by(5) {
                    for beta in ((alpha + 5)..=30).step_by(5) {
                        pairs.push((PowerOrder::Finite(alpha as f64), PowerOrder::Finite(beta as f64)));
                    }
                }
                pairs.push((PowerOrder::MinusInfinity, PowerOrder::PlusInfinity));
                SweepAxis::AlphaBeta(pairs)
            }
            "horizon" => SweepAxis::Horizon(vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]),
            "periods" => SweepAxis::Periods(vec![250, 125, 50, 25, 12]),
            "p1" | "p2" => {
                return Err(Error::config("sweep.values", format!("axis {name} has no default grid")))
            }
            _ => {
                return Err(Error::config(
                    "sweep.axis",
                    format!("unknown sweep axis {name:?}; expected one of {}", AXIS_NAMES.join(", ")),
                ))
            }
        })
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::config("sweep.values", "sweep grid is empty"));
        }
        if let SweepAxis::HurstPair(pairs) = self {
            if let Some((a, b)) = pairs.iter().find(|(a, b)| a > b) {
                return Err(Error::config("sweep.pairs", format!("Hurst pairs need H1 <= H2, got ({a}, {b})")));
            }
        }
        if let SweepAxis::AlphaBeta(pairs) = self {
            if let Some((a, b)) = pairs.iter().find(|(a, b)| a >= b) {
                return Err(Error::config("sweep.pairs", format!("power orders need alpha < beta, got ({a}, {b})")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Drift(_) => "drift",
            SweepAxis::Volatility(_) => "volatility",
            SweepAxis::Hurst(_) => "hurst",
            SweepAxis::HurstPair(_) => "hurst_pair",
            SweepAxis::AlphaBeta(_) => "alpha_beta",
            SweepAxis::Horizon(_) => "horizon",
            SweepAxis::Periods(_) => "periods",
            SweepAxis::ProportionalCost(_) => "p1",
            SweepAxis::MinimumFee(_) => "p2",
        }
    }

    /// Column names of the grid coordinates.
    pub fn coordinate_names(&self) -> Vec<&'static str> {
        match self {
            SweepAxis::HurstPair(_) => vec!["hurst1", "hurst2"],
            SweepAxis::AlphaBeta(_) => vec!["alpha", "beta"],
            other => vec![other.name()],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Drift(v)
            | SweepAxis::Volatility(v)
            | SweepAxis::Hurst(v)
            | SweepAxis::Horizon(v)
            | SweepAxis::ProportionalCost(v)
            | SweepAxis::MinimumFee(v) => v.len(),
            SweepAxis::HurstPair(v) => v.len(),
            SweepAxis::AlphaBeta(v) => v.len(),
            SweepAxis::Periods(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The base setup moved to grid point `k`.
    pub fn apply(&self, base: &ExperimentSetup, k: usize) -> Result<(GridPoint, ExperimentSetup)> {
        let mut setup = base.clone();
        let every_asset = |setup: &mut ExperimentSetup, f: &dyn Fn(&mut crate::market::AssetParams)| {
            setup.market.assets.iter_mut().for_each(f);
        };
        let coordinates = match self {
            SweepAxis::Drift(v) => {
                every_asset(&mut setup, &|a| a.drift = v[k]);
                vec![v[k].into()]
            }
            SweepAxis::Volatility(v) => {
                every_asset(&mut setup, &|a| a.volatility = v[k]);
                vec![v[k].into()]
            }
            SweepAxis::Hurst(v) => {
                every_asset(&mut setup, &|a| a.hurst = v[k]);
                vec![v[k].into()]
            }
            SweepAxis::HurstPair(v) => {
                let (h1, h2) = v[k];
                if setup.market.n_assets() != 2 {
                    return Err(Error::config("sweep.axis", "hurst_pair needs exactly two assets"));
                }
                setup.market.assets[0].hurst = h1;
                setup.market.assets[1].hurst = h2;
                vec![h1.into(), h2.into()]
            }
            SweepAxis::AlphaBeta(v) => {
                let (alpha, beta) = v[k];
                setup.strategy = match setup.strategy {
                    StrategySpec::Salopek { gamma, .. } => StrategySpec::Salopek { alpha, beta, gamma },
                    StrategySpec::Shiryaev { .. } => {
                        return Err(Error::config("sweep.axis", "alpha_beta needs the salopek strategy"))
                    }
                };
                vec![alpha, beta]
            }
            SweepAxis::Horizon(v) => {
                setup.market.horizon = v[k];
                setup.market.n_periods = (PERIODS_PER_YEAR * v[k]).round() as usize;
                vec![v[k].into()]
            }
            SweepAxis::Periods(v) => {
                setup.market.n_periods = v[k];
                vec![(v[k] as f64).into()]
            }
            SweepAxis::ProportionalCost(v) => {
                setup.costs = CostSchedule::from_percent(v[k], setup.costs.minimum_fee)?;
                vec![v[k].into()]
            }
            SweepAxis::MinimumFee(v) => {
                setup.costs = CostSchedule::new(setup.costs.proportional, v[k])?;
                vec![v[k].into()]
            }
        };
        setup.validate()?;
        Ok((
            GridPoint {
                axis: self.name().to_string(),
                coordinates,
            },
            setup,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: GridPoint,
    pub summary: ExperimentSummary,
}

/// One experiment per grid point, all on the base seed.
pub fn sweep(base: &ExperimentSetup, axis: &SweepAxis) -> Result<Vec<SweepRow>> {
    base.validate()?;
    axis.check()?;
    let points = (0..axis.len())
        .map(|k| axis.apply(base, k))
        .collect::<Result<Vec<_>>>()?;
    points
        .into_par_iter()
        .map(|(point, setup)| {
            Ok(SweepRow {
                point,
                summary: setup.run()?.summary,
            })
        })
        .collect()
}
