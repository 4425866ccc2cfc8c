//! Run configuration: a flat TOML file (or the `config` object of an
//! emitted JSON document) plus command-line overrides.
//!
//! Market keys `mu`, `sigma`, `hurst` and `s0` apply to every asset unless
//! an `[[assets]]` table overrides them; the number of `[[assets]]` tables,
//! when present, sets the number of risky assets. `p1` is in percent.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::GeneratorKind;
use crate::ledger::CostSchedule;
use crate::market::{AssetParams, MarketConfig};
use crate::montecarlo::{ExperimentSetup, SweepAxis};
use crate::strategy::{PowerOrder, StrategySpec};

pub const DEFAULT_GAMMA: f64 = 100.0;
pub const DEFAULT_ALPHA: f64 = -30.0;
pub const DEFAULT_BETA: f64 = 30.0;
pub const DEFAULT_DRIFT: f64 = 0.05;
pub const DEFAULT_VOLATILITY: f64 = 0.1;
pub const DEFAULT_HURST: f64 = 0.6;
pub const DEFAULT_INITIAL_PRICE: f64 = 100.0;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_PERIODS: usize = 250;
pub const DEFAULT_SCENARIOS: usize = 100_000;
pub const DEFAULT_SWEEP_SCENARIOS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUTPUT: &str = "fracarb-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAsset {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub axis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<PowerOrder>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[PowerOrder; 2]>>,
}

/// Config file contents; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<PowerOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<PowerOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_scenarios: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assets: Option<Vec<RawAsset>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RawConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(toml_error_key(&e), e.message().to_string()))
    }

    /// Reads a TOML config, or the embedded `config` object of a JSON
    /// document written by a previous run.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut doc: serde_json::Value = serde_json::from_str(&text)?;
            let inner = doc.get_mut("config").map(serde_json::Value::take).unwrap_or(doc);
            return serde_json::from_value(inner).map_err(|e| Error::config("config", e.to_string()));
        }
        Self::from_toml_str(&text)
    }

    /// Keys set in `top` replace those in `self`. Market keys given in `top`
    /// also clear the matching per-asset entries.
    pub fn overlay(mut self, top: RawConfig) -> Self {
        if let Some(assets) = self.assets.as_mut() {
            for a in assets.iter_mut() {
                if top.mu.is_some() {
                    a.mu = None;
                }
                if top.sigma.is_some() {
                    a.sigma = None;
                }
                if top.hurst.is_some() {
                    a.hurst = None;
                }
                if top.s0.is_some() {
                    a.s0 = None;
                }
            }
        }
        overlay!(self, top; strategy, gamma, alpha, beta, mu, sigma, hurst, s0, horizon, periods,
            p1, p2, n_scenarios, generator, seed, output, assets, sweep);
        self
    }

    /// Applies defaults and checks every value. `default_scenarios` is used
    /// when `n_scenarios` is absent.
    pub fn resolve(&self, default_scenarios: usize) -> Result<RunConfig> {
        let gamma = self.gamma.unwrap_or(DEFAULT_GAMMA);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config("gamma", format!("must be positive, got {gamma}")));
        }
        let strategy = match self.strategy.as_deref().unwrap_or("shiryaev") {
            "shiryaev" => {
                if self.alpha.is_some() || self.beta.is_some() {
                    return Err(Error::config("alpha", "alpha/beta only apply to the salopek strategy"));
                }
                StrategySpec::Shiryaev { gamma }
            }
            "salopek" => {
                let alpha = self.alpha.unwrap_or(PowerOrder::Finite(DEFAULT_ALPHA));
                let beta = self.beta.unwrap_or(PowerOrder::Finite(DEFAULT_BETA));
                let spec = StrategySpec::Salopek { alpha, beta, gamma };
                spec.validate().map_err(|e| Error::config("alpha", e.to_string()))?;
                spec
            }
            other => {
                return Err(Error::config(
                    "strategy",
                    format!("expected \"shiryaev\" or \"salopek\", got \"{other}\""),
                ))
            }
        };

        let flat = RawAsset {
            mu: self.mu,
            sigma: self.sigma,
            hurst: self.hurst,
            s0: self.s0,
        };
        let raw_assets = match &self.assets {
            Some(list) if list.is_empty() => {
                return Err(Error::config("assets", "needs at least one asset"))
            }
            Some(list) => list.clone(),
            None => vec![RawAsset::default(); strategy.default_assets()],
        };
        let assets = raw_assets
            .iter()
            .map(|a| {
                let asset = AssetParams {
                    drift: a.mu.or(flat.mu).unwrap_or(DEFAULT_DRIFT),
                    volatility: a.sigma.or(flat.sigma).unwrap_or(DEFAULT_VOLATILITY),
                    hurst: a.hurst.or(flat.hurst).unwrap_or(DEFAULT_HURST),
                    initial_price: a.s0.or(flat.s0).unwrap_or(DEFAULT_INITIAL_PRICE),
                };
                check_asset(&asset)?;
                Ok(asset)
            })
            .collect::<Result<Vec<_>>>()?;
        strategy
            .check_dimension(assets.len())
            .map_err(|e| Error::config("assets", e.to_string()))?;

        let horizon = self.horizon.unwrap_or(DEFAULT_HORIZON);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config("horizon", format!("must be positive, got {horizon}")));
        }
        let n_periods = self.periods.unwrap_or(DEFAULT_PERIODS);
        if n_periods < 2 {
            return Err(Error::config("periods", format!("must be at least 2, got {n_periods}")));
        }
        let p1 = self.p1.unwrap_or(0.0);
        let p2 = self.p2.unwrap_or(0.0);
        if !(p1 >= 0.0 && p1.is_finite()) {
            return Err(Error::config("p1", format!("must be non-negative, got {p1}")));
        }
        if !(p2 >= 0.0 && p2.is_finite()) {
            return Err(Error::config("p2", format!("must be non-negative, got {p2}")));
        }
        let costs = CostSchedule::from_percent(p1, p2)?;
        let n_scenarios = self.n_scenarios.unwrap_or(default_scenarios);
        if n_scenarios == 0 {
            return Err(Error::config("n_scenarios", "must be at least 1"));
        }
        let sweep = self
            .sweep
            .as_ref()
            .map(|s| {
                let pairs: Option<Vec<(PowerOrder, PowerOrder)>> =
                    s.pairs.as_ref().map(|p| p.iter().map(|[a, b]| (*a, *b)).collect());
                SweepAxis::from_grid(&s.axis, s.values.as_deref(), pairs.as_deref())
            })
            .transpose()?;

        let setup = ExperimentSetup {
            market: MarketConfig {
                assets,
                horizon,
                n_periods,
                master_seed: self.seed.unwrap_or(DEFAULT_SEED),
            },
            strategy,
            costs,
            n_scenarios,
            generator: self.generator.unwrap_or_default(),
        };
        setup.validate().map_err(|e| Error::config("config", e.to_string()))?;
        Ok(RunConfig {
            setup,
            p1_percent: p1,
            output: self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            sweep,
            raw_sweep: self.sweep.clone(),
        })
    }
}

fn check_asset(a: &AssetParams) -> Result<()> {
    if !a.drift.is_finite() {
        return Err(Error::config("mu", format!("must be finite, got {}", a.drift)));
    }
    if !(a.volatility > 0.0 && a.volatility.is_finite()) {
        return Err(Error::config("sigma", format!("must be positive, got {}", a.volatility)));
    }
    if !(a.hurst > 0.5 && a.hurst < 1.0) {
        return Err(Error::config("hurst", format!("must lie in (0.5, 1), got {}", a.hurst)));
    }
    if !(a.initial_price > 0.0 && a.initial_price.is_finite()) {
        return Err(Error::config("s0", format!("must be positive, got {}", a.initial_price)));
    }
    Ok(())
}

fn toml_error_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    ["unknown field `", "missing field `"]
        .iter()
        .find_map(|prefix| {
            let rest = msg.strip_prefix(prefix)?;
            Some(rest[..rest.find('`')?].to_string())
        })
        .unwrap_or_else(|| "config".to_string())
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub setup: ExperimentSetup,
    /// Proportional cost as entered, in percent.
    pub p1_percent: f64,
    pub output: PathBuf,
    pub sweep: Option<SweepAxis>,
    raw_sweep: Option<RawSweep>,
}

impl RunConfig {
    /// Every resolved value as a config that reproduces this run.
    pub fn to_raw(&self) -> RawConfig {
        let s = &self.setup;
        let (alpha, beta) = match s.strategy {
            StrategySpec::Salopek { alpha, beta, .. } => (Some(alpha), Some(beta)),
            StrategySpec::Shiryaev { .. } => (None, None),
        };
        RawConfig {
            strategy: Some(s.strategy.name().to_string()),
            gamma: Some(s.strategy.gamma()),
            alpha,
            beta,
            mu: None,
            sigma: None,
            hurst: None,
            s0: None,
            horizon: Some(s.market.horizon),
            periods: Some(s.market.n_periods),
            p1: Some(self.p1_percent),
            p2: Some(s.costs.minimum_fee),
            n_scenarios: Some(s.n_scenarios),
            generator: Some(s.generator),
            seed: Some(s.market.master_seed),
            output: Some(self.output.clone()),
            assets: Some(
                s.market
                    .assets
                    .iter()
                    .map(|a| RawAsset {
                        mu: Some(a.drift),
                        sigma: Some(a.volatility),
                        hurst: Some(a.hurst),
                        s0: Some(a.initial_price),
                    })
                    .collect(),
            ),
            sweep: self.raw_sweep.clone(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_raw()).expect("resolved config is always representable in TOML")
    }
}
