//! Fractional Black–Scholes price scenarios.
//!
//! Risky prices follow `S_t = s0 · exp(μ t + σ B_t^H)` on the trading grid,
//! with one independent fBm per asset and a risk-free asset fixed at 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{time_grid, FbmGenerator, GeneratorKind};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetParams {
    pub drift: f64,
    pub volatility: f64,
    pub hurst: f64,
    pub initial_price: f64,
}

impl AssetParams {
    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(Error::domain("drift must be finite"));
        }
        if !(self.volatility > 0.0 && self.volatility.is_finite()) {
            return Err(Error::domain(format!(
                "volatility must be positive, got {}",
                self.volatility
            )));
        }
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(Error::domain(format!(
                "market hurst must lie in (0.5, 1), got {}",
                self.hurst
            )));
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return Err(Error::domain(format!(
                "initial price must be positive, got {}",
                self.initial_price
            )));
        }
        Ok(())
    }

    pub fn price(&self, t: f64, fbm: f64) -> f64 {
        self.initial_price * (self.drift * t + self.volatility * fbm).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub assets: Vec<AssetParams>,
    pub horizon: f64,
    pub n_periods: usize,
    pub master_seed: u64,
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(Error::domain("market needs at least one risky asset"));
        }
        for a in &self.assets {
            a.validate()?;
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_periods < 2 {
            return Err(Error::domain("need at least two trading periods"));
        }
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn times(&self) -> Vec<f64> {
        time_grid(self.horizon, self.n_periods)
    }
}

/// Prices of the `d` risky assets on `t_0 … t_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketScenario {
    pub times: Vec<f64>,
    /// `prices[i][n]` is `S^{i+1}` at `t_n`.
    pub prices: Vec<Vec<f64>>,
    /// Driving fBm values, same layout as `prices`.
    pub fbm_values: Vec<Vec<f64>>,
}

impl MarketScenario {
    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    pub fn n_periods(&self) -> usize {
        self.times.len() - 1
    }

    /// The risk-free price, identically one.
    pub fn riskfree(&self) -> f64 {
        1.0
    }

    /// Risky prices at `t_n`.
    pub fn price_row(&self, n: usize) -> Vec<f64> {
        self.prices.iter().map(|p| p[n]).collect()
    }

    pub fn initial_prices(&self) -> Vec<f64> {
        self.price_row(0)
    }

    /// Keeps every `stride`-th grid point (`t_0, t_stride, …`).
    pub fn subsample(&self, stride: usize) -> Result<MarketScenario> {
        if stride == 0 || self.n_periods() % stride != 0 {
            return Err(Error::domain(format!(
                "stride {stride} does not divide {} periods",
                self.n_periods()
            )));
        }
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok(MarketScenario {
            times: pick(&self.times),
            prices: self.prices.iter().map(pick).collect(),
            fbm_values: self.fbm_values.iter().map(pick).collect(),
        })
    }
}

/// Builds prices from given fBm paths (one per asset, `N + 1` values each).
pub fn scenario_from_fbm(config: &MarketConfig, fbm_values: Vec<Vec<f64>>) -> Result<MarketScenario> {
    config.validate()?;
    if fbm_values.len() != config.n_assets() {
        return Err(Error::domain(format!(
            "expected {} fBm paths, got {}",
            config.n_assets(),
            fbm_values.len()
        )));
    }
    let times = config.times();
    if fbm_values.iter().any(|p| p.len() != times.len()) {
        return Err(Error::domain("fBm path length does not match the grid"));
    }
    let prices = config
        .assets
        .iter()
        .zip(&fbm_values)
        .map(|(a, b)| times.iter().zip(b).map(|(&t, &x)| a.price(t, x)).collect())
        .collect();
    Ok(MarketScenario {
        times,
        prices,
        fbm_values,
    })
}

/// Scenario source for a fixed market; holds one prepared generator per asset.
#[derive(Debug, Clone)]
pub struct MarketSimulator {
    config: MarketConfig,
    generators: Vec<FbmGenerator>,
}

impl MarketSimulator {
    pub fn new(config: MarketConfig, kind: GeneratorKind) -> Result<Self> {
        config.validate()?;
        let mut generators: Vec<FbmGenerator> = Vec::with_capacity(config.n_assets());
        for (i, a) in config.assets.iter().enumerate() {
            // assets sharing a Hurst exponent share the precomputed generator
            let shared = config.assets[..i]
                .iter()
                .position(|b| b.hurst == a.hurst)
                .map(|j| generators[j].clone());
            let g = match shared {
                Some(g) => g,
                None => FbmGenerator::new(kind, a.hurst, config.n_periods, config.horizon)?,
            };
            generators.push(g);
        }
        Ok(Self { config, generators })
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    /// Scenario `path_index`; asset `i` draws from stream `(seed, path_index, i)`.
    pub fn scenario(&self, path_index: u64) -> MarketScenario {
        let times = self.config.times();
        let mut prices = Vec::with_capacity(self.generators.len());
        let mut fbm_values = Vec::with_capacity(self.generators.len());
        for (i, (g, a)) in self.generators.iter().zip(&self.config.assets).enumerate() {
            let mut stream = rng::stream(self.config.master_seed, path_index, i as u64);
            let path = g.sample(&mut stream);
            prices.push(
                times
                    .iter()
                    .zip(&path.values)
                    .map(|(&t, &b)| a.price(t, b))
                    .collect(),
            );
            fbm_values.push(path.values);
        }
        MarketScenario {
            times,
            prices,
            fbm_values,
        }
    }
}

/// Spectral-generator scenario `path_index` of `config`.
pub fn simulate_scenario(config: &MarketConfig, path_index: u64) -> Result<MarketScenario> {
    Ok(MarketSimulator::new(config.clone(), GeneratorKind::Spectral)?.scenario(path_index))
}

/// Rescales every asset to start at `target`; returns the per-asset factors
/// `target / S_0^i`.
pub fn rescale_to_common_start(
    scenario: &MarketScenario,
    target: f64,
) -> Result<(MarketScenario, Vec<f64>)> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::domain(format!("target price must be positive, got {target}")));
    }
    let factors: Vec<f64> = scenario.prices.iter().map(|p| target / p[0]).collect();
    let prices = scenario
        .prices
        .iter()
        .zip(&factors)
        .map(|(p, &c)| {
            let mut row: Vec<f64> = p.iter().map(|s| c * s).collect();
            row[0] = target;
            row
        })
        .collect();
    Ok((
        MarketScenario {
            times: scenario.times.clone(),
            prices,
            fbm_values: scenario.fbm_values.clone(),
        },
        factors,
    ))
}

/// Converts positions computed in the rescaled market back to original units.
pub fn map_positions_to_original(positions_rescaled: &[f64], scale_factors: &[f64]) -> Result<Vec<f64>> {
    if positions_rescaled.len() != scale_factors.len() {
        return Err(Error::domain(format!(
            "{} positions but {} scale factors",
            positions_rescaled.len(),
            scale_factors.len()
        )));
    }
    Ok(positions_rescaled
        .iter()
        .zip(scale_factors)
        .map(|(p, c)| p * c)
        .collect())
}
