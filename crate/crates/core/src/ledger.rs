//! Discrete-time execution of a continuous strategy.
//!
//! The continuous rule is sampled at the left end of each trading period,
//! traded with volume-based costs, and every rebalancing or cost cash flow
//! is booked on a zero-interest transaction account (column `d + 1`). The
//! portfolio is liquidated at `T` into the account.
//!
//! Row `n` of [`TradeLedger::holdings`] (0-based) is the holding vector
//! chosen at `t_n` and kept over `[t_n, t_{n+1})`; the last row is the
//! post-liquidation state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketScenario;
use crate::strategy::StrategySpec;

/// Proportional cost `p1` (as a fraction) with a minimum fee `p2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    pub proportional: f64,
    pub minimum_fee: f64,
}

impl CostSchedule {
    pub const FRICTIONLESS: CostSchedule = CostSchedule {
        proportional: 0.0,
        minimum_fee: 0.0,
    };

    pub fn new(proportional: f64, minimum_fee: f64) -> Result<Self> {
        let p = Self {
            proportional,
            minimum_fee,
        };
        p.validate()?;
        Ok(p)
    }

    /// Schedule from a proportional rate quoted in percent.
    pub fn from_percent(percent: f64, minimum_fee: f64) -> Result<Self> {
        Self::new(percent / 100.0, minimum_fee)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.proportional) || !ok(self.minimum_fee) {
            return Err(Error::domain(format!(
                "cost parameters must be non-negative, got ({}, {})",
                self.proportional, self.minimum_fee
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Purchase,
    Rebalance,
    Liquidate,
}

/// Risky-asset turnover `Σ_{i=1..d} |ΔΦ^i| S^i`.
///
/// Rows are full holding vectors `(Φ⁰, Φ¹ … Φᵈ, Φᵈ⁺¹)`; `prices` holds the
/// `d` risky prices. The risk-free and account columns never contribute.
pub fn trading_volume(prev: &[f64], next: &[f64], prices: &[f64], phase: Phase) -> f64 {
    prices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let traded = match phase {
                Phase::Purchase => next[i + 1],
                Phase::Rebalance => next[i + 1] - prev[i + 1],
                Phase::Liquidate => prev[i + 1],
            };
            traded.abs() * s
        })
        .sum()
}

/// `max(p1 y, p2)` for positive volume, zero otherwise.
pub fn transaction_cost(volume: f64, p: CostSchedule) -> f64 {
    if volume > 0.0 {
        (p.proportional * volume).max(p.minimum_fee)
    } else {
        0.0
    }
}

/// Value change of the risk-free and risky holdings across a trade at fixed
/// prices.
pub fn rebalancing_cost(prev: &[f64], next: &[f64], prices: &[f64]) -> f64 {
    let riskfree = next[0] - prev[0];
    riskfree
        + prices
            .iter()
            .enumerate()
            .map(|(i, s)| (next[i + 1] - prev[i + 1]) * s)
            .sum::<f64>()
}

/// Gross terminal value of `Φ_N` less the liquidation cost.
pub fn net_liquidation_revenue(final_holdings: &[f64], final_prices: &[f64], p: CostSchedule) -> f64 {
    let gross = final_holdings[0]
        + final_prices
            .iter()
            .enumerate()
            .map(|(i, s)| final_holdings[i + 1] * s)
            .sum::<f64>();
    let volume = trading_volume(final_holdings, final_holdings, final_prices, Phase::Liquidate);
    gross - transaction_cost(volume, p)
}

/// Prefix minima of `values`.
pub fn running_minimum(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain("running minimum of an empty series"));
    }
    let mut current = f64::INFINITY;
    Ok(values
        .iter()
        .map(|&v| {
            current = current.min(v);
            current
        })
        .collect())
}

/// Sampled holdings `Φ_1 … Φ_{N+1}` over the risk-free and risky assets.
///
/// Row `n` (0-based) is the continuous rule at `t_n`; the last row is zero.
pub fn sample_strategy(scenario: &MarketScenario, spec: &StrategySpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let d = scenario.n_assets();
    spec.check_dimension(d)?;
    let initial = scenario.initial_prices();
    let n_periods = scenario.n_periods();
    let mut rows = Vec::with_capacity(n_periods + 1);
    for n in 0..n_periods {
        rows.push(spec.positions(&initial, &scenario.price_row(n))?);
    }
    rows.push(vec![0.0; d + 1]);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger {
    /// `N + 1` rows of `(Φ⁰, Φ¹ … Φᵈ, Φᵈ⁺¹)`.
    pub holdings: Vec<Vec<f64>>,
    /// Trading volume `Γ` at `t_0 … t_N`.
    pub volumes: Vec<f64>,
    /// Transaction costs `L` at `t_0 … t_N`.
    pub costs: Vec<f64>,
    /// Rebalancing costs `D` at `t_0 … t_N` (zero at both ends).
    pub rebalancing: Vec<f64>,
    pub net_revenue: f64,
    /// Discrete portfolio value `V^Φ` at `t_0 … t_N`.
    pub values: Vec<f64>,
    /// Closed-form continuous value `V^Ψ` at `t_0 … t_N`.
    pub continuous_values: Vec<f64>,
    pub running_min: Vec<f64>,
}

impl TradeLedger {
    pub fn n_assets(&self) -> usize {
        self.holdings[0].len() - 2
    }

    pub fn n_periods(&self) -> usize {
        self.values.len() - 1
    }

    /// Transaction-account balance after trading at `t_n`.
    pub fn account(&self, n: usize) -> f64 {
        *self.holdings[n].last().expect("holding rows are never empty")
    }

    pub fn terminal_value(&self) -> f64 {
        *self.values.last().expect("ledger has at least one date")
    }

    pub fn terminal_continuous(&self) -> f64 {
        *self.continuous_values.last().expect("ledger has at least one date")
    }

    pub fn min_value(&self) -> f64 {
        *self.running_min.last().expect("ledger has at least one date")
    }

    /// Largest `|V^Φ_n − V^Ψ_n − Φ^{d+1}_{n+1}|` over `n < N`, relative to
    /// `1 + max |V|`.
    pub fn account_identity_residual(&self) -> f64 {
        let scale = 1.0
            + self
                .values
                .iter()
                .chain(&self.continuous_values)
                .fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n_periods())
            .map(|n| (self.values[n] - self.continuous_values[n] - self.account(n)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Writes the ledger as CSV, one row per trading date.
    pub fn write_csv<W: Write>(&self, scenario: &MarketScenario, out: W) -> Result<()> {
        let d = self.n_assets();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["n".to_string(), "t".to_string()];
        header.extend((1..=d).map(|i| format!("S{i}")));
        header.extend((0..=d + 1).map(|i| format!("Phi{i}")));
        header.extend(["Gamma", "L", "D", "V_Phi", "V_Psi", "m"].map(String::from));
        w.write_record(&header)?;
        for n in 0..=self.n_periods() {
            let mut rec = vec![n.to_string(), scenario.times[n].to_string()];
            rec.extend(scenario.prices.iter().map(|p| p[n].to_string()));
            rec.extend(self.holdings[n].iter().map(f64::to_string));
            rec.extend(
                [
                    self.volumes[n],
                    self.costs[n],
                    self.rebalancing[n],
                    self.values[n],
                    self.continuous_values[n],
                    self.running_min[n],
                ]
                .iter()
                .map(f64::to_string),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `spec` on `scenario` with costs `p`, starting from zero capital.
pub fn run_discrete_strategy(
    scenario: &MarketScenario,
    spec: &StrategySpec,
    p: CostSchedule,
) -> Result<TradeLedger> {
    p.validate()?;
    spec.validate()?;
    let d = scenario.n_assets();
    spec.check_dimension(d)?;
    let n_periods = scenario.n_periods();
    let initial = scenario.initial_prices();
    let price = |n: usize| scenario.price_row(n);

    let mut holdings = Vec::with_capacity(n_periods + 1);
    let mut continuous_values = Vec::with_capacity(n_periods + 1);
    for n in 0..n_periods {
        let (mut row, value) = spec.positions_and_value(&initial, &price(n))?;
        row.push(0.0);
        holdings.push(row);
        continuous_values.push(value);
    }
    holdings.push(vec![0.0; d + 2]);
    continuous_values.push(spec.continuous_value(&initial, &price(n_periods))?);
    let mut volumes = vec![0.0; n_periods + 1];
    let mut costs = vec![0.0; n_periods + 1];
    let mut rebalancing = vec![0.0; n_periods + 1];

    let zero = vec![0.0; d + 2];
    volumes[0] = trading_volume(&zero, &holdings[0], &initial, Phase::Purchase);
    costs[0] = transaction_cost(volumes[0], p);
    holdings[0][d + 1] = -costs[0];

    for n in 1..n_periods {
        let s = price(n);
        let (before, after) = holdings.split_at_mut(n);
        let (prev, next) = (&before[n - 1], &mut after[0]);
        volumes[n] = trading_volume(prev, next, &s, Phase::Rebalance);
        costs[n] = transaction_cost(volumes[n], p);
        rebalancing[n] = rebalancing_cost(prev, next, &s);
        next[d + 1] = prev[d + 1] - rebalancing[n] - costs[n];
    }

    let terminal = price(n_periods);
    let last = &holdings[n_periods - 1];
    volumes[n_periods] = trading_volume(last, last, &terminal, Phase::Liquidate);
    costs[n_periods] = transaction_cost(volumes[n_periods], p);
    let net_revenue = net_liquidation_revenue(last, &terminal, p);
    holdings[n_periods][d + 1] = last[d + 1] + net_revenue;

    let mut values: Vec<f64> = (0..=n_periods)
        .map(|n| portfolio_value(&holdings[n], &price(n)))
        .collect();
    // after liquidation only the account is left
    values[n_periods] = holdings[n_periods][d + 1];
    let running_min = running_minimum(&values)?;

    Ok(TradeLedger {
        holdings,
        volumes,
        costs,
        rebalancing,
        net_revenue,
        values,
        continuous_values,
        running_min,
    })
}

/// `Σ_{i=0}^{d+1} Φ^i S^i` with `S⁰ = Sᵈ⁺¹ = 1`.
fn portfolio_value(row: &[f64], risky_prices: &[f64]) -> f64 {
    let d = risky_prices.len();
    row[0]
        + risky_prices
            .iter()
            .enumerate()
            .map(|(i, s)| row[i + 1] * s)
            .sum::<f64>()
        + row[d + 1]
}

/// Largest `|V_{t_n−} − L_{t_n} − V_{t_n}|` over all dates, with both values
/// recomputed from the holdings and `V_{0−} = 0`.
pub fn verify_generalized_self_financing(ledger: &TradeLedger, scenario: &MarketScenario) -> f64 {
    let mut worst = 0.0f64;
    for n in 0..=ledger.n_periods() {
        let s = scenario.price_row(n);
        let before = if n == 0 {
            0.0
        } else {
            portfolio_value(&ledger.holdings[n - 1], &s)
        };
        let after = portfolio_value(&ledger.holdings[n], &s);
        worst = worst.max((before - ledger.costs[n] - after).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{scenario_from_fbm, AssetParams, MarketConfig};
    use crate::strategy::PowerOrder;

    fn flat_scenario(d: usize, n: usize) -> MarketScenario {
        MarketScenario {
            times: (0..=n).map(|k| k as f64 / n as f64).collect(),
            prices: vec![vec![100.0; n + 1]; d],
            fbm_values: vec![vec![0.0; n + 1]; d],
        }
    }

    fn scenario_with(prices: Vec<Vec<f64>>) -> MarketScenario {
        let n = prices[0].len() - 1;
        MarketScenario {
            times: (0..=n).map(|k| k as f64 / n as f64).collect(),
            fbm_values: vec![vec![0.0; n + 1]; prices.len()],
            prices,
        }
    }

    const SHIRYAEV: StrategySpec = StrategySpec::Shiryaev { gamma: 1.0 };

    #[test]
    fn volume_examples() {
        let zero = [0.0; 3];
        assert_eq!(trading_volume(&zero, &zero, &[100.0], Phase::Purchase), 0.0);
        let row = [5.0, 0.7, -3.0];
        assert_eq!(trading_volume(&row, &row, &[120.0], Phase::Rebalance), 0.0);
        let last = [-21.0, 0.2, 0.0];
        assert!((trading_volume(&last, &last, &[110.0], Phase::Liquidate) - 22.0).abs() < 1e-12);
        // risk-free and account columns never count
        let a = [0.0, 1.0, 0.0];
        let b = [1e6, 1.0, -1e6];
        assert_eq!(trading_volume(&a, &b, &[50.0], Phase::Rebalance), 0.0);
    }

    #[test]
    fn cost_examples() {
        let p = CostSchedule::from_percent(0.1, 0.5).unwrap();
        assert_eq!(p.proportional, 0.001);
        assert_eq!(transaction_cost(0.0, p), 0.0);
        assert!((transaction_cost(1000.0, p) - 1.0).abs() < 1e-15);
        assert_eq!(transaction_cost(100.0, p), 0.5);
        assert_eq!(transaction_cost(5.0, CostSchedule::FRICTIONLESS), 0.0);
        assert!(CostSchedule::new(-0.1, 0.0).is_err());
        assert!(CostSchedule::new(0.0, -1.0).is_err());
    }

    #[test]
    fn rebalancing_cost_examples() {
        let row = [3.0, 2.0, 9.0];
        assert_eq!(rebalancing_cost(&row, &row, &[77.0]), 0.0);
        // Shiryaev s0 = 100: holdings set at 110, traded at 105
        let (a0, a1) = crate::strategy::shiryaev_positions(100.0, 110.0, 1.0);
        let (b0, b1) = crate::strategy::shiryaev_positions(100.0, 105.0, 1.0);
        let d = rebalancing_cost(&[a0, a1, 0.0], &[b0, b1, 0.0], &[105.0]);
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn liquidation_examples() {
        assert_eq!(net_liquidation_revenue(&[0.0, 0.0, 0.0], &[110.0], CostSchedule::FRICTIONLESS), 0.0);
        let r = net_liquidation_revenue(&[-21.0, 0.2, 4.0], &[110.0], CostSchedule::FRICTIONLESS);
        assert!((r - 1.0).abs() < 1e-12);
        let r = net_liquidation_revenue(&[-21.0, 0.2, 4.0], &[110.0], CostSchedule::new(0.001, 0.0).unwrap());
        assert!((r - 0.978).abs() < 1e-12);
    }

    #[test]
    fn running_minimum_examples() {
        assert_eq!(running_minimum(&[0.0, -5.0, 3.0]).unwrap(), vec![0.0, -5.0, -5.0]);
        assert_eq!(running_minimum(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0; 3]);
        assert!(running_minimum(&[]).is_err());
    }

    #[test]
    fn shiryaev_on_flat_market_is_all_zero() {
        let s = flat_scenario(1, 10);
        let rows = sample_strategy(&s, &SHIRYAEV).unwrap();
        assert!(rows.iter().flatten().all(|&v| v == 0.0));
        let l = run_discrete_strategy(&s, &SHIRYAEV, CostSchedule::FRICTIONLESS).unwrap();
        assert!(l.values.iter().all(|&v| v == 0.0));
        assert!(l.holdings.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(l.terminal_value(), 0.0);
    }

    #[test]
    fn first_row_is_flat_for_shiryaev() {
        let s = scenario_with(vec![vec![100.0, 104.0, 97.0, 101.0]]);
        let rows = sample_strategy(&s, &SHIRYAEV).unwrap();
        assert_eq!(rows[0], vec![0.0, 0.0]);
        assert_eq!(rows[3], vec![0.0, 0.0]);
        let (p0, p1) = crate::strategy::shiryaev_positions(100.0, 97.0, 1.0);
        assert_eq!(rows[2], vec![p0, p1]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = flat_scenario(2, 5);
        assert!(run_discrete_strategy(&s, &SHIRYAEV, CostSchedule::FRICTIONLESS).is_err());
        let salopek = StrategySpec::Salopek {
            alpha: PowerOrder::Finite(-30.0),
            beta: PowerOrder::Finite(30.0),
            gamma: 1.0,
        };
        assert!(sample_strategy(&flat_scenario(1, 5), &salopek).is_err());
    }

    #[test]
    fn hand_computed_two_period_shiryaev() {
        // s0 = 100, S_1 = 110, S_2 = 105, γ = 1, p = (0.1%, 0)
        let s = scenario_with(vec![vec![100.0, 110.0, 105.0]]);
        let p = CostSchedule::new(0.001, 0.0).unwrap();
        let l = run_discrete_strategy(&s, &SHIRYAEV, p).unwrap();
        // Φ_1 = (0, 0); Φ_2 = (-21, 0.2)
        assert_eq!(l.volumes[0], 0.0);
        assert!((l.volumes[1] - 22.0).abs() < 1e-12);
        assert!((l.costs[1] - 0.022).abs() < 1e-15);
        // D_1 = (-21 - 0) + (0.2 - 0)·110 = 1
        assert!((l.rebalancing[1] - 1.0).abs() < 1e-12);
        assert!((l.account(1) + 1.022).abs() < 1e-12);
        // liquidation at 105: gross -21 + 21 = 0, volume 21, cost 0.021
        assert!((l.net_revenue + 0.021).abs() < 1e-12);
        assert!((l.terminal_value() + 1.043).abs() < 1e-12);
        assert_eq!(l.terminal_value(), l.account(2));
        assert!((l.terminal_continuous() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn corrupted_account_shows_in_residual() {
        let s = scenario_with(vec![vec![100.0, 110.0, 105.0]]);
        let mut l = run_discrete_strategy(&s, &SHIRYAEV, CostSchedule::FRICTIONLESS).unwrap();
        assert!(verify_generalized_self_financing(&l, &s) < 1e-12);
        l.holdings[1][2] += 0.375;
        let r = verify_generalized_self_financing(&l, &s);
        assert!((r - 0.375).abs() < 1e-12, "{r}");
    }

    #[test]
    fn never_crossing_limit_strategy_is_buy_and_hold() {
        let n = 50;
        let up: Vec<f64> = (0..=n).map(|k| 100.0 + k as f64).collect();
        let down: Vec<f64> = (0..=n).map(|k| 100.0 - 0.5 * k as f64).collect();
        let s = scenario_with(vec![up, down]);
        let spec = StrategySpec::Salopek {
            alpha: PowerOrder::MinusInfinity,
            beta: PowerOrder::PlusInfinity,
            gamma: 3.0,
        };
        let rows = sample_strategy(&s, &spec).unwrap();
        assert_eq!(rows[0], vec![0.0, 0.0, 0.0]);
        for row in &rows[1..n] {
            assert_eq!(row, &vec![0.0, 3.0, -3.0]);
        }
        let l = run_discrete_strategy(&s, &spec, CostSchedule::FRICTIONLESS).unwrap();
        // only the initial entry at t_1 costs anything
        assert!(l.rebalancing[2..n].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn simulated_ledger_identities() {
        let cfg = MarketConfig {
            assets: vec![AssetParams {
                drift: 0.05,
                volatility: 0.1,
                hurst: 0.6,
                initial_price: 100.0,
            }],
            horizon: 1.0,
            n_periods: 4,
            master_seed: 0,
        };
        let s = scenario_from_fbm(&cfg, vec![vec![0.0, 0.2, -0.1, 0.4, 0.3]]).unwrap();
        for p in [CostSchedule::FRICTIONLESS, CostSchedule::from_percent(0.1, 0.5).unwrap()] {
            let l = run_discrete_strategy(&s, &StrategySpec::Shiryaev { gamma: 100.0 }, p).unwrap();
            assert_eq!(l.values[0], -l.costs[0]);
            assert!(l.values[0] <= 0.0);
            assert!(l.account_identity_residual() < 1e-12);
            assert!(verify_generalized_self_financing(&l, &s) < 1e-9 * (1.0 + l.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
            assert!(l.rebalancing[1..4].iter().all(|&d| d > 0.0));
            assert!(l.holdings[4][..2].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn csv_layout() {
        let s = scenario_with(vec![vec![100.0, 110.0, 105.0]]);
        let l = run_discrete_strategy(&s, &SHIRYAEV, CostSchedule::FRICTIONLESS).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,t,S1,Phi0,Phi1,Phi2,Gamma,L,D,V_Phi,V_Psi,m");
        assert_eq!(lines.len(), 4);
        assert!(!text.contains('\r'));
    }
}
