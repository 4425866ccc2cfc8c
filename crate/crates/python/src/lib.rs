//! Python bindings. Results cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use fracarb_core::config::{RawConfig, RunConfig, DEFAULT_SCENARIOS, DEFAULT_SWEEP_SCENARIOS};
use fracarb_core::fbm::{self, FbmSpec, GeneratorKind};
use fracarb_core::ledger::{run_discrete_strategy, verify_generalized_self_financing};
use fracarb_core::market::MarketSimulator;
use fracarb_core::montecarlo::{self, SummaryStats, SweepAxis};
use fracarb_core::strategy::{self, PowerOrder};
use fracarb_core::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts a float or one of `"inf"`, `"-inf"`.
fn power_order(obj: &Bound<'_, PyAny>) -> PyResult<PowerOrder> {
    if let Ok(s) = obj.cast::<PyString>() {
        return s.to_str()?.parse().map_err(py_err);
    }
    Ok(PowerOrder::from(obj.extract::<f64>()?))
}

/// Config keys as keyword arguments; infinite floats become `"inf"` strings
/// so the JSON round trip keeps them.
fn raw_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<RawConfig> {
    let Some(kwargs) = kwargs else {
        return Ok(RawConfig::default());
    };
    let py = kwargs.py();
    let clean = PyDict::new(py);
    for (k, v) in kwargs.iter() {
        match v.extract::<f64>() {
            Ok(x) if x.is_infinite() => clean.set_item(k, if x > 0.0 { "inf" } else { "-inf" })?,
            _ => clean.set_item(k, v)?,
        }
    }
    let text: String = py.import("json")?.call_method1("dumps", (clean,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("config error: {e}")))
}

/// A resolved run configuration.
///
/// Keyword arguments use the config file keys (`strategy`, `gamma`, `alpha`,
/// `beta`, `mu`, `sigma`, `hurst`, `s0`, `horizon`, `periods`, `p1` in
/// percent, `p2`, `n_scenarios`, `generator`, `seed`, `assets`).
#[pyclass(name = "Config", module = "fracarb", frozen)]
struct PyConfig {
    raw: RawConfig,
    resolved: RunConfig,
}

impl PyConfig {
    fn build(raw: RawConfig) -> PyResult<Self> {
        let resolved = raw.resolve(DEFAULT_SCENARIOS).map_err(py_err)?;
        Ok(Self { raw, resolved })
    }

    fn simulator(&self) -> PyResult<MarketSimulator> {
        MarketSimulator::new(self.resolved.setup.market.clone(), self.resolved.setup.generator).map_err(py_err)
    }

    fn check_index(&self, index: u64) -> PyResult<()> {
        let n = self.resolved.setup.n_scenarios as u64;
        if index >= n {
            return Err(PyValueError::new_err(format!("index must be below n_scenarios = {n}, got {index}")));
        }
        Ok(())
    }
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Self::build(raw_from_kwargs(kwargs)?)
    }

    /// Loads a TOML config or the `config` object of a JSON result file.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Self::build(RawConfig::from_file(&path).map_err(py_err)?)
    }

    /// A copy with the given keys replaced.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Self::build(self.raw.clone().overlay(raw_from_kwargs(kwargs)?))
    }

    fn to_toml(&self) -> String {
        self.resolved.to_toml_string()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.resolved.to_raw())
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.resolved.setup.strategy.name()
    }

    #[getter]
    fn n_assets(&self) -> usize {
        self.resolved.setup.market.n_assets()
    }

    #[getter]
    fn n_scenarios(&self) -> usize {
        self.resolved.setup.n_scenarios
    }

    fn __repr__(&self) -> String {
        format!("Config({})", self.resolved.to_toml_string().trim().replace('\n', ", "))
    }

    /// Strategy holdings `(Ψ⁰, Ψ¹ … Ψᵈ)` at prices `current`; `initial`
    /// defaults to the configured starting prices.
    #[pyo3(signature = (current, initial=None))]
    fn positions(&self, current: Vec<f64>, initial: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let initial = initial.unwrap_or_else(|| self.resolved.setup.market.assets.iter().map(|a| a.initial_price).collect());
        self.resolved.setup.strategy.positions(&initial, &current).map_err(py_err)
    }

    /// Closed-form continuous value `V^Ψ` at prices `current`.
    #[pyo3(signature = (current, initial=None))]
    fn continuous_value(&self, current: Vec<f64>, initial: Option<Vec<f64>>) -> PyResult<f64> {
        let initial = initial.unwrap_or_else(|| self.resolved.setup.market.assets.iter().map(|a| a.initial_price).collect());
        self.resolved.setup.strategy.continuous_value(&initial, &current).map_err(py_err)
    }

    /// Times, prices and driving fBm values of scenario `index`.
    fn scenario<'py>(&self, py: Python<'py>, index: u64) -> PyResult<Bound<'py, PyAny>> {
        let sim = self.simulator()?;
        to_py(py, &sim.scenario(index))
    }

    /// Full trade ledger of scenario `index` plus both accounting residuals.
    fn replay<'py>(&self, py: Python<'py>, index: u64) -> PyResult<Bound<'py, PyAny>> {
        self.check_index(index)?;
        let sim = self.simulator()?;
        let scenario = sim.scenario(index);
        let setup = &self.resolved.setup;
        let ledger = run_discrete_strategy(&scenario, &setup.strategy, setup.costs).map_err(py_err)?;
        let out = to_py(py, &ledger)?;
        out.set_item("times", scenario.times.clone())?;
        out.set_item("prices", scenario.prices.clone())?;
        out.set_item("account_identity_residual", ledger.account_identity_residual())?;
        out.set_item("self_financing_residual", verify_generalized_self_financing(&ledger, &scenario))?;
        Ok(out)
    }

    /// Runs every scenario. Returns `{"summary": ..., "outcomes": ...}`;
    /// per-scenario outcomes are included only when asked for.
    #[pyo3(signature = (outcomes=false))]
    fn run<'py>(&self, py: Python<'py>, outcomes: bool) -> PyResult<Bound<'py, PyAny>> {
        let setup = self.resolved.setup.clone();
        let experiment = py.detach(move || setup.run()).map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("summary", to_py(py, &experiment.summary)?)?;
        if outcomes {
            out.set_item("outcomes", to_py(py, &experiment.outcomes)?)?;
        }
        Ok(out.into_any())
    }

    /// One experiment per grid point on common seeds. Without `axis` the
    /// configured `sweep` table is used; without `n_scenarios` each point
    /// runs the sweep default.
    #[pyo3(signature = (axis=None, values=None, pairs=None))]
    fn sweep<'py>(
        &self,
        py: Python<'py>,
        axis: Option<&str>,
        values: Option<Vec<Bound<'py, PyAny>>>,
        pairs: Option<Vec<(Bound<'py, PyAny>, Bound<'py, PyAny>)>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let resolved = if self.raw.n_scenarios.is_none() {
            self.raw.resolve(DEFAULT_SWEEP_SCENARIOS).map_err(py_err)?
        } else {
            self.resolved.clone()
        };
        let grid = match axis {
            Some(name) => {
                let values = values.map(|v| v.iter().map(power_order).collect::<PyResult<Vec<_>>>()).transpose()?;
                let pairs = pairs
                    .map(|p| {
                        p.iter()
                            .map(|(a, b)| Ok((power_order(a)?, power_order(b)?)))
                            .collect::<PyResult<Vec<_>>>()
                    })
                    .transpose()?;
                SweepAxis::from_grid(name, values.as_deref(), pairs.as_deref()).map_err(py_err)?
            }
            None => resolved
                .sweep
                .clone()
                .ok_or_else(|| PyValueError::new_err("no sweep axis given or configured"))?,
        };
        let base = resolved.setup;
        let rows = py.detach(move || montecarlo::sweep(&base, &grid)).map_err(py_err)?;
        to_py(py, &rows)
    }
}

/// Power mean `M_a(x)` of positive entries; `a` may be `"inf"` or `"-inf"`.
#[pyfunction]
fn power_mean(x: Vec<f64>, a: &Bound<'_, PyAny>) -> PyResult<f64> {
    strategy::power_mean(&x, power_order(a)?).map_err(py_err)
}

/// Salopek holdings `(Ψ¹ … Ψᵈ)` on prices rescaled to a common start.
#[pyfunction]
#[pyo3(signature = (initial, current, alpha, beta, gamma=100.0))]
fn salopek_positions(
    initial: Vec<f64>,
    current: Vec<f64>,
    alpha: &Bound<'_, PyAny>,
    beta: &Bound<'_, PyAny>,
    gamma: f64,
) -> PyResult<Vec<f64>> {
    let spec = strategy::StrategySpec::Salopek {
        alpha: power_order(alpha)?,
        beta: power_order(beta)?,
        gamma,
    };
    let full = spec.positions(&initial, &current).map_err(py_err)?;
    Ok(full[1..].to_vec())
}

/// `Cov(B_t, B_s)` of standard fBm.
#[pyfunction]
fn fbm_covariance(t: f64, s: f64, hurst: f64) -> PyResult<f64> {
    fbm::fbm_covariance(t, s, hurst).map_err(py_err)
}

/// Path `path_index` of fBm on `t_n = n·horizon/n_steps`, as `(times, values)`.
#[pyfunction]
#[pyo3(signature = (hurst, n_steps, horizon=1.0, seed=0, path_index=0, generator="spectral"))]
fn fbm_path(
    hurst: f64,
    n_steps: usize,
    horizon: f64,
    seed: u64,
    path_index: u64,
    generator: &str,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let kind: GeneratorKind = generator.parse().map_err(py_err)?;
    let spec = FbmSpec {
        hurst,
        n_steps,
        horizon,
        seed,
    };
    let path = spec.sample(kind, path_index).map_err(py_err)?;
    Ok((fbm::time_grid(horizon, n_steps), path.values))
}

/// Mean, standard deviation, quantiles and loss probability of `samples`.
#[pyfunction]
fn summary_stats<'py>(py: Python<'py>, samples: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &SummaryStats::from_samples(&samples).map_err(py_err)?)
}

#[pymodule]
fn fracarb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(power_mean, m)?)?;
    m.add_function(wrap_pyfunction!(salopek_positions, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_path, m)?)?;
    m.add_function(wrap_pyfunction!(summary_stats, m)?)?;
    m.add("SWEEP_AXES", montecarlo::AXIS_NAMES.to_vec())?;
    Ok(())
}
