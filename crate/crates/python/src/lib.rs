//! Python bindings for `infoflow`.
//!
//! Small value types are exposed as classes. Experiment results cross the
//! boundary as JSON strings, which the caller decodes with `json.loads`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use infoflow::analytics::{self, Agent, QualityInputs};
use infoflow::bridge;
use infoflow::experiments::{self, ExperimentConfig};
use infoflow::pricing::{self, EffectiveInfo, Observation};
use infoflow::strategy;

fn py_err(e: infoflow::Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn agent(index: usize) -> PyResult<Agent> {
    Agent::from_index(index).map_err(py_err)
}

#[pyclass(name = "TimeGrid", frozen)]
struct PyTimeGrid(bridge::TimeGrid);

#[pymethods]
impl PyTimeGrid {
    /// Uniform grid `t_i = i T / m`, `i = 0..=m`.
    #[new]
    fn new(horizon: f64, intervals: usize) -> PyResult<Self> {
        bridge::TimeGrid::uniform(horizon, intervals).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_times(times: Vec<f64>) -> PyResult<Self> {
        bridge::TimeGrid::from_times(times).map(Self).map_err(py_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    #[getter]
    fn intervals(&self) -> usize {
        self.0.intervals()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    /// Brownian bridge pair with correlation `rho`, pinned to zero at both ends.
    fn bridge_pair(&self, rho: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = bridge::sample_bridge_pair(&self.0, rho, seed).map_err(py_err)?;
        Ok((p.beta1, p.beta2))
    }

    /// Signal path `sigma t x + beta_t` driven by a freshly sampled bridge.
    fn signal_path(&self, sigma: f64, x: f64, seed: u64) -> PyResult<Vec<f64>> {
        let mut rng = bridge::path_rng(seed, 0);
        let beta = bridge::sample_bridge(&self.0, &mut rng);
        let params = bridge::SignalParams::new(sigma, self.0.horizon()).map_err(py_err)?;
        let path = bridge::signal_path(&self.0, &beta, params, x).map_err(py_err)?;
        Ok(path.xi().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("TimeGrid(horizon={}, intervals={})", self.0.horizon(), self.0.intervals())
    }
}

#[pyclass(name = "PayoffModel", frozen)]
struct PyPayoffModel(pricing::PayoffModel);

#[pymethods]
impl PyPayoffModel {
    #[staticmethod]
    fn digital(x0: f64, x1: f64, p0: f64, p1: f64) -> PyResult<Self> {
        pricing::PayoffModel::digital(x0, x1, p0, p1).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn gaussian() -> Self {
        Self(pricing::PayoffModel::Gaussian)
    }

    #[staticmethod]
    fn tabulated(nodes: Vec<f64>, density: Vec<f64>) -> PyResult<Self> {
        pricing::PayoffModel::tabulated_from_density(nodes, &density)
            .map(Self)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Own signal at `t` and, optionally, the counterpart's signal at `s`.
#[pyclass(name = "Information", frozen)]
struct PyInformation(EffectiveInfo);

#[pymethods]
impl PyInformation {
    #[new]
    #[pyo3(signature = (horizon, t, xi, sigma, counterpart=None, rho=0.0))]
    fn new(horizon: f64, t: f64, xi: f64, sigma: f64, counterpart: Option<(f64, f64, f64)>, rho: f64) -> Self {
        let own = Observation::new(t, xi, sigma);
        Self(match counterpart {
            Some((s, xi_s, sigma_s)) => {
                EffectiveInfo::with_counterpart(horizon, own, Observation::new(s, xi_s, sigma_s), rho)
            }
            None => EffectiveInfo::own_only(horizon, own),
        })
    }

    /// Mean and variance of the posterior on the payoff.
    fn posterior(&self, model: &PyPayoffModel) -> PyResult<(f64, f64)> {
        let p = pricing::posterior(&model.0, &self.0).map_err(py_err)?;
        Ok((p.mean(), p.variance()))
    }

    /// Discounted posterior mean.
    fn price(&self, model: &PyPayoffModel, rate: f64) -> PyResult<f64> {
        let num = pricing::Numeraire::new(rate, self.0.horizon).map_err(py_err)?;
        pricing::price(&model.0, &self.0, &num).map_err(py_err)
    }

    /// CARA `(bid, ask)` under the Gaussian prior.
    fn cara_quotes(&self, lambda_: f64, rate: f64) -> PyResult<(f64, f64)> {
        let num = pricing::Numeraire::new(rate, self.0.horizon).map_err(py_err)?;
        let q = pricing::cara_quotes(&self.0, lambda_, &num).map_err(py_err)?;
        Ok((q.bid, q.ask))
    }
}

#[pyfunction]
fn cara_clearing_price(ask_seller: f64, bid_buyer: f64, lambda_seller: f64, lambda_buyer: f64) -> PyResult<f64> {
    pricing::cara_clearing_price(ask_seller, bid_buyer, lambda_seller, lambda_buyer).map_err(py_err)
}

/// Drift and dispersion `(a, b)` of the half price differential at `(t, s)`.
#[pyfunction]
#[pyo3(signature = (t, s, sigma1, sigma2, horizon=1.0))]
fn ab_coefficients(t: f64, s: f64, sigma1: f64, sigma2: f64, horizon: f64) -> PyResult<(f64, f64)> {
    let q = QualityInputs::new(t, s, sigma1, sigma2, horizon).map_err(py_err)?;
    let c = analytics::ab_coefficients(&q).map_err(py_err)?;
    Ok((c.a, c.b))
}

/// Probability that a digital-payoff agent prices on the right side of the clearing price.
#[pyfunction]
#[pyo3(signature = (t, s, sigma1, sigma2, agent, spread=1.0, horizon=1.0))]
fn p_correct_digital(t: f64, s: f64, sigma1: f64, sigma2: f64, agent: usize, spread: f64, horizon: f64) -> PyResult<f64> {
    let q = QualityInputs::new(t, s, sigma1, sigma2, horizon).map_err(py_err)?;
    analytics::p_correct_digital(&q, spread, self::agent(agent)?).map_err(py_err)
}

/// Expected one-auction profit of `agent` with the payoff pinned at `x`.
#[pyfunction]
#[pyo3(signature = (t, s, sigma1, sigma2, agent, x, horizon=1.0))]
fn expected_profit(t: f64, s: f64, sigma1: f64, sigma2: f64, agent: usize, x: f64, horizon: f64) -> PyResult<f64> {
    let q = QualityInputs::new(t, s, sigma1, sigma2, horizon).map_err(py_err)?;
    analytics::h_integrand(&q, x, self::agent(agent)?).map_err(py_err)
}

/// Optimal value `V(1, 0)` and trade flags of the rule over a uniform grid,
/// with the payoff pinned at `x`.
#[pyfunction]
#[pyo3(signature = (intervals, sigma1, sigma2, agent, x, horizon=1.0))]
fn optimal_schedule(
    intervals: usize,
    sigma1: f64,
    sigma2: f64,
    agent: usize,
    x: f64,
    horizon: f64,
) -> PyResult<(f64, Vec<bool>)> {
    let surface = analytics::ProfitSurface {
        grid: bridge::TimeGrid::uniform(horizon, intervals).map_err(py_err)?,
        sigma1,
        sigma2,
        agent: self::agent(agent)?,
        weighting: analytics::SurfaceWeighting::Payoff(x),
    };
    let vr = strategy::value_recursion(&surface).map_err(py_err)?;
    let v = vr.value.get(1, 0).unwrap_or(0.0);
    let trace = strategy::greedy_trace(&surface).map_err(py_err)?;
    let flags = trace.decisions.iter().map(|d| *d == strategy::Decision::Trade).collect();
    Ok((v, flags))
}

fn config(json: Option<&str>) -> PyResult<ExperimentConfig> {
    match json {
        Some(text) => ExperimentConfig::from_json(text).map_err(py_err),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Default experiment config as JSON.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_json().map_err(py_err)
}

/// Run the Monte Carlo experiment described by a JSON config and return the
/// aggregated statistics as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None, threads=None))]
fn run_experiment(py: Python<'_>, config_json: Option<&str>, threads: Option<usize>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let result = py
        .detach(|| match threads {
            Some(n) => experiments::run_experiment_with_threads(&cfg, n),
            None => experiments::run_experiment(&cfg),
        })
        .map_err(py_err)?;
    serde_json::to_string(&result).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Closed-form surfaces for both agents as JSON rows.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn analyze(config_json: Option<&str>) -> PyResult<String> {
    let rows = experiments::analyze(&config(config_json)?).map_err(py_err)?;
    serde_json::to_string(&rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Policy comparison plus recursion and enumeration optima as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn strategy_report(config_json: Option<&str>) -> PyResult<String> {
    let r = experiments::strategy_report(&config(config_json)?).map_err(py_err)?;
    let out = serde_json::json!({
        "policies": r.policies,
        "optimum": r.optimum,
        "enumerated": r.enumerated,
    });
    Ok(out.to_string())
}

#[pymodule]
fn pyinfoflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyPayoffModel>()?;
    m.add_class::<PyInformation>()?;
    m.add_function(wrap_pyfunction!(cara_clearing_price, m)?)?;
    m.add_function(wrap_pyfunction!(ab_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(p_correct_digital, m)?)?;
    m.add_function(wrap_pyfunction!(expected_profit, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(strategy_report, m)?)?;
    Ok(())
}
