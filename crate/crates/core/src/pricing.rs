//! Posterior densities and signal-implied prices.
//!
//! An agent's information is its own signal `xi_t` and, for attentive agents,
//! the counterpart's signal `xi_s` recovered at the last trade. Given `x`, the
//! pair is bivariate normal with means `(sigma_1 t x, sigma_2 s x)`, variances
//! `(t / kappa_t, s / kappa_s)` and correlation `rho_hat`. Its log-density is a
//! quadratic `A x - B x^2 / 2` in `x` up to constants, and every posterior here
//! is computed from that pair of coefficients, with the exponent shifted by its
//! maximum before exponentiating.

use serde::{Deserialize, Serialize};

use crate::bridge::{kappa, SignalPath};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_hermite;

use std::f64::consts::PI;

/// Prior law of the payoff `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffModel {
    /// `X in {x0, x1}` with prior masses `p0`, `p1`.
    Digital { x0: f64, x1: f64, p0: f64, p1: f64 },
    /// Standard normal prior.
    Gaussian,
    /// Discrete prior masses on a grid of nodes.
    Tabulated { nodes: Vec<f64>, weights: Vec<f64> },
}

impl PayoffModel {
    pub fn digital(x0: f64, x1: f64, p0: f64, p1: f64) -> Result<Self> {
        let m = PayoffModel::Digital { x0, x1, p0, p1 };
        m.validate()?;
        Ok(m)
    }

    /// Tabulated prior from density values, with trapezoid masses.
    pub fn tabulated_from_density(nodes: Vec<f64>, density: &[f64]) -> Result<Self> {
        let n = nodes.len();
        if n < 2 || density.len() != n {
            return Err(Error::invalid(format!(
                "tabulated prior needs at least two nodes and one density value per node (got {} and {})",
                n,
                density.len()
            )));
        }
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = 0.5 * (nodes[i + 1] - nodes[i]);
            weights[i] += h * density[i];
            weights[i + 1] += h * density[i + 1];
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("tabulated density integrates to zero"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let m = PayoffModel::Tabulated { nodes, weights };
        m.validate()?;
        Ok(m)
    }

    /// Standard normal prior tabulated on `n` equally spaced nodes over `[-8, 8]`.
    pub fn tabulated_standard_normal(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("need at least three nodes"));
        }
        let h = 16.0 / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -8.0 + h * i as f64).collect();
        let density: Vec<f64> = nodes.iter().map(|x| (-0.5 * x * x).exp()).collect();
        Self::tabulated_from_density(nodes, &density)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PayoffModel::Digital { x0, x1, p0, p1 } => {
                if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
                    return Err(Error::invalid(format!("digital payoff needs x1 > x0, got ({x0}, {x1})")));
                }
                if !(*p0 >= 0.0 && *p1 >= 0.0) || ((p0 + p1) - 1.0).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "digital prior must be non-negative and sum to one, got ({p0}, {p1})"
                    )));
                }
            }
            PayoffModel::Gaussian => {}
            PayoffModel::Tabulated { nodes, weights } => {
                if nodes.len() < 2 || nodes.len() != weights.len() {
                    return Err(Error::invalid("tabulated prior needs matching nodes and weights"));
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("tabulated nodes must be strictly increasing"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::invalid("tabulated weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::invalid(format!("tabulated weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, PayoffModel::Gaussian)
    }

    /// Support and prior masses for the discrete kinds.
    pub fn discrete_prior(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            PayoffModel::Digital { x0, x1, p0, p1 } => Some((vec![*x0, *x1], vec![*p0, *p1])),
            PayoffModel::Tabulated { nodes, weights } => Some((nodes.clone(), weights.clone())),
            PayoffModel::Gaussian => None,
        }
    }

    pub fn prior(&self) -> Posterior {
        match self.discrete_prior() {
            Some((support, weights)) => Posterior::Discrete { support, weights },
            None => Posterior::Normal {
                mean: 0.0,
                variance: 1.0,
            },
        }
    }
}

/// A signal value observed at `time` through a channel with signal-to-noise `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub xi: f64,
    pub sigma: f64,
}

impl Observation {
    pub fn new(time: f64, xi: f64, sigma: f64) -> Self {
        Self { time, xi, sigma }
    }
}

/// Own signal plus, after a trade, the counterpart's signal at the trade time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveInfo {
    pub horizon: f64,
    pub own: Observation,
    pub counterpart: Option<Observation>,
    /// Correlation of the two bridges.
    pub rho: f64,
}

impl EffectiveInfo {
    pub fn own_only(horizon: f64, own: Observation) -> Self {
        Self {
            horizon,
            own,
            counterpart: None,
            rho: 0.0,
        }
    }

    pub fn with_counterpart(horizon: f64, own: Observation, counterpart: Observation, rho: f64) -> Self {
        Self {
            horizon,
            own,
            counterpart: Some(counterpart),
            rho,
        }
    }

    /// Last trade time, zero when no counterpart signal is held.
    pub fn last_trade(&self) -> f64 {
        self.counterpart.map_or(0.0, |c| c.time)
    }

    fn check(&self) -> Result<()> {
        let t = self.own.time;
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("negative time {t}")));
        }
        if t >= self.horizon {
            return Err(Error::domain(format!(
                "prices are defined on t < T only (t = {t}, T = {})",
                self.horizon
            )));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {}", self.rho)));
        }
        if let Some(c) = self.counterpart {
            if !(c.time >= 0.0) || c.time > t {
                return Err(Error::invalid(format!(
                    "counterpart time {} must lie in [0, {t}]",
                    c.time
                )));
            }
        }
        Ok(())
    }

    /// The counterpart observation when it carries information (`s > 0`).
    fn active_counterpart(&self) -> Option<Observation> {
        self.counterpart.filter(|c| c.time > 0.0)
    }
}

/// Discounting to the horizon at a constant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numeraire {
    pub rate: f64,
    pub horizon: f64,
}

impl Numeraire {
    pub fn new(rate: f64, horizon: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::invalid(format!("rate must be finite, got {rate}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { rate, horizon })
    }

    /// `exp(-r (T - t))` for `0 <= t <= T`.
    pub fn discount(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        Ok((-self.rate * (self.horizon - t)).exp())
    }
}

/// Posterior law of `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Discrete { support: Vec<f64>, weights: Vec<f64> },
    Normal { mean: f64, variance: f64 },
}

impl Posterior {
    pub fn mean(&self) -> f64 {
        match self {
            Posterior::Discrete { support, weights } => support.iter().zip(weights).map(|(x, w)| x * w).sum(),
            Posterior::Normal { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Posterior::Discrete { support, weights } => {
                let m = self.mean();
                support.iter().zip(weights).map(|(x, w)| w * (x - m) * (x - m)).sum()
            }
            Posterior::Normal { variance, .. } => *variance,
        }
    }

    /// Total probability, 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        match self {
            Posterior::Discrete { weights, .. } => weights.iter().sum(),
            Posterior::Normal { .. } => 1.0,
        }
    }

    /// Probability that `X > 0`.
    pub fn mass_positive(&self) -> f64 {
        match self {
            Posterior::Discrete { support, weights } => support
                .iter()
                .zip(weights)
                .filter(|(x, _)| **x > 0.0)
                .map(|(_, w)| w)
                .sum(),
            Posterior::Normal { mean, variance } => crate::quadrature::normal_cdf(mean / variance.sqrt()),
        }
    }

    /// Mass on the support point closest to `x` (discrete) or the density at `x`.
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Posterior::Discrete { support, weights } => {
                let mut best = 0;
                for (i, s) in support.iter().enumerate() {
                    if (s - x).abs() < (support[best] - x).abs() {
                        best = i;
                    }
                }
                weights[best]
            }
            Posterior::Normal { mean, variance } => {
                let z = (x - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * PI * variance).sqrt()
            }
        }
    }
}

/// `kappa_t * (sigma xi x - sigma^2 x^2 t / 2)`.
pub fn log_likelihood_exponent(t: f64, sigma: f64, xi: f64, x: f64, horizon: f64) -> Result<f64> {
    let k = kappa(t, horizon)?;
    Ok(k * (sigma * xi * x - 0.5 * sigma * sigma * x * x * t))
}

/// Correlation of `xi^1_t` and `xi^2_s` given `X`: `rho * sqrt((s / t) (kappa_s / kappa_t))`.
pub fn conditional_corr(t: f64, s: f64, horizon: f64, rho: f64) -> Result<f64> {
    if s > t {
        return Err(Error::invalid(format!("s = {s} exceeds t = {t}")));
    }
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("negative time s = {s}")));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let (kt, ks) = (kappa(t, horizon)?, kappa(s, horizon)?);
    Ok(rho * ((s / t) * (ks / kt)).sqrt())
}

fn bridge_variance(t: f64, horizon: f64) -> Result<f64> {
    Ok(t / kappa(t, horizon)?)
}

/// `ln p(xi_t | x)`, the Gaussian density with mean `sigma t x` and variance `t / kappa_t`.
pub fn univariate_log_likelihood(obs: Observation, horizon: f64, x: f64) -> Result<f64> {
    let v = bridge_variance(obs.time, horizon)?;
    if !(v > 0.0) {
        return Err(Error::domain("the likelihood is degenerate at t = 0"));
    }
    let d = obs.xi - obs.sigma * x * obs.time;
    Ok(-0.5 * d * d / v - 0.5 * (2.0 * PI * v).ln())
}

/// `ln p(xi^1_t, xi^2_s | x)` term by term as the bivariate normal density is
/// usually displayed. With no counterpart information it is the univariate
/// log-likelihood.
pub fn joint_log_likelihood(info: &EffectiveInfo, x: f64) -> Result<f64> {
    info.check()?;
    let Some(c) = info.active_counterpart() else {
        return univariate_log_likelihood(info.own, info.horizon, x);
    };
    let (t, s) = (info.own.time, c.time);
    let rho_hat = conditional_corr(t, s, info.horizon, info.rho)?;
    let one_minus = 1.0 - rho_hat * rho_hat;
    if !(one_minus > 0.0) {
        return Err(Error::Numeric("signals are perfectly correlated".into()));
    }
    let vt = bridge_variance(t, info.horizon)?;
    let vs = bridge_variance(s, info.horizon)?;
    let d1 = info.own.xi - info.own.sigma * x * t;
    let d2 = c.xi - c.sigma * x * s;
    let denom = one_minus * vt * vs;
    let norm = -(2.0 * PI * vt.sqrt() * vs.sqrt() * one_minus.sqrt()).ln();
    let e1 = -0.5 * vs * d1 * d1 / denom;
    let e2 = -0.5 * (-2.0 * rho_hat * d1 * d2 * vt.sqrt() * vs.sqrt()) / denom;
    let e3 = -0.5 * vt * d2 * d2 / denom;
    Ok(norm + e1 + e2 + e3)
}

/// `ln` of the product of the two marginal likelihoods, the `rho_hat = 0` form.
pub fn product_log_likelihood(info: &EffectiveInfo, x: f64) -> Result<f64> {
    info.check()?;
    let Some(c) = info.active_counterpart() else {
        return univariate_log_likelihood(info.own, info.horizon, x);
    };
    let (t, s) = (info.own.time, c.time);
    let vt = bridge_variance(t, info.horizon)?;
    let vs = bridge_variance(s, info.horizon)?;
    let d1 = info.own.xi - info.own.sigma * x * t;
    let d2 = c.xi - c.sigma * x * s;
    let norm = -(2.0 * PI * vt.sqrt() * vs.sqrt()).ln();
    Ok(norm - 0.5 * vs * d1 * d1 / (vt * vs) - 0.5 * vt * d2 * d2 / (vt * vs))
}

/// Coefficients `(A, B)` of the log-likelihood `A x - B x^2 / 2 + const`.
pub fn exponent_coefficients(info: &EffectiveInfo) -> Result<(f64, f64)> {
    info.check()?;
    let horizon = info.horizon;
    let own = info.own;
    let kt = kappa(own.time, horizon)?;
    let own_a = own.sigma * kt * own.xi;
    let own_b = own.sigma * own.sigma * own.time * kt;
    let Some(c) = info.active_counterpart() else {
        return Ok((own_a, own_b));
    };
    let (t, s) = (own.time, c.time);
    let ks = kappa(s, horizon)?;
    let rho_hat = conditional_corr(t, s, horizon, info.rho)?;
    let one_minus = 1.0 - rho_hat * rho_hat;
    if !(one_minus > 0.0) {
        return Err(Error::Numeric("signals are perfectly correlated".into()));
    }
    let w = 1.0 / one_minus;
    let r = rho_hat / (t * s / (kt * ks)).sqrt();
    let a = w * (own_a + c.sigma * ks * c.xi - r * (own.xi * c.sigma * s + c.xi * own.sigma * t));
    let b = w * (own_b + c.sigma * c.sigma * s * ks - 2.0 * r * own.sigma * c.sigma * t * s);
    Ok((a, b))
}

fn discrete_posterior(support: &[f64], prior: &[f64], a: f64, b: f64) -> Result<Posterior> {
    let logs: Vec<f64> = support
        .iter()
        .zip(prior)
        .map(|(&x, &p)| {
            if p > 0.0 {
                p.ln() + a * x - 0.5 * b * x * x
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::NumericUnderflow("every posterior weight is zero".into()));
    }
    let mut weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NumericUnderflow(format!("posterior normaliser is {total}")));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Posterior::Discrete {
        support: support.to_vec(),
        weights,
    })
}

/// Posterior of `X` given the agent's effective information.
pub fn posterior(model: &PayoffModel, info: &EffectiveInfo) -> Result<Posterior> {
    let (a, b) = exponent_coefficients(info)?;
    match model {
        PayoffModel::Gaussian => {
            let d = 1.0 + b;
            if !(d > 0.0) {
                return Err(Error::Numeric(format!("posterior precision {d} is not positive")));
            }
            Ok(Posterior::Normal {
                mean: a / d,
                variance: 1.0 / d,
            })
        }
        PayoffModel::Digital { x0, x1, p0, p1 } => discrete_posterior(&[*x0, *x1], &[*p0, *p1], a, b),
        PayoffModel::Tabulated { nodes, weights } => discrete_posterior(nodes, weights, a, b),
    }
}

/// Discounted posterior mean of `X`.
pub fn price(model: &PayoffModel, info: &EffectiveInfo, numeraire: &Numeraire) -> Result<f64> {
    let mean = posterior(model, info)?.mean();
    Ok(numeraire.discount(info.own.time)? * mean)
}

/// Gaussian-prior price by adaptive Gauss-Hermite integration of the prior
/// times the joint likelihood, independent of the closed form.
pub fn price_by_quadrature(info: &EffectiveInfo, numeraire: &Numeraire) -> Result<f64> {
    info.check()?;
    let log_weight = |x: f64| -0.5 * x * x + joint_log_likelihood(info, x).unwrap_or(f64::NEG_INFINITY);
    let (num, _) = adaptive_hermite(log_weight, |x| x)?;
    let (den, _) = adaptive_hermite(log_weight, |_| 1.0)?;
    if !(den > 0.0) {
        return Err(Error::NumericUnderflow("posterior normaliser vanished".into()));
    }
    Ok(numeraire.discount(info.own.time)? * num / den)
}

/// Discretised innovations `dW_i = kappa_i (xi_i / T - sigma E[X | xi_i]) dt_i + dxi_i`
/// along a path, one per interval of `times`.
pub fn innovation_increments(times: &[f64], path: &SignalPath, model: &PayoffModel) -> Result<Vec<f64>> {
    let xi = path.xi();
    if xi.len() != times.len() {
        return Err(Error::invalid("path and grid lengths differ"));
    }
    let params = path.params();
    let horizon = params.horizon;
    let mut out = Vec::with_capacity(times.len().saturating_sub(1));
    for i in 0..times.len().saturating_sub(1) {
        let t = times[i];
        let k = kappa(t, horizon)?;
        let info = EffectiveInfo::own_only(horizon, Observation::new(t, xi[i], params.sigma));
        let phi = posterior(model, &info)?.mean();
        let dt = times[i + 1] - t;
        out.push(k * (xi[i] / horizon - params.sigma * phi) * dt + (xi[i + 1] - xi[i]));
    }
    Ok(out)
}

/// Certainty-equivalent quotes of a CARA agent with a standard normal prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaraQuotes {
    pub bid: f64,
    pub ask: f64,
    /// Discounted risk-neutral price.
    pub mean: f64,
    /// Discounted half-spread `lambda / (2 D)`.
    pub premium: f64,
}

impl CaraQuotes {
    pub fn spread(&self) -> f64 {
        self.ask - self.bid
    }
}

/// Bid `M - lambda / (2 D)` and ask `M + lambda / (2 D)`, where `M` is the
/// posterior mean and `D` the posterior precision (`sigma^2 kappa_t t + 1`
/// with no counterpart information). Both are discounted.
pub fn cara_quotes(info: &EffectiveInfo, lambda: f64, numeraire: &Numeraire) -> Result<CaraQuotes> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("risk aversion must be positive, got {lambda}")));
    }
    let (a, b) = exponent_coefficients(info)?;
    let d = 1.0 + b;
    let disc = numeraire.discount(info.own.time)?;
    let m = a / d;
    let half = 0.5 * lambda / d;
    Ok(CaraQuotes {
        bid: disc * (m - half),
        ask: disc * (m + half),
        mean: disc * m,
        premium: disc * half,
    })
}

/// Price equalising the CARA utilities of a seller quoting `ask_seller` and a
/// buyer quoting `bid_buyer`: the risk-aversion weighted average.
pub fn cara_clearing_price(ask_seller: f64, bid_buyer: f64, lambda_seller: f64, lambda_buyer: f64) -> Result<f64> {
    if !(lambda_seller > 0.0 && lambda_buyer > 0.0) {
        return Err(Error::invalid(format!(
            "risk aversions must be positive, got ({lambda_seller}, {lambda_buyer})"
        )));
    }
    let total = lambda_seller + lambda_buyer;
    Ok(lambda_seller / total * ask_seller + lambda_buyer / total * bid_buyer)
}
