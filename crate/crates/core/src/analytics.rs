//! Ex-ante trade quality and expected profit before an auction.
//!
//! With both agents attentive and the last trade at `s`, the half price
//! differential `Y_j = (S^j - S^k) / 2` of agent `j` against its counterpart
//! `k` is, for a pinned payoff `x`, Gaussian with mean `-a_j x` and standard
//! deviation `b`. Everything here is built from `(a, b)` and the positive-part
//! moments of that Gaussian. Prices are undiscounted and the bridges are taken
//! independent.

use serde::{Deserialize, Serialize};

use crate::bridge::{kappa, TimeGrid};
use crate::error::{Error, Result};
use crate::pricing::{PayoffModel, Posterior};
use crate::quadrature::{normal_cdf, normal_expectation, normal_half_line, normal_pdf};

/// One side of the two-agent market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    First,
    Second,
}

impl Agent {
    /// Zero-based index.
    pub fn index(self) -> usize {
        match self {
            Agent::First => 0,
            Agent::Second => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Agent::First),
            1 => Ok(Agent::Second),
            _ => Err(Error::invalid(format!("agent index {i} is not 0 or 1"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Agent::First => Agent::Second,
            Agent::Second => Agent::First,
        }
    }
}

/// Times and signal-to-noise pair at which the quality measures are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityInputs {
    pub t: f64,
    /// Last trade time, zero when there has been none.
    pub s: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub horizon: f64,
}

impl QualityInputs {
    pub fn new(t: f64, s: f64, sigma1: f64, sigma2: f64, horizon: f64) -> Result<Self> {
        let q = Self {
            t,
            s,
            sigma1,
            sigma2,
            horizon,
        };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        if self.t >= self.horizon {
            return Err(Error::domain(format!("t = {} is not before T = {}", self.t, self.horizon)));
        }
        if !(self.s >= 0.0 && self.s < self.t) {
            return Err(Error::invalid(format!("need 0 <= s < t, got s = {}, t = {}", self.s, self.t)));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::invalid(format!(
                "signal-to-noise values must be positive, got ({}, {})",
                self.sigma1, self.sigma2
            )));
        }
        Ok(())
    }

    /// The same agents at another `(t, s)`.
    pub fn at(&self, t: f64, s: f64) -> Result<Self> {
        Self::new(t, s, self.sigma1, self.sigma2, self.horizon)
    }
}

/// Drift `a` and standard deviation `b` of the half price differential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABCoefficients {
    pub a: f64,
    pub b: f64,
}

impl ABCoefficients {
    /// Signed drift `a_j`: `Y_j ~ N(-a_j x, b^2)`.
    pub fn drift(&self, agent: Agent) -> f64 {
        match agent {
            Agent::First => self.a,
            Agent::Second => -self.a,
        }
    }
}

pub fn ab_coefficients(q: &QualityInputs) -> Result<ABCoefficients> {
    q.check()?;
    let (t, s, s1, s2) = (q.t, q.s, q.sigma1, q.sigma2);
    let kt = kappa(t, q.horizon)?;
    let ks = kappa(s, q.horizon)?;
    let (s1sq, s2sq) = (s1 * s1, s2 * s2);

    let a = 0.5 * (s2sq * t * kt / (s2sq * t * kt + s1sq * s * ks + 1.0) - s2sq * s * ks / (s2sq * s * ks + s1sq * t * kt + 1.0))
        - 0.5 * (s1sq * t * kt / (s1sq * t * kt + s2sq * s * ks + 1.0) - s1sq * s * ks / (s1sq * s * ks + s2sq * t * kt + 1.0));

    let c1t = s1 * kt / (s1sq * t * kt + s2sq * s * ks + 1.0);
    let c1s = s1 * ks / (s1sq * s * ks + s2sq * t * kt + 1.0);
    let c2t = s2 * kt / (s2sq * t * kt + s1sq * s * ks + 1.0);
    let c2s = s2 * ks / (s2sq * s * ks + s1sq * t * kt + 1.0);
    let inner = c1t * c1t * (t / kt) + c1s * c1s * (s / ks) - 2.0 * c1t * c1s * (s / kt)
        + c2t * c2t * (t / kt)
        + c2s * c2s * (s / ks)
        - 2.0 * c2t * c2s * (s / kt);
    let b = 0.5 * inner.max(0.0).sqrt();
    Ok(ABCoefficients { a, b })
}

/// Probability that a digital-payoff agent's price sits on the right side of
/// the clearing price. `spread` is `x1 - x0`; the value is the same in both
/// market types and does not depend on the realized signals.
pub fn p_correct_digital(q: &QualityInputs, spread: f64, agent: Agent) -> Result<f64> {
    q.check()?;
    if !(spread > 0.0) {
        return Err(Error::invalid(format!("digital spread must be positive, got {spread}")));
    }
    let kt = kappa(q.t, q.horizon)?;
    let ks = kappa(q.s, q.horizon)?;
    let gap = q.t * kt - q.s * ks;
    if !(gap > 0.0) {
        return Err(Error::invalid("t kappa_t must exceed s kappa_s"));
    }
    let (s1sq, s2sq) = (q.sigma1 * q.sigma1, q.sigma2 * q.sigma2);
    let arg = 0.5 * spread * gap * (s1sq - s2sq) / ((s1sq + s2sq).sqrt() * gap.sqrt());
    let p1 = normal_cdf(arg);
    Ok(match agent {
        Agent::First => p1,
        Agent::Second => 1.0 - p1,
    })
}

/// Quality in each market type and overall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PCorrect {
    /// Given `X > 0`.
    pub high: f64,
    /// Given `X < 0`.
    pub low: f64,
    pub overall: f64,
}

/// `int f dpi` over `x > 0` (or `x < 0`), unnormalised.
fn half_integral(post: &Posterior, positive: bool, mut f: impl FnMut(f64) -> f64) -> f64 {
    match post {
        Posterior::Normal { mean, variance } => normal_half_line(*mean, *variance, positive, f),
        Posterior::Discrete { support, weights } => support
            .iter()
            .zip(weights)
            .filter(|(x, _)| if positive { **x > 0.0 } else { **x < 0.0 })
            .map(|(x, w)| w * f(*x))
            .sum(),
    }
}

pub fn p_correct_gaussian(q: &QualityInputs, posterior: &Posterior, agent: Agent) -> Result<PCorrect> {
    let ab = ab_coefficients(q)?;
    let aj = ab.drift(agent);
    let mass_hi = half_integral(posterior, true, |_| 1.0);
    let mass_lo = half_integral(posterior, false, |_| 1.0);
    if !(mass_hi > 0.0 && mass_lo > 0.0) {
        return Err(Error::Numeric(format!(
            "half posterior cannot be normalised (masses {mass_hi}, {mass_lo})"
        )));
    }
    let hi = half_integral(posterior, true, |x| normal_cdf(-aj * x / ab.b));
    let lo = half_integral(posterior, false, |x| normal_cdf(aj * x / ab.b));
    Ok(PCorrect {
        high: hi / mass_hi,
        low: lo / mass_lo,
        overall: hi + lo,
    })
}

/// `E[Y^+]` for `Y ~ N(mean, sd^2)`.
pub fn truncated_mean_positive_part(mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::invalid(format!("standard deviation must be positive, got {sd}")));
    }
    let z = mean / sd;
    Ok(mean * normal_cdf(z) + sd * normal_pdf(z))
}

/// `E[(Y^+)^2]` for `Y ~ N(mean, sd^2)`.
pub fn truncated_second_moment_positive_part(mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::invalid(format!("standard deviation must be positive, got {sd}")));
    }
    let z = mean / sd;
    Ok((mean * mean + sd * sd) * normal_cdf(z) + mean * sd * normal_pdf(z))
}

/// Expected clearing prices by market type and signal correctness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedPrices {
    pub high_correct: f64,
    pub high_error: f64,
    pub low_correct: f64,
    pub low_error: f64,
}

/// Expected mid-prices for an agent quoting `s_own`, with the payoff pinned
/// at `|x|` in the high-type market and `-|x|` in the low-type one.
pub fn expected_transaction_prices(q: &QualityInputs, x: f64, s_own: f64, agent: Agent) -> Result<ExpectedPrices> {
    let ab = ab_coefficients(q)?;
    let m = -ab.drift(agent) * x.abs();
    let k_correct = truncated_mean_positive_part(m, ab.b)?;
    let k_error = truncated_mean_positive_part(-m, ab.b)?;
    Ok(ExpectedPrices {
        high_correct: s_own - k_correct,
        high_error: s_own + k_error,
        low_correct: s_own + k_correct,
        low_error: s_own - k_error,
    })
}

/// Mean and second moment of the per-trade gain at a pinned payoff `x`.
fn kernel_moments(ab: &ABCoefficients, x: f64, agent: Agent) -> (f64, f64) {
    let m = -ab.drift(agent) * x.abs();
    let b = ab.b;
    if !(b > 0.0) {
        return (0.0, 0.0);
    }
    let z = m / b;
    let (pc, pe) = (normal_cdf(z), normal_cdf(-z));
    let kc = m * pc + b * normal_pdf(z);
    let ke = -m * pe + b * normal_pdf(z);
    let sc = (m * m + b * b) * pc + m * b * normal_pdf(z);
    let se = (m * m + b * b) * pe - m * b * normal_pdf(z);
    (pc * kc - pe * ke, pc * sc + pe * se)
}

/// The expected gain `H(t, s)` for a pinned payoff `x`, independent of the signals.
pub fn h_integrand(q: &QualityInputs, x: f64, agent: Agent) -> Result<f64> {
    let ab = ab_coefficients(q)?;
    Ok(kernel_moments(&ab, x, agent).0)
}

/// Mean and variance of the gain at a pinned payoff `x`.
pub fn profit_moments_at(q: &QualityInputs, x: f64, agent: Agent) -> Result<(f64, f64)> {
    let ab = ab_coefficients(q)?;
    let (m1, m2) = kernel_moments(&ab, x, agent);
    Ok((m1, (m2 - m1 * m1).max(0.0)))
}

/// Expected profit of a trade at `t` given the agent's effective posterior.
pub fn expected_profit(q: &QualityInputs, posterior: &Posterior, agent: Agent) -> Result<f64> {
    let ab = ab_coefficients(q)?;
    check_mass(posterior)?;
    let f = |x: f64| kernel_moments(&ab, x, agent).0;
    Ok(half_integral(posterior, true, f) + half_integral(posterior, false, f))
}

/// Variance of the profit of a trade at `t`, second moment minus squared mean.
pub fn profit_variance(q: &QualityInputs, posterior: &Posterior, agent: Agent) -> Result<f64> {
    let ab = ab_coefficients(q)?;
    check_mass(posterior)?;
    let f1 = |x: f64| kernel_moments(&ab, x, agent).0;
    let f2 = |x: f64| kernel_moments(&ab, x, agent).1;
    let mean = half_integral(posterior, true, f1) + half_integral(posterior, false, f1);
    let second = half_integral(posterior, true, f2) + half_integral(posterior, false, f2);
    let var = second - mean * mean;
    if var < -1e-10 {
        return Err(Error::Numeric(format!("negative profit variance {var}")));
    }
    Ok(var.max(0.0))
}

fn check_mass(posterior: &Posterior) -> Result<()> {
    let total = posterior.total_mass();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Numeric(format!("posterior mass is {total}, not 1")));
    }
    Ok(())
}

/// Expected profit of a digital-payoff trade at `t`, `sum_k P_t(x_k) E[q_j (x_k - S*) | x_k]`.
///
/// Given `x`, the two agents' posterior log-odds are jointly Gaussian; the
/// expectation is taken over them by splitting at the line where the prices
/// cross, Gauss-Legendre across it and Gauss-Hermite along it.
pub fn expected_profit_digital(q: &QualityInputs, model: &PayoffModel, weights: &Posterior, agent: Agent) -> Result<f64> {
    q.check()?;
    let PayoffModel::Digital { x0, x1, p0, p1 } = *model else {
        return Err(Error::invalid("digital expected profit needs a digital payoff"));
    };
    let Posterior::Discrete { support, weights } = weights else {
        return Err(Error::invalid("digital expected profit needs discrete posterior weights"));
    };
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(Error::invalid("digital prior masses must be positive"));
    }
    let kt = kappa(q.t, q.horizon)?;
    let ks = kappa(q.s, q.horizon)?;
    let (s1sq, s2sq) = (q.sigma1 * q.sigma1, q.sigma2 * q.sigma2);
    let d = x1 - x0;
    let c = (p1 / p0).ln();
    let b1 = s1sq * q.t * kt + s2sq * q.s * ks;
    let b2 = s2sq * q.t * kt + s1sq * q.s * ks;
    let (v1, v2) = (d * d * b1, d * d * b2);
    let cov = d * d * (s1sq + s2sq) * q.s * ks;
    let var_u = v1 + v2 - 2.0 * cov;
    let var_v = v1 + v2 + 2.0 * cov;
    let cov_uv = v1 - v2;
    let cond_var = (var_v - cov_uv * cov_uv / var_u).max(0.0);
    let sign = match agent {
        Agent::First => 1.0,
        Agent::Second => -1.0,
    };
    let logistic = |l: f64| 1.0 / (1.0 + (-l).exp());

    let mut total = 0.0;
    for (&x, &w) in support.iter().zip(weights.iter()) {
        if w == 0.0 {
            continue;
        }
        let mid = 0.5 * (x1 + x0);
        let mu1 = c + b1 * d * (x - mid);
        let mu2 = c + b2 * d * (x - mid);
        let (mu_u, mu_v) = (mu1 - mu2, mu1 + mu2);
        let inner = |u: f64| {
            let mv = mu_v + cov_uv / var_u * (u - mu_u);
            normal_expectation(mv, cond_var, |v| {
                let (l1, l2) = (0.5 * (v + u), 0.5 * (v - u));
                x - (x0 + 0.5 * d * (logistic(l1) + logistic(l2)))
            })
        };
        let up = normal_half_line(mu_u, var_u, true, &inner);
        let down = normal_half_line(mu_u, var_u, false, &inner);
        total += w * sign * (up - down);
    }
    Ok(total)
}

/// Per-(t, s) expected profit on a grid of auctions `t_1, ..., t_{m-1}`.
#[derive(Debug, Clone)]
pub struct ProfitSurface {
    pub grid: TimeGrid,
    pub sigma1: f64,
    pub sigma2: f64,
    pub agent: Agent,
    pub weighting: SurfaceWeighting,
}

/// How the payoff is integrated out.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceWeighting {
    /// Average over the agent's posterior.
    Posterior(Posterior),
    /// Pin the payoff, giving the signal-independent `H(t, s)`.
    Payoff(f64),
}

impl ProfitSurface {
    /// Index of the last auction, `m - 1`.
    pub fn last_auction(&self) -> usize {
        self.grid.intervals() - 1
    }

    pub fn inputs(&self, t: usize, s: usize) -> Result<QualityInputs> {
        if t == 0 || t > self.last_auction() {
            return Err(Error::invalid(format!(
                "auction index {t} outside 1..={}",
                self.last_auction()
            )));
        }
        if s >= t {
            return Err(Error::invalid(format!("last trade index {s} is not before {t}")));
        }
        QualityInputs::new(self.grid.time(t), self.grid.time(s), self.sigma1, self.sigma2, self.grid.horizon())
    }

    /// Expected profit of trading at auction `t` with the last trade at `s`.
    pub fn expected(&self, t: usize, s: usize) -> Result<f64> {
        let q = self.inputs(t, s)?;
        match &self.weighting {
            SurfaceWeighting::Posterior(p) => expected_profit(&q, p, self.agent),
            SurfaceWeighting::Payoff(x) => h_integrand(&q, *x, self.agent),
        }
    }

    /// Mean and variance of that profit.
    pub fn moments(&self, t: usize, s: usize) -> Result<(f64, f64)> {
        let q = self.inputs(t, s)?;
        match &self.weighting {
            SurfaceWeighting::Posterior(p) => Ok((
                expected_profit(&q, p, self.agent)?,
                profit_variance(&q, p, self.agent)?,
            )),
            SurfaceWeighting::Payoff(x) => profit_moments_at(&q, *x, self.agent),
        }
    }
}

/// Expected profit collected from auction `t` onward when the last trade was
/// at `s` and `schedule[k]` says whether to trade at auction `t + k`. Skipped
/// auctions contribute nothing; a trade at `u` moves the last trade time to `u`.
pub fn profit_to_go(surface: &ProfitSurface, t: usize, s: usize, schedule: &[bool]) -> Result<f64> {
    let last = surface.last_auction();
    if t == 0 || t > last || schedule.len() != last + 1 - t {
        return Err(Error::invalid(format!(
            "schedule of length {} does not cover auctions {t}..={last}",
            schedule.len()
        )));
    }
    let mut s_u = s;
    let mut total = 0.0;
    for (k, &trade) in schedule.iter().enumerate() {
        let u = t + k;
        if trade {
            total += surface.expected(u, s_u)?;
            s_u = u;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(t: f64, s: f64, s1: f64, s2: f64) -> QualityInputs {
        QualityInputs::new(t, s, s1, s2, 1.0).unwrap()
    }

    #[test]
    fn ab_equal_sigmas() {
        let ab = ab_coefficients(&q(0.5, 0.2, 0.8, 0.8)).unwrap();
        assert!(ab.a.abs() < 1e-15);
        assert!(ab.b > 0.0);
    }

    #[test]
    fn ab_without_prior_trade() {
        let (s1, s2, t) = (0.5f64, 1.5f64, 0.5f64);
        let kt = 2.0;
        let ab = ab_coefficients(&q(t, 0.0, s1, s2)).unwrap();
        let a = 0.5 * (s2 * s2 * t * kt / (s2 * s2 * t * kt + 1.0) - s1 * s1 * t * kt / (s1 * s1 * t * kt + 1.0));
        let c1 = s1 * kt / (s1 * s1 * t * kt + 1.0);
        let c2 = s2 * kt / (s2 * s2 * t * kt + 1.0);
        let b = 0.5 * ((c1 * c1 + c2 * c2) * t / kt).sqrt();
        assert!((ab.a - a).abs() < 1e-15 && (ab.b - b).abs() < 1e-15);
        assert!(ab.a > 0.0);
    }

    #[test]
    fn digital_quality_example() {
        let p = p_correct_digital(&q(0.5, 0.0, 0.5, 1.5), 1.0, Agent::First).unwrap();
        let arg: f64 = 0.5 * (0.25 - 2.25) / 2.5f64.sqrt();
        assert!((arg + 0.632_455_532_033_675_9).abs() < 1e-12);
        assert!((p - normal_cdf(arg)).abs() < 1e-15);
        assert!((p - 0.2635).abs() < 1e-4);
        let p2 = p_correct_digital(&q(0.5, 0.0, 0.5, 1.5), 1.0, Agent::Second).unwrap();
        assert_eq!(p2, 1.0 - p);
        assert_eq!(p_correct_digital(&q(0.5, 0.1, 1.0, 1.0), 1.0, Agent::First).unwrap(), 0.5);
    }

    #[test]
    fn positive_part_examples() {
        let v = truncated_mean_positive_part(0.0, 1.0).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((truncated_mean_positive_part(10.0, 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((truncated_mean_positive_part(-1.0, 1.0).unwrap() - 0.083_315_470_587_686_3).abs() < 1e-12);
        assert!(truncated_mean_positive_part(0.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_agents_have_no_edge() {
        let qi = q(0.6, 0.3, 1.1, 1.1);
        let post = Posterior::Normal { mean: 0.0, variance: 0.4 };
        assert!(expected_profit(&qi, &post, Agent::First).unwrap().abs() < 1e-15);
        let pc = p_correct_gaussian(&qi, &post, Agent::First).unwrap();
        assert!((pc.overall - 0.5).abs() < 1e-14);
        let ep = expected_transaction_prices(&qi, 0.7, 0.2, Agent::First).unwrap();
        assert!(((ep.high_correct + ep.high_error) * 0.5 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn inferior_agent_loses_superior_gains() {
        let qi = q(0.5, 0.0, 0.5, 1.5);
        let post = Posterior::Normal { mean: 0.3, variance: 0.5 };
        assert!(expected_profit(&qi, &post, Agent::First).unwrap() < 0.0);
        assert!(expected_profit(&qi, &post, Agent::Second).unwrap() > 0.0);
        let pc = p_correct_gaussian(&qi, &post, Agent::First).unwrap();
        assert!(pc.overall < 0.5);
    }

    #[test]
    fn quality_identity_symmetric_posterior() {
        let qi = q(0.5, 0.2, 0.5, 1.5);
        let post = Posterior::Normal { mean: 0.0, variance: 0.3 };
        let pc = p_correct_gaussian(&qi, &post, Agent::First).unwrap();
        assert!((pc.high - pc.low).abs() < 1e-10);
    }

    #[test]
    fn variance_is_non_negative() {
        let qi = q(0.9, 0.5, 0.7, 1.3);
        let post = Posterior::Normal { mean: -0.2, variance: 0.05 };
        assert!(profit_variance(&qi, &post, Agent::Second).unwrap() >= 0.0);
    }

    #[test]
    fn profit_to_go_single_term() {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let surface = ProfitSurface {
            grid,
            sigma1: 0.5,
            sigma2: 1.0,
            agent: Agent::Second,
            weighting: SurfaceWeighting::Payoff(0.5),
        };
        let g = surface.expected(4, 2).unwrap();
        assert_eq!(profit_to_go(&surface, 4, 2, &[true]).unwrap(), g);
        assert_eq!(profit_to_go(&surface, 4, 2, &[false]).unwrap(), 0.0);
        assert!(profit_to_go(&surface, 3, 2, &[true]).is_err());
    }
}
