//! Brownian bridges and the signal processes built on them.
//!
//! The production sampler is the exact sequential construction: given
//! `beta(t_i)`, the next value `beta(t_{i+1})` is Gaussian with mean
//! `beta(t_i) * (T - t_{i+1}) / (T - t_i)` and variance
//! `(t_{i+1} - t_i) * (T - t_{i+1}) / (T - t_i)`. Paths are pinned to zero at
//! both ends by construction.
//!
//! Randomness comes from ChaCha streams: [`path_rng`] gives every Monte Carlo
//! path its own stream under a common seed, so results do not depend on how
//! paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Auction times `0 = t_0 < t_1 < ... < t_m = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with spacing `T / m`.
    pub fn uniform(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if intervals == 0 {
            return Err(Error::invalid("grid needs at least one interval"));
        }
        let m = intervals as f64;
        let mut times: Vec<f64> = (0..=intervals).map(|i| i as f64 * horizon / m).collect();
        times[intervals] = horizon;
        Ok(Self { times })
    }

    /// Grid from explicit times. The first time must be zero.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("grid needs at least two times"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("grid must start at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("grid times must be finite and strictly increasing"));
        }
        Ok(Self { times })
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Number of intervals `m`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Spacing `t_{i+1} - t_i`.
    pub fn step(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// Number of grid points, `m + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn make_grid(horizon: f64, intervals: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(horizon, intervals)
}

/// Time change `kappa_t = T / (T - t)`.
///
/// Diverges at `t = T`, which callers treat as settlement rather than pricing.
pub fn kappa(t: f64, horizon: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("kappa needs t >= 0, got {t}")));
    }
    if t >= horizon {
        return Err(Error::domain(format!(
            "kappa diverges at t >= T (t = {t}, T = {horizon})"
        )));
    }
    Ok(horizon / (horizon - t))
}

/// Deterministic RNG for Monte Carlo path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// One exact Brownian bridge path on `grid`, pinned to zero at `0` and `T`.
pub fn sample_bridge<R: Rng + ?Sized>(grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let horizon = grid.horizon();
    let m = grid.intervals();
    let mut beta = Vec::with_capacity(m + 1);
    beta.push(0.0);
    for i in 0..m {
        if i + 1 == m {
            beta.push(0.0);
            break;
        }
        let (t0, t1) = (grid.time(i), grid.time(i + 1));
        let remaining = horizon - t0;
        let mean = beta[i] * (horizon - t1) / remaining;
        let var = (t1 - t0) * (horizon - t1) / remaining;
        let z: f64 = rng.sample(StandardNormal);
        beta.push(mean + var.sqrt() * z);
    }
    beta
}

/// Two correlated bridges, `beta1 = rho * beta2 + sqrt(1 - rho^2) * independent`.
#[derive(Debug, Clone)]
pub struct BridgePair {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    /// The bridge independent of `beta2` that is mixed into `beta1`.
    pub independent: Vec<f64>,
    pub rho: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

pub fn sample_bridge_pair_with<R: Rng + ?Sized>(
    grid: &TimeGrid,
    rho: f64,
    rng: &mut R,
) -> Result<BridgePair> {
    check_rho(rho)?;
    let beta2 = sample_bridge(grid, rng);
    let independent = sample_bridge(grid, rng);
    let mix = (1.0 - rho * rho).sqrt();
    let beta1 = beta2
        .iter()
        .zip(&independent)
        .map(|(b2, bb)| rho * b2 + mix * bb)
        .collect();
    Ok(BridgePair {
        beta1,
        beta2,
        independent,
        rho,
    })
}

pub fn sample_bridge_pair(grid: &TimeGrid, rho: f64, seed: u64) -> Result<BridgePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_bridge_pair_with(grid, rho, &mut rng)
}

/// One agent's information channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// Signal-to-noise, the speed at which the payoff leaks into the signal.
    pub sigma: f64,
    pub horizon: f64,
}

impl SignalParams {
    /// `sigma = 0` is accepted and describes a pure-noise channel.
    pub fn new(sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { sigma, horizon })
    }
}

/// Signal values `xi_{t_i}` together with the realized payoff.
///
/// The payoff is kept for settlement and test oracles only; agents see the
/// path through [`SignalPath::observed`].
#[derive(Debug, Clone)]
pub struct SignalPath {
    xi: Vec<f64>,
    params: SignalParams,
    x: f64,
}

/// The part of a [`SignalPath`] an agent is allowed to see.
#[derive(Debug, Clone, Copy)]
pub struct SignalView<'a> {
    pub xi: &'a [f64],
    pub params: SignalParams,
}

impl SignalPath {
    pub fn observed(&self) -> SignalView<'_> {
        SignalView {
            xi: &self.xi,
            params: self.params,
        }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn params(&self) -> SignalParams {
        self.params
    }

    /// Realized payoff. Settlement and oracle code only.
    pub fn fundamental(&self) -> f64 {
        self.x
    }
}

/// `xi_{t_i} = sigma * t_i * x + beta_{t_i}`.
pub fn signal_path(grid: &TimeGrid, bridge: &[f64], params: SignalParams, x: f64) -> Result<SignalPath> {
    if bridge.len() != grid.len() {
        return Err(Error::invalid(format!(
            "bridge has {} points but grid has {}",
            bridge.len(),
            grid.len()
        )));
    }
    let xi = grid
        .times()
        .iter()
        .zip(bridge)
        .map(|(&t, &b)| params.sigma * t * x + b)
        .collect();
    Ok(SignalPath { xi, params, x })
}

/// Drift of the conditional signal SDE, `(sigma * x - xi / T) * kappa_t`.
pub fn sde_drift(t: f64, xi: f64, params: SignalParams, x: f64) -> Result<f64> {
    let k = kappa(t, params.horizon)?;
    Ok((params.sigma * x - xi / params.horizon) * k)
}

/// Euler-Maruyama path of `d xi = (sigma x - xi / T) kappa_t dt + dB_t`.
///
/// A distributional cross-check for [`signal_path`]; the drift is only ever
/// evaluated on `[0, t_{m-1}]`, and the terminal point is set from the
/// pinning condition `xi_T = sigma * T * x`.
pub fn simulate_sde_bridge_with<R: Rng + ?Sized>(
    grid: &TimeGrid,
    params: SignalParams,
    x: f64,
    rng: &mut R,
) -> Result<SignalPath> {
    let m = grid.intervals();
    let mut xi = Vec::with_capacity(m + 1);
    xi.push(0.0);
    for i in 0..m {
        if i + 1 == m {
            xi.push(params.sigma * params.horizon * x);
            break;
        }
        let dt = grid.step(i);
        let drift = sde_drift(grid.time(i), xi[i], params, x)?;
        let z: f64 = rng.sample(StandardNormal);
        xi.push(xi[i] + drift * dt + dt.sqrt() * z);
    }
    Ok(SignalPath { xi, params, x })
}

pub fn simulate_sde_bridge(grid: &TimeGrid, params: SignalParams, x: f64, seed: u64) -> Result<SignalPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_sde_bridge_with(grid, params, x, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grids() {
        let g = make_grid(1.0, 10).unwrap();
        assert_eq!(g.len(), 11);
        for (i, &t) in g.times().iter().enumerate() {
            assert!((t - i as f64 / 10.0).abs() < 1e-15);
        }
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(make_grid(1.0, 1).unwrap().times(), &[0.0, 1.0]);
        assert_eq!(make_grid(2.0, 4).unwrap().times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(0.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(-1.0, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_times(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(kappa(0.5, 1.0).unwrap(), 2.0);
        assert!((kappa(0.9, 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(kappa(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(kappa(1.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bridges_are_pinned() {
        let g = make_grid(1.0, 50).unwrap();
        for seed in 0..20 {
            let p = sample_bridge_pair(&g, 0.3, seed).unwrap();
            for b in [&p.beta1, &p.beta2, &p.independent] {
                assert_eq!(b[0], 0.0);
                assert_eq!(b[50], 0.0);
            }
        }
    }

    #[test]
    fn perfect_correlation_copies_bridge() {
        let g = make_grid(1.0, 20).unwrap();
        let p = sample_bridge_pair(&g, 1.0, 3).unwrap();
        assert_eq!(p.beta1, p.beta2);
    }

    #[test]
    fn mixing_identity_holds() {
        let g = make_grid(1.0, 20).unwrap();
        let rho = -0.4;
        let p = sample_bridge_pair(&g, rho, 11).unwrap();
        let mix = (1.0 - rho * rho).sqrt();
        for i in 0..g.len() {
            let expected = rho * p.beta2[i] + mix * p.independent[i];
            assert!((p.beta1[i] - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn rho_out_of_range() {
        let g = make_grid(1.0, 4).unwrap();
        assert!(matches!(sample_bridge_pair(&g, 1.01, 0), Err(Error::InvalidArgument(_))));
        assert!(sample_bridge_pair(&g, f64::NAN, 0).is_err());
    }

    #[test]
    fn signal_path_shapes() {
        let g = make_grid(1.0, 10).unwrap();
        let beta = sample_bridge(&g, &mut path_rng(1, 0));
        let zero_x = signal_path(&g, &beta, SignalParams::new(1.5, 1.0).unwrap(), 0.0).unwrap();
        assert_eq!(zero_x.xi(), &beta[..]);
        let zero_sigma = signal_path(&g, &beta, SignalParams::new(0.0, 1.0).unwrap(), 3.0).unwrap();
        assert_eq!(zero_sigma.xi(), &beta[..]);
        let pinned = signal_path(&g, &beta, SignalParams::new(1.5, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(pinned.xi()[10], 1.5);
        assert_eq!(pinned.xi()[0], 0.0);
        assert!(signal_path(&g, &beta[..5], SignalParams::new(1.5, 1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn sde_drift_reduces_without_signal() {
        let p = SignalParams::new(0.0, 1.0).unwrap();
        let d = sde_drift(0.5, 0.3, p, 7.0).unwrap();
        assert!((d - (-0.3 * 2.0)).abs() < 1e-15);
        assert!(matches!(sde_drift(1.0, 0.3, p, 7.0), Err(Error::Domain(_))));
    }

    #[test]
    fn path_streams_differ() {
        let g = make_grid(1.0, 10).unwrap();
        let a = sample_bridge(&g, &mut path_rng(5, 0));
        let b = sample_bridge(&g, &mut path_rng(5, 1));
        let a2 = sample_bridge(&g, &mut path_rng(5, 0));
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
