//! When to trade: the cost-adjusted gain, the real-time rule and the value
//! recursion on the `(t, s)` state of auction index and last trade index.
//!
//! Trading at `t` earns `G(t, s)` now and moves the last trade to `t`;
//! skipping keeps the informational lead. Index `s = 0` means no trade yet.

use rayon::prelude::*;

use crate::analytics::{Agent, ProfitSurface, SurfaceWeighting};
use crate::bridge::TimeGrid;
use crate::error::{Error, Result};

/// Values over admissible states: `values[t][s]` for `1 <= t <= m - 1`, `s < t`.
/// Row 0 is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionGrid {
    pub values: Vec<Vec<f64>>,
}

impl DecisionGrid {
    pub fn get(&self, t: usize, s: usize) -> Option<f64> {
        self.values.get(t).and_then(|row| row.get(s)).copied()
    }

    pub fn last_auction(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Every admissible `(t, s, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(t, row)| row.iter().enumerate().map(move |(s, v)| (t, s, *v)))
    }
}

fn fill(last: usize, f: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<DecisionGrid> {
    let mut values = vec![Vec::new()];
    for t in 1..=last {
        let row: Result<Vec<f64>> = (0..t).into_par_iter().map(|s| f(t, s)).collect();
        values.push(row?);
    }
    Ok(DecisionGrid { values })
}

/// `H(t, s)` for a pinned payoff `x` on every admissible state of `grid`.
pub fn h_surface(grid: &TimeGrid, sigma1: f64, sigma2: f64, x: f64, agent: Agent) -> Result<DecisionGrid> {
    let surface = ProfitSurface {
        grid: grid.clone(),
        sigma1,
        sigma2,
        agent,
        weighting: SurfaceWeighting::Payoff(x),
    };
    expected_surface(&surface)
}

/// `G(t, s)` on every admissible state.
pub fn expected_surface(surface: &ProfitSurface) -> Result<DecisionGrid> {
    if surface.grid.intervals() < 2 {
        return Err(Error::invalid("need at least one auction strictly inside (0, T)"));
    }
    fill(surface.last_auction(), |t, s| surface.expected(t, s))
}

/// `G(t, s) - (G(t + 1, s) - G(t + 1, t))`.
pub fn adjusted_gain(surface: &ProfitSurface, t: usize, s: usize) -> Result<f64> {
    if t >= surface.last_auction() {
        return Err(Error::invalid(format!("auction {t} has no successor")));
    }
    let now = surface.expected(t, s)?;
    let keep = surface.expected(t + 1, s)?;
    let share = surface.expected(t + 1, t)?;
    Ok(now - (keep - share))
}

/// Adjusted gain on every state that has a successor.
pub fn adjusted_gain_surface(surface: &ProfitSurface) -> Result<DecisionGrid> {
    let last = surface.last_auction();
    if last < 2 {
        return Err(Error::invalid("need at least two auctions"));
    }
    fill(last - 1, |t, s| adjusted_gain(surface, t, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Trade,
    Skip,
}

/// Trade iff the immediate expected profit is positive and, unless this is
/// the last auction, the adjusted gain is positive as well.
pub fn decide(surface: &ProfitSurface, t: usize, s: usize) -> Result<Decision> {
    let now = surface.expected(t, s)?;
    if !(now > 0.0) {
        return Ok(Decision::Skip);
    }
    if t == surface.last_auction() {
        return Ok(Decision::Trade);
    }
    let keep = surface.expected(t + 1, s)?;
    let share = surface.expected(t + 1, t)?;
    Ok(if now - (keep - share) > 0.0 {
        Decision::Trade
    } else {
        Decision::Skip
    })
}

/// Optimal values and actions over the `(t, s)` states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub value: DecisionGrid,
    pub action: Vec<Vec<Decision>>,
}

/// `V(t, s) = max(G(t, s) + V(t + 1, t), V(t + 1, s))` with `V = 0` after the
/// last auction. Ties go to skipping.
pub fn value_recursion(surface: &ProfitSurface) -> Result<ValueGrid> {
    let g = expected_surface(surface)?;
    let last = surface.last_auction();
    let mut value = vec![Vec::new(); last + 2];
    let mut action = vec![Vec::new(); last + 1];
    value[last + 1] = vec![0.0; last + 1];
    for t in (1..=last).rev() {
        let mut vrow = Vec::with_capacity(t);
        let mut arow = Vec::with_capacity(t);
        for s in 0..t {
            let trade = g.values[t][s] + value[t + 1][t];
            let skip = value[t + 1][s];
            if trade > skip {
                vrow.push(trade);
                arow.push(Decision::Trade);
            } else {
                vrow.push(skip);
                arow.push(Decision::Skip);
            }
        }
        value[t] = vrow;
        action[t] = arow;
    }
    value.truncate(last + 1);
    Ok(ValueGrid {
        value: DecisionGrid { values: value },
        action,
    })
}

/// Best schedule from `(t, s)` by trying all `2^(m - t)` of them.
pub fn enumerate_best(surface: &ProfitSurface, t: usize, s: usize) -> Result<(f64, Vec<bool>)> {
    let last = surface.last_auction();
    if t == 0 || t > last {
        return Err(Error::invalid(format!("auction index {t} outside 1..={last}")));
    }
    let n = last + 1 - t;
    if n > 20 {
        return Err(Error::invalid(format!("{n} auctions are too many to enumerate")));
    }
    let g = expected_surface(surface)?;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 0u32..(1u32 << n) {
        let schedule: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
        let mut s_u = s;
        let mut total = 0.0;
        for (k, &trade) in schedule.iter().enumerate() {
            if trade {
                total += g.values[t + k][s_u];
                s_u = t + k;
            }
        }
        if total > best.0 {
            best = (total, schedule);
        }
    }
    Ok(best)
}

/// Decisions at auctions `1..=m-1` and the resulting state path.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTrace {
    pub decisions: Vec<Decision>,
    /// Last trade index in force at each auction.
    pub last_trade: Vec<usize>,
    /// Sum of expected profit over the executed trades.
    pub expected_profit: f64,
}

impl StrategyTrace {
    pub fn trades(&self) -> usize {
        self.decisions.iter().filter(|d| **d == Decision::Trade).count()
    }
}

/// Trace of a fixed schedule starting from auction 1 with no prior trade.
pub fn trace_schedule(surface: &ProfitSurface, schedule: &[bool]) -> Result<StrategyTrace> {
    let last = surface.last_auction();
    if schedule.len() != last {
        return Err(Error::invalid(format!(
            "schedule has {} entries for {last} auctions",
            schedule.len()
        )));
    }
    let mut s = 0;
    let mut trace = StrategyTrace {
        decisions: Vec::with_capacity(last),
        last_trade: Vec::with_capacity(last),
        expected_profit: 0.0,
    };
    for (k, &trade) in schedule.iter().enumerate() {
        let t = k + 1;
        trace.last_trade.push(s);
        if trade {
            trace.expected_profit += surface.expected(t, s)?;
            trace.decisions.push(Decision::Trade);
            s = t;
        } else {
            trace.decisions.push(Decision::Skip);
        }
    }
    Ok(trace)
}

/// Trace produced by applying [`decide`] at every auction.
pub fn greedy_trace(surface: &ProfitSurface) -> Result<StrategyTrace> {
    let last = surface.last_auction();
    let mut s = 0;
    let mut schedule = Vec::with_capacity(last);
    for t in 1..=last {
        let d = decide(surface, t, s)?;
        schedule.push(d == Decision::Trade);
        if d == Decision::Trade {
            s = t;
        }
    }
    trace_schedule(surface, &schedule)
}

/// `sum_t q_t E_t[Pi_t] / sqrt(sum_t q_t^2 V_t(Pi_t))` over the executed trades.
pub fn sharpe_objective(trace: &StrategyTrace, surface: &ProfitSurface) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, d) in trace.decisions.iter().enumerate() {
        if *d == Decision::Trade {
            let (m, v) = surface.moments(k + 1, trace.last_trade[k])?;
            num += m;
            den += v;
        }
    }
    sharpe_ratio(num, den)
}

/// `mean / sqrt(variance)` with an error when there is no risk to scale by.
pub fn sharpe_ratio(mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "no variance to scale by (sum of variances {variance})"
        )));
    }
    Ok(mean / variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surface(s1: f64, s2: f64, agent: Agent, m: usize) -> ProfitSurface {
        ProfitSurface {
            grid: TimeGrid::uniform(1.0, m).unwrap(),
            sigma1: s1,
            sigma2: s2,
            agent,
            weighting: SurfaceWeighting::Payoff(0.5),
        }
    }

    #[test]
    fn equal_sigmas_never_trade() {
        let sf = surface(1.0, 1.0, Agent::First, 6);
        let g = expected_surface(&sf).unwrap();
        assert!(g.entries().all(|(_, _, v)| v == 0.0));
        let vr = value_recursion(&sf).unwrap();
        assert!(vr.value.entries().all(|(_, _, v)| v == 0.0));
        assert!(vr.action.iter().flatten().all(|d| *d == Decision::Skip));
        assert_eq!(decide(&sf, 2, 1).unwrap(), Decision::Skip);
        assert_eq!(adjusted_gain(&sf, 2, 1).unwrap(), 0.0);
    }

    #[test]
    fn last_auction_has_no_successor() {
        let sf = surface(0.5, 1.0, Agent::Second, 5);
        assert!(adjusted_gain(&sf, 4, 0).is_err());
        assert_eq!(decide(&sf, 4, 3).unwrap(), Decision::Trade);
    }

    #[test]
    fn two_interval_grid_by_hand() {
        let sf = surface(0.5, 1.0, Agent::Second, 2);
        let h = sf.expected(1, 0).unwrap();
        let vr = value_recursion(&sf).unwrap();
        assert_eq!(vr.value.get(1, 0).unwrap(), h.max(0.0));
    }

    #[test]
    fn recursion_matches_enumeration() {
        let sf = surface(0.5, 1.0, Agent::Second, 8);
        let vr = value_recursion(&sf).unwrap();
        let (best, _) = enumerate_best(&sf, 1, 0).unwrap();
        assert!((vr.value.get(1, 0).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn sharpe_needs_a_trade() {
        let sf = surface(0.5, 1.0, Agent::Second, 4);
        let none = trace_schedule(&sf, &[false, false, false]).unwrap();
        assert!(matches!(sharpe_objective(&none, &sf), Err(Error::UndefinedRatio(_))));
        let one = trace_schedule(&sf, &[false, true, false]).unwrap();
        let (m, v) = sf.moments(2, 0).unwrap();
        assert!((sharpe_objective(&one, &sf).unwrap() - m / v.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sharpe_homogeneity() {
        assert!((sharpe_ratio(1.0, 4.0 * 9.0).unwrap() - sharpe_ratio(1.0, 4.0).unwrap() / 3.0).abs() < 1e-15);
    }
}
