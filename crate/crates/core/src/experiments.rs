//! Scenario configuration, Monte Carlo runs, aggregation and CSV output.
//!
//! Paths run in parallel, each with its own generator derived from the seed
//! and the path number; results are collected in path order and reduced
//! sequentially, so the output does not depend on the thread count.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{p_correct_digital, p_correct_gaussian, Agent, ProfitSurface, SurfaceWeighting};
use crate::bridge::{path_rng, TimeGrid};
use crate::error::{Error, Result};
use crate::market::{run_auction_sequence, sample_signal_paths, AgentState, LearningMode, MarketSetup, Multipliers};
use crate::pricing::{Numeraire, PayoffModel};
use crate::strategy::{
    adjusted_gain, enumerate_best, greedy_trace, sharpe_objective, trace_schedule, value_recursion, Decision,
    StrategyTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Omitter,
    Attentive,
    Strategic,
    Cara,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Signal-to-noise of the channel that generates the agent's signal.
    pub sigma: f64,
    /// What the agent believes its own `sigma` to be; defaults to the truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub believed_sigma: Option<f64>,
    /// What the agent believes the counterpart's `sigma` to be; defaults to
    /// the counterpart's true value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub believed_counterpart_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl AgentSpec {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            believed_sigma: None,
            believed_counterpart_sigma: None,
            lambda: None,
        }
    }
}

/// A full scenario. Missing fields take the defaults of [`Default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub horizon: f64,
    /// Number of intervals `m`; auctions run at `t_1, ..., t_{m-1}`.
    pub auctions: usize,
    pub rate: f64,
    pub payoff: PayoffModel,
    /// Realized payoff; `None` draws it from the prior on every path.
    pub true_x: Option<f64>,
    pub agents: Vec<AgentSpec>,
    pub multipliers: Multipliers,
    pub rho: f64,
    pub paths: usize,
    pub seed: u64,
    /// Directory for CSV output.
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Omitter,
            horizon: 1.0,
            auctions: 10,
            rate: 0.05,
            payoff: PayoffModel::Digital {
                x0: 0.0,
                x1: 1.0,
                p0: 0.5,
                p1: 0.5,
            },
            true_x: Some(1.0),
            agents: vec![AgentSpec::new(0.5), AgentSpec::new(1.5)],
            multipliers: Multipliers { bid: 0.95, ask: 1.05 },
            rho: 0.0,
            paths: 1000,
            seed: 20_240_601,
            output: None,
        }
    }
}

fn positive_finite(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        for w in cfg.warnings() {
            log::warn!("{w}");
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !positive_finite(self.horizon) {
            return Err(Error::config("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.auctions < 2 {
            return Err(Error::config(
                "auctions",
                format!("need at least 2 intervals to hold an auction, got {}", self.auctions),
            ));
        }
        if !self.rate.is_finite() {
            return Err(Error::config("rate", "must be finite"));
        }
        self.payoff.validate().map_err(|e| Error::config("payoff", e.to_string()))?;
        if let Some(x) = self.true_x {
            if !x.is_finite() {
                return Err(Error::config("true_x", "must be finite"));
            }
        }
        Multipliers::new(self.multipliers.bid, self.multipliers.ask)
            .map_err(|e| Error::config("multipliers", e.to_string()))?;
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho", format!("must lie in [-1, 1], got {}", self.rho)));
        }
        let n = self.agents.len();
        if n < 2 {
            return Err(Error::config("agents", format!("need at least two agents, got {n}")));
        }
        for (i, a) in self.agents.iter().enumerate() {
            let ok = |v: f64| v >= 0.0 && v.is_finite();
            if !ok(a.sigma)
                || !a.believed_sigma.is_none_or(ok)
                || !a.believed_counterpart_sigma.is_none_or(ok)
            {
                return Err(Error::config(
                    format!("agents[{i}]"),
                    "signal-to-noise values must be finite and non-negative",
                ));
            }
        }
        if n > 2 {
            if self.scenario != Scenario::Omitter {
                return Err(Error::config("scenario", "more than two agents are supported for omitters only"));
            }
            if self.rho != 0.0 {
                return Err(Error::config("rho", "correlated signals need exactly two agents"));
            }
        }
        if matches!(self.scenario, Scenario::Strategic | Scenario::Cara) && !self.payoff.is_gaussian() {
            return Err(Error::config("payoff", "strategic and cara scenarios need the Gaussian payoff"));
        }
        if self.scenario == Scenario::Cara {
            for (i, a) in self.agents.iter().enumerate() {
                if !a.lambda.is_some_and(positive_finite) {
                    return Err(Error::config(
                        format!("agents[{i}].lambda"),
                        "cara scenario needs a positive risk aversion for every agent",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Settings that are accepted but have no effect.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scenario != Scenario::Cara && self.agents.iter().any(|a| a.lambda.is_some()) {
            out.push("lambda is ignored outside the cara scenario".to_string());
        }
        if self.scenario == Scenario::Omitter && self.agents.iter().any(|a| a.believed_counterpart_sigma.is_some()) {
            out.push("believed_counterpart_sigma is ignored by omitters".to_string());
        }
        out
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon, self.auctions)
    }

    fn mode(&self) -> LearningMode {
        match self.scenario {
            Scenario::Omitter => LearningMode::Omitter,
            _ => LearningMode::Attentive,
        }
    }

    fn believed_sigma(&self, i: usize) -> f64 {
        let a = &self.agents[i];
        a.believed_sigma.unwrap_or(a.sigma)
    }

    fn believed_counterpart_sigma(&self, i: usize) -> f64 {
        let a = &self.agents[i];
        a.believed_counterpart_sigma
            .unwrap_or_else(|| self.agents.get(1 - i.min(1)).map_or(0.0, |c| c.sigma))
    }

    fn agent_states(&self) -> Vec<AgentState> {
        (0..self.agents.len())
            .map(|i| {
                let mut a = AgentState::new(
                    i,
                    self.believed_sigma(i),
                    self.believed_counterpart_sigma(i),
                    self.mode(),
                    self.horizon,
                    self.rho,
                )
                .with_strategic(self.scenario == Scenario::Strategic);
                if self.scenario == Scenario::Cara {
                    if let Some(l) = self.agents[i].lambda {
                        a = a.with_lambda(l);
                    }
                }
                a
            })
            .collect()
    }

    /// Set a single parameter by name, as used by sweeps and overrides.
    /// `sigmaK` addresses agent `K` counting from one; `lambda` sets every
    /// agent.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::config(name, format!("expected a whole number, got {v}")))
            }
        };
        match name {
            "horizon" => self.horizon = value,
            "auctions" | "m" => self.auctions = as_count(value)?,
            "rate" | "r" => self.rate = value,
            "rho" => self.rho = value,
            "true_x" | "x" => self.true_x = Some(value),
            "paths" => self.paths = as_count(value)?,
            "seed" => self.seed = as_count(value)? as u64,
            "bid" => self.multipliers.bid = value,
            "ask" => self.multipliers.ask = value,
            "lambda" => self.agents.iter_mut().for_each(|a| a.lambda = Some(value)),
            _ => {
                let k = name
                    .strip_prefix("sigma")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|k| (1..=self.agents.len()).contains(k))
                    .ok_or_else(|| Error::config(name, "unknown parameter"))?;
                self.agents[k - 1].sigma = value;
            }
        }
        Ok(())
    }
}

/// Read and validate a JSON config.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

/// Per-agent series over the auctions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSeries {
    pub mean_pnl: Vec<f64>,
    pub se_pnl: Vec<f64>,
    pub mean_posterior_truth: Vec<f64>,
    pub trade_freq: Vec<f64>,
}

/// Summary of an agent's total profit across paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminalSummary {
    pub mean: f64,
    pub se: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateResult {
    pub paths: usize,
    /// Auction times `t_1, ..., t_{m-1}`; empty when no path was run.
    pub times: Vec<f64>,
    pub agents: Vec<AgentSeries>,
    pub terminal: Vec<TerminalSummary>,
}

impl AggregateResult {
    /// Running sum of the mean stepwise profit.
    pub fn cumulative_mean_pnl(&self, agent: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.agents[agent]
            .mean_pnl
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    }
}

/// Stepwise outcome of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub payoff: f64,
    /// `pnl[k][j]` for auction `k + 1` and agent `j`.
    pub pnl: Vec<Vec<f64>>,
    pub posterior_truth: Vec<Vec<f64>>,
    pub traded: Vec<Vec<bool>>,
    pub totals: Vec<f64>,
}

fn draw_payoff<R: Rng + ?Sized>(model: &PayoffModel, rng: &mut R) -> Result<f64> {
    Ok(match model {
        PayoffModel::Digital { x0, x1, p1, .. } => {
            if rng.random::<f64>() < *p1 {
                *x1
            } else {
                *x0
            }
        }
        PayoffModel::Gaussian => rng.sample(StandardNormal),
        PayoffModel::Tabulated { nodes, weights } => {
            let d = WeightedIndex::new(weights).map_err(|e| Error::invalid(e.to_string()))?;
            nodes[d.sample(rng)]
        }
    })
}

/// Simulate path number `k` of the experiment.
pub fn run_path(cfg: &ExperimentConfig, grid: &TimeGrid, k: u64) -> Result<PathOutcome> {
    let mut rng = path_rng(cfg.seed, k);
    let x = match cfg.true_x {
        Some(x) => x,
        None => draw_payoff(&cfg.payoff, &mut rng)?,
    };
    let sigmas: Vec<f64> = cfg.agents.iter().map(|a| a.sigma).collect();
    let paths = sample_signal_paths(grid, &sigmas, cfg.rho, x, &mut rng)?;
    let setup = MarketSetup {
        model: cfg.payoff.clone(),
        numeraire: Numeraire::new(cfg.rate, cfg.horizon)?,
        multipliers: cfg.multipliers,
        rho: cfg.rho,
    };
    let record = run_auction_sequence(&setup, cfg.agent_states(), &paths, grid)?;
    Ok(PathOutcome {
        payoff: x,
        pnl: record.stepwise_pnl(),
        posterior_truth: record.auctions.iter().map(|a| a.posterior_on_truth.clone()).collect(),
        traded: record
            .auctions
            .iter()
            .map(|a| a.quantities.iter().map(|q| *q != 0).collect())
            .collect(),
        totals: record.settlement.totals,
    })
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Reduce path outcomes in order.
pub fn aggregate(cfg: &ExperimentConfig, grid: &TimeGrid, outcomes: &[PathOutcome]) -> AggregateResult {
    let n_agents = cfg.agents.len();
    if outcomes.is_empty() {
        return AggregateResult {
            paths: 0,
            times: Vec::new(),
            agents: Vec::new(),
            terminal: Vec::new(),
        };
    }
    let auctions = grid.intervals() - 1;
    let times = (1..=auctions).map(|i| grid.time(i)).collect();
    let n = outcomes.len() as f64;
    let agents = (0..n_agents)
        .map(|j| {
            let mut series = AgentSeries {
                mean_pnl: Vec::with_capacity(auctions),
                se_pnl: Vec::with_capacity(auctions),
                mean_posterior_truth: Vec::with_capacity(auctions),
                trade_freq: Vec::with_capacity(auctions),
            };
            for k in 0..auctions {
                let (m, se) = mean_se(outcomes.iter().map(|o| o.pnl[k][j]));
                series.mean_pnl.push(m);
                series.se_pnl.push(se);
                series
                    .mean_posterior_truth
                    .push(outcomes.iter().map(|o| o.posterior_truth[k][j]).sum::<f64>() / n);
                series
                    .trade_freq
                    .push(outcomes.iter().filter(|o| o.traded[k][j]).count() as f64 / n);
            }
            series
        })
        .collect();
    let terminal = (0..n_agents)
        .map(|j| {
            let vals = outcomes.iter().map(|o| o.totals[j]);
            let (mean, se) = mean_se(vals.clone());
            TerminalSummary {
                mean,
                se,
                min: vals.clone().fold(f64::INFINITY, f64::min),
                max: vals.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    AggregateResult {
        paths: outcomes.len(),
        times,
        agents,
        terminal,
    }
}

/// Run every path of the experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let outcomes: Vec<PathOutcome> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|k| run_path(cfg, &grid, k))
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, &grid, &outcomes))
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<AggregateResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Write the per-auction, per-agent table.
pub fn emit_csv(result: &AggregateResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "auction_index",
        "t",
        "agent_id",
        "mean_pnl",
        "se_pnl",
        "mean_posterior_truth",
        "trade_freq",
    ])?;
    for (k, t) in result.times.iter().enumerate() {
        for (j, a) in result.agents.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                fmt(*t),
                j.to_string(),
                fmt(a.mean_pnl[k]),
                fmt(a.se_pnl[k]),
                fmt(a.mean_posterior_truth[k]),
                fmt(a.trade_freq[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the terminal profit summary, one row per agent.
pub fn emit_terminal_csv(result: &AggregateResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["agent_id", "mean_total_pnl", "se_total_pnl", "min_total_pnl", "max_total_pnl"])?;
    for (j, s) in result.terminal.iter().enumerate() {
        w.write_record([j.to_string(), fmt(s.mean), fmt(s.se), fmt(s.min), fmt(s.max)])?;
    }
    w.flush()?;
    Ok(())
}

fn surface_for(cfg: &ExperimentConfig, agent: Agent, x: f64) -> Result<ProfitSurface> {
    if cfg.agents.len() != 2 {
        return Err(Error::config("agents", "surfaces are defined for two agents"));
    }
    let j = agent.index();
    let own = cfg.believed_sigma(j);
    let other = cfg.believed_counterpart_sigma(j);
    let (sigma1, sigma2) = match agent {
        Agent::First => (own, other),
        Agent::Second => (other, own),
    };
    Ok(ProfitSurface {
        grid: cfg.grid()?,
        sigma1,
        sigma2,
        agent,
        weighting: SurfaceWeighting::Payoff(x),
    })
}

fn analysis_payoff(cfg: &ExperimentConfig) -> f64 {
    cfg.true_x.unwrap_or(1.0)
}

/// One `(t, s)` state of the closed-form surfaces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub agent: usize,
    pub t_index: usize,
    pub s_index: usize,
    pub t: f64,
    pub s: f64,
    /// Probability that the agent's price sits on the right side of the clearing price.
    pub p_correct: f64,
    /// Signal-independent expected profit `H(t, s)` at the configured payoff.
    pub h: f64,
    /// `None` at the last auction.
    pub adjusted_gain: Option<f64>,
    pub value: f64,
    pub trade: bool,
}

/// Quality probabilities, `H(t, s)`, adjusted gain and the optimal value for
/// both agents, using the agents' believed signal-to-noise values.
pub fn analyze(cfg: &ExperimentConfig) -> Result<Vec<SurfaceRow>> {
    cfg.validate()?;
    let x = analysis_payoff(cfg);
    let prior = cfg.payoff.prior();
    let mut rows = Vec::new();
    for agent in [Agent::First, Agent::Second] {
        let surface = surface_for(cfg, agent, x)?;
        let vr = value_recursion(&surface)?;
        let last = surface.last_auction();
        for t in 1..=last {
            for s in 0..t {
                let q = surface.inputs(t, s)?;
                let p_correct = match &cfg.payoff {
                    PayoffModel::Digital { x0, x1, .. } => p_correct_digital(&q, x1 - x0, agent)?,
                    _ => p_correct_gaussian(&q, &prior, agent)?.overall,
                };
                rows.push(SurfaceRow {
                    agent: agent.index(),
                    t_index: t,
                    s_index: s,
                    t: q.t,
                    s: q.s,
                    p_correct,
                    h: surface.expected(t, s)?,
                    adjusted_gain: if t < last { Some(adjusted_gain(&surface, t, s)?) } else { None },
                    value: vr.value.values[t][s],
                    trade: vr.action[t][s] == Decision::Trade,
                });
            }
        }
    }
    Ok(rows)
}

pub fn emit_surface_csv(rows: &[SurfaceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "agent_id",
        "t_index",
        "s_index",
        "t",
        "s",
        "p_correct",
        "h",
        "adjusted_gain",
        "value",
        "optimal_action",
    ])?;
    for r in rows {
        w.write_record([
            r.agent.to_string(),
            r.t_index.to_string(),
            r.s_index.to_string(),
            fmt(r.t),
            fmt(r.s),
            fmt(r.p_correct),
            fmt(r.h),
            r.adjusted_gain.map(fmt).unwrap_or_default(),
            fmt(r.value),
            (if r.trade { "trade" } else { "skip" }).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Expected profit of one policy for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicySummary {
    pub agent: usize,
    pub policy: String,
    pub trades: usize,
    pub expected_profit: f64,
    /// `None` when the policy never trades.
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub policies: Vec<PolicySummary>,
    /// Decision traces of the real-time rule, one per agent.
    pub traces: Vec<StrategyTrace>,
    /// Value recursion optimum `V(1, 0)` per agent.
    pub optimum: Vec<f64>,
    /// Exhaustive optimum per agent when the grid is small enough.
    pub enumerated: Vec<Option<f64>>,
}

fn summarize(agent: usize, policy: &str, trace: &StrategyTrace, surface: &ProfitSurface) -> Result<PolicySummary> {
    let sharpe = match sharpe_objective(trace, surface) {
        Ok(v) => Some(v),
        Err(Error::UndefinedRatio(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(PolicySummary {
        agent,
        policy: policy.to_string(),
        trades: trace.trades(),
        expected_profit: trace.expected_profit,
        sharpe,
    })
}

/// Compare the real-time rule, the recursion optimum and the fixed
/// all-trade and all-skip schedules for both agents.
pub fn strategy_report(cfg: &ExperimentConfig) -> Result<StrategyReport> {
    cfg.validate()?;
    let x = analysis_payoff(cfg);
    let mut report = StrategyReport {
        policies: Vec::new(),
        traces: Vec::new(),
        optimum: Vec::new(),
        enumerated: Vec::new(),
    };
    for agent in [Agent::First, Agent::Second] {
        let j = agent.index();
        let surface = surface_for(cfg, agent, x)?;
        let last = surface.last_auction();
        let vr = value_recursion(&surface)?;
        let mut schedule = Vec::with_capacity(last);
        let mut s = 0;
        for t in 1..=last {
            let trade = vr.action[t][s] == Decision::Trade;
            schedule.push(trade);
            if trade {
                s = t;
            }
        }
        let optimal = trace_schedule(&surface, &schedule)?;
        let greedy = greedy_trace(&surface)?;
        let all_trade = trace_schedule(&surface, &vec![true; last])?;
        let all_skip = trace_schedule(&surface, &vec![false; last])?;
        report.policies.push(summarize(j, "rule", &greedy, &surface)?);
        report.policies.push(summarize(j, "optimal", &optimal, &surface)?);
        report.policies.push(summarize(j, "all_trade", &all_trade, &surface)?);
        report.policies.push(summarize(j, "all_skip", &all_skip, &surface)?);
        report.optimum.push(vr.value.values[1][0]);
        report.enumerated.push(if last <= 20 {
            Some(enumerate_best(&surface, 1, 0)?.0)
        } else {
            None
        });
        report.traces.push(greedy);
    }
    Ok(report)
}

pub fn emit_strategy_csv(report: &StrategyReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut w = csv::Writer::from_path(dir.join("policies.csv"))?;
    w.write_record(["agent_id", "policy", "trades", "expected_profit", "sharpe"])?;
    for p in &report.policies {
        w.write_record([
            p.agent.to_string(),
            p.policy.clone(),
            p.trades.to_string(),
            fmt(p.expected_profit),
            p.sharpe.map(fmt).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("traces.csv"))?;
    w.write_record(["agent_id", "auction_index", "decision", "last_trade_index"])?;
    for (j, tr) in report.traces.iter().enumerate() {
        for (k, d) in tr.decisions.iter().enumerate() {
            w.write_record([
                j.to_string(),
                (k + 1).to_string(),
                (if *d == Decision::Trade { "trade" } else { "skip" }).to_string(),
                tr.last_trade[k].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("optimum.csv"))?;
    w.write_record(["agent_id", "recursion_value", "enumerated_value"])?;
    for (j, v) in report.optimum.iter().enumerate() {
        w.write_record([j.to_string(), fmt(*v), report.enumerated[j].map(fmt).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: AggregateResult,
}

/// Rerun the experiment for each value of `param`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            c.set_param(param, v)?;
            c.validate()?;
            Ok(SweepPoint {
                value: v,
                result: run_experiment(&c)?,
            })
        })
        .collect()
}

pub fn emit_sweep_csv(param: &str, points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "param",
        "value",
        "agent_id",
        "mean_total_pnl",
        "se_total_pnl",
        "mean_trade_freq",
    ])?;
    for p in points {
        for (j, s) in p.result.terminal.iter().enumerate() {
            let freq = &p.result.agents[j].trade_freq;
            let mean_freq = freq.iter().sum::<f64>() / freq.len() as f64;
            w.write_record([
                param.to_string(),
                fmt(p.value),
                j.to_string(),
                fmt(s.mean),
                fmt(s.se),
                fmt(mean_freq),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"scenario": "omitter"}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn zero_auctions_rejected() {
        let err = ExperimentConfig::from_json(r#"{"auctions": 0}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "auctions"));
    }

    #[test]
    fn lambda_outside_cara_warns() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"agents": [{"sigma": 0.5, "lambda": 2.0}, {"sigma": 1.5}]}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig {
            paths: 20,
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        let p = dir.path().join("a.csv");
        emit_csv(&r, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 9);

        cfg.paths = 0;
        let r = run_experiment(&cfg).unwrap();
        emit_csv(&r, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);
    }

    #[test]
    fn set_param_addresses_agents() {
        let mut cfg = ExperimentConfig::default();
        cfg.set_param("sigma2", 1.2).unwrap();
        assert_eq!(cfg.agents[1].sigma, 1.2);
        assert!(cfg.set_param("sigma3", 1.0).is_err());
        assert!(cfg.set_param("auctions", 2.5).is_err());
    }
}
