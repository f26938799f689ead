//! Agents, quotes, Walrasian matching and settlement.
//!
//! Each auction every agent prices the payoff from its effective information
//! and quotes `bid = s- S`, `ask = s+ S`. A trade happens when one agent's bid
//! reaches the other's ask and clears at the midpoint (or the risk-aversion
//! weighted price for CARA agents). Size is one unit. Attentive agents invert
//! the counterpart's revealed price into its signal after every trade;
//! omitters never do.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{Agent, ProfitSurface, SurfaceWeighting};
use crate::bridge::{sample_bridge, sample_bridge_pair_with, signal_path, SignalParams, SignalPath, TimeGrid};
use crate::error::{Error, Result};
use crate::pricing::{
    cara_clearing_price, cara_quotes, posterior, price, EffectiveInfo, Numeraire, Observation, PayoffModel, Posterior,
};
use crate::quadrature::normal_pdf;
use crate::strategy::{decide, Decision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningMode {
    /// Never updates on the counterpart's revealed information.
    Omitter,
    /// Recovers the counterpart's signal from the price at every trade.
    Attentive,
}

/// Bid and ask multipliers `s- <= 1 <= s+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub bid: f64,
    pub ask: f64,
}

impl Multipliers {
    pub fn new(bid: f64, ask: f64) -> Result<Self> {
        if !(bid > 0.0 && bid <= 1.0 && ask >= 1.0 && ask.is_finite()) {
            return Err(Error::invalid(format!("multipliers need 0 < bid <= 1 <= ask, got ({bid}, {ask})")));
        }
        Ok(Self { bid, ask })
    }

    pub fn unit() -> Self {
        Self { bid: 1.0, ask: 1.0 }
    }
}

/// One trader. `sigma` and `counterpart_sigma` are beliefs and may differ
/// from the channels that generate the signals.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub sigma: f64,
    pub counterpart_sigma: f64,
    pub mode: LearningMode,
    /// CARA risk aversion; `None` for a risk-neutral agent.
    pub lambda: Option<f64>,
    /// Whether the agent applies the trading rule before quoting.
    pub strategic: bool,
    pub info: EffectiveInfo,
    own_at_last_trade: Option<Observation>,
    last_trade_index: usize,
    last_trade_time: f64,
}

impl AgentState {
    pub fn new(id: usize, sigma: f64, counterpart_sigma: f64, mode: LearningMode, horizon: f64, rho: f64) -> Self {
        Self {
            id,
            sigma,
            counterpart_sigma,
            mode,
            lambda: None,
            strategic: false,
            info: EffectiveInfo {
                horizon,
                own: Observation::new(0.0, 0.0, sigma),
                counterpart: None,
                rho,
            },
            own_at_last_trade: None,
            last_trade_index: 0,
            last_trade_time: 0.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_strategic(mut self, strategic: bool) -> Self {
        self.strategic = strategic;
        self
    }

    /// Record the agent's own signal value at `t`.
    pub fn observe(&mut self, t: f64, xi: f64) {
        self.info.own = Observation::new(t, xi, self.sigma);
    }

    /// Time of the agent's last trade, zero before the first one.
    pub fn last_trade(&self) -> f64 {
        self.last_trade_time
    }

    pub fn last_trade_index(&self) -> usize {
        self.last_trade_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub agent: usize,
    pub time: f64,
    pub bid: f64,
    pub ask: f64,
    /// The unscaled signal-implied price.
    pub price: f64,
    pub lambda: Option<f64>,
}

/// Quote of `agent` at `t`. Risk-neutral agents scale their price by the
/// multipliers, taking the lower product as the bid so that a negative price
/// still has `bid <= price <= ask`. CARA agents quote their certainty
/// equivalents.
pub fn quote(
    agent: &AgentState,
    t: f64,
    model: &PayoffModel,
    numeraire: &Numeraire,
    multipliers: Multipliers,
) -> Result<Quote> {
    if agent.info.own.time != t {
        return Err(Error::State(format!(
            "agent {} holds information as of {} but is asked to quote at {t}",
            agent.id, agent.info.own.time
        )));
    }
    if let Some(lambda) = agent.lambda {
        if !model.is_gaussian() {
            return Err(Error::invalid("CARA quotes need the Gaussian payoff"));
        }
        let cq = cara_quotes(&agent.info, lambda, numeraire)?;
        return Ok(Quote {
            agent: agent.id,
            time: t,
            bid: cq.bid,
            ask: cq.ask,
            price: cq.mean,
            lambda: Some(lambda),
        });
    }
    let s = price(model, &agent.info, numeraire)?;
    let (lo, hi) = (multipliers.bid * s, multipliers.ask * s);
    Ok(Quote {
        agent: agent.id,
        time: t,
        bid: lo.min(hi),
        ask: lo.max(hi),
        price: s,
        lambda: None,
    })
}

/// A matched trade of one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearing {
    pub price: f64,
    pub buyer: usize,
    pub seller: usize,
}

fn clearing_price(buyer: &Quote, seller: &Quote) -> Result<f64> {
    match (seller.lambda, buyer.lambda) {
        (Some(ls), Some(lb)) => cara_clearing_price(seller.ask, buyer.bid, ls, lb),
        _ => Ok(0.5 * (buyer.bid + seller.ask)),
    }
}

/// Match two quotes. Agent `i` buys from `j` when `bid_i >= ask_j`. Equal
/// unscaled prices mean neither side wants to trade.
pub fn match_and_clear(q1: &Quote, q2: &Quote) -> Result<Option<Clearing>> {
    if q1.time != q2.time {
        return Err(Error::invalid(format!("quotes at different times {} and {}", q1.time, q2.time)));
    }
    if q1.price == q2.price {
        return Ok(None);
    }
    let one_buys = q1.bid >= q2.ask;
    let two_buys = q2.bid >= q1.ask;
    let (buyer, seller) = match (one_buys, two_buys) {
        (false, false) => return Ok(None),
        (true, false) => (q1, q2),
        (false, true) => (q2, q1),
        (true, true) => {
            if q1.price > q2.price {
                (q1, q2)
            } else {
                (q2, q1)
            }
        }
    };
    Ok(Some(Clearing {
        price: clearing_price(buyer, seller)?,
        buyer: buyer.agent,
        seller: seller.agent,
    }))
}

/// Among several quotes, the crossed pair with the largest `bid - ask`.
pub fn match_best_pair(quotes: &[Quote]) -> Result<Option<Clearing>> {
    let mut best: Option<(f64, &Quote, &Quote)> = None;
    for b in quotes {
        for s in quotes {
            if b.agent == s.agent || b.price == s.price || b.bid < s.ask {
                continue;
            }
            let surplus = b.bid - s.ask;
            if best.is_none_or(|(v, _, _)| surplus > v) {
                best = Some((surplus, b, s));
            }
        }
    }
    match best {
        None => Ok(None),
        Some((_, b, s)) => Ok(Some(Clearing {
            price: clearing_price(b, s)?,
            buyer: b.agent,
            seller: s.agent,
        })),
    }
}

/// Recover the counterpart's signal at `t` from its revealed price.
///
/// `knows` is what the counterpart is believed to hold about this agent from
/// the previous trade. Gaussian prices are affine in the signal; the other
/// payoffs are inverted by bisection. Returns `None` when the price does not
/// depend on the signal.
pub fn infer_counterpart_signal(
    model: &PayoffModel,
    numeraire: &Numeraire,
    t: f64,
    revealed: f64,
    counterpart_sigma: f64,
    knows: Option<Observation>,
    rho: f64,
) -> Result<Option<f64>> {
    let horizon = numeraire.horizon;
    let price_at = |xi: f64| {
        let own = Observation::new(t, xi, counterpart_sigma);
        let info = match knows {
            Some(k) => EffectiveInfo::with_counterpart(horizon, own, k, rho),
            None => EffectiveInfo::own_only(horizon, own),
        };
        price(model, &info, numeraire)
    };
    if !(counterpart_sigma > 0.0) || t == 0.0 {
        return Ok(None);
    }
    if model.is_gaussian() {
        let s0 = price_at(0.0)?;
        let slope = price_at(1.0)? - s0;
        if !(slope.abs() > 0.0) {
            return Ok(None);
        }
        return Ok(Some((revealed - s0) / slope));
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut expansions = 0;
    while price_at(lo)? > revealed || price_at(hi)? < revealed {
        lo *= 2.0;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Ok(None);
        }
    }
    while hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        if price_at(mid)? < revealed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Weight (digital) or posterior-to-prior density ratio (Gaussian, tabulated)
/// at the realized payoff.
pub fn posterior_on_truth(model: &PayoffModel, post: &Posterior, x: f64) -> f64 {
    match model {
        PayoffModel::Digital { .. } => post.at(x),
        PayoffModel::Gaussian => post.at(x) / normal_pdf(x),
        PayoffModel::Tabulated { .. } => {
            let prior = model.prior().at(x);
            if prior > 0.0 {
                post.at(x) / prior
            } else {
                0.0
            }
        }
    }
}

/// One executed trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub auction: usize,
    pub time: f64,
    pub buyer: usize,
    pub seller: usize,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeLedger {
    pub agents: usize,
    pub trades: Vec<Trade>,
}

impl TradeLedger {
    pub fn new(agents: usize) -> Self {
        Self {
            agents,
            trades: Vec::new(),
        }
    }

    /// Net holdings after all trades.
    pub fn holdings(&self) -> Vec<i64> {
        let mut h = vec![0i64; self.agents];
        for tr in &self.trades {
            h[tr.buyer] += 1;
            h[tr.seller] -= 1;
        }
        h
    }

    /// Latest trade time strictly before `t` involving `agent`, else zero.
    pub fn last_trade_before(&self, agent: usize, t: f64) -> f64 {
        self.trades
            .iter()
            .filter(|tr| tr.time < t && (tr.buyer == agent || tr.seller == agent))
            .map(|tr| tr.time)
            .fold(0.0, f64::max)
    }
}

/// Ex-post profit of every trade.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlementReport {
    pub payoff: f64,
    /// `per_trade[k][j]` is agent `j`'s profit on trade `k`.
    pub per_trade: Vec<Vec<f64>>,
    pub totals: Vec<f64>,
    /// Sum over trades of the per-trade sums across agents.
    pub aggregate: f64,
}

/// `Pi = q (x - S*)` per trade and agent.
pub fn settle(ledger: &TradeLedger, x: f64) -> SettlementReport {
    let n = ledger.agents;
    let mut per_trade = Vec::with_capacity(ledger.trades.len());
    let mut totals = vec![0.0; n];
    let mut aggregate = 0.0;
    for tr in &ledger.trades {
        let gain = x - tr.price;
        let mut row = vec![0.0; n];
        row[tr.buyer] = gain;
        row[tr.seller] = -gain;
        totals[tr.buyer] += gain;
        totals[tr.seller] += -gain;
        aggregate += row.iter().sum::<f64>();
        per_trade.push(row);
    }
    SettlementReport {
        payoff: x,
        per_trade,
        totals,
        aggregate,
    }
}

/// What happened at one auction.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionRecord {
    pub index: usize,
    pub time: f64,
    /// `None` for an agent that chose not to quote.
    pub quotes: Vec<Option<Quote>>,
    pub clearing: Option<Clearing>,
    /// `q_t^j` in `{-1, 0, 1}`.
    pub quantities: Vec<i8>,
    /// Each agent's last trade time going into the auction.
    pub last_trade: Vec<f64>,
    /// Each agent's record of its counterpart when pricing.
    pub counterpart: Vec<Option<Observation>>,
    pub posterior_on_truth: Vec<f64>,
}

/// A full simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub times: Vec<f64>,
    pub payoff: f64,
    pub auctions: Vec<AuctionRecord>,
    pub ledger: TradeLedger,
    pub settlement: SettlementReport,
}

impl SimulationRecord {
    /// `pnl[k][j]`: agent `j`'s profit from auction `k`.
    pub fn stepwise_pnl(&self) -> Vec<Vec<f64>> {
        self.auctions
            .iter()
            .map(|a| {
                a.quantities
                    .iter()
                    .map(|&q| match (q, a.clearing) {
                        (1, Some(c)) => self.payoff - c.price,
                        (-1, Some(c)) => -(self.payoff - c.price),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Market-wide settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSetup {
    pub model: PayoffModel,
    pub numeraire: Numeraire,
    pub multipliers: Multipliers,
    /// Correlation between the agents' bridges.
    pub rho: f64,
}

/// Signal paths for `sigmas.len()` agents with payoff `x`. Two agents get
/// bridges correlated by `rho`; more agents need `rho = 0`.
pub fn sample_signal_paths<R: Rng + ?Sized>(
    grid: &TimeGrid,
    sigmas: &[f64],
    rho: f64,
    x: f64,
    rng: &mut R,
) -> Result<Vec<SignalPath>> {
    let horizon = grid.horizon();
    let bridges = match sigmas.len() {
        0 | 1 => return Err(Error::invalid("need at least two agents")),
        2 => {
            let pair = sample_bridge_pair_with(grid, rho, rng)?;
            vec![pair.beta1, pair.beta2]
        }
        _ => {
            if rho != 0.0 {
                return Err(Error::invalid("correlated bridges are supported for two agents only"));
            }
            sigmas.iter().map(|_| sample_bridge(grid, rng)).collect()
        }
    };
    sigmas
        .iter()
        .zip(bridges)
        .map(|(&sigma, beta)| signal_path(grid, &beta, SignalParams::new(sigma, horizon)?, x))
        .collect()
}

fn wants_to_quote(agent: &AgentState, grid: &TimeGrid, index: usize, post: &Posterior) -> Result<bool> {
    if !agent.strategic {
        return Ok(true);
    }
    let (who, sigma1, sigma2) = match agent.id {
        0 => (Agent::First, agent.sigma, agent.counterpart_sigma),
        _ => (Agent::Second, agent.counterpart_sigma, agent.sigma),
    };
    let surface = ProfitSurface {
        grid: grid.clone(),
        sigma1,
        sigma2,
        agent: who,
        weighting: SurfaceWeighting::Posterior(post.clone()),
    };
    Ok(decide(&surface, index, agent.last_trade_index)? == Decision::Trade)
}

/// Run the auctions at `t_1, ..., t_{m-1}` along the given signal paths and
/// settle at `T`.
pub fn run_auction_sequence(
    setup: &MarketSetup,
    mut agents: Vec<AgentState>,
    paths: &[SignalPath],
    grid: &TimeGrid,
) -> Result<SimulationRecord> {
    let n = agents.len();
    if n < 2 || paths.len() != n {
        return Err(Error::invalid(format!("{n} agents but {} signal paths", paths.len())));
    }
    if paths.iter().any(|p| p.xi().len() != grid.len()) {
        return Err(Error::invalid("signal path length does not match the grid"));
    }
    if agents.iter().enumerate().any(|(i, a)| a.id != i) {
        return Err(Error::invalid("agent ids must be 0..n in order"));
    }
    if n > 2 && agents.iter().any(|a| a.mode == LearningMode::Attentive || a.strategic) {
        return Err(Error::invalid("attentive and strategic agents need a two-agent market"));
    }
    if agents.iter().any(|a| a.strategic) && !setup.model.is_gaussian() {
        return Err(Error::invalid("strategic agents need the Gaussian payoff"));
    }
    let x = paths[0].fundamental();
    if paths.iter().any(|p| p.fundamental() != x) {
        return Err(Error::invalid("signal paths disagree on the payoff"));
    }
    let last = grid.intervals().saturating_sub(1);
    let mut ledger = TradeLedger::new(n);
    let mut auctions = Vec::with_capacity(last);

    for index in 1..=last {
        let t = grid.time(index);
        let last_trade: Vec<f64> = agents.iter().map(|a| a.last_trade()).collect();
        let mut quotes = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for (agent, path) in agents.iter_mut().zip(paths) {
            agent.observe(t, path.xi()[index]);
        }
        let counterpart = agents.iter().map(|a| a.info.counterpart).collect();
        for agent in &agents {
            let post = posterior(&setup.model, &agent.info)?;
            truth.push(posterior_on_truth(&setup.model, &post, x));
            quotes.push(if wants_to_quote(agent, grid, index, &post)? {
                Some(quote(agent, t, &setup.model, &setup.numeraire, setup.multipliers)?)
            } else {
                None
            });
        }
        let live: Vec<Quote> = quotes.iter().flatten().copied().collect();
        let clearing = if n == 2 {
            match (&quotes[0], &quotes[1]) {
                (Some(a), Some(b)) => match_and_clear(a, b)?,
                _ => None,
            }
        } else {
            match_best_pair(&live)?
        };

        let mut quantities = vec![0i8; n];
        if let Some(c) = clearing {
            quantities[c.buyer] = 1;
            quantities[c.seller] = -1;
            ledger.trades.push(Trade {
                auction: index,
                time: t,
                buyer: c.buyer,
                seller: c.seller,
                price: c.price,
            });
            learn_from_trade(setup, &mut agents, &quotes, c, index, t)?;
        }
        auctions.push(AuctionRecord {
            index,
            time: t,
            quotes,
            clearing,
            quantities,
            last_trade,
            counterpart,
            posterior_on_truth: truth,
        });
    }
    let settlement = settle(&ledger, x);
    Ok(SimulationRecord {
        times: grid.times().to_vec(),
        payoff: x,
        auctions,
        ledger,
        settlement,
    })
}

fn learn_from_trade(
    setup: &MarketSetup,
    agents: &mut [AgentState],
    quotes: &[Option<Quote>],
    c: Clearing,
    index: usize,
    t: f64,
) -> Result<()> {
    let pair = [(c.buyer, c.seller), (c.seller, c.buyer)];
    let mut inferred = [None, None];
    for (k, &(me, other)) in pair.iter().enumerate() {
        let agent = &agents[me];
        if agent.mode != LearningMode::Attentive {
            continue;
        }
        let Some(q) = quotes[other] else { continue };
        inferred[k] = infer_counterpart_signal(
            &setup.model,
            &setup.numeraire,
            t,
            q.price,
            agent.counterpart_sigma,
            agent.own_at_last_trade,
            setup.rho,
        )?;
    }
    for (k, &(me, _)) in pair.iter().enumerate() {
        let agent = &mut agents[me];
        agent.last_trade_index = index;
        agent.last_trade_time = t;
        if agent.mode != LearningMode::Attentive {
            continue;
        }
        agent.own_at_last_trade = Some(agent.info.own);
        if let Some(xi) = inferred[k] {
            agent.info.counterpart = Some(Observation::new(t, xi, agent.counterpart_sigma));
        }
    }
    Ok(())
}
