//! Information-based sequential-auction markets.
//!
//! Agents observe Brownian random bridge signals `xi_t = sigma * t * X + beta_t`
//! about a payoff `X` revealed at the horizon `T`, quote signal-implied prices,
//! and trade through a Walrasian auction at discrete times. The crate covers:
//!
//! - [`bridge`]: exact Brownian bridge sampling and signal paths.
//! - [`pricing`]: posterior prices for digital, Gaussian and tabulated payoffs,
//!   effective-information updating and CARA quotes.
//! - [`market`]: quoting, matching, the auction loop and settlement.
//! - [`analytics`]: ex-ante signal quality, expected prices, profit and variance.
//! - [`strategy`]: the cost-adjusted trading rule and value recursion.
//! - [`experiments`]: configs, Monte Carlo orchestration and CSV output.

pub mod analytics;
pub mod bridge;
pub mod error;
pub mod experiments;
pub mod market;
pub mod pricing;
pub mod quadrature;
pub mod strategy;

pub use error::{Error, Result};
