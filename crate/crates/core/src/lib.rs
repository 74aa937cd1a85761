//! Quantitative risk toolkit for crypto-asset portfolios.
//!
//! Models multivariate daily returns with per-asset ARMA(1,1)-GARCH(1,1)
//! dynamics and a pluggable joint innovation model, backtests one-step
//! VaR/CVaR forecasts, builds minimum-risk portfolios, budgets risk across
//! assets, and prices European options on the optimal portfolio under
//! NIG-GARCH dynamics via the Esscher transform.

pub mod backtest;
pub mod dist;
pub mod error;
pub mod garch;
pub mod marketdata;
pub mod numerics;
pub mod optimize;
pub mod options;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
