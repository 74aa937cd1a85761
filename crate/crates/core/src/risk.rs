//! Tail-risk measures, risk-adjusted-return ratios and Euler risk budgeting.
//!
//! Conventions: losses are reported positive. VaR is the negated
//! ceil(alpha*N)-th smallest outcome; CVaR averages the floor(alpha*N)
//! worst outcomes. Ties in scenario ranking break by scenario index, and
//! the backtest and optimizer share these estimators.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Tail probability level, alpha in (0,1); the paper's default is 0.01.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskLevel {
    pub alpha: f64,
}

impl RiskLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(Self { alpha })
    }
}

impl Default for RiskLevel {
    fn default() -> Self {
        Self { alpha: 0.01 }
    }
}

/// Indices of the m worst outcomes, worst first; ties break by index.
fn worst_indices(outcomes: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..outcomes.len()).collect();
    // Stable sort: equal outcomes keep ascending index order.
    idx.sort_by(|&a, &b| outcomes[a].partial_cmp(&outcomes[b]).unwrap());
    idx.truncate(m);
    idx
}

/// Empirical VaR: negated k-th smallest outcome with k = ceil(alpha*N).
pub fn var(outcomes: &[f64], level: RiskLevel) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InsufficientData("var of empty sample".into()));
    }
    let n = outcomes.len();
    let k = ((level.alpha * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(-sorted[k - 1])
}

/// Empirical CVaR: mean of the negated floor(alpha*N) worst outcomes.
pub fn cvar(outcomes: &[f64], level: RiskLevel) -> Result<f64> {
    let n = outcomes.len();
    let alpha_n = level.alpha * n as f64;
    let m = alpha_n.floor() as usize;
    if m < 1 {
        return Err(Error::InsufficientTail { alpha_n });
    }
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(-sorted[..m].iter().sum::<f64>() / m as f64)
}

/// Maximum drawdown of a positive wealth curve, as a fraction of the peak.
pub fn mdd(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    worst
}

/// Risk-free input: a flat per-period rate or a per-period series.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskFree {
    Scalar(f64),
    Series(Vec<f64>),
}

impl RiskFree {
    fn at(&self, t: usize) -> f64 {
        match self {
            RiskFree::Scalar(r) => *r,
            RiskFree::Series(rs) => rs[t],
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if let RiskFree::Series(rs) = self {
            if rs.len() != n {
                return Err(Error::Shape(format!(
                    "risk-free series length {} != returns length {n}",
                    rs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn mean(&self, n: usize) -> f64 {
        match self {
            RiskFree::Scalar(r) => *r,
            RiskFree::Series(rs) => numerics::mean(&rs[..n]),
        }
    }
}

/// Sharpe ratio: (mean return - mean risk-free) / sample volatility.
pub fn sharpe(returns: &[f64], risk_free: &RiskFree) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData("sharpe needs >= 2 returns".into()));
    }
    risk_free.check_len(returns.len())?;
    let vol = numerics::std_dev(returns);
    if !numerics::is_positive(vol) {
        return Err(Error::DegenerateData("zero return volatility".into()));
    }
    Ok((numerics::mean(returns) - risk_free.mean(returns.len())) / vol)
}

/// M2 ratio: Sharpe * benchmark volatility + mean risk-free rate.
pub fn m2(returns: &[f64], risk_free: &RiskFree, benchmark_vol: f64) -> Result<f64> {
    Ok(sharpe(returns, risk_free)? * benchmark_vol + risk_free.mean(returns.len()))
}

/// Rachev ratio: CVaR_beta(rf - r) / CVaR_alpha(r - rf).
pub fn rachev(returns: &[f64], risk_free: &RiskFree, alpha: RiskLevel, beta: RiskLevel) -> Result<f64> {
    risk_free.check_len(returns.len())?;
    let excess: Vec<f64> = returns
        .iter()
        .enumerate()
        .map(|(t, r)| r - risk_free.at(t))
        .collect();
    let negated: Vec<f64> = excess.iter().map(|e| -e).collect();
    let numer = cvar(&negated, beta)?;
    let denom = cvar(&excess, alpha)?;
    if denom == 0.0 {
        return Err(Error::DegenerateData("rachev denominator is zero".into()));
    }
    Ok(numer / denom)
}

/// Which risk measure a contribution report decomposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMeasure {
    Volatility,
    Cvar,
}

/// Per-asset Euler decomposition of a portfolio risk measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskContributionReport {
    pub measure: RiskMeasure,
    pub per_asset: Vec<f64>,
    pub per_asset_pct: Vec<f64>,
    pub total: f64,
}

impl RiskContributionReport {
    fn from_contributions(measure: RiskMeasure, per_asset: Vec<f64>, total: f64) -> Self {
        let per_asset_pct = per_asset.iter().map(|rc| 100.0 * rc / total).collect();
        Self {
            measure,
            per_asset,
            per_asset_pct,
            total,
        }
    }

    /// Two CSV rows in the Table 3 layout: values then percentages.
    pub fn to_csv_rows(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(label);
        for v in &self.per_asset {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        out.push_str(&format!("{label}_pct"));
        for v in &self.per_asset_pct {
            // Four decimals keep the printed row summing to 100 +- 0.01
            // even after per-entry rounding.
            out.push_str(&format!(",{v:.4}"));
        }
        out.push('\n');
        out
    }
}

/// Volatility risk contributions RC_i = w_i (Sigma w)_i / sqrt(w' Sigma w).
pub fn vol_risk_contributions(weights: &[f64], cov: &[Vec<f64>]) -> Result<RiskContributionReport> {
    let d = weights.len();
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("covariance must be d x d".into()));
    }
    let sum_w: f64 = weights.iter().sum();
    if (sum_w - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!("weights must sum to 1, got {sum_w}")));
    }
    let cov_m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    if Cholesky::new(cov_m.clone()).is_none() {
        return Err(Error::SingularMatrix("covariance is not SPD".into()));
    }
    let w = DVector::from_column_slice(weights);
    let cw = &cov_m * &w;
    let variance = w.dot(&cw);
    let vol = variance.sqrt();
    let per_asset: Vec<f64> = (0..d).map(|i| weights[i] * cw[i] / vol).collect();
    Ok(RiskContributionReport::from_contributions(
        RiskMeasure::Volatility,
        per_asset,
        vol,
    ))
}

/// Scenario-based CVaR contributions: RC_i = w_i * mean of (-return of
/// asset i) over the floor(alpha*N) scenarios with the worst portfolio
/// returns. Contributions sum to the portfolio CVaR by construction.
pub fn cvar_risk_contributions(
    weights: &[f64],
    scenarios: &[Vec<f64>],
    level: RiskLevel,
) -> Result<RiskContributionReport> {
    let d = weights.len();
    let n = scenarios.len();
    if scenarios.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("scenario rows must match weight length".into()));
    }
    let alpha_n = level.alpha * n as f64;
    let m = alpha_n.floor() as usize;
    if m < 1 {
        return Err(Error::InsufficientTail { alpha_n });
    }
    let portfolio: Vec<f64> = scenarios
        .iter()
        .map(|row| row.iter().zip(weights).map(|(r, w)| r * w).sum())
        .collect();
    let tail = worst_indices(&portfolio, m);

    let per_asset: Vec<f64> = (0..d)
        .map(|i| {
            let mean_loss: f64 = tail.iter().map(|&s| -scenarios[s][i]).sum::<f64>() / m as f64;
            weights[i] * mean_loss
        })
        .collect();
    let total = cvar(&portfolio, level)?;
    Ok(RiskContributionReport::from_contributions(
        RiskMeasure::Cvar,
        per_asset,
        total,
    ))
}
