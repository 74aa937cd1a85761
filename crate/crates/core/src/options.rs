//! Risk-neutral European option pricing on the minimum-risk portfolio:
//! GARCH variance dynamics with NIG innovations, tilted into the
//! equivalent martingale measure by the Esscher transform.
//!
//! Per step the tilt parameter solves
//!     sqrt(alpha^2 - (beta+theta)^2) - sqrt(alpha^2 - (beta+1+theta)^2)
//!       = (r - mu)/delta,
//! the asymmetry is renewed as beta + s_t * theta with s_t the configured
//! volatility scale, and the return recursion
//!     r_{t+1} = r + sigma_{t+1} eps*_{t+1} - ln M_tilted(sigma_{t+1})
//! carries a convexity correction that makes each one-period discounted
//! expectation exactly one under the tilted draw.

use rand::Rng;
use rand_distr::{InverseGaussian, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist::nig::{nig_mgf, NigParams};
use crate::error::{Error, Result};
use crate::garch::GarchParams;
use crate::numerics::roots::bisect;
use crate::rng::{derive_seed, substream};

/// Trading-day count of a year for annualization.
pub const TRADING_DAYS: f64 = 252.0;

/// How the per-step tilt folds the conditional volatility in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltScale {
    /// The literal published rule: beta + sqrt(sigma_t) * theta.
    SqrtSigma,
    /// Dimensional alternative: beta + sigma_t * theta.
    Sigma,
}

/// Monte Carlo pricer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricerConfig {
    /// Maturity in trading days (six months = 126).
    pub maturity_days: usize,
    /// Daily risk-free rate.
    pub rate: f64,
    pub n_paths: usize,
    pub initial_capital: f64,
    pub seed: u64,
    pub tilt_scale: TiltScale,
    /// Starting conditional variance sigma_1^2; `None` uses the
    /// unconditional GARCH variance.
    pub initial_variance: Option<f64>,
}

impl Default for PricerConfig {
    fn default() -> Self {
        Self {
            maturity_days: 126,
            rate: 0.0,
            n_paths: 10_000,
            initial_capital: 100.0,
            seed: 0,
            tilt_scale: TiltScale::SqrtSigma,
            initial_variance: None,
        }
    }
}

impl PricerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.maturity_days < 1 {
            return Err(Error::Domain("maturity must be >= 1 day".into()));
        }
        if self.n_paths < 1_000 {
            return Err(Error::Domain(format!(
                "need at least 1,000 paths, got {}",
                self.n_paths
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::Domain("rate must be finite".into()));
        }
        Ok(())
    }
}

/// Solves the Esscher equation for theta by bracketed bisection over the
/// open interval (-alpha-beta, alpha-beta-1); `sigma_scale` is the factor
/// later applied to the tilt and is validated to keep the renewed beta
/// inside (-alpha, alpha).
pub fn esscher_theta(nig: &NigParams, rate: f64, sigma_scale: f64) -> Result<f64> {
    nig.validate()?;
    let (a, b) = (nig.alpha, nig.beta);
    let lo = -a - b;
    let hi = a - b - 1.0;
    if lo >= hi {
        return Err(Error::NoMartingaleMeasure(format!(
            "tilt interval empty: 2*alpha = {} <= 1",
            2.0 * a
        )));
    }
    let rhs = (rate - nig.mu) / nig.delta;
    let g = |theta: f64| {
        (a * a - (b + theta) * (b + theta)).sqrt()
            - (a * a - (b + 1.0 + theta) * (b + 1.0 + theta)).sqrt()
            - rhs
    };
    let inset = 1e-9 * (1.0 + (hi - lo).abs());
    let theta = bisect(g, lo + inset, hi - inset, 1e-16, 300).map_err(|e| {
        Error::NoMartingaleMeasure(format!("no root of the tilt equation: {e}"))
    })?;
    let residual = g(theta);
    // Near a bracket edge the square-root terms make g arbitrarily steep,
    // so a 1e-12 residual can be unrepresentable; a sign change across
    // the adjacent floats still pins the root to machine resolution.
    let at_machine_root = || {
        let below = g(theta.next_down());
        let above = g(theta.next_up());
        below.signum() != above.signum()
    };
    if residual.abs() > 1e-12 && !at_machine_root() {
        return Err(Error::NoMartingaleMeasure(format!(
            "tilt residual {residual:e} above tolerance"
        )));
    }
    let tilted = b + sigma_scale * theta;
    if tilted.abs() >= a {
        return Err(Error::NoMartingaleMeasure(format!(
            "tilted beta {tilted} leaves (-alpha, alpha)"
        )));
    }
    Ok(theta)
}

fn draw_nig(rng: &mut impl Rng, p: &NigParams) -> f64 {
    let ig = InverseGaussian::new(p.delta / p.gamma(), p.delta * p.delta).expect("valid params");
    let z: f64 = rng.sample(ig);
    let w: f64 = rng.sample(StandardNormal);
    p.mu + p.beta * z + z.sqrt() * w
}

/// Simulates terminal portfolio values under the risk-neutral dynamics.
/// Path i draws from substream i; output is bitwise stable per seed.
pub fn simulate_risk_neutral_paths(
    garch: &GarchParams,
    nig: &NigParams,
    config: &PricerConfig,
) -> Result<Vec<f64>> {
    garch.validate()?;
    nig.validate()?;
    config.validate()?;
    let var0 = config
        .initial_variance
        .unwrap_or_else(|| garch.unconditional_variance())
        .max(1e-12);
    // The tilt equation does not involve sigma, so theta is shared by
    // every step; each step still validates its own tilted parameters.
    let theta = esscher_theta(nig, config.rate, scale_of(config.tilt_scale, var0))?;

    (0..config.n_paths)
        .map(|path| {
            let mut rng = substream(config.seed, path as u64);
            let mut variance = var0;
            let mut log_total = 0.0;
            for _ in 0..config.maturity_days {
                let sigma = variance.sqrt();
                let s = scale_of(config.tilt_scale, variance);
                let tilted_beta = nig.beta + s * theta;
                if tilted_beta.abs() >= nig.alpha {
                    return Err(Error::NoMartingaleMeasure(format!(
                        "tilted beta {tilted_beta} leaves (-alpha, alpha) at sigma {sigma}"
                    )));
                }
                let tilted = NigParams {
                    alpha: nig.alpha,
                    beta: tilted_beta,
                    delta: nig.delta,
                    mu: nig.mu,
                };
                // One-period martingale correction ln E[e^{sigma eps*}].
                let correction = nig_mgf(&tilted, sigma)?.ln();
                let eps = draw_nig(&mut rng, &tilted);
                let shock = sigma * eps;
                log_total += config.rate + shock - correction;
                variance = (garch.alpha0 + garch.alpha1 * shock * shock + garch.beta1 * variance)
                    .max(1e-12);
            }
            Ok(config.initial_capital * log_total.exp())
        })
        .collect()
}

fn scale_of(ts: TiltScale, variance: f64) -> f64 {
    match ts {
        TiltScale::SqrtSigma => variance.sqrt().sqrt(),
        TiltScale::Sigma => variance.sqrt(),
    }
}

/// Discounted Monte Carlo price and standard error of a payoff sample.
fn discounted_mean(payoffs: &[f64], rate: f64, days: usize) -> (f64, f64) {
    let disc = (-rate * days as f64).exp();
    let n = payoffs.len() as f64;
    let mean = payoffs.iter().sum::<f64>() / n;
    let var = payoffs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    (disc * mean, disc * (var / n).sqrt())
}

/// Call price from terminal values: e^{-rT} mean(max(S_T - K, 0)) and SE.
pub fn price_call(terminals: &[f64], strike: f64, rate: f64, days: usize) -> Result<(f64, f64)> {
    if terminals.is_empty() {
        return Err(Error::InsufficientData("empty terminal sample".into()));
    }
    let payoffs: Vec<f64> = terminals.iter().map(|s| (s - strike).max(0.0)).collect();
    Ok(discounted_mean(&payoffs, rate, days))
}

/// Put price from terminal values: e^{-rT} mean(max(K - S_T, 0)) and SE.
pub fn price_put(terminals: &[f64], strike: f64, rate: f64, days: usize) -> Result<(f64, f64)> {
    if terminals.is_empty() {
        return Err(Error::InsufficientData("empty terminal sample".into()));
    }
    let payoffs: Vec<f64> = terminals.iter().map(|s| (strike - s).max(0.0)).collect();
    Ok(discounted_mean(&payoffs, rate, days))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Black-Scholes price with annualized inputs.
pub fn black_scholes(
    spot: f64,
    strike: f64,
    rate_annual: f64,
    vol_annual: f64,
    years: f64,
    kind: OptionKind,
) -> f64 {
    let norm = Normal::standard();
    let disc = (-rate_annual * years).exp();
    if vol_annual <= 0.0 || years <= 0.0 {
        return match kind {
            OptionKind::Call => (spot - strike * disc).max(0.0),
            OptionKind::Put => (strike * disc - spot).max(0.0),
        };
    }
    let sig_t = vol_annual * years.sqrt();
    let d1 = ((spot / strike).ln() + (rate_annual + 0.5 * vol_annual * vol_annual) * years) / sig_t;
    let d2 = d1 - sig_t;
    match kind {
        OptionKind::Call => spot * norm.cdf(d1) - strike * disc * norm.cdf(d2),
        OptionKind::Put => strike * disc * norm.cdf(-d2) - spot * norm.cdf(-d1),
    }
}

/// Inverts Black-Scholes for the annualized implied volatility.
/// `rate` is the daily rate and `days` the maturity in trading days.
pub fn implied_vol(
    price: f64,
    spot: f64,
    strike: f64,
    rate: f64,
    days: usize,
    kind: OptionKind,
) -> Result<f64> {
    let years = days as f64 / TRADING_DAYS;
    let rate_annual = rate * TRADING_DAYS;
    let disc = (-rate_annual * years).exp();
    let (lower, upper) = match kind {
        OptionKind::Call => ((spot - strike * disc).max(0.0), spot),
        OptionKind::Put => ((strike * disc - spot).max(0.0), strike * disc),
    };
    if price < lower - 1e-12 || price >= upper {
        return Err(Error::NoSolution(format!(
            "price {price} outside no-arbitrage bounds [{lower}, {upper})"
        )));
    }
    if price <= lower + 1e-14 {
        return Ok(0.0);
    }
    let f = |vol: f64| black_scholes(spot, strike, rate_annual, vol, years, kind) - price;
    let mut hi = 1.0;
    while f(hi) < 0.0 && hi < 100.0 {
        hi *= 2.0;
    }
    let vol = bisect(f, 1e-12, hi, 1e-14, 300)
        .map_err(|e| Error::NoSolution(format!("implied vol bracket failed: {e}")))?;
    if f(vol).abs() > 1e-8 {
        return Err(Error::NoSolution(format!(
            "residual {} above tolerance",
            f(vol)
        )));
    }
    Ok(vol)
}

/// Option price grid over strikes and maturities with implied vols.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    pub strikes: Vec<f64>,
    pub maturities: Vec<usize>,
    /// `calls[i][j]` prices maturity i, strike j; same layout everywhere.
    pub calls: Vec<Vec<f64>>,
    pub puts: Vec<Vec<f64>>,
    pub call_se: Vec<Vec<f64>>,
    pub put_se: Vec<Vec<f64>>,
    /// Annualized implied vols from the call leg; NaN when inversion has
    /// no solution inside the arbitrage bounds.
    pub implied_vols: Vec<Vec<f64>>,
}

impl PriceSurface {
    /// Long-form CSV: one row per (maturity, strike).
    pub fn to_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "maturity_days,strike,call,put,call_se,put_se,implied_vol")?;
        for (i, &t) in self.maturities.iter().enumerate() {
            for (j, &k) in self.strikes.iter().enumerate() {
                let iv = self.implied_vols[i][j];
                let iv_str = if iv.is_nan() { String::new() } else { iv.to_string() };
                writeln!(
                    out,
                    "{t},{k},{},{},{},{},{iv_str}",
                    self.calls[i][j], self.puts[i][j], self.call_se[i][j], self.put_se[i][j]
                )?;
            }
        }
        Ok(())
    }
}

/// Prices every (strike, maturity) pair; one common path set per maturity
/// keyed by the maturity index, so strikes share paths.
pub fn build_surface(
    garch: &GarchParams,
    nig: &NigParams,
    strikes: &[f64],
    maturities: &[usize],
    config: &PricerConfig,
) -> Result<PriceSurface> {
    if strikes.is_empty() || maturities.is_empty() {
        return Err(Error::Domain("empty strike or maturity grid".into()));
    }
    let mut calls = Vec::new();
    let mut puts = Vec::new();
    let mut call_se = Vec::new();
    let mut put_se = Vec::new();
    let mut ivs = Vec::new();
    for (mi, &days) in maturities.iter().enumerate() {
        let cfg = PricerConfig {
            maturity_days: days,
            seed: derive_seed(config.seed, mi as u64),
            ..config.clone()
        };
        let terminals = simulate_risk_neutral_paths(garch, nig, &cfg)?;
        let mut c_row = Vec::new();
        let mut p_row = Vec::new();
        let mut cse_row = Vec::new();
        let mut pse_row = Vec::new();
        let mut iv_row = Vec::new();
        for &k in strikes {
            let (c, cse) = price_call(&terminals, k, config.rate, days)?;
            let (p, pse) = price_put(&terminals, k, config.rate, days)?;
            let iv = implied_vol(c, config.initial_capital, k, config.rate, days, OptionKind::Call)
                .unwrap_or(f64::NAN);
            c_row.push(c);
            p_row.push(p);
            cse_row.push(cse);
            pse_row.push(pse);
            iv_row.push(iv);
        }
        calls.push(c_row);
        puts.push(p_row);
        call_se.push(cse_row);
        put_se.push(pse_row);
        ivs.push(iv_row);
    }
    Ok(PriceSurface {
        strikes: strikes.to_vec(),
        maturities: maturities.to_vec(),
        calls,
        puts,
        call_se,
        put_se,
        implied_vols: ivs,
    })
}
