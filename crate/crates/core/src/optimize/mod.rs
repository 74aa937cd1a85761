//! Scenario-based portfolio construction: minimum-variance and
//! minimum-CVaR selection, efficient frontiers and rolling out-of-sample
//! tracks.

pub mod cvar_lp;
pub mod qp;

pub use qp::WeightBounds;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{fit_joint, sample_joint, JointModelSpec};
use crate::error::{Error, Result};
use crate::garch::{self, InnovationFamily};
use crate::marketdata::ReturnPanel;
use crate::risk::RiskLevel;
use crate::rng::derive_seed;

/// One feasible portfolio on the risk-return spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub weights: Vec<f64>,
    pub expected_return: f64,
    pub risk: f64,
}

/// Risk criterion for portfolio selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Variance,
    Cvar,
}

fn scenario_stats(scenarios: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = scenarios.len();
    let d = scenarios.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 || n < 2 {
        return Err(Error::InsufficientData("scenario matrix too small".into()));
    }
    if scenarios.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("ragged scenario matrix".into()));
    }
    let means = crate::dist::mvt::column_means(scenarios);
    let cov = crate::dist::mvt::sample_covariance(scenarios);
    Ok((means, cov))
}

fn point_from_weights(means: &[f64], weights: Vec<f64>, risk: f64) -> FrontierPoint {
    let expected_return = weights.iter().zip(means).map(|(w, m)| w * m).sum();
    FrontierPoint {
        weights,
        expected_return,
        risk,
    }
}

/// Minimum-variance portfolio over the scenario covariance.
pub fn min_variance_weights(scenarios: &[Vec<f64>], bounds: WeightBounds) -> Result<FrontierPoint> {
    let (means, cov) = scenario_stats(scenarios)?;
    let w = qp::solve_qp(&cov, &vec![0.0; means.len()], bounds, 1e-8)?;
    let wv = DVector::from_column_slice(&w);
    let risk = (wv.dot(&(&cov * &wv))).sqrt();
    Ok(point_from_weights(&means, w, risk))
}

/// Minimum-CVaR portfolio via the auxiliary linear program.
pub fn min_cvar_weights(
    scenarios: &[Vec<f64>],
    level: RiskLevel,
    bounds: WeightBounds,
) -> Result<FrontierPoint> {
    let (means, _) = scenario_stats(scenarios)?;
    let n = scenarios.len();
    let m = (level.alpha * n as f64).floor() as usize;
    if m < 1 {
        return Err(Error::InsufficientTail {
            alpha_n: level.alpha * n as f64,
        });
    }
    let sol = cvar_lp::solve_min_cvar(scenarios, m, bounds, None)?;
    Ok(point_from_weights(&means, sol.weights, sol.objective))
}

/// Highest scenario-mean return attainable inside the bounds.
fn max_achievable_mean(means: &[f64], bounds: WeightBounds) -> f64 {
    let d = means.len();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap());
    let mut w = vec![bounds.lower; d];
    let mut budget = 1.0 - bounds.lower * d as f64;
    for &i in &idx {
        let add = budget.min(bounds.upper - bounds.lower);
        w[i] += add;
        budget -= add;
        if budget <= 1e-15 {
            break;
        }
    }
    w.iter().zip(means).map(|(wi, mi)| wi * mi).sum()
}

/// Sweeps target means from the min-risk portfolio's return to the highest
/// attainable return; each point minimizes risk subject to mean >= target.
pub fn efficient_frontier(
    scenarios: &[Vec<f64>],
    objective: Objective,
    level: RiskLevel,
    bounds: WeightBounds,
    n_points: usize,
) -> Result<Vec<FrontierPoint>> {
    if n_points < 2 {
        return Err(Error::Domain("frontier needs at least 2 points".into()));
    }
    let (means, cov) = scenario_stats(scenarios)?;
    let base = match objective {
        Objective::Variance => min_variance_weights(scenarios, bounds)?,
        Objective::Cvar => min_cvar_weights(scenarios, level, bounds)?,
    };
    let lo_mean = base.expected_return;
    let hi_mean = max_achievable_mean(&means, bounds);

    let mut points = vec![base.clone()];
    if hi_mean - lo_mean < 1e-14 * (1.0 + hi_mean.abs()) {
        // Degenerate spectrum (e.g. identical assets): single point.
        return Ok(points);
    }
    for k in 1..n_points {
        // Stay a hair inside the max so the constraint set keeps an interior.
        let frac = (k as f64 / (n_points - 1) as f64).min(0.999);
        let target = lo_mean + (hi_mean - lo_mean) * frac;
        let point = match objective {
            Objective::Variance => variance_point_with_target(&means, &cov, bounds, target)?,
            Objective::Cvar => {
                let n = scenarios.len();
                let m = (level.alpha * n as f64).floor() as usize;
                let sol = cvar_lp::solve_min_cvar(
                    scenarios,
                    m,
                    bounds,
                    Some(cvar_lp::MeanFloor {
                        means: &means,
                        target,
                    }),
                )?;
                point_from_weights(&means, sol.weights, sol.objective)
            }
        };
        points.push(point);
    }
    Ok(points)
}

/// Solves min w'Cw s.t. mean'w >= target by bisecting the return-seeking
/// multiplier eta in  min w'Cw - eta mean'w.
fn variance_point_with_target(
    means: &[f64],
    cov: &DMatrix<f64>,
    bounds: WeightBounds,
    target: f64,
) -> Result<FrontierPoint> {
    let solve_eta = |eta: f64| -> Result<Vec<f64>> {
        let lin: Vec<f64> = means.iter().map(|m| -eta * m).collect();
        qp::solve_qp(cov, &lin, bounds, 1e-8)
    };
    let mean_of = |w: &[f64]| -> f64 { w.iter().zip(means).map(|(wi, mi)| wi * mi).sum() };

    let w0 = solve_eta(0.0)?;
    if mean_of(&w0) >= target - 1e-12 {
        let wv = DVector::from_column_slice(&w0);
        let risk = wv.dot(&(cov * &wv)).sqrt();
        return Ok(point_from_weights(means, w0, risk));
    }
    let mut eta_hi = 1e-6;
    let mut w_hi = solve_eta(eta_hi)?;
    let mut grow = 0;
    while mean_of(&w_hi) < target && grow < 80 {
        eta_hi *= 4.0;
        w_hi = solve_eta(eta_hi)?;
        grow += 1;
    }
    let mut lo = 0.0;
    let mut hi = eta_hi;
    let mut best = w_hi;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let w = solve_eta(mid)?;
        if mean_of(&w) >= target {
            best = w;
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
    }
    let wv = DVector::from_column_slice(&best);
    let risk = wv.dot(&(cov * &wv)).sqrt();
    Ok(point_from_weights(means, best, risk))
}

/// Configuration for the rolling out-of-sample optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    /// In-sample window length in days.
    pub window: usize,
    /// One-step scenarios per roll.
    pub scenarios: usize,
    /// Joint innovation model used to generate scenarios.
    pub model: JointModelSpec,
    /// CVaR tail level (also used for reporting on variance tracks).
    pub level: RiskLevel,
    pub bounds: WeightBounds,
    pub seed: u64,
    /// Refit the per-asset GARCH models every `stride` rolls (state is
    /// refreshed by refiltering every roll regardless).
    pub stride: usize,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            window: 252,
            scenarios: 10_000,
            model: JointModelSpec::Mvt { nu: 5.0 },
            level: RiskLevel::default(),
            bounds: WeightBounds::default(),
            seed: 0,
            stride: 1,
        }
    }
}

/// Out-of-sample weights and realized returns of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioTrack {
    pub assets: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub weights: Vec<Vec<f64>>,
    pub realized: Vec<f64>,
    /// Cumulative sum of realized log returns.
    pub cumulative: Vec<f64>,
    /// Days whose solve failed and carried the previous weights forward.
    pub carried_forward: Vec<(NaiveDate, String)>,
}

impl PortfolioTrack {
    pub fn to_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "date")?;
        for a in &self.assets {
            write!(out, ",w_{a}")?;
        }
        writeln!(out, ",portfolio_return,cumulative_log_return")?;
        for t in 0..self.dates.len() {
            write!(out, "{}", self.dates[t])?;
            for w in &self.weights[t] {
                write!(out, ",{w}")?;
            }
            writeln!(out, ",{},{}", self.realized[t], self.cumulative[t])?;
        }
        Ok(())
    }
}

/// Per-roll scenario generation shared by the optimizer and the backtest:
/// fit (or reuse) per-asset GARCH models on the trailing window, fit the
/// joint model on filtered innovations, simulate one-step joint scenarios
/// and map them through each asset's forecast.
pub(crate) struct RollEngine {
    pub family: InnovationFamily,
    pub spec: JointModelSpec,
    pub window: usize,
    pub n_scenarios: usize,
    pub stride: usize,
    pub seed: u64,
}

pub(crate) struct RollOutput {
    /// N x d one-step return scenarios.
    pub scenarios: Vec<Vec<f64>>,
}

impl RollEngine {
    /// Runs one roll ending right before panel row `t` (window rows
    /// [t-window, t)); `params` caches fitted GARCH parameters between
    /// refit strides.
    pub fn roll(
        &self,
        panel: &ReturnPanel,
        t: usize,
        roll_idx: usize,
        params: &mut Option<Vec<garch::GarchParams>>,
    ) -> Result<RollOutput> {
        let d = panel.n_assets();
        let start = t - self.window;
        let needs_refit = params.is_none() || roll_idx.is_multiple_of(self.stride);

        let mut fitted: Vec<garch::GarchParams> = Vec::with_capacity(d);
        let mut states = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = (start..t).map(|row| panel.returns[row][j]).collect();
            let p = if needs_refit {
                garch::fit_arma_garch_with_floor(&col, self.family, 50)?
                    .state
                    .params
            } else {
                params.as_ref().unwrap()[j].clone()
            };
            let state = garch::filter_innovations(&p, &col)?;
            fitted.push(p);
            states.push(state);
        }
        *params = Some(fitted);

        let innovations: Vec<Vec<f64>> = (0..self.window)
            .map(|row| states.iter().map(|s| s.innovations[row]).collect())
            .collect();
        let joint = fit_joint(&self.spec, &innovations)?;
        let eps = sample_joint(&joint, self.n_scenarios, derive_seed(self.seed, roll_idx as u64));

        let forecasts: Vec<garch::Forecast> = states.iter().map(garch::forecast_one_step).collect();
        let scenarios: Vec<Vec<f64>> = eps
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(&forecasts)
                    .map(|(e, f)| f.mu_next + f.sigma_next * e)
                    .collect()
            })
            .collect();
        Ok(RollOutput { scenarios })
    }
}

/// Rolling-window optimization: each out-of-sample day refits on the
/// trailing window, simulates one-step scenarios, solves for weights and
/// realizes the next-day portfolio return. Failed rolls carry the previous
/// weights forward.
pub fn rolling_optimize(
    panel: &ReturnPanel,
    objective: Objective,
    config: &RollingConfig,
) -> Result<PortfolioTrack> {
    let t_total = panel.n_obs();
    if t_total <= config.window {
        return Err(Error::InsufficientData(format!(
            "panel has {t_total} rows, window is {}",
            config.window
        )));
    }
    config.bounds.validate(panel.n_assets())?;
    let engine = RollEngine {
        family: config.model.garch_family(),
        spec: config.model.clone(),
        window: config.window,
        n_scenarios: config.scenarios,
        stride: config.stride.max(1),
        seed: config.seed,
    };

    // Rolls are independent given the cached parameters; with stride 1
    // every roll refits, so we can parallelize safely. With a stride the
    // cache is sequential, so run serially in that case.
    let results: Vec<Result<Vec<f64>>> = if engine.stride == 1 {
        (config.window..t_total)
            .into_par_iter()
            .map(|t| {
                let mut cache = None;
                let out = engine.roll(panel, t, t - config.window, &mut cache)?;
                solve_weights(&out.scenarios, objective, config)
            })
            .collect()
    } else {
        let mut cache = None;
        (config.window..t_total)
            .map(|t| {
                let out = engine.roll(panel, t, t - config.window, &mut cache)?;
                solve_weights(&out.scenarios, objective, config)
            })
            .collect()
    };

    let d = panel.n_assets();
    let mut weights_prev = vec![1.0 / d as f64; d];
    let mut track = PortfolioTrack {
        assets: panel.assets.clone(),
        dates: Vec::new(),
        weights: Vec::new(),
        realized: Vec::new(),
        cumulative: Vec::new(),
        carried_forward: Vec::new(),
    };
    let mut cum = 0.0;
    for (offset, result) in results.into_iter().enumerate() {
        let t = config.window + offset;
        let date = panel.dates[t];
        let w = match result {
            Ok(w) => w,
            Err(e) => {
                track.carried_forward.push((date, e.to_string()));
                weights_prev.clone()
            }
        };
        let realized: f64 = w.iter().zip(&panel.returns[t]).map(|(wi, r)| wi * r).sum();
        cum += realized;
        track.dates.push(date);
        track.weights.push(w.clone());
        track.realized.push(realized);
        track.cumulative.push(cum);
        weights_prev = w;
    }
    Ok(track)
}

fn solve_weights(
    scenarios: &[Vec<f64>],
    objective: Objective,
    config: &RollingConfig,
) -> Result<Vec<f64>> {
    Ok(match objective {
        Objective::Variance => min_variance_weights(scenarios, config.bounds)?.weights,
        Objective::Cvar => min_cvar_weights(scenarios, config.level, config.bounds)?.weights,
    })
}
