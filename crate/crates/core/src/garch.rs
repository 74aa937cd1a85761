//! Per-asset ARMA(1,1)-GARCH(1,1): calibration, innovation filtering,
//! one-step forecasting and path simulation.
//!
//! Return dynamics: r_t = mu_t + a_t with
//!   mu_t      = phi0 + phi1 * r_{t-1} + theta1 * a_{t-1}
//!   a_t       = sigma_t * eps_t
//!   sigma_t^2 = alpha0 + alpha1 * a_{t-1}^2 + beta1 * sigma_{t-1}^2
//!
//! Filtering initializes sigma_1^2 at the sample variance, a_0 = 0, and
//! starts the ARMA recursion at t = 2 with mu_1 = the sample mean.
//! The fitter maximizes the conditional likelihood in an unconstrained
//! reparameterized space so that covariance stationarity
//! (alpha1 + beta1 < 1) holds on every candidate.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::{self, is_positive, nelder_mead};

/// Variance floor applied during filtering and simulation.
const SIGMA2_FLOOR: f64 = 1e-12;
/// Lower bound on Student-t degrees of freedom (finite kurtosis).
const NU_FLOOR: f64 = 4.01;

/// Innovation family used for the conditional likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationFamily {
    Gaussian,
    StudentT,
}

/// ARMA(1,1)-GARCH(1,1) parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub phi0: f64,
    pub phi1: f64,
    pub theta1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub family: InnovationFamily,
    /// Degrees of freedom; only meaningful for `StudentT`.
    pub nu: Option<f64>,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        if !is_positive(self.alpha0) {
            return Err(Error::Domain(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return Err(Error::Domain("alpha1 and beta1 must be >= 0".into()));
        }
        if self.alpha1 + self.beta1 >= 1.0 {
            return Err(Error::Domain(format!(
                "alpha1 + beta1 = {} violates covariance stationarity",
                self.alpha1 + self.beta1
            )));
        }
        if self.phi1.abs() >= 1.0 {
            return Err(Error::Domain(format!("|phi1| = {} must be < 1", self.phi1.abs())));
        }
        if self.family == InnovationFamily::StudentT {
            match self.nu {
                Some(nu) if nu > 4.0 => {}
                other => {
                    return Err(Error::Domain(format!(
                        "student-t family needs nu > 4, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Unconditional variance alpha0 / (1 - alpha1 - beta1).
    pub fn unconditional_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: GarchParams =
            serde_json::from_str(s).map_err(|e| Error::Parse {
                path: "<garch json>".into(),
                line: 0,
                message: e.to_string(),
            })?;
        p.validate()?;
        Ok(p)
    }
}

/// Filtered state: parameters plus the innovation/variance/residual paths.
#[derive(Debug, Clone)]
pub struct GarchState {
    pub params: GarchParams,
    /// Standardized innovations eps_t = a_t / sigma_t.
    pub innovations: Vec<f64>,
    /// Conditional variances sigma_t^2.
    pub cond_variances: Vec<f64>,
    /// Residuals a_t = r_t - mu_t.
    pub residuals: Vec<f64>,
    /// Last observed return, needed by the one-step forecast.
    pub last_return: f64,
}

impl GarchState {
    pub fn len(&self) -> usize {
        self.innovations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.innovations.is_empty()
    }
}

/// One-step-ahead conditional mean and volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub mu_next: f64,
    pub sigma_next: f64,
}

/// Fit output: state at the optimum plus diagnostics.
#[derive(Debug, Clone)]
pub struct GarchFit {
    pub state: GarchState,
    pub loglik: f64,
    pub warnings: Vec<String>,
}

/// Runs the deterministic ARMA-GARCH filter over a return series.
pub fn filter_innovations(params: &GarchParams, returns: &[f64]) -> Result<GarchState> {
    params.validate()?;
    if returns.is_empty() {
        return Err(Error::InsufficientData("empty return series".into()));
    }
    if returns.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 returns to filter".into()));
    }
    let mean = numerics::mean(returns);
    let var = numerics::variance(returns).max(SIGMA2_FLOOR);

    let n = returns.len();
    let mut residuals = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);

    let mut sigma2 = var;
    let mut a_prev = 0.0;
    let mut r_prev = 0.0;
    for (t, &r) in returns.iter().enumerate() {
        let (mu, s2) = if t == 0 {
            (mean, var)
        } else {
            (
                params.phi0 + params.phi1 * r_prev + params.theta1 * a_prev,
                (params.alpha0 + params.alpha1 * a_prev * a_prev + params.beta1 * sigma2)
                    .max(SIGMA2_FLOOR),
            )
        };
        let a = r - mu;
        residuals.push(a);
        variances.push(s2);
        innovations.push(a / s2.sqrt());
        sigma2 = s2;
        a_prev = a;
        r_prev = r;
    }

    Ok(GarchState {
        params: params.clone(),
        innovations,
        cond_variances: variances,
        residuals,
        last_return: *returns.last().unwrap(),
    })
}

/// One-step forecast from the filtered terminal values.
pub fn forecast_one_step(state: &GarchState) -> Forecast {
    assert!(!state.is_empty(), "forecast needs a non-empty state");
    let p = &state.params;
    let a_last = *state.residuals.last().unwrap();
    let s2_last = *state.cond_variances.last().unwrap();
    let mu_next = p.phi0 + p.phi1 * state.last_return + p.theta1 * a_last;
    let sigma2_next =
        (p.alpha0 + p.alpha1 * a_last * a_last + p.beta1 * s2_last).max(SIGMA2_FLOOR);
    Forecast {
        mu_next,
        sigma_next: sigma2_next.sqrt(),
    }
}

/// Evolves N paths of H steps from the state's terminal values, driven by
/// externally supplied innovations (row s = path s).
pub fn simulate_paths(state: &GarchState, innovations: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if state.is_empty() {
        return Err(Error::InsufficientData("empty state".into()));
    }
    let horizon = innovations.first().map(|r| r.len()).unwrap_or(0);
    if innovations.iter().any(|row| row.len() != horizon) {
        return Err(Error::Shape("ragged innovation matrix".into()));
    }
    let p = &state.params;
    let a_term = *state.residuals.last().unwrap();
    let s2_term = *state.cond_variances.last().unwrap();
    let r_term = state.last_return;

    let mut out = Vec::with_capacity(innovations.len());
    for eps_row in innovations {
        let (mut r_prev, mut a_prev, mut s2_prev) = (r_term, a_term, s2_term);
        let mut path = Vec::with_capacity(horizon);
        for &eps in eps_row {
            let mu = p.phi0 + p.phi1 * r_prev + p.theta1 * a_prev;
            let s2 = (p.alpha0 + p.alpha1 * a_prev * a_prev + p.beta1 * s2_prev).max(SIGMA2_FLOOR);
            let a = s2.sqrt() * eps;
            let r = mu + a;
            path.push(r);
            r_prev = r;
            a_prev = a;
            s2_prev = s2;
        }
        out.push(path);
    }
    Ok(out)
}

/// Simulates a fresh return series of length `n` from steady-state initial
/// conditions, driven by the supplied innovations (used by recovery tests
/// and synthetic data generation; `eps.len()` must be >= `n`).
pub fn simulate_series(params: &GarchParams, eps: &[f64], n: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if eps.len() < n {
        return Err(Error::Shape(format!(
            "need {n} innovations, got {}",
            eps.len()
        )));
    }
    let mut r_prev = params.phi0 / (1.0 - params.phi1);
    let mut a_prev = 0.0;
    let mut s2_prev = params.unconditional_variance();
    let mut out = Vec::with_capacity(n);
    for &e in eps.iter().take(n) {
        let mu = params.phi0 + params.phi1 * r_prev + params.theta1 * a_prev;
        let s2 = (params.alpha0 + params.alpha1 * a_prev * a_prev + params.beta1 * s2_prev)
            .max(SIGMA2_FLOOR);
        let a = s2.sqrt() * e;
        let r = mu + a;
        out.push(r);
        r_prev = r;
        a_prev = a;
        s2_prev = s2;
    }
    Ok(out)
}

/// Conditional log-likelihood of the filter output under the family.
pub fn log_likelihood(params: &GarchParams, returns: &[f64]) -> Result<f64> {
    let mean = numerics::mean(returns);
    let var = numerics::variance(returns).max(SIGMA2_FLOOR);
    let mut ll = 0.0;
    let mut sigma2 = var;
    let mut a_prev = 0.0;
    let mut r_prev = 0.0;

    match params.family {
        InnovationFamily::Gaussian => {
            const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
            for (t, &r) in returns.iter().enumerate() {
                let (mu, s2) = if t == 0 {
                    (mean, var)
                } else {
                    (
                        params.phi0 + params.phi1 * r_prev + params.theta1 * a_prev,
                        (params.alpha0 + params.alpha1 * a_prev * a_prev + params.beta1 * sigma2)
                            .max(SIGMA2_FLOOR),
                    )
                };
                let a = r - mu;
                ll += -HALF_LN_2PI - 0.5 * s2.ln() - 0.5 * a * a / s2;
                sigma2 = s2;
                a_prev = a;
                r_prev = r;
            }
        }
        InnovationFamily::StudentT => {
            let nu = params.nu.ok_or_else(|| Error::Domain("missing nu".into()))?;
            // Unit-variance t: eps = sqrt((nu-2)/nu) * t_nu.
            let c = ln_gamma((nu + 1.0) / 2.0)
                - ln_gamma(nu / 2.0)
                - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
            for (t, &r) in returns.iter().enumerate() {
                let (mu, s2) = if t == 0 {
                    (mean, var)
                } else {
                    (
                        params.phi0 + params.phi1 * r_prev + params.theta1 * a_prev,
                        (params.alpha0 + params.alpha1 * a_prev * a_prev + params.beta1 * sigma2)
                            .max(SIGMA2_FLOOR),
                    )
                };
                let a = r - mu;
                ll += c - 0.5 * s2.ln()
                    - 0.5 * (nu + 1.0) * (1.0 + a * a / (s2 * (nu - 2.0))).ln();
                sigma2 = s2;
                a_prev = a;
                r_prev = r;
            }
        }
    }
    Ok(ll)
}

// --- unconstrained reparameterization ---------------------------------

// Fitting works on returns standardized by their sample std, so every
// coordinate is O(1): x = [phi0_z, atanh(phi1), atanh(theta1),
// ln(alpha0_z), logit(alpha1+beta1), logit(alpha1/(alpha1+beta1)), (ln(nu-4.01))].

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn decode(x: &[f64], family: InnovationFamily, scale: f64) -> GarchParams {
    let persistence = sigmoid(x[4]).min(1.0 - 1e-9);
    let split = sigmoid(x[5]);
    GarchParams {
        phi0: x[0] * scale,
        phi1: x[1].tanh() * (1.0 - 1e-12),
        theta1: x[2].tanh(),
        alpha0: x[3].exp().max(1e-300) * scale * scale,
        alpha1: persistence * split,
        beta1: persistence * (1.0 - split),
        family,
        nu: match family {
            InnovationFamily::Gaussian => None,
            InnovationFamily::StudentT => Some(NU_FLOOR + x[6].exp()),
        },
    }
}

fn encode(p: &GarchParams, scale: f64) -> Vec<f64> {
    let persistence = (p.alpha1 + p.beta1).clamp(1e-9, 1.0 - 1e-9);
    let split = (p.alpha1 / persistence).clamp(1e-9, 1.0 - 1e-9);
    let mut x = vec![
        p.phi0 / scale,
        p.phi1.clamp(-0.999999, 0.999999).atanh(),
        p.theta1.clamp(-0.999999, 0.999999).atanh(),
        (p.alpha0 / (scale * scale)).ln(),
        logit(persistence),
        logit(split),
    ];
    if let Some(nu) = p.nu {
        x.push((nu - NU_FLOOR).max(1e-9).ln());
    }
    x
}

/// Maximum-likelihood calibration: coarse grid seed, then Nelder-Mead
/// polish in the unconstrained space.
pub fn fit_arma_garch(returns: &[f64], family: InnovationFamily) -> Result<GarchFit> {
    fit_arma_garch_with_floor(returns, family, 100)
}

/// Same as [`fit_arma_garch`] with a configurable minimum sample length.
pub fn fit_arma_garch_with_floor(
    returns: &[f64],
    family: InnovationFamily,
    min_len: usize,
) -> Result<GarchFit> {
    if returns.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "need at least {min_len} returns, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::Domain("returns must be finite".into()));
    }
    let var = numerics::variance(returns);
    let mean = numerics::mean(returns);
    if !var.is_finite() || var.sqrt() <= 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::DegenerateData("constant return series".into()));
    }
    let scale = var.sqrt();
    let z: Vec<f64> = returns.iter().map(|r| r / scale).collect();
    let z_mean = numerics::mean(&z);

    // Negated log-likelihood on the standardized series. The Jacobian
    // term from standardizing is constant, so argmax is unchanged.
    let nll = |x: &[f64]| -> f64 {
        let p = decode(x, family, 1.0);
        match log_likelihood(&p, &z) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };

    // Coarse grid seed.
    let mut seeds: Vec<(Vec<f64>, f64)> = Vec::new();
    for &persistence in &[0.3f64, 0.8, 0.95] {
        for &split in &[0.1f64, 0.3] {
            for &phi1 in &[-0.5f64, 0.0, 0.5, 0.9] {
                for &theta1 in &[-0.5f64, 0.0, 0.5] {
                    let seed = GarchParams {
                        phi0: z_mean * (1.0 - phi1),
                        phi1,
                        theta1,
                        alpha0: (1.0 - persistence).max(1e-4),
                        alpha1: persistence * split,
                        beta1: persistence * (1.0 - split),
                        family,
                        nu: match family {
                            InnovationFamily::Gaussian => None,
                            InnovationFamily::StudentT => Some(8.0),
                        },
                    };
                    let x = encode(&seed, 1.0);
                    let f = nll(&x);
                    if f.is_finite() {
                        seeds.push((x, f));
                    }
                }
            }
        }
    }
    seeds.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    if seeds.is_empty() {
        return Err(Error::DegenerateData("likelihood not finite on any seed".into()));
    }

    // Polish the two best seeds; restart once from each optimum so a
    // collapsed simplex cannot end the search early.
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    for (x0, _) in seeds.iter().take(2) {
        let mut out = nelder_mead::minimize(nll, x0, 0.25, 1e-12, 6_000);
        let polish = nelder_mead::minimize(nll, &out.x, 0.05, 1e-12, 4_000);
        if polish.fx < out.fx {
            out = polish;
        }
        converged |= out.converged;
        if best.as_ref().is_none_or(|(_, f)| out.fx < *f) {
            best = Some((out.x, out.fx));
        }
    }
    let (x_best, _) = best.unwrap();
    if !converged {
        return Err(Error::Convergence(format!(
            "simplex did not converge; best-so-far params: {}",
            decode(&x_best, family, scale).to_json()
        )));
    }

    let params = decode(&x_best, family, scale);
    params.validate()?;
    let loglik = log_likelihood(&params, returns)?;
    let state = filter_innovations(&params, returns)?;

    let mut warnings = Vec::new();
    if params.alpha1 + params.beta1 > 0.995 {
        warnings.push(format!(
            "persistence alpha1 + beta1 = {:.4} is near the stationarity boundary",
            params.alpha1 + params.beta1
        ));
    }
    let eps_mean = numerics::mean(&state.innovations);
    let eps_var = numerics::variance(&state.innovations);
    if eps_mean.abs() > 0.1 || (eps_var - 1.0).abs() > 0.15 {
        warnings.push(format!(
            "filtered innovations off target: mean {eps_mean:.3}, variance {eps_var:.3}"
        ));
    }

    Ok(GarchFit {
        state,
        loglik,
        warnings,
    })
}
