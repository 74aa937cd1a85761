//! Linear-programming solver for scenario CVaR minimization.
//!
//! Solves  min_{w, zeta} zeta + (1/m) sum_s max(-r_s' w - zeta, 0)
//! over the box-constrained simplex, with m the tail count used by the
//! empirical CVaR estimator, via a log-barrier interior-point method.
//! The auxiliary tail variables u_s enter the Newton system diagonally,
//! so each step reduces to a dense solve of size d+2 at O(N d^2)
//! assembly cost, which comfortably covers 10,000 scenarios.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::qp::{project_capped_simplex, WeightBounds};

/// Optional linear side constraint mean' w >= target for frontier sweeps.
pub struct MeanFloor<'a> {
    pub means: &'a [f64],
    pub target: f64,
}

pub struct CvarSolution {
    pub weights: Vec<f64>,
    /// Empirical CVaR of the final weights (tail mean of the m worst losses).
    pub objective: f64,
}

/// Minimizes tail loss over the feasible weights. `tail_count` is the m
/// from the CVaR estimator (floor(alpha * N) >= 1).
pub fn solve_min_cvar(
    scenarios: &[Vec<f64>],
    tail_count: usize,
    bounds: WeightBounds,
    mean_floor: Option<MeanFloor>,
) -> Result<CvarSolution> {
    let n = scenarios.len();
    let d = scenarios.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 || n == 0 {
        return Err(Error::InsufficientData("empty scenario matrix".into()));
    }
    if scenarios.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("ragged scenario matrix".into()));
    }
    if tail_count < 1 || tail_count > n {
        return Err(Error::Domain(format!("tail count {tail_count} out of range")));
    }
    bounds.validate(d)?;
    let m = tail_count as f64;
    let (lo, up) = (bounds.lower, bounds.upper);

    // Degenerate feasible set: bounds pin every weight.
    if (up * d as f64 - 1.0).abs() <= 1e-12 {
        return finish(scenarios, vec![up; d], tail_count);
    }
    if (1.0 - lo * d as f64).abs() <= 1e-12 {
        return finish(scenarios, vec![lo; d], tail_count);
    }

    // Strictly interior start.
    let shrink = ((up - lo) * 1e-6)
        .min((1.0 - lo * d as f64) / (2.0 * d as f64))
        .min((up * d as f64 - 1.0) / (2.0 * d as f64));
    let inner = WeightBounds {
        lower: lo + shrink,
        upper: up - shrink,
    };
    let mut w = project_capped_simplex(&vec![1.0 / d as f64; d], inner);

    // If a mean floor is requested, walk the start toward the max-mean
    // vertex until strictly feasible.
    if let Some(MeanFloor { means, target }) = &mean_floor {
        let vertex = max_mean_point(means, inner);
        for _ in 0..200 {
            let cur: f64 = w.iter().zip(*means).map(|(wi, mi)| wi * mi).sum();
            if cur > *target {
                break;
            }
            w = w.iter().zip(&vertex).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        }
        let cur: f64 = w.iter().zip(*means).map(|(wi, mi)| wi * mi).sum();
        if cur <= *target {
            return Err(Error::Solver(format!(
                "mean floor {target} not attainable (best interior mean {cur})"
            )));
        }
    }

    let losses = |w: &[f64]| -> Vec<f64> {
        scenarios
            .iter()
            .map(|row| -row.iter().zip(w).map(|(r, wi)| r * wi).sum::<f64>())
            .collect()
    };
    let l0 = losses(&w);
    let scale = l0.iter().map(|v| v.abs()).sum::<f64>() / n as f64 + 1e-8;
    let zeta0 = l0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut zeta = zeta0;
    let mut u: Vec<f64> = vec![scale; n]; // t_s = u_s - l_s + zeta >= scale

    let mut mu = scale;
    let mu_min = 1e-12 * scale.max(1e-9);

    while mu > mu_min {
        for _ in 0..60 {
            let l = losses(&w);
            let t: Vec<f64> = (0..n).map(|s| u[s] - l[s] + zeta).collect();
            debug_assert!(t.iter().all(|&v| v > 0.0));

            // Gradient on v = (w, zeta).
            let mut g_v = DVector::zeros(d + 1);
            for s in 0..n {
                let inv_t = 1.0 / t[s];
                for i in 0..d {
                    g_v[i] -= mu * scenarios[s][i] * inv_t;
                }
                g_v[d] -= mu * inv_t;
            }
            g_v[d] += 1.0;
            for i in 0..d {
                g_v[i] += -mu / (w[i] - lo) + mu / (up - w[i]);
            }
            let mut q = 0.0;
            if let Some(MeanFloor { means, target }) = &mean_floor {
                let slack: f64 =
                    w.iter().zip(*means).map(|(wi, mi)| wi * mi).sum::<f64>() - target;
                q = 1.0 / slack;
                for i in 0..d {
                    g_v[i] -= mu * q * means[i];
                }
            }

            // Schur complement S and rhs after eliminating u.
            //   S   = mu sum_s c_s rt_s rt_s' + D_box + mu q^2 mt mt'
            //   rhs = -g_v + sum_s e_s rt_s
            // with rt_s = (r_s, 1), c_s = 1/(u_s^2 + t_s^2) and
            // e_s = g_u[s] * u_s^2 / (u_s^2 + t_s^2).
            let mut s_mat = DMatrix::zeros(d + 1, d + 1);
            let mut rhs = -&g_v;
            for s in 0..n {
                let g_u = 1.0 / m - mu / u[s] - mu / t[s];
                let denom = u[s] * u[s] + t[s] * t[s];
                let c = mu / denom;
                let e = g_u * u[s] * u[s] / denom;
                let row = &scenarios[s];
                for i in 0..d {
                    for j in i..d {
                        s_mat[(i, j)] += c * row[i] * row[j];
                    }
                    s_mat[(i, d)] += c * row[i];
                    rhs[i] += e * row[i];
                }
                s_mat[(d, d)] += c;
                rhs[d] += e;
            }
            for i in 0..d {
                s_mat[(i, i)] += mu
                    * (1.0 / ((w[i] - lo) * (w[i] - lo)) + 1.0 / ((up - w[i]) * (up - w[i])));
            }
            if let Some(MeanFloor { means, .. }) = &mean_floor {
                for i in 0..d {
                    for j in i..d {
                        s_mat[(i, j)] += mu * q * q * means[i] * means[j];
                    }
                }
            }
            for i in 0..d + 1 {
                for j in 0..i {
                    s_mat[(i, j)] = s_mat[(j, i)];
                }
            }

            // Bordered system enforcing 1' dw = 0.
            let mut full = DMatrix::zeros(d + 2, d + 2);
            full.view_mut((0, 0), (d + 1, d + 1)).copy_from(&s_mat);
            for i in 0..d {
                full[(i, d + 1)] = 1.0;
                full[(d + 1, i)] = 1.0;
            }
            let mut full_rhs = DVector::zeros(d + 2);
            full_rhs.rows_mut(0, d + 1).copy_from(&rhs);
            let sol = full
                .lu()
                .solve(&full_rhs)
                .ok_or_else(|| Error::Solver("singular Newton system".into()))?;

            let dw: Vec<f64> = (0..d).map(|i| sol[i]).collect();
            let dz = sol[d];
            let du: Vec<f64> = (0..n)
                .map(|s| {
                    let g_u = 1.0 / m - mu / u[s] - mu / t[s];
                    let dt_lin: f64 =
                        scenarios[s].iter().zip(&dw).map(|(r, dwi)| r * dwi).sum::<f64>() + dz;
                    let h_uu = mu * (1.0 / (u[s] * u[s]) + 1.0 / (t[s] * t[s]));
                    (-g_u - mu / (t[s] * t[s]) * dt_lin) / h_uu
                })
                .collect();

            // Fraction-to-boundary line search.
            let mut alpha: f64 = 1.0;
            for s in 0..n {
                if du[s] < 0.0 {
                    alpha = alpha.min(-0.99 * u[s] / du[s]);
                }
                let dt = du[s]
                    + scenarios[s].iter().zip(&dw).map(|(r, dwi)| r * dwi).sum::<f64>()
                    + dz;
                if dt < 0.0 {
                    alpha = alpha.min(-0.99 * t[s] / dt);
                }
            }
            for i in 0..d {
                if dw[i] < 0.0 {
                    alpha = alpha.min(-0.99 * (w[i] - lo) / dw[i]);
                }
                if dw[i] > 0.0 {
                    alpha = alpha.min(0.99 * (up - w[i]) / dw[i]);
                }
            }
            if let Some(MeanFloor { means, target }) = &mean_floor {
                let dmean: f64 = means.iter().zip(&dw).map(|(mi, dwi)| mi * dwi).sum();
                if dmean < 0.0 {
                    let slack: f64 =
                        w.iter().zip(*means).map(|(wi, mi)| wi * mi).sum::<f64>() - target;
                    alpha = alpha.min(-0.99 * slack / dmean);
                }
            }

            let step_norm = dw.iter().map(|v| v * v).sum::<f64>().sqrt() + dz.abs();
            for i in 0..d {
                w[i] += alpha * dw[i];
            }
            zeta += alpha * dz;
            for s in 0..n {
                u[s] += alpha * du[s];
            }
            if alpha * step_norm < 1e-11 * (1.0 + scale) {
                break;
            }
        }
        mu *= 0.2;
    }

    finish(scenarios, w, tail_count)
}

fn max_mean_point(means: &[f64], bounds: WeightBounds) -> Vec<f64> {
    // Greedy: fill the highest-mean assets to the cap.
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
    w
}

fn finish(scenarios: &[Vec<f64>], w: Vec<f64>, m: usize) -> Result<CvarSolution> {
    let mut losses: Vec<f64> = scenarios
        .iter()
        .map(|row| -row.iter().zip(&w).map(|(r, wi)| r * wi).sum::<f64>())
        .collect();
    losses.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let objective = losses[..m].iter().sum::<f64>() / m as f64;
    Ok(CvarSolution { weights: w, objective })
}
