//! Box-constrained simplex QP: min w' C w + lin' w  s.t.  sum w = 1,
//! L <= w_i <= U.
//!
//! Accelerated projected gradient locates the active set, an
//! equality-constrained solve on the free variables polishes the point,
//! and a KKT residual check certifies the result.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common box bounds for portfolio weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }
}

impl WeightBounds {
    pub fn validate(&self, assets: usize) -> Result<()> {
        let d = assets as f64;
        if self.lower > self.upper || self.lower * d > 1.0 + 1e-12 || self.upper * d < 1.0 - 1e-12 {
            return Err(Error::InfeasibleBounds {
                lower: self.lower,
                upper: self.upper,
                assets,
            });
        }
        Ok(())
    }
}

/// Euclidean projection onto { sum w = 1, L <= w <= U } by bisection on
/// the shift multiplier.
pub fn project_capped_simplex(y: &[f64], bounds: WeightBounds) -> Vec<f64> {
    let (l, u) = (bounds.lower, bounds.upper);
    let shifted_sum = |lambda: f64| -> f64 {
        y.iter().map(|yi| (yi - lambda).clamp(l, u)).sum::<f64>() - 1.0
    };
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - u - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - l + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shifted_sum(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    y.iter().map(|yi| (yi - lambda).clamp(l, u)).collect()
}

/// KKT residual of a candidate: stationarity against the equality
/// multiplier, complementarity at the bounds, and feasibility.
pub fn kkt_residual(cov: &DMatrix<f64>, linear: &[f64], bounds: WeightBounds, w: &[f64]) -> f64 {
    let d = w.len();
    let wv = DVector::from_column_slice(w);
    let g = cov * &wv * 2.0 + DVector::from_column_slice(linear);
    let tol = 1e-9 * (1.0 + bounds.upper.abs());

    let free: Vec<usize> = (0..d)
        .filter(|&i| w[i] > bounds.lower + tol && w[i] < bounds.upper - tol)
        .collect();
    let lambda = if free.is_empty() {
        // Any multiplier between the upper-active and lower-active
        // gradients works; pick the midpoint of the tightest interval.
        let lo = (0..d)
            .filter(|&i| w[i] >= bounds.upper - tol)
            .map(|i| g[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..d)
            .filter(|&i| w[i] <= bounds.lower + tol)
            .map(|i| g[i])
            .fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    } else {
        free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
    };

    let mut res = (w.iter().sum::<f64>() - 1.0).abs();
    for i in 0..d {
        res = res.max(bounds.lower - w[i]).max(w[i] - bounds.upper);
        if w[i] > bounds.lower + tol && w[i] < bounds.upper - tol {
            res = res.max((g[i] - lambda).abs());
        } else if w[i] <= bounds.lower + tol {
            res = res.max(lambda - g[i]);
        } else {
            res = res.max(g[i] - lambda);
        }
    }
    res.max(0.0)
}

/// Solves the QP; returns weights with KKT residual below `kkt_tol`.
pub fn solve_qp(
    cov: &DMatrix<f64>,
    linear: &[f64],
    bounds: WeightBounds,
    kkt_tol: f64,
) -> Result<Vec<f64>> {
    let d = cov.nrows();
    bounds.validate(d)?;
    let lin = DVector::from_column_slice(linear);

    // Lipschitz bound on the gradient: infinity norm of 2C.
    let lip = 2.0
        * (0..d)
            .map(|i| (0..d).map(|j| cov[(i, j)].abs()).sum::<f64>())
            .fold(f64::MIN, f64::max);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };

    let mut x = project_capped_simplex(&vec![1.0 / d as f64; d], bounds);
    let mut y = x.clone();
    let mut t = 1.0f64;

    for round in 0..40 {
        // FISTA sweep.
        for _ in 0..2_000 {
            let yv = DVector::from_column_slice(&y);
            let grad = cov * &yv * 2.0 + &lin;
            let cand: Vec<f64> = (0..d).map(|i| y[i] - step * grad[i]).collect();
            let x_next = project_capped_simplex(&cand, bounds);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = (0..d)
                .map(|i| x_next[i] + momentum * (x_next[i] - x[i]))
                .collect();
            x = x_next;
            t = t_next;
        }

        // Active-set polish: equality-constrained solve on free variables.
        let tol = 1e-7 * (1.0 + bounds.upper.abs());
        let polished = polish_active_set(cov, linear, bounds, &x, tol);
        if let Some(p) = polished {
            if kkt_residual(cov, linear, bounds, &p) <= kkt_tol {
                return Ok(p);
            }
        }
        if kkt_residual(cov, linear, bounds, &x) <= kkt_tol {
            return Ok(x);
        }
        // Restart momentum before the next sweep.
        y = x.clone();
        t = 1.0;
        let _ = round;
    }

    let res = kkt_residual(cov, linear, bounds, &x);
    Err(Error::Convergence(format!(
        "qp stalled with KKT residual {res:.3e} > {kkt_tol:.1e}"
    )))
}

fn polish_active_set(
    cov: &DMatrix<f64>,
    linear: &[f64],
    bounds: WeightBounds,
    x: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let d = x.len();
    let free: Vec<usize> = (0..d)
        .filter(|&i| x[i] > bounds.lower + tol && x[i] < bounds.upper - tol)
        .collect();
    if free.is_empty() {
        return Some(x.to_vec());
    }
    let f = free.len();
    let fixed_sum: f64 = (0..d).filter(|i| !free.contains(i)).map(|i| x[i]).sum();

    // [2C_ff  1][w_f]   [-2 C_fa w_a - lin_f]
    // [1'     0][mu ] = [1 - sum(w_a)]
    let mut a = DMatrix::zeros(f + 1, f + 1);
    let mut b = DVector::zeros(f + 1);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[(r, c)] = 2.0 * cov[(i, j)];
        }
        a[(r, f)] = 1.0;
        a[(f, r)] = 1.0;
        let mut rhs = -linear[i];
        for j in 0..d {
            if !free.contains(&j) {
                rhs -= 2.0 * cov[(i, j)] * x[j];
            }
        }
        b[r] = rhs;
    }
    b[f] = 1.0 - fixed_sum;

    let sol = a.lu().solve(&b)?;
    let mut w = x.to_vec();
    for (r, &i) in free.iter().enumerate() {
        // Snap to a bound rather than leaving a tiny violation.
        w[i] = sol[r].clamp(bounds.lower, bounds.upper);
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn projection_satisfies_constraints() {
        let mut rng = crate::rng::substream(41, 0);
        let bounds = WeightBounds {
            lower: 0.05,
            upper: 0.5,
        };
        for _ in 0..200 {
            let d = rng.gen_range(3..=9);
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = project_capped_simplex(&y, bounds);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(p.iter().all(|&w| w >= 0.05 - 1e-12 && w <= 0.5 + 1e-12));
        }
    }

    #[test]
    fn two_asset_symmetric_case() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let w = solve_qp(&cov, &[0.0, 0.0], WeightBounds::default(), 1e-8).unwrap();
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-8);
        assert_relative_eq!(w[1], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn interior_solution_matches_closed_form() {
        let mut rng = crate::rng::substream(42, 0);
        for _ in 0..20 {
            let d = rng.gen_range(2..=7);
            // Diagonally dominant covariance keeps the optimum interior.
            let mut cov = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] = if i == j {
                        rng.gen_range(0.5..1.5)
                    } else {
                        rng.gen_range(-0.03..0.03)
                    };
                }
            }
            let cov = (&cov + cov.transpose()) * 0.5;
            let w = solve_qp(&cov, &vec![0.0; d], WeightBounds::default(), 1e-8).unwrap();

            let ones = DVector::from_element(d, 1.0);
            let inv = cov.clone().try_inverse().unwrap();
            let closed = &inv * &ones / (ones.transpose() * &inv * &ones)[0];
            for i in 0..d {
                assert!((w[i] - closed[i]).abs() < 1e-6, "w[{i}] = {} vs {}", w[i], closed[i]);
            }
        }
    }

    #[test]
    fn beats_random_feasible_points() {
        let mut rng = crate::rng::substream(43, 0);
        let d = 5;
        let a: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] = (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>()
                    + if i == j { 0.5 } else { 0.0 };
            }
        }
        let bounds = WeightBounds::default();
        let w = solve_qp(&cov, &vec![0.0; d], bounds, 1e-8).unwrap();
        let obj = |w: &[f64]| {
            let wv = DVector::from_column_slice(w);
            (wv.transpose() * &cov * &wv)[0]
        };
        let best = obj(&w);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let p = project_capped_simplex(&raw, bounds);
            assert!(obj(&p) >= best - 1e-10);
        }
    }

    #[test]
    fn active_bounds_are_respected() {
        // Asset 0 has tiny variance; the cap forces spillover.
        let cov = DMatrix::from_row_slice(2, 2, &[0.0001, 0.0, 0.0, 1.0]);
        let bounds = WeightBounds {
            lower: 0.0,
            upper: 0.7,
        };
        let w = solve_qp(&cov, &[0.0, 0.0], bounds, 1e-8).unwrap();
        assert_relative_eq!(w[0], 0.7, epsilon = 1e-8);
        assert_relative_eq!(w[1], 0.3, epsilon = 1e-8);
    }

    #[test]
    fn infeasible_bounds_error() {
        let cov = DMatrix::identity(3, 3);
        let bounds = WeightBounds {
            lower: 0.0,
            upper: 0.2,
        };
        assert!(matches!(
            solve_qp(&cov, &[0.0; 3], bounds, 1e-8).unwrap_err(),
            Error::InfeasibleBounds { .. }
        ));
    }
}
