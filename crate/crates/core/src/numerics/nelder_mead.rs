//! Nelder-Mead simplex minimizer.
//!
//! Gradient-free polish step used by the likelihood fitters. Works in an
//! unconstrained space; callers map constrained parameters through a
//! smooth reparameterization before calling in.

/// Result of a simplex run.
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with initial step `step` per coordinate.
///
/// Stops when the spread of simplex function values drops below `ftol`
/// or after `max_evals` evaluations.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    ftol: f64,
    max_evals: usize,
) -> SimplexOutcome {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus one perturbed vertex per coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-8 { step * v[i].abs() } else { step };
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }

        // Centroid of all vertices but the worst.
        let mut centroid = vec![0.0; n];
        for (v, _) in simplex.iter().take(n) {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n].0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = eval(&reflect, &mut evals);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = if fr < simplex[n].1 {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + rho * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + rho * (w - c))
                    .collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best_v = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (vi, bi) in entry.0.iter_mut().zip(&best_v) {
                        *vi = bi + sigma * (*vi - bi);
                    }
                    entry.1 = eval(&entry.0.clone(), &mut evals);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    SimplexOutcome {
        x: simplex[0].0.clone(),
        fx: simplex[0].1,
        evals,
        converged,
    }
}
