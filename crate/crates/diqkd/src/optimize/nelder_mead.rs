//! Derivative-free Nelder-Mead minimization with box constraints.
//!
//! Trial points outside the box are clamped componentwise before evaluation,
//! which keeps the simplex inside the feasible region without restarts.

/// Outcome of one Nelder-Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    /// Best point found (inside the box).
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub fx: f64,
    /// Number of objective evaluations performed.
    pub evaluations: usize,
    /// Whether the simplex converged before the iteration budget ran out.
    pub converged: bool,
    pub iterations: usize,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Minimize `f` over the box `[lo, hi]` starting from `x0`.
///
/// Convergence: the simplex is considered converged when both its diameter
/// and its objective spread fall below `tol`. The standard reflection /
/// expansion / contraction / shrink coefficients (1, 2, 1/2, 1/2) are used.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iterations: usize,
    tol: f64,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0 && lo.len() == n && hi.len() == n, "dimension mismatch");
    if max_iterations == 0 {
        // evaluate-only mode: price the start point without refining it
        let mut start = x0.to_vec();
        clamp(&mut start, lo, hi);
        let fx = f(&start);
        return NelderMeadResult {
            x: start,
            fx: if fx.is_nan() { f64::INFINITY } else { fx },
            evaluations: 1,
            converged: false,
            iterations: 0,
        };
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // initial simplex: x0 plus a 5% box-scaled step along each axis,
    // flipped inward when that would leave the box
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    simplex.push(start.clone());
    for i in 0..n {
        let mut p = start.clone();
        let h = 0.05 * (hi[i] - lo[i]).max(1e-8);
        p[i] = if p[i] + h <= hi[i] { p[i] + h } else { p[i] - h };
        clamp(&mut p, lo, hi);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evaluations)).collect();

    let mut converged = false;
    let mut iterations = 0usize;
    for it in 0..max_iterations {
        iterations = it + 1;
        // order the simplex by objective value
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        let diameter = (1..=n)
            .map(|i| {
                simplex[i]
                    .iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let spread = values[n] - values[0];
        if diameter < tol && spread.abs() < tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for p in simplex.iter().take(n) {
            for i in 0..n {
                centroid[i] += p[i] / n as f64;
            }
        }

        let point_along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> =
                (0..n).map(|i| centroid[i] + t * (centroid[i] - simplex[n][i])).collect();
            clamp(&mut p, lo, hi);
            p
        };

        let reflected = point_along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = point_along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { point_along(0.5) } else { point_along(-0.5) };
            let fc = eval(&contracted, &mut evaluations);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    let mut p: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    clamp(&mut p, lo, hi);
                    values[i] = eval(&p, &mut evaluations);
                    simplex[i] = p;
                }
            }
        }
    }

    let mut best = 0usize;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: values[best],
        evaluations,
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_6d() {
        let target = [0.3, -0.2, 0.1, 0.4, -0.5, 0.25];
        let f = |x: &[f64]| -> f64 {
            x.iter().zip(&target).map(|(v, t)| (v - t) * (v - t)).sum()
        };
        let lo = [-1.0; 6];
        let hi = [1.0; 6];
        let r = nelder_mead(f, &[0.0; 6], &lo, &hi, 2000, 1e-10);
        assert!(r.converged);
        for (v, t) in r.x.iter().zip(&target) {
            assert!((v - t).abs() < 1e-6, "component {v} vs {t}");
        }
    }

    #[test]
    fn rosenbrock_2d() {
        let f = |x: &[f64]| -> f64 {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
        };
        let r = nelder_mead(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], 4000, 1e-12);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn respects_bounds() {
        // unconstrained optimum at 2, box caps at 1
        let f = |x: &[f64]| (x[0] - 2.0) * (x[0] - 2.0);
        let r = nelder_mead(f, &[0.0], &[-1.0], &[1.0], 500, 1e-12);
        assert!(r.x[0] <= 1.0 + 1e-15);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn evaluation_count_is_deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| v.cos() + v * v).sum::<f64>();
        let run = || nelder_mead(f, &[0.7, -0.3], &[-2.0, -2.0], &[2.0, 2.0], 300, 1e-9);
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.evaluations > 0);
    }

    #[test]
    fn budget_exhaustion_returns_best_so_far() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = nelder_mead(f, &[1.0], &[-2.0], &[2.0], 3, 1e-16);
        assert!(!r.converged);
        assert!(r.fx <= 1.0);
    }
}
