//! Gauss-Radau quadrature on [0,1] with a fixed node at the right endpoint.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Gauss-Radau rule: `m` nodes in (0,1], the last fixed at 1, integrating
/// polynomials of degree <= 2m-2 exactly against the uniform weight.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub m: usize,
    /// strictly increasing nodes, nodes[m-1] = 1
    pub nodes: Vec<f64>,
    /// positive weights summing to 1
    pub weights: Vec<f64>,
}

/// Build the m-point Gauss-Radau rule by the Jacobi-matrix method: the
/// shifted-Legendre three-term recurrence gives a symmetric tridiagonal
/// matrix whose last diagonal entry is modified (Golub's construction) so
/// that 1 becomes an eigenvalue; eigenvalues are the nodes and squared first
/// eigenvector components the weights.
pub fn gauss_radau(m: usize) -> Result<QuadratureRule> {
    if m < 2 {
        return Err(Error::domain(format!("gauss_radau requires m >= 2, got {m}")));
    }
    // shifted Legendre on [0,1]: alpha_k = 1/2, beta_k = k^2/(4(4k^2-1))
    let alpha = 0.5;
    let off = |k: usize| -> f64 {
        let kf = k as f64;
        kf / (2.0 * (4.0 * kf * kf - 1.0).sqrt())
    };
    // solve (J_{m-1} - I) delta = beta_{m-1}^2 e_{m-1} for the modified
    // last diagonal entry alpha* = 1 + delta_{m-1}
    let n1 = m - 1;
    let mut a = DMatrix::zeros(n1, n1);
    for i in 0..n1 {
        a[(i, i)] = alpha - 1.0;
        if i + 1 < n1 {
            let b = off(i + 1);
            a[(i, i + 1)] = b;
            a[(i + 1, i)] = b;
        }
    }
    let mut rhs = DMatrix::zeros(n1, 1);
    rhs[(n1 - 1, 0)] = off(n1).powi(2);
    let delta = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("Gauss-Radau tridiagonal solve failed".to_string()))?;
    let alpha_star = 1.0 + delta[(n1 - 1, 0)];

    let mut j = DMatrix::zeros(m, m);
    for i in 0..m {
        j[(i, i)] = if i == m - 1 { alpha_star } else { alpha };
        if i + 1 < m {
            let b = off(i + 1);
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2); // mu_0 = 1
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // pin the fixed endpoint exactly
    let last = pairs.len() - 1;
    pairs[last].0 = 1.0;
    let rule = QuadratureRule {
        m,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    };
    rule.validate()?;
    Ok(rule)
}

impl QuadratureRule {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Solver(format!("quadrature weights sum to {sum}")));
        }
        for w in &self.weights {
            if !(*w > 0.0) {
                return Err(Error::Solver(format!("nonpositive quadrature weight {w}")));
            }
        }
        for (i, t) in self.nodes.iter().enumerate() {
            if !(*t > 0.0 && *t <= 1.0) {
                return Err(Error::Solver(format!("node {t} outside (0,1]")));
            }
            if i > 0 && self.nodes[i] <= self.nodes[i - 1] {
                return Err(Error::Solver("quadrature nodes not increasing".to_string()));
            }
        }
        if (self.nodes[self.m - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Solver("fixed endpoint node missing".to_string()));
        }
        Ok(())
    }

    /// Apply the rule to a function on [0,1].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}
