//! Gauss-Legendre quadrature on [0, 1] and interpolatory weights for
//! arbitrary distinct abscissae.

use crate::error::{Error, Result};
use crate::legendre;

/// Largest rule size the Newton-based node solver is validated for.
pub const MAX_GAUSS_SIZE: usize = 200;

/// An interpolatory quadrature rule on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// The `k`-point Gauss-Legendre rule on [0, 1].
    ///
    /// Nodes are the roots of the shifted Legendre polynomial of degree `k`,
    /// found by Newton iteration from Chebyshev-angle initial guesses; the
    /// lower half is mirrored from the upper half so the rule is exactly
    /// symmetric. Weights come from the Christoffel identity
    /// `w_i = 1 / sum_j P_j(t_i)^2`.
    pub fn gauss(k: usize) -> Result<Self> {
        if !(1..=MAX_GAUSS_SIZE).contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "gauss rule size {k} outside 1..={MAX_GAUSS_SIZE}"
            )));
        }
        let mut nodes = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for i in 0..k / 2 {
            // i-th smallest root, solved directly in (0, 1/2) for full
            // relative precision; the upper half is its mirror image
            let angle = std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5);
            let mut t = 0.5 * (1.0 - angle.cos());
            let mut converged = false;
            let mut last_step = f64::INFINITY;
            for _ in 0..100 {
                let (value, deriv) = legendre::basis_eval_with_derivative(k + 1, t)?;
                let step = value / deriv;
                t -= step;
                // done once the update is sub-ulp or stops shrinking
                if step.abs() <= f64::EPSILON * t.abs() || step.abs() >= last_step {
                    converged = true;
                    break;
                }
                last_step = step.abs();
            }
            if !converged {
                return Err(Error::Numeric(format!(
                    "Newton iteration for Gauss node {i} of rule {k} did not converge"
                )));
            }
            // keep the better endpoint of a possible one-ulp oscillation
            let (value, deriv) = legendre::basis_eval_with_derivative(k + 1, t)?;
            let candidate = t - value / deriv;
            if legendre::basis_eval(k + 1, candidate)?.abs() < value.abs() {
                t = candidate;
            }
            nodes[i] = t;
            nodes[k - 1 - i] = 1.0 - t;
            let w = christoffel_weight(k, t)?;
            weights[i] = w;
            weights[k - 1 - i] = w;
        }
        if k % 2 == 1 {
            nodes[k / 2] = 0.5;
            weights[k / 2] = christoffel_weight(k, 0.5)?;
        }
        Ok(Self { nodes, weights })
    }

    /// Number of nodes.
    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Apply the rule to `f` on [0, 1].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Largest degree `d <= 2k + 1` such that all monomials `t^0..t^d`
    /// integrate to `1/(e+1)` within `1e-11`.
    pub fn exactness_degree(&self) -> usize {
        let cap = 2 * self.k() + 1;
        let mut last = 0;
        for d in 0..=cap {
            let approx = self.integrate(|t| t.powi(d as i32));
            let exact = 1.0 / (d as f64 + 1.0);
            if (approx - exact).abs() > 1e-11 {
                break;
            }
            last = d;
        }
        last
    }
}

/// `1 / sum_{j=1}^{k} P_j(t)^2`, the Gauss weight at a node `t`.
fn christoffel_weight(k: usize, t: f64) -> Result<f64> {
    let values = legendre::basis_eval_all(k, t)?;
    Ok(1.0 / values.iter().map(|p| p * p).sum::<f64>())
}

/// Weights of the interpolatory quadrature formula on `fund ++ silent`.
///
/// Each weight is the integral over [0, 1] of the cardinal Lagrange
/// polynomial of its node with respect to the full node set; the integrals
/// are evaluated by a Gauss rule whose exactness exceeds the polynomial
/// degree, so they are exact up to rounding. Returns the weights split the
/// same way as the input.
pub fn interpolatory_weights(fund: &[f64], silent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let all: Vec<f64> = fund.iter().chain(silent.iter()).copied().collect();
    let n = all.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty node set".into()));
    }
    for (i, &z) in all.iter().enumerate() {
        if !(z > 0.0 && z <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "node {z} outside the half-open interval (0, 1]"
            )));
        }
        for (j, &other) in all.iter().enumerate().skip(i + 1) {
            if (z - other).abs() < 1e-14 {
                return Err(Error::DuplicateNodes(i, j));
            }
        }
    }
    // degree of each cardinal polynomial is n-1; exactness 2m-1 >= n-1
    let oracle = QuadratureRule::gauss(n / 2 + 1)?;
    let cardinal = |i: usize, t: f64| -> f64 {
        let mut value = 1.0;
        for (j, &z) in all.iter().enumerate() {
            if j != i {
                value *= (t - z) / (all[i] - z);
            }
        }
        value
    };
    let weights: Vec<f64> = (0..n).map(|i| oracle.integrate(|t| cardinal(i, t))).collect();
    let (beta, beta_hat) = weights.split_at(fund.len());
    Ok((beta.to_vec(), beta_hat.to_vec()))
}
