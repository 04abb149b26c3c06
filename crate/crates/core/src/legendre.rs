//! Shifted Legendre polynomials on [0, 1], scaled to an orthonormal basis.
//!
//! `P_j` has degree `j - 1` and satisfies `int_0^1 P_i P_j = delta_ij`. The
//! family is generated by the three-term recurrence
//!
//! ```text
//! P_1 = 1,   P_2(t) = sqrt(3) (2t - 1),
//! P_{j+2}(t) = (2t-1) (2j+1)/(j+1) sqrt((2j+3)/(2j+1)) P_{j+1}(t)
//!              - j/(j+1) sqrt((2j+3)/(2j-1)) P_j(t).
//! ```
//!
//! Definite integrals from 0 are available in closed form through the
//! coefficients `xi_j`, which also populate the Gauss-Legendre tableau blocks.

use crate::error::{Error, Result};

/// Coefficient `xi_j = 1 / (2 sqrt((2j+1)(2j-1)))`.
///
/// These are the sub/superdiagonal entries of the Gauss-Legendre tableau
/// matrix and the weights of the basis antiderivatives.
///
/// Panics if `j == 0`; indices are 1-based.
pub fn xi(j: usize) -> f64 {
    assert!(j >= 1, "xi index is 1-based");
    let j = j as f64;
    0.5 / ((2.0 * j + 1.0) * (2.0 * j - 1.0)).sqrt()
}

/// Evaluate `P_j(t)` by the three-term recurrence.
pub fn basis_eval(j: usize, t: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::InvalidIndex(j));
    }
    let mut prev = 1.0;
    if j == 1 {
        return Ok(prev);
    }
    let x = 2.0 * t - 1.0;
    let mut cur = 3f64.sqrt() * x;
    for n in 1..=(j - 2) {
        let nf = n as f64;
        let a = x * (2.0 * nf + 1.0) / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf + 1.0)).sqrt();
        let b = nf / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf - 1.0)).sqrt();
        let next = a * cur - b * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Evaluate `P_1(t), ..., P_s(t)` in a single recurrence pass.
pub fn basis_eval_all(s: usize, t: f64) -> Result<Vec<f64>> {
    if s < 1 {
        return Err(Error::InvalidIndex(s));
    }
    let mut values = Vec::with_capacity(s);
    values.push(1.0);
    if s == 1 {
        return Ok(values);
    }
    let x = 2.0 * t - 1.0;
    values.push(3f64.sqrt() * x);
    for n in 1..=(s - 2) {
        let nf = n as f64;
        let a = x * (2.0 * nf + 1.0) / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf + 1.0)).sqrt();
        let b = nf / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf - 1.0)).sqrt();
        values.push(a * values[n] - b * values[n - 1]);
    }
    Ok(values)
}

/// Evaluate `P_j(t)` together with its derivative.
///
/// The derivative recurrence is obtained by differentiating the three-term
/// recurrence, which stays well defined at the interval endpoints.
pub fn basis_eval_with_derivative(j: usize, t: f64) -> Result<(f64, f64)> {
    if j < 1 {
        return Err(Error::InvalidIndex(j));
    }
    if j == 1 {
        return Ok((1.0, 0.0));
    }
    let x = 2.0 * t - 1.0;
    let mut prev = (1.0, 0.0);
    let mut cur = (3f64.sqrt() * x, 2.0 * 3f64.sqrt());
    for n in 1..=(j - 2) {
        let nf = n as f64;
        let ca = (2.0 * nf + 1.0) / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf + 1.0)).sqrt();
        let cb = nf / (nf + 1.0) * ((2.0 * nf + 3.0) / (2.0 * nf - 1.0)).sqrt();
        let value = ca * x * cur.0 - cb * prev.0;
        let deriv = ca * (2.0 * cur.0 + x * cur.1) - cb * prev.1;
        prev = cur;
        cur = (value, deriv);
    }
    Ok(cur)
}

/// Definite integral `int_0^c P_j(x) dx`.
///
/// The antiderivative of `P_j` is `-xi_{j-1} P_{j-1} + xi_j P_{j+1}` for
/// `j >= 2` and `P_1/2 + xi_1 P_2` for `j = 1`; both vanish at 0, and the
/// value at 0 is subtracted so `basis_integral(j, 0)` is exactly zero.
pub fn basis_integral(j: usize, c: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::InvalidIndex(j));
    }
    let at_c = basis_eval_all(j + 2, c)?;
    let at_0 = basis_eval_all(j + 2, 0.0)?;
    let antiderivative = |p: &[f64]| -> f64 {
        if j == 1 {
            0.5 * p[0] + xi(1) * p[1]
        } else {
            -xi(j - 1) * p[j - 2] + xi(j) * p[j]
        }
    };
    Ok(antiderivative(&at_c) - antiderivative(&at_0))
}

/// The orthonormal shifted-Legendre family up to a fixed degree bound.
///
/// Stores the `xi_j` coefficients for `j = 1..=max_degree`; evaluation and
/// integration delegate to the module-level recurrences.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    max_degree: usize,
    xi: Vec<f64>,
}

impl OrthonormalBasis {
    /// Basis supporting indices `1..=max_degree`.
    pub fn new(max_degree: usize) -> Result<Self> {
        if max_degree < 1 {
            return Err(Error::InvalidIndex(max_degree));
        }
        let xi = (1..=max_degree).map(xi).collect();
        Ok(Self { max_degree, xi })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Stored coefficients `xi_1..xi_max_degree`.
    pub fn xi_coefficients(&self) -> &[f64] {
        &self.xi
    }

    pub fn eval(&self, j: usize, t: f64) -> Result<f64> {
        self.check_index(j)?;
        basis_eval(j, t)
    }

    /// All basis values `P_1(t)..P_s(t)`, `s <= max_degree`.
    pub fn eval_all(&self, s: usize, t: f64) -> Result<Vec<f64>> {
        self.check_index(s)?;
        basis_eval_all(s, t)
    }

    pub fn integral(&self, j: usize, c: f64) -> Result<f64> {
        self.check_index(j)?;
        basis_integral(j, c)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j < 1 || j > self.max_degree {
            Err(Error::InvalidIndex(j))
        } else {
            Ok(())
        }
    }
}
