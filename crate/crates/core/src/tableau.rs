//! HBVM(k,s) Butcher tableau assembly and its spectral structure.
//!
//! The coefficient matrix is `A = I_s P_s^T Omega`, built from the matrices
//! with entries `(I_s)_ij = int_0^{t_i} P_j` and `(P_s)_ij = P_j(t_i)` over
//! the quadrature abscissae. `A` has rank `s`; its `s` nonzero eigenvalues
//! coincide with the spectrum of the Gauss-Legendre matrix `X_s` for any
//! abscissae whose weights are exact to degree `2s - 1`.

use crate::eig;
use crate::error::{Error, Result};
use crate::legendre;
use crate::quadrature::QuadratureRule;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub use crate::eig::eigenvalues;

/// The HBVM(k,s) Runge-Kutta tableau over a k-node quadrature rule.
#[derive(Debug, Clone)]
pub struct HbvmTableau {
    k: usize,
    s: usize,
    rule: QuadratureRule,
    mat_i: DMatrix<f64>,
    mat_p: DMatrix<f64>,
    a: DMatrix<f64>,
}

impl HbvmTableau {
    /// Assemble the tableau for polynomial degree `s` over `rule`.
    pub fn build(rule: QuadratureRule, s: usize) -> Result<Self> {
        let k = rule.k();
        if s < 1 || s > k {
            return Err(Error::InvalidArgument(format!(
                "degree s = {s} must satisfy 1 <= s <= k = {k}"
            )));
        }
        let mut mat_i = DMatrix::zeros(k, s);
        let mut mat_p = DMatrix::zeros(k, s);
        for (i, &t) in rule.nodes().iter().enumerate() {
            let values = legendre::basis_eval_all(s, t)?;
            for j in 0..s {
                mat_p[(i, j)] = values[j];
                mat_i[(i, j)] = legendre::basis_integral(j + 1, t)?;
            }
        }
        let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(rule.weights()));
        let a = &mat_i * mat_p.transpose() * omega;
        Ok(Self {
            k,
            s,
            rule,
            mat_i,
            mat_p,
            a,
        })
    }

    /// Tableau of HBVM(k,s) over the k-point Gauss rule.
    pub fn gauss(k: usize, s: usize) -> Result<Self> {
        Self::build(QuadratureRule::gauss(k)?, s)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    /// `k x s` matrix of basis integrals `int_0^{t_i} P_j`.
    pub fn mat_i(&self) -> &DMatrix<f64> {
        &self.mat_i
    }

    /// `k x s` matrix of basis values `P_j(t_i)`.
    pub fn mat_p(&self) -> &DMatrix<f64> {
        &self.mat_p
    }

    /// The Runge-Kutta coefficient matrix `A = I_s P_s^T Omega`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `P_s` extended by the column `P_{s+1}(t_i)`, as used by the
    /// factorization `I_s = P_{s+1} Xhat_s`.
    pub fn mat_p_extended(&self) -> DMatrix<f64> {
        let mut ext = DMatrix::zeros(self.k, self.s + 1);
        ext.view_mut((0, 0), (self.k, self.s)).copy_from(&self.mat_p);
        for (i, &t) in self.rule.nodes().iter().enumerate() {
            ext[(i, self.s)] = legendre::basis_eval(self.s + 1, t).unwrap();
        }
        ext
    }
}

/// The `s x s` matrix of the Gauss-Legendre method of order `2s` in the
/// orthonormal Legendre basis: `1/2` in the corner, `-xi_j` above and `xi_j`
/// below the diagonal.
pub fn x_matrix(s: usize) -> DMatrix<f64> {
    assert!(s >= 1, "x_matrix requires s >= 1");
    let mut x = DMatrix::zeros(s, s);
    x[(0, 0)] = 0.5;
    for j in 1..s {
        let xi = legendre::xi(j);
        x[(j, j - 1)] = xi;
        x[(j - 1, j)] = -xi;
    }
    x
}

/// `X_s` extended by a last row with `xi_s` in its final column.
pub fn xhat_matrix(s: usize) -> DMatrix<f64> {
    assert!(s >= 1, "xhat_matrix requires s >= 1");
    let mut xhat = DMatrix::zeros(s + 1, s);
    xhat.view_mut((0, 0), (s, s)).copy_from(&x_matrix(s));
    xhat[(s, s - 1)] = legendre::xi(s);
    xhat
}

/// Outcome of checking the nonzero spectrum of `A` against `X_s`.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub k: usize,
    pub s: usize,
    /// All `k` eigenvalues of `A`.
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues classified as zero (`|lambda| <= tol * ||A||_2`).
    pub zero_count: usize,
    /// Largest distance in the greedy pairing of the nonzero eigenvalues
    /// against the spectrum of `X_s`; infinite if the counts do not match.
    pub max_pairing_error: f64,
    /// Spectrum of `X_s` used as the reference.
    pub reference: Vec<Complex64>,
}

impl SpectrumReport {
    /// Exactly `k - s` zero eigenvalues and all others matched within `tol`.
    pub fn is_pass(&self, pairing_tol: f64) -> bool {
        self.zero_count == self.k - self.s && self.max_pairing_error <= pairing_tol
    }
}

/// Check the isospectral property of HBVM(k,s) over the Gauss abscissae.
///
/// Eigenvalues of `A` with modulus at most `tol * ||A||_2` are classified as
/// zero; the remaining ones are paired against the spectrum of `X_s`. A count
/// mismatch is reported through the result rather than as an error.
pub fn verify_isospectral(k: usize, s: usize, tol: f64) -> Result<SpectrumReport> {
    if s < 1 || s > k {
        return Err(Error::InvalidArgument(format!(
            "isospectral check needs 1 <= s <= k, got k = {k}, s = {s}"
        )));
    }
    let tableau = HbvmTableau::gauss(k, s)?;
    let evs = eig::eigenvalues(tableau.a())?;
    let norm = eig::spectral_norm(tableau.a());
    let threshold = tol * norm;
    let (zeros, nonzeros): (Vec<Complex64>, Vec<Complex64>) =
        evs.iter().partition(|z| z.norm() <= threshold);
    let reference = eig::eigenvalues(&x_matrix(s))?;
    let max_pairing_error = if nonzeros.len() == s {
        eig::pairing_distance(&nonzeros, &reference)
    } else {
        f64::INFINITY
    };
    Ok(SpectrumReport {
        k,
        s,
        eigenvalues: evs,
        zero_count: zeros.len(),
        max_pairing_error,
        reference,
    })
}
