//! Blended iteration for the reduced stage system and its linear analysis.
//!
//! One step of HBVM(k,s) solves `F(Y1) = 0` where
//!
//! ```text
//! F(Y1) = Y1 - e (x) y0 - h [ B1 (x) I f(Y1) + B2 (x) I f(Y2) ],
//! Y2    = u_hat (x) y0 + A1 (x) I Y1.
//! ```
//!
//! The simplified Newton system `(I - h C (x) J0) delta = -F` and its
//! equivalent form scaled by `gamma C^-1` are blended with the weight
//! `theta = I_s (x) Phi^-1`, `Phi = I - h gamma J0`, so that each sweep only
//! back-substitutes through the LU factors of the `2m x 2m` matrix `Phi`.
//! On the scalar test problem `y' = lambda y` (`q = h lambda`) the error of
//! one sweep propagates through
//!
//! ```text
//! Z(q) = q / (1 - gamma q)^2  C^-1 (C - gamma I)^2,
//! ```
//!
//! which vanishes at `q = 0` and `q = inf`; `gamma = min |mu|` over the
//! spectrum of `C` minimizes the maximum amplification along the imaginary
//! axis, giving `rho* = 1 - cos Arg(mu_min) < 1` (A- and L-convergence).

use crate::eig;
use crate::error::{Error, Result};
use crate::integrator::HamiltonianSystem;
use crate::partition::StagePartition;
use crate::tableau::x_matrix;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Which variant of the blended iteration a solve runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationMode {
    /// Outer simplified-Newton steps, each solved by inner blended sweeps
    /// against a frozen residual.
    Linearized,
    /// Every sweep works on the fresh nonlinear residual.
    Nonlinear,
}

/// Parameters of a blended solve.
#[derive(Debug, Clone, Copy)]
pub struct BlendedConfig {
    /// Blending parameter `gamma > 0`.
    pub gamma: f64,
    /// Cap on outer iterations (residual re-evaluations).
    pub max_outer: usize,
    /// Cap on inner sweeps per outer iteration (linearized mode) or on the
    /// total sweeps (nonlinear mode).
    pub max_inner: usize,
    /// Relative stopping tolerance on `||F||`.
    pub rtol: f64,
    /// Absolute stopping tolerance on `||F||`.
    pub atol: f64,
    pub mode: IterationMode,
}

impl BlendedConfig {
    /// Defaults around a given blending parameter.
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            max_outer: 50,
            max_inner: 50,
            rtol: 1e-12,
            atol: 1e-14,
            mode: IterationMode::Nonlinear,
        }
    }

    /// Defaults with the optimal `gamma` for degree `s`, taken from the
    /// spectrum of `X_s`.
    pub fn optimal_for_degree(s: usize) -> Result<Self> {
        let spectrum = eig::eigenvalues(&x_matrix(s))?;
        Ok(Self::new(gamma_opt(&spectrum)?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 || self.gamma.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument("iteration caps must be >= 1".into()));
        }
        if self.rtol < 0.0 || self.atol < 0.0 || (self.rtol == 0.0 && self.atol == 0.0) {
            return Err(Error::InvalidArgument(
                "tolerances must be nonnegative and not both zero".into(),
            ));
        }
        Ok(())
    }
}

/// Iteration counters and final residual of a blended solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    /// Residual evaluations before convergence.
    pub iterations: usize,
    /// Total blended sweeps.
    pub sweeps: usize,
    /// `||F||` at the accepted iterate.
    pub residual: f64,
}

/// Optimal blending parameter: `min |mu|` over the spectrum.
pub fn gamma_opt(spectrum: &[Complex64]) -> Result<f64> {
    if spectrum.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    if spectrum.iter().any(|mu| mu.norm() == 0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(spectrum.iter().map(|mu| mu.norm()).fold(f64::INFINITY, f64::min))
}

/// Maximum amplification factor `max_mu |mu - gamma|^2 / (2 gamma |mu|)` of
/// the blended iteration along the imaginary axis.
pub fn rho_star(spectrum: &[Complex64], gamma: f64) -> f64 {
    assert!(gamma > 0.0, "rho_star requires gamma > 0");
    spectrum
        .iter()
        .map(|mu| {
            let shifted = mu - Complex64::new(gamma, 0.0);
            shifted.norm_sqr() / (2.0 * gamma * mu.norm())
        })
        .fold(0.0, f64::max)
}

/// `rho*` at the optimal parameter: `1 - cos Arg(mu_min)`.
pub fn rho_star_at_optimal(spectrum: &[Complex64]) -> Result<f64> {
    if spectrum.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    if spectrum.iter().any(|mu| mu.norm() == 0.0) {
        return Err(Error::ZeroEigenvalue);
    }
    let mu_min = spectrum
        .iter()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    Ok(1.0 - mu_min.arg().cos())
}

/// Iteration matrix `Z(q) = q / (1 - gamma q)^2 C^-1 (C - gamma I)^2`.
pub fn iteration_matrix_z(
    c: &DMatrix<f64>,
    gamma: f64,
    q: Complex64,
) -> Result<DMatrix<Complex64>> {
    let denom = Complex64::new(1.0, 0.0) - q * gamma;
    if denom.norm() == 0.0 {
        return Err(Error::Pole);
    }
    let g = z_matrix_real_part(c, gamma)?;
    let scalar = q / (denom * denom);
    Ok(g.map(|v| scalar * v))
}

/// The q-independent factor `C^-1 (C - gamma I)^2` of `Z(q)`.
fn z_matrix_real_part(c: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let s = c.nrows();
    let shifted = c - DMatrix::identity(s, s) * gamma;
    let squared = &shifted * &shifted;
    c.clone()
        .lu()
        .solve(&squared)
        .ok_or(Error::SingularMatrix("C in the iteration matrix"))
}

/// `I - theta(q) M(q)` assembled directly from the blend of the two
/// equivalent Newton forms; algebraically equal to [`iteration_matrix_z`].
pub fn sweep_matrix(c: &DMatrix<f64>, gamma: f64, q: Complex64) -> Result<DMatrix<Complex64>> {
    let s = c.nrows();
    let one = Complex64::new(1.0, 0.0);
    let denom = one - q * gamma;
    if denom.norm() == 0.0 {
        return Err(Error::Pole);
    }
    let theta = one / denom;
    let id = DMatrix::<Complex64>::identity(s, s);
    let cc = c.map(|v| Complex64::new(v, 0.0));
    let c_inv = c
        .clone()
        .lu()
        .solve(&DMatrix::identity(s, s))
        .ok_or(Error::SingularMatrix("C in the sweep matrix"))?
        .map(|v| Complex64::new(v, 0.0));
    let m = (&id - &cc * q) * theta + (&c_inv - &id * q) * ((one - theta) * gamma);
    Ok(&id - m * theta)
}

/// Spectral radius of `Z(i y)`: the scalar factor `y / (1 + gamma^2 y^2)`
/// times the spectral radius of the matrix factor.
fn rho_on_axis(rho_matrix: f64, gamma: f64, y: f64) -> f64 {
    rho_matrix * y.abs() / (1.0 + gamma * gamma * y * y)
}

/// Maximum of `rho(Z(iy))` over a log grid on `[1e-3, 1e3]` refined around
/// the analytic maximizer `y = 1/gamma`.
pub fn max_amplification(c: &DMatrix<f64>, gamma: f64, grid_size: usize) -> Result<f64> {
    if grid_size < 16 {
        return Err(Error::InvalidArgument(format!(
            "grid size {grid_size} below 16"
        )));
    }
    if gamma <= 0.0 || gamma.is_nan() {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let rho_matrix = eig::spectral_radius(&eig::eigenvalues(&z_matrix_real_part(c, gamma)?)?);
    let mut max = 0.0f64;
    for y in log_grid(1e-3, 1e3, grid_size) {
        max = max.max(rho_on_axis(rho_matrix, gamma, y));
    }
    for y in log_grid(0.5 / gamma, 2.0 / gamma, 33) {
        max = max.max(rho_on_axis(rho_matrix, gamma, y));
    }
    max = max.max(rho_on_axis(rho_matrix, gamma, 1.0 / gamma));
    Ok(max)
}

/// Geometric log grid including both endpoints.
pub fn log_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (from.ln(), to.ln());
    (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Convergence profile of the iteration for a given matrix `C`.
#[derive(Debug, Clone)]
pub struct LinearAnalysis {
    /// Spectrum of `C`.
    pub spectrum_c: Vec<Complex64>,
    /// Blending parameter used.
    pub gamma: f64,
    /// Maximum amplification factor along the imaginary axis.
    pub rho_star: f64,
    /// Sampled `(y, rho(Z(iy)))` pairs, refined around the peak `y = 1/gamma`.
    pub q_grid: Vec<(f64, f64)>,
}

impl LinearAnalysis {
    /// Profile over a log grid; `gamma = None` selects the optimal value.
    pub fn compute(c: &DMatrix<f64>, gamma: Option<f64>, grid_size: usize) -> Result<Self> {
        if grid_size < 16 {
            return Err(Error::InvalidArgument(format!(
                "grid size {grid_size} below 16"
            )));
        }
        let spectrum_c = eig::eigenvalues(c)?;
        let gamma = match gamma {
            Some(g) if g > 0.0 => g,
            Some(g) => {
                return Err(Error::InvalidArgument(format!(
                    "gamma must be positive, got {g}"
                )))
            }
            None => gamma_opt(&spectrum_c)?,
        };
        let rho_matrix = eig::spectral_radius(&eig::eigenvalues(&z_matrix_real_part(c, gamma)?)?);
        let mut samples = log_grid(1e-3, 1e3, grid_size);
        samples.extend(log_grid(0.5 / gamma, 2.0 / gamma, 33));
        samples.push(1.0 / gamma);
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        let q_grid = samples
            .into_iter()
            .map(|y| (y, rho_on_axis(rho_matrix, gamma, y)))
            .collect();
        Ok(Self {
            spectrum_c,
            gamma,
            rho_star: rho_star(&eig::eigenvalues(c)?, gamma),
            q_grid,
        })
    }
}

/// Residual of the reduced stage system at the block `Y1` (one stage per
/// column, `2m x s`).
pub fn residual_f(
    part: &StagePartition,
    system: &HamiltonianSystem,
    y0: &DVector<f64>,
    h: f64,
    y1_block: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s = part.s();
    let two_m = system.dim();
    if y0.len() != two_m || y1_block.nrows() != two_m || y1_block.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "residual with state dim {}, block {}x{}",
            y0.len(),
            y1_block.nrows(),
            y1_block.ncols()
        )));
    }
    let y2 = part.silent_from_fundamental(y0, y1_block)?;
    let f1 = system.f_block(y1_block);
    let f2 = system.f_block(&y2);
    let stages_of_y0 = y0 * DMatrix::from_element(1, s, 1.0);
    Ok(y1_block - stages_of_y0 - (f1 * part.b1().transpose() + f2 * part.b2().transpose()) * h)
}

/// Solve the reduced stage system by the blended iteration.
///
/// Factors `Phi = I - h gamma J0` once; every sweep costs one residual
/// evaluation (nonlinear mode), two back-substitutions through `Phi` and a
/// small solve against `C`. Starts from the consistent guess `Y1 = e (x) y0`
/// and stops when `||F|| <= rtol ||Y1|| + atol`.
pub fn blended_solve(
    part: &StagePartition,
    system: &HamiltonianSystem,
    y0: &DVector<f64>,
    h: f64,
    cfg: &BlendedConfig,
) -> Result<(DMatrix<f64>, SolveStats)> {
    cfg.validate()?;
    let two_m = system.dim();
    if y0.len() != two_m {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} but system dim {}",
            y0.len(),
            two_m
        )));
    }
    let s = part.s();
    let j0 = system.jacobian_f(y0);
    let phi = DMatrix::identity(two_m, two_m) - &j0 * (h * cfg.gamma);
    let phi_lu = phi.lu();
    if !phi_lu.is_invertible() {
        return Err(Error::SingularMatrix("Phi = I - h gamma J0"));
    }
    let c_lu = part.c().clone().lu();
    if !c_lu.is_invertible() {
        return Err(Error::SingularMatrix("C = B1 + B2 A1"));
    }

    // Y1 (x) applied maps: psi_2 = -gamma (C^-1 (x) I) F  <=>  -gamma (C^-1 F^T)^T
    let apply_c_inv_t = |block: &DMatrix<f64>| -> DMatrix<f64> {
        c_lu.solve(&block.transpose()).expect("checked invertible").transpose()
    };
    let solve_phi = |block: &DMatrix<f64>| -> DMatrix<f64> {
        phi_lu.solve(block).expect("checked invertible")
    };

    let mut y = y0 * DMatrix::from_element(1, s, 1.0);
    let mut sweeps = 0usize;

    match cfg.mode {
        IterationMode::Nonlinear => {
            for iter in 0..=cfg.max_inner {
                let residual = residual_f(part, system, y0, h, &y)?;
                let res_norm = residual.norm();
                if res_norm <= cfg.rtol * y.norm() + cfg.atol {
                    return Ok((
                        y,
                        SolveStats {
                            iterations: iter,
                            sweeps,
                            residual: res_norm,
                        },
                    ));
                }
                if iter == cfg.max_inner {
                    return Err(Error::NonConvergence {
                        iterations: iter,
                        residual: res_norm,
                    });
                }
                let psi1 = -&residual;
                let psi2 = apply_c_inv_t(&residual) * (-cfg.gamma);
                let psi = solve_phi(&(&psi1 - &psi2)) + &psi2;
                let delta = solve_phi(&psi);
                y += delta;
                sweeps += 1;
            }
            unreachable!("loop returns or errors at the cap");
        }
        IterationMode::Linearized => {
            for outer in 0..=cfg.max_outer {
                let residual = residual_f(part, system, y0, h, &y)?;
                let res_norm = residual.norm();
                if res_norm <= cfg.rtol * y.norm() + cfg.atol {
                    return Ok((
                        y,
                        SolveStats {
                            iterations: outer,
                            sweeps,
                            residual: res_norm,
                        },
                    ));
                }
                if outer == cfg.max_outer {
                    return Err(Error::NonConvergence {
                        iterations: outer,
                        residual: res_norm,
                    });
                }
                let psi1 = -&residual;
                let psi2 = apply_c_inv_t(&residual) * (-cfg.gamma);
                let psi = solve_phi(&(&psi1 - &psi2)) + &psi2;
                let inner_tol = 0.1 * (cfg.rtol * y.norm() + cfg.atol);
                let mut delta = DMatrix::zeros(two_m, s);
                for _ in 0..cfg.max_inner {
                    // M delta, assembled blockwise
                    let jd = &j0 * &delta;
                    let t1 = &delta - (&jd * part.c().transpose()) * h;
                    let t2 = (apply_c_inv_t(&delta) - &jd * h) * cfg.gamma;
                    let m_delta = solve_phi(&(&t1 - &t2)) + &t2;
                    let increment = solve_phi(&(&psi - &m_delta));
                    delta += &increment;
                    sweeps += 1;
                    if increment.norm() <= inner_tol {
                        break;
                    }
                }
                y += delta;
            }
            unreachable!("loop returns or errors at the cap");
        }
    }
}

/// Observed contraction of the iteration on the scalar test problem at a
/// fixed `q`.
///
/// The error of the fresh-residual sweep obeys `e <- Z(q) e`; this runs the
/// sweep on the error directly (the iteration is affine, so the error map is
/// linear), renormalizing every pass, and reports the geometric mean of the
/// per-sweep reduction over `window` sweeps after `warmup` ones.
pub fn observed_contraction(
    c: &DMatrix<f64>,
    gamma: f64,
    q: Complex64,
    warmup: usize,
    window: usize,
) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let s = c.nrows();
    let one = Complex64::new(1.0, 0.0);
    let denom = one - q * gamma;
    if denom.norm() == 0.0 {
        return Err(Error::Pole);
    }
    let theta = one / denom;
    let cc = c.map(|v| Complex64::new(v, 0.0));
    let cc_lu = cc.clone().lu();
    let stage_matrix = DMatrix::<Complex64>::identity(s, s) - &cc * q;

    let mut error = DVector::from_fn(s, |i, _| Complex64::new(1.0, 0.3 * i as f64));
    error /= Complex64::new(error.norm(), 0.0);
    let mut log_sum = 0.0;
    for sweep in 0..warmup + window {
        let residual = &stage_matrix * &error;
        let psi1 = -&residual;
        let psi2 = cc_lu
            .solve(&residual)
            .ok_or(Error::SingularMatrix("C on the scalar test"))?
            * Complex64::new(-gamma, 0.0);
        let psi = &psi1 * theta + &psi2 * (one - theta);
        error += psi * theta;
        let norm = error.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if sweep >= warmup {
            log_sum += norm.ln();
        }
        error /= Complex64::new(norm, 0.0);
    }
    Ok((log_sum / window as f64).exp())
}
