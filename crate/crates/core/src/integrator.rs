//! Step advancement, fixed-step trajectories and experiment drivers, plus a
//! small family of canonical Hamiltonian test problems.

use crate::blended::{self, BlendedConfig, SolveStats};
use crate::error::{Error, Result};
use crate::partition::StagePartition;
use crate::tableau::HbvmTableau;
use nalgebra::{DMatrix, DVector};

type StateFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A canonical Hamiltonian system `y' = J grad H(y)` on `R^(2m)` with
/// `J = [[0, I], [-I, 0]]` and state ordering `y = (q_1..q_m, p_1..p_m)`.
pub struct HamiltonianSystem {
    dim: usize,
    name: String,
    hamiltonian: Box<StateFn>,
    gradient: Box<GradientFn>,
    jac_f: Option<Box<JacobianFn>>,
}

impl std::fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jac_f.is_some())
            .finish()
    }
}

impl HamiltonianSystem {
    /// System from energy and gradient evaluators; `dim` must be even.
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        hamiltonian: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "state dimension must be even and positive, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            name: name.into(),
            hamiltonian: Box::new(hamiltonian),
            gradient: Box::new(gradient),
            jac_f: None,
        })
    }

    /// Attach an analytic Jacobian of `f = J grad H`.
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac_f = Some(Box::new(jac));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac_f.is_some()
    }

    pub fn energy(&self, y: &DVector<f64>) -> f64 {
        (self.hamiltonian)(y)
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(y)
    }

    /// Vector field `f(y) = J grad H(y)`.
    pub fn f(&self, y: &DVector<f64>) -> DVector<f64> {
        apply_structure(&self.gradient(y))
    }

    /// Apply `f` to every column of a stage block.
    pub fn f_block(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(block.nrows(), block.ncols());
        for j in 0..block.ncols() {
            out.set_column(j, &self.f(&block.column(j).clone_owned()));
        }
        out
    }

    /// Jacobian of `f` at `y`: analytic if supplied, otherwise central
    /// finite differences with increment `sqrt(eps) (1 + |y_i|)`.
    pub fn jacobian_f(&self, y: &DVector<f64>) -> DMatrix<f64> {
        if let Some(jac) = &self.jac_f {
            return jac(y);
        }
        let n = self.dim;
        let mut jac = DMatrix::zeros(n, n);
        let sqrt_eps = f64::EPSILON.sqrt();
        for i in 0..n {
            let delta = sqrt_eps * (1.0 + y[i].abs());
            let mut plus = y.clone();
            let mut minus = y.clone();
            plus[i] += delta;
            minus[i] -= delta;
            jac.set_column(i, &((self.f(&plus) - self.f(&minus)) / (2.0 * delta)));
        }
        jac
    }

    /// `H = (q^2 + p^2)/2`, the degree-2 polynomial reference problem.
    pub fn harmonic_oscillator() -> Self {
        Self::new(
            2,
            "harmonic",
            |y| 0.5 * (y[0] * y[0] + y[1] * y[1]),
            |y| DVector::from_vec(vec![y[0], y[1]]),
        )
        .expect("static dimension")
        .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
    }

    /// `H = p^2/2 + q^4/4`, polynomial of degree 4.
    pub fn quartic_oscillator() -> Self {
        Self::new(
            2,
            "quartic",
            |y| 0.5 * y[1] * y[1] + 0.25 * y[0].powi(4),
            |y| DVector::from_vec(vec![y[0].powi(3), y[1]]),
        )
        .expect("static dimension")
        .with_jacobian(|y| {
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0 * y[0] * y[0], 0.0])
        })
    }

    /// `H = p^2/2 + q^6/6`, polynomial of degree 6.
    pub fn sextic_oscillator() -> Self {
        Self::new(
            2,
            "sextic",
            |y| 0.5 * y[1] * y[1] + y[0].powi(6) / 6.0,
            |y| DVector::from_vec(vec![y[0].powi(5), y[1]]),
        )
        .expect("static dimension")
        .with_jacobian(|y| {
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.0 * y[0].powi(4), 0.0])
        })
    }

    /// `H = p^2/2 - cos q`, the nonlinear pendulum (non-polynomial energy).
    pub fn pendulum() -> Self {
        Self::new(
            2,
            "pendulum",
            |y| 0.5 * y[1] * y[1] - y[0].cos(),
            |y| DVector::from_vec(vec![y[0].sin(), y[1]]),
        )
        .expect("static dimension")
        .with_jacobian(|y| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -y[0].cos(), 0.0]))
    }

    /// `H = lambda q p`: the flow decouples into `q' = lambda q`,
    /// `p' = -lambda p`, embedding the scalar linear test problem in a
    /// canonical system.
    pub fn linear_saddle(lambda: f64) -> Self {
        Self::new(
            2,
            "saddle",
            move |y| lambda * y[0] * y[1],
            move |y| DVector::from_vec(vec![lambda * y[1], lambda * y[0]]),
        )
        .expect("static dimension")
        .with_jacobian(move |_| DMatrix::from_row_slice(2, 2, &[lambda, 0.0, 0.0, -lambda]))
    }

    /// Built-in problem lookup used by the command-line front end.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "harmonic" => Ok(Self::harmonic_oscillator()),
            "quartic" => Ok(Self::quartic_oscillator()),
            "sextic" => Ok(Self::sextic_oscillator()),
            "pendulum" => Ok(Self::pendulum()),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected harmonic, quartic, sextic or pendulum)"
            ))),
        }
    }
}

/// `J v` for the canonical structure matrix.
pub fn apply_structure(v: &DVector<f64>) -> DVector<f64> {
    let m = v.len() / 2;
    DVector::from_fn(v.len(), |i, _| if i < m { v[m + i] } else { -v[i - m] })
}

/// A step that could not be completed.
#[derive(Debug, Clone)]
pub struct StepFailure {
    pub step: usize,
    pub time: f64,
    pub message: String,
}

/// Fixed-step trajectory with per-step energies and iteration counts.
#[derive(Debug, Clone, Default)]
pub struct IntegrationResult {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
    /// Solver iterations per accepted step.
    pub newton_stats: Vec<usize>,
    /// Empty unless the integration halted early.
    pub failures: Vec<StepFailure>,
}

impl IntegrationResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// `max_i |H_i - H_0| / |H_0|` (absolute drift when `H_0 = 0`).
    pub fn max_relative_energy_drift(&self) -> f64 {
        let h0 = match self.energy.first() {
            Some(&h0) => h0,
            None => return 0.0,
        };
        let scale = if h0.abs() > 0.0 { h0.abs() } else { 1.0 };
        self.energy
            .iter()
            .map(|h| (h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Largest single-step energy change, scaled by `1 + |H|`.
    pub fn max_step_energy_change(&self) -> f64 {
        self.energy
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / (1.0 + w[0].abs()))
            .fold(0.0, f64::max)
    }
}

/// One HBVM step: solve the stages, then apply the quadrature weights
/// `y1 = y0 + h sum_l w_l f(stage_l)` over fundamental and silent stages.
pub fn advance_step(
    part: &StagePartition,
    system: &HamiltonianSystem,
    y0: &DVector<f64>,
    h: f64,
    cfg: &BlendedConfig,
) -> Result<(DVector<f64>, SolveStats)> {
    let (y1_block, stats) = blended::blended_solve(part, system, y0, h, cfg)?;
    let y2_block = part.silent_from_fundamental(y0, &y1_block)?;
    let f1 = system.f_block(&y1_block);
    let f2 = system.f_block(&y2_block);
    let (w1, w2) = part.split_weights();
    let mut update = DVector::zeros(system.dim());
    for (j, &w) in w1.iter().enumerate() {
        update += f1.column(j) * w;
    }
    for (j, &w) in w2.iter().enumerate() {
        update += f2.column(j) * w;
    }
    Ok((y0 + update * h, stats))
}

/// Fixed-step integration over `[0, t_end]` with HBVM(k,s).
///
/// Runs `floor(t_end / h)` steps; a failing step is recorded in the result
/// and the trajectory is returned up to that point.
pub fn integrate(
    system: &HamiltonianSystem,
    y0: &DVector<f64>,
    t_end: f64,
    h: f64,
    k: usize,
    s: usize,
    cfg: &BlendedConfig,
) -> Result<IntegrationResult> {
    if h <= 0.0 || t_end <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step {h} and horizon {t_end} must be positive"
        )));
    }
    let tableau = HbvmTableau::gauss(k, s)?;
    let part = StagePartition::from_tableau(&tableau)?;
    let n_steps = (t_end / h + 1e-9).floor() as usize;

    let mut result = IntegrationResult::default();
    result.times.push(0.0);
    result.states.push(y0.clone());
    result.energy.push(system.energy(y0));

    let mut y = y0.clone();
    for step in 0..n_steps {
        match advance_step(&part, system, &y, h, cfg) {
            Ok((next, stats)) => {
                y = next;
                let t = (step + 1) as f64 * h;
                result.times.push(t);
                result.energy.push(system.energy(&y));
                result.states.push(y.clone());
                result.newton_stats.push(stats.iterations);
            }
            Err(err) => {
                result.failures.push(StepFailure {
                    step,
                    time: step as f64 * h,
                    message: err.to_string(),
                });
                break;
            }
        }
    }
    Ok(result)
}

/// Reference solution for convergence studies.
pub enum Reference<'a> {
    /// Exact solution as a function of time.
    Analytic(&'a dyn Fn(f64) -> DVector<f64>),
    /// The same method at `h / factor`.
    SelfRefined { factor: usize },
}

/// Least-squares slope of `log error(t_end)` against `log h`.
///
/// Needs at least four step sizes; errors below `1e-13` at the coarsest
/// level are indistinguishable from rounding and rejected.
pub fn observed_order(
    system: &HamiltonianSystem,
    reference: &Reference<'_>,
    k: usize,
    s: usize,
    t_end: f64,
    h_levels: &[f64],
    cfg: &BlendedConfig,
) -> Result<f64> {
    if h_levels.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 step sizes, got {}",
            h_levels.len()
        )));
    }
    let mut points = Vec::with_capacity(h_levels.len());
    for &h in h_levels {
        let n = (t_end / h).round().max(1.0);
        let t_actual = n * h;
        let run = integrate(system, &initial_state(system), t_actual, h, k, s, cfg)?;
        if !run.is_complete() {
            return Err(Error::Numeric(format!(
                "integration at h = {h} failed: {}",
                run.failures[0].message
            )));
        }
        let y_end = run.states.last().unwrap().clone();
        let y_ref = match reference {
            Reference::Analytic(solution) => solution(t_actual),
            Reference::SelfRefined { factor } => {
                let fine = integrate(
                    system,
                    &initial_state(system),
                    t_actual,
                    h / *factor as f64,
                    k,
                    s,
                    cfg,
                )?;
                if !fine.is_complete() {
                    return Err(Error::Numeric(format!(
                        "reference integration at h = {} failed",
                        h / *factor as f64
                    )));
                }
                fine.states.last().unwrap().clone()
            }
        };
        points.push((h, (y_end - y_ref).norm()));
    }
    let coarsest = points
        .iter()
        .cloned()
        .fold((0.0, 0.0), |acc, p| if p.0 > acc.0 { p } else { acc });
    if coarsest.1 < 1e-13 {
        return Err(Error::UnmeasurableOrder(coarsest.1));
    }
    Ok(least_squares_slope(&points))
}

/// Default initial state for the experiment drivers.
pub fn initial_state(system: &HamiltonianSystem) -> DVector<f64> {
    let mut y0 = DVector::zeros(system.dim());
    y0[0] = 1.0;
    if system.dim() >= 2 {
        y0[system.dim() / 2] = 0.5;
    }
    y0
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, err) in points {
        let x = h.ln();
        let y = err.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Integrate `n_steps` forward and the same number backward; returns the
/// distance to the initial state. Symmetric methods return near zero.
pub fn reversibility_check(
    system: &HamiltonianSystem,
    y0: &DVector<f64>,
    n_steps: usize,
    h: f64,
    k: usize,
    s: usize,
    cfg: &BlendedConfig,
) -> Result<f64> {
    let tableau = HbvmTableau::gauss(k, s)?;
    let part = StagePartition::from_tableau(&tableau)?;
    let mut y = y0.clone();
    for _ in 0..n_steps {
        y = advance_step(&part, system, &y, h, cfg)?.0;
    }
    for _ in 0..n_steps {
        y = advance_step(&part, system, &y, -h, cfg)?.0;
    }
    Ok((y - y0).norm())
}
