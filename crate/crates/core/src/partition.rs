//! Fundamental/silent stage splitting and the reduced discrete problem.
//!
//! Any `s` of the `k` stages may serve as the unknowns of the nonlinear
//! system; the remaining `k - s` silent stages are linear combinations of
//! them. The blocks assembled here,
//!
//! ```text
//! A_1 = I_s2 I_s1^-1,        u_hat = u - A_1 e,
//! B_1 = I_s1 P_s1^T Omega_1, B_2 = I_s1 P_s2^T Omega_2,
//! C   = B_1 + B_2 A_1,
//! ```
//!
//! define the block-size-`s` system actually solved per step. The spectrum of
//! `C` equals that of `X_s` for every admissible choice of fundamental
//! stages, while its condition number depends on the choice; the rule-of-thumb
//! selection picks the nodes closest to `j/(s+1)`.

use crate::error::{Error, Result};
use crate::tableau::HbvmTableau;
use nalgebra::{DMatrix, DVector};

/// Indices of the stages treated as unknowns, chosen nearest to the
/// equidistributed targets `j/(s+1)`, `j = 1..=s`. Ties go to the smaller
/// index. Requires `k - s` even so the selection is symmetric; the result is
/// checked to be `s` distinct indices invariant under `i <-> k-1-i`.
///
/// Indices are 0-based.
pub fn select_fundamental(nodes: &[f64], s: usize) -> Result<Vec<usize>> {
    let k = nodes.len();
    if s < 1 || s > k {
        return Err(Error::InvalidArgument(format!(
            "selection needs 1 <= s <= k, got s = {s}, k = {k}"
        )));
    }
    if !(k - s).is_multiple_of(2) {
        return Err(Error::Parity { k, s });
    }
    if k == s {
        return Ok((0..k).collect());
    }
    let idx = select_nearest_targets(nodes, s)?;
    for &i in &idx {
        if !idx.contains(&(k - 1 - i)) {
            return Err(Error::Selection(format!(
                "selected indices {idx:?} are not symmetric under i <-> k-1-i"
            )));
        }
    }
    Ok(idx)
}

/// Nearest-target selection without the parity requirement.
///
/// For odd `k - s` the symmetric rule of thumb does not apply; this greedy
/// variant returns `s` distinct indices, each the closest node to its target
/// among those not already taken, but makes no symmetry guarantee.
pub fn select_fundamental_greedy(nodes: &[f64], s: usize) -> Result<Vec<usize>> {
    if s < 1 || s > nodes.len() {
        return Err(Error::InvalidArgument(format!(
            "selection needs 1 <= s <= k, got s = {s}, k = {}",
            nodes.len()
        )));
    }
    let mut idx = Vec::with_capacity(s);
    for j in 1..=s {
        let target = j as f64 / (s as f64 + 1.0);
        let best = nearest_node(nodes, target, |i| !idx.contains(&i));
        match best {
            Some(i) => idx.push(i),
            None => {
                return Err(Error::Selection(format!(
                    "no free node left for target {target}"
                )))
            }
        }
    }
    idx.sort_unstable();
    Ok(idx)
}

fn select_nearest_targets(nodes: &[f64], s: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(s);
    for j in 1..=s {
        let target = j as f64 / (s as f64 + 1.0);
        let best = nearest_node(nodes, target, |_| true).expect("nodes not empty");
        if idx.contains(&best) {
            return Err(Error::Selection(format!(
                "targets collide: node {best} is closest to more than one target"
            )));
        }
        idx.push(best);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Index of the admissible node closest to `target`; ties keep the smaller
/// index.
fn nearest_node(nodes: &[f64], target: f64, admissible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best = None;
    let mut best_dist = f64::INFINITY;
    for (i, &t) in nodes.iter().enumerate() {
        if !admissible(i) {
            continue;
        }
        let dist = (t - target).abs();
        if dist < best_dist {
            best_dist = dist;
            best = Some(i);
        }
    }
    best
}

/// The reduced problem blocks for a fixed fundamental index set.
#[derive(Debug, Clone)]
pub struct StagePartition {
    tableau: HbvmTableau,
    fund_idx: Vec<usize>,
    silent_idx: Vec<usize>,
    a1: DMatrix<f64>,
    u_hat: DVector<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl StagePartition {
    /// Build the partition blocks for the given fundamental indices.
    ///
    /// `A_1` is obtained by solving against `I_s1` with partial-pivoting LU
    /// rather than forming the inverse. A numerically singular `I_s1`
    /// rejects the partition.
    pub fn build(tableau: &HbvmTableau, fund_idx: &[usize]) -> Result<Self> {
        let k = tableau.k();
        let s = tableau.s();
        if fund_idx.len() != s {
            return Err(Error::InvalidArgument(format!(
                "expected {s} fundamental indices, got {}",
                fund_idx.len()
            )));
        }
        let mut fund = fund_idx.to_vec();
        fund.sort_unstable();
        fund.dedup();
        if fund.len() != s || fund.iter().any(|&i| i >= k) {
            return Err(Error::InvalidArgument(format!(
                "fundamental indices must be {s} distinct values below {k}"
            )));
        }
        let silent: Vec<usize> = (0..k).filter(|i| !fund.contains(i)).collect();
        let r = silent.len();

        let i_s1 = select_rows(tableau.mat_i(), &fund);
        let i_s2 = select_rows(tableau.mat_i(), &silent);
        let p_s1 = select_rows(tableau.mat_p(), &fund);
        let p_s2 = select_rows(tableau.mat_p(), &silent);
        let w = tableau.weights();
        let omega1 = DMatrix::from_diagonal(&DVector::from_iterator(
            s,
            fund.iter().map(|&i| w[i]),
        ));
        let omega2 = DMatrix::from_diagonal(&DVector::from_iterator(
            r,
            silent.iter().map(|&i| w[i]),
        ));

        // A_1^T from I_s1^T A_1^T = I_s2^T
        let lu = i_s1.transpose().lu();
        let a1 = match lu.solve(&i_s2.transpose()) {
            Some(solution) => solution.transpose(),
            None => return Err(Error::SingularMatrix("I_s1 of the stage partition")),
        };
        let ones_s = DVector::from_element(s, 1.0);
        let u_hat = DVector::from_element(r, 1.0) - &a1 * ones_s;
        let b1 = &i_s1 * p_s1.transpose() * omega1;
        let b2 = &i_s1 * p_s2.transpose() * omega2;
        let c = &b1 + &b2 * &a1;

        Ok(Self {
            tableau: tableau.clone(),
            fund_idx: fund,
            silent_idx: silent,
            a1,
            u_hat,
            b1,
            b2,
            c,
        })
    }

    /// Partition with the rule-of-thumb fundamental abscissae.
    ///
    /// For odd `k - s`, where the symmetric selection does not apply, the
    /// greedy nearest-target variant is used instead.
    pub fn from_tableau(tableau: &HbvmTableau) -> Result<Self> {
        let idx = match select_fundamental(tableau.nodes(), tableau.s()) {
            Ok(idx) => idx,
            Err(Error::Parity { .. }) => {
                select_fundamental_greedy(tableau.nodes(), tableau.s())?
            }
            Err(other) => return Err(other),
        };
        Self::build(tableau, &idx)
    }

    pub fn tableau(&self) -> &HbvmTableau {
        &self.tableau
    }

    pub fn k(&self) -> usize {
        self.tableau.k()
    }

    pub fn s(&self) -> usize {
        self.tableau.s()
    }

    /// Number of silent stages `k - s`.
    pub fn silent_count(&self) -> usize {
        self.silent_idx.len()
    }

    pub fn fund_idx(&self) -> &[usize] {
        &self.fund_idx
    }

    pub fn silent_idx(&self) -> &[usize] {
        &self.silent_idx
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    pub fn u_hat(&self) -> &DVector<f64> {
        &self.u_hat
    }

    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }

    pub fn b2(&self) -> &DMatrix<f64> {
        &self.b2
    }

    /// `C = B_1 + B_2 A_1`, the matrix of the simplified Newton iteration.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Fundamental abscissae `t_i`, `i` in `fund_idx`.
    pub fn fund_nodes(&self) -> Vec<f64> {
        self.fund_idx.iter().map(|&i| self.tableau.nodes()[i]).collect()
    }

    /// Quadrature weights at the fundamental / silent abscissae.
    pub fn split_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.tableau.weights();
        (
            self.fund_idx.iter().map(|&i| w[i]).collect(),
            self.silent_idx.iter().map(|&i| w[i]).collect(),
        )
    }

    /// Silent stage block from the fundamental one:
    /// `Y_2 = y0 u_hat^T + Y_1 A_1^T`.
    ///
    /// Stage blocks store one stage per column (`2m x s` in, `2m x (k-s)`
    /// out).
    pub fn silent_from_fundamental(
        &self,
        y0: &DVector<f64>,
        y1_block: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let s = self.s();
        if y1_block.ncols() != s || y1_block.nrows() != y0.len() {
            return Err(Error::DimensionMismatch(format!(
                "stage block is {}x{}, expected {}x{}",
                y1_block.nrows(),
                y1_block.ncols(),
                y0.len(),
                s
            )));
        }
        Ok(y0 * self.u_hat.transpose() + y1_block * self.a1.transpose())
    }
}

/// 2-norm condition number via singular values; infinite when the smallest
/// singular value underflows to zero.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let singular = m.clone().svd(false, false).singular_values;
    let max = singular.iter().copied().fold(0.0, f64::max);
    let min = singular.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}
