//! Cross-module invariants, randomized where the property quantifies over
//! free choices (abscissae splits, stage selections, test states).

use hbvm_core::blended::{self, BlendedConfig};
use hbvm_core::eig::{eigenvalues, pairing_distance};
use hbvm_core::integrator::{self, HamiltonianSystem};
use hbvm_core::partition::{condition_number, select_fundamental, StagePartition};
use hbvm_core::quadrature::{interpolatory_weights, QuadratureRule};
use hbvm_core::tableau::{x_matrix, HbvmTableau};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Fundamental and silent abscissae are interchangeable: interpolatory
    /// weights over any split of the Gauss nodes reproduce the Gauss weights.
    #[test]
    fn interpolatory_weights_are_split_invariant(
        k in 2usize..=12,
        seed in any::<u64>(),
    ) {
        let rule = QuadratureRule::gauss(k).unwrap();
        let mut indices: Vec<usize> = (0..k).collect();
        // cheap deterministic shuffle from the seed
        let mut state = seed | 1;
        for i in (1..k).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            indices.swap(i, j);
        }
        let split = k / 2;
        let fund: Vec<f64> = indices[..split].iter().map(|&i| rule.nodes()[i]).collect();
        let silent: Vec<f64> = indices[split..].iter().map(|&i| rule.nodes()[i]).collect();
        let (beta, beta_hat) = interpolatory_weights(&fund, &silent).unwrap();
        for (pos, &i) in indices[..split].iter().enumerate() {
            prop_assert!((beta[pos] - rule.weights()[i]).abs() <= 1e-12);
        }
        for (pos, &i) in indices[split..].iter().enumerate() {
            prop_assert!((beta_hat[pos] - rule.weights()[i]).abs() <= 1e-12);
        }
    }

    /// The tableau row-sum identity A 1 = t holds for arbitrary sizes.
    #[test]
    fn tableau_row_sums_equal_nodes(k in 1usize..=24, s_offset in 0usize..6) {
        let s = 1 + s_offset.min(k - 1);
        let tab = HbvmTableau::gauss(k, s).unwrap();
        let sums = tab.a() * DVector::from_element(k, 1.0);
        for (i, &t) in tab.nodes().iter().enumerate() {
            prop_assert!((sums[i] - t).abs() <= 1e-13);
        }
    }

    /// Solving the full k-stage linear system and the reduced s-stage system
    /// then reconstructing the silent stages give the same stage values.
    #[test]
    fn reduced_problem_equivalence_on_a_linear_flow(
        k in 2usize..=10,
        s_offset in 0usize..3,
        h_scale in 0.2f64..1.0,
    ) {
        let s = 1 + s_offset.min(k - 1);
        let tab = HbvmTableau::gauss(k, s).unwrap();
        let part = match StagePartition::from_tableau(&tab) {
            Ok(part) => part,
            Err(_) => return Ok(()),
        };
        let h = 0.25 * h_scale;
        // harmonic oscillator: f(y) = L y
        let l = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let y0 = DVector::from_vec(vec![1.0, 0.5]);

        // full system: (I - h A (x) L) Y = e (x) y0
        let full_matrix = DMatrix::identity(2 * k, 2 * k) - tab.a().kronecker(&l) * h;
        let mut rhs = DVector::zeros(2 * k);
        for i in 0..k {
            rhs.rows_mut(2 * i, 2).copy_from(&y0);
        }
        let full = full_matrix.lu().solve(&rhs).unwrap();

        // reduced system: (I - h (B1 + B2 A1) (x) L) Y1 = e (x) y0 + h (B2 u_hat) (x) L y0
        let c_kron = (part.b1() + part.b2() * part.a1()).kronecker(&l);
        let reduced_matrix = DMatrix::identity(2 * s, 2 * s) - c_kron * h;
        let b2u = part.b2() * part.u_hat();
        let ly0 = &l * &y0;
        let mut reduced_rhs = DVector::zeros(2 * s);
        for i in 0..s {
            reduced_rhs.rows_mut(2 * i, 2).copy_from(&(&y0 + &ly0 * (h * b2u[i])));
        }
        let reduced = reduced_matrix.lu().solve(&reduced_rhs).unwrap();

        let y1_block = DMatrix::from_fn(2, s, |i, j| reduced[2 * j + i]);
        let y2_block = part.silent_from_fundamental(&y0, &y1_block).unwrap();

        for (pos, &idx) in part.fund_idx().iter().enumerate() {
            for i in 0..2 {
                prop_assert!((full[2 * idx + i] - y1_block[(i, pos)]).abs() <= 1e-11);
            }
        }
        for (pos, &idx) in part.silent_idx().iter().enumerate() {
            for i in 0..2 {
                prop_assert!((full[2 * idx + i] - y2_block[(i, pos)]).abs() <= 1e-11);
            }
        }
    }

    /// Spectral image: eigenvalues of Z(q) are the mapped eigenvalues of C.
    #[test]
    fn z_spectrum_is_the_mapped_c_spectrum(
        y in 0.01f64..100.0,
        s in 2usize..=5,
    ) {
        let c = x_matrix(s);
        let gamma = blended::gamma_opt(&eigenvalues(&c).unwrap()).unwrap();
        let q = Complex64::new(0.0, y);
        let z = blended::iteration_matrix_z(&c, gamma, q).unwrap();
        let scalar = q / (Complex64::new(1.0, 0.0) - q * gamma).powu(2);
        let g = z.map(|v| (v / scalar).re);
        let z_spectrum: Vec<Complex64> = eigenvalues(&g)
            .unwrap()
            .into_iter()
            .map(|lambda| lambda * scalar)
            .collect();
        let mapped: Vec<Complex64> = eigenvalues(&c)
            .unwrap()
            .into_iter()
            .map(|mu| q * (mu - gamma).powu(2)
                / (mu * (Complex64::new(1.0, 0.0) - q * gamma).powu(2)))
            .collect();
        prop_assert!(pairing_distance(&z_spectrum, &mapped) <= 1e-9);
    }
}

/// Per-step energy change of polynomial Hamiltonians is at rounding level
/// exactly when k >= nu s / 2.
#[test]
fn polynomial_energy_conservation_thresholds() {
    let y0 = DVector::from_vec(vec![1.0, 0.5]);
    let harmonic_configs: &[(usize, usize)] = &[(1, 1), (2, 2), (3, 3), (4, 2)];
    let quartic_configs: &[(usize, usize)] = &[(2, 1), (4, 2), (6, 3), (6, 2)];
    let sextic_configs: &[(usize, usize)] = &[(3, 1), (6, 2), (9, 3)];
    let cases = [
        (HamiltonianSystem::harmonic_oscillator(), 2, harmonic_configs),
        (HamiltonianSystem::quartic_oscillator(), 4, quartic_configs),
        (HamiltonianSystem::sextic_oscillator(), 6, sextic_configs),
    ];
    for (system, nu, configs) in cases {
        for &(k, s) in configs {
            assert!(2 * k >= nu * s, "test case must satisfy the threshold");
            let mut cfg = BlendedConfig::optimal_for_degree(s).unwrap();
            cfg.rtol = 1e-14;
            cfg.atol = 1e-16;
            let run = integrator::integrate(&system, &y0, 5.0, 0.1, k, s, &cfg).unwrap();
            assert!(run.is_complete());
            let change = run.max_step_energy_change();
            assert!(
                change <= 1e-12,
                "{} with HBVM({k},{s}): step energy change {change:e}",
                system.name()
            );
        }
    }

    // below the threshold the energy genuinely drifts
    let sextic = HamiltonianSystem::sextic_oscillator();
    let cfg = BlendedConfig::optimal_for_degree(2).unwrap();
    let below = integrator::integrate(&sextic, &y0, 100.0, 0.1, 2, 2, &cfg).unwrap();
    let above = integrator::integrate(&sextic, &y0, 100.0, 0.1, 6, 2, &cfg).unwrap();
    assert!(
        below.max_relative_energy_drift() >= 100.0 * above.max_relative_energy_drift(),
        "drift contrast across the k >= nu s / 2 threshold"
    );
}

/// HBVM(s,s) is the Gauss collocation method: trajectories coincide
/// step-by-step with a directly assembled collocation solver.
#[test]
fn hbvm_s_s_matches_direct_gauss_collocation() {
    let system = HamiltonianSystem::pendulum();
    let y0 = DVector::from_vec(vec![1.0, 0.5]);
    let h = 0.1;
    for s in [2usize, 3] {
        let mut cfg = BlendedConfig::optimal_for_degree(s).unwrap();
        cfg.rtol = 1e-14;
        cfg.atol = 1e-16;
        let run = integrator::integrate(&system, &y0, 1.0, h, s, s, &cfg).unwrap();
        assert!(run.is_complete());

        let rule = QuadratureRule::gauss(s).unwrap();
        let a = collocation_matrix(rule.nodes());
        let mut y = y0.clone();
        for step in 1..run.states.len() {
            y = collocation_step(&system, &a, rule.nodes(), rule.weights(), &y, h);
            let diff = (&run.states[step] - &y).norm();
            assert!(diff <= 1e-10, "s={s}, step {step}: deviation {diff:e}");
        }
    }
}

/// Quadrature error on the non-polynomial pendulum shrinks as silent stages
/// are added, down to the rounding floor.
#[test]
fn pendulum_energy_improves_with_k() {
    let system = HamiltonianSystem::pendulum();
    let y0 = DVector::from_vec(vec![2.0, 0.5]);
    let s = 2;
    let mut cfg = BlendedConfig::optimal_for_degree(s).unwrap();
    cfg.rtol = 1e-14;
    cfg.atol = 1e-16;
    let floor = 1e-12;
    let mut previous = f64::INFINITY;
    for k in [s, s + 2, s + 4, s + 6] {
        let run = integrator::integrate(&system, &y0, 200.0, 0.3, k, s, &cfg).unwrap();
        assert!(run.is_complete());
        let drift = run.max_relative_energy_drift();
        assert!(
            drift <= previous || (drift <= floor && previous <= floor),
            "k={k}: drift {drift:e} after {previous:e}"
        );
        previous = drift;
    }
    assert!(previous <= floor, "largest k should reach the floor");
}

/// Remark-of-thumb conditioning sweep beyond the s = 3 acceptance case.
#[test]
fn rule_of_thumb_conditioning_is_bounded() {
    for s in [2usize, 4, 5] {
        let mut conds = Vec::new();
        let mut k = s;
        while k <= 100 {
            let tab = HbvmTableau::gauss(k, s).unwrap();
            let idx = select_fundamental(tab.nodes(), s).unwrap();
            let part = StagePartition::build(&tab, &idx).unwrap();
            conds.push(condition_number(part.c()));
            k += 2;
        }
        let max = conds.iter().cloned().fold(0.0, f64::max);
        let min = conds.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max <= 10.0 * min, "s={s}: cond range {min:.3}..{max:.3}");
    }
}

/// First-s selection degrades by orders of magnitude where the rule of
/// thumb stays flat.
#[test]
fn first_s_conditioning_blows_up() {
    for s in [2usize, 4, 5] {
        let cond_first = |k: usize| {
            let tab = HbvmTableau::gauss(k, s).unwrap();
            let fund: Vec<usize> = (0..s).collect();
            condition_number(StagePartition::build(&tab, &fund).unwrap().c())
        };
        let growth = cond_first(50) / cond_first(10);
        assert!(growth >= 100.0, "s={s}: growth {growth}");
    }
}

/// A- and L-convergence on the imaginary axis up to s = 10.
#[test]
fn iteration_is_a_and_l_convergent() {
    for s in 2..=10 {
        let analysis = blended::LinearAnalysis::compute(&x_matrix(s), None, 256).unwrap();
        assert!(analysis.rho_star < 1.0, "s={s}: rho* {}", analysis.rho_star);
        for &(_, rho) in &analysis.q_grid {
            assert!(rho < 1.0);
        }
        let q = Complex64::new(0.0, 1e6);
        let far = blended::iteration_matrix_z(&x_matrix(s), analysis.gamma, q).unwrap();
        let scalar = q / (Complex64::new(1.0, 0.0) - q * analysis.gamma).powu(2);
        let g = far.map(|v| (v / scalar).re);
        let rho_far = scalar.norm()
            * eigenvalues(&g)
                .unwrap()
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
        assert!(rho_far <= 1e-4, "s={s}: rho(Z(1e6 i)) = {rho_far:e}");
    }
}

#[test]
fn reversibility_is_exact_for_frozen_fields() {
    let system = HamiltonianSystem::new(2, "frozen", |_| 0.0, |_| DVector::zeros(2)).unwrap();
    let cfg = BlendedConfig::optimal_for_degree(2).unwrap();
    let y0 = DVector::from_vec(vec![0.3, -0.9]);
    let defect =
        integrator::reversibility_check(&system, &y0, 25, 0.1, 4, 2, &cfg).unwrap();
    assert_eq!(defect, 0.0);
}

/// Collocation coefficients `a_ij = int_0^{c_i} l_j` for arbitrary nodes,
/// via monomial expansion of the cardinal Lagrange polynomials.
fn collocation_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let s = nodes.len();
    let mut a = DMatrix::zeros(s, s);
    for j in 0..s {
        // expand l_j in monomial coefficients
        let mut coeffs = vec![0.0; s];
        coeffs[0] = 1.0;
        let mut degree = 0;
        let mut denom = 1.0;
        for l in 0..s {
            if l == j {
                continue;
            }
            denom *= nodes[j] - nodes[l];
            // multiply the polynomial by (t - nodes[l])
            degree += 1;
            for d in (1..=degree).rev() {
                coeffs[d] = coeffs[d - 1] - nodes[l] * coeffs[d];
            }
            coeffs[0] *= -nodes[l];
        }
        for i in 0..s {
            let mut integral = 0.0;
            for (d, &coefficient) in coeffs.iter().enumerate() {
                integral += coefficient * nodes[i].powi(d as i32 + 1) / (d as f64 + 1.0);
            }
            a[(i, j)] = integral / denom;
        }
    }
    a
}

/// One step of the collocation method by a full Newton solve on the k-stage
/// system, independent of the partition/blended machinery.
fn collocation_step(
    system: &HamiltonianSystem,
    a: &DMatrix<f64>,
    nodes: &[f64],
    weights: &[f64],
    y0: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let s = nodes.len();
    let two_m = system.dim();
    let dim = s * two_m;
    let identity = DMatrix::<f64>::identity(two_m, two_m);
    let a_kron = a.kronecker(&identity);
    let mut stages = DVector::zeros(dim);
    for i in 0..s {
        stages.rows_mut(i * two_m, two_m).copy_from(y0);
    }
    for _ in 0..50 {
        let mut f_all = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        for i in 0..s {
            let yi = stages.rows(i * two_m, two_m).clone_owned();
            f_all.rows_mut(i * two_m, two_m).copy_from(&system.f(&yi));
            jac.view_mut((i * two_m, i * two_m), (two_m, two_m))
                .copy_from(&system.jacobian_f(&yi));
        }
        let mut residual = &stages - &a_kron * &f_all * h;
        for i in 0..s {
            let mut rows = residual.rows_mut(i * two_m, two_m);
            rows -= y0;
        }
        if residual.norm() <= 1e-14 {
            break;
        }
        let newton = DMatrix::identity(dim, dim) - &a_kron * &jac * h;
        let delta = newton.lu().solve(&residual).expect("collocation Newton");
        stages -= delta;
    }
    let mut y1 = y0.clone();
    for (i, &w) in weights.iter().enumerate() {
        let yi = stages.rows(i * two_m, two_m).clone_owned();
        y1 += system.f(&yi) * (h * w);
    }
    y1
}
