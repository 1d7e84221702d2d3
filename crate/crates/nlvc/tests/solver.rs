use nalgebra::{DMatrix, DVector};
use nlvc::linalg::CsrMatrix;
use nlvc::solver::{
    build_deflation_basis, cg_solve, largest_eigenvalue_estimate, solvability_probe, wdot, wnorm,
    Basis, Constraint, CsrOp, LinearOp, LinearSystem, Preconditioner, SolvabilityReport,
    SolverConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_spd(n: usize, seed: u64) -> (CsrMatrix, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let a = &b * b.transpose() + DMatrix::identity(n, n) * (n as f64);
    let mut triplets = Vec::new();
    for r in 0..n {
        for c in 0..n {
            triplets.push((r as u32, c as u32, a[(r, c)]));
        }
    }
    (CsrMatrix::from_triplets(n, triplets), a)
}

struct DiagOp(Vec<f64>);

impl LinearOp for DiagOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            y[i] = self.0[i] * x[i];
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.0.clone())
    }
}

/// Same operator, but refusing to reveal its diagonal.
struct OpaqueDiagOp(Vec<f64>);

impl LinearOp for OpaqueDiagOp {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            y[i] = self.0[i] * x[i];
        }
    }
}

#[test]
fn weighted_products_are_the_plain_ones_under_unit_weights() {
    let x = [1.0, 2.0, -3.0];
    let y = [0.5, -1.0, 2.0];
    let w = [1.0, 1.0, 1.0];
    assert_eq!(wdot(&x, &y, &w), 0.5 - 2.0 - 6.0);
    assert_eq!(wnorm(&x, &w), 14.0f64.sqrt());
    let w2 = [2.0, 0.0, 1.0];
    assert_eq!(wdot(&x, &x, &w2), 2.0 + 0.0 + 9.0);
}

#[test]
fn cg_matches_a_dense_cholesky_solve() {
    let n = 40;
    let (csr, dense) = random_spd(n, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights = vec![1.0; n];

    let sys = LinearSystem {
        op: &CsrOp(&csr),
        rhs: rhs.clone(),
        weights,
        constraint: Constraint::None,
    };
    let (x, report) = cg_solve(&sys, &SolverConfig::default()).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(report.relative_residual <= 1e-10);

    let chol = dense.cholesky().unwrap();
    let want = chol.solve(&DVector::from_vec(rhs));
    let err: f64 = x
        .iter()
        .zip(want.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-8 * want.norm().max(1.0), "err {err}");
}

#[test]
fn nonuniform_weights_change_the_norm_but_not_the_solution() {
    let n = 24;
    let (csr, dense) = random_spd(n, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..n).map(|i| 0.5 + (i % 5) as f64).collect();

    let sys =
        LinearSystem { op: &CsrOp(&csr), rhs: rhs.clone(), weights, constraint: Constraint::None };
    let (x, report) = cg_solve(&sys, &SolverConfig::default()).unwrap();
    assert!(report.converged);
    let want = dense.cholesky().unwrap().solve(&DVector::from_vec(rhs));
    for i in 0..n {
        assert!((x[i] - want[i]).abs() <= 1e-8 * want.norm().max(1.0), "entry {i}");
    }
}

#[test]
fn jacobi_preconditioning_preserves_the_solution_and_helps_ill_conditioning() {
    let n = 60;
    let diag: Vec<f64> = (0..n).map(|i| 10.0f64.powf(i as f64 * 4.0 / (n - 1) as f64)).collect();
    let op = DiagOp(diag.clone());
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let weights = vec![1.0; n];

    let plain = LinearSystem {
        op: &op,
        rhs: rhs.clone(),
        weights: weights.clone(),
        constraint: Constraint::None,
    };
    let (_, rep_plain) = cg_solve(&plain, &SolverConfig::default()).unwrap();

    let pre = LinearSystem { op: &op, rhs: rhs.clone(), weights, constraint: Constraint::None };
    let cfg = SolverConfig { preconditioner: Preconditioner::Jacobi, ..Default::default() };
    let (x, rep_pre) = cg_solve(&pre, &cfg).unwrap();
    assert!(rep_pre.converged);
    // Jacobi renders a diagonal operator exactly conditioned: one step.
    assert!(rep_pre.iterations < rep_plain.iterations);
    for i in 0..n {
        assert!((x[i] - rhs[i] / diag[i]).abs() <= 1e-9 * (rhs[i] / diag[i]).abs().max(1.0));
    }
}

#[test]
fn jacobi_requires_an_available_positive_diagonal() {
    let rhs = vec![1.0, 2.0];
    let weights = vec![1.0, 1.0];
    let cfg = SolverConfig { preconditioner: Preconditioner::Jacobi, ..Default::default() };

    let opaque = OpaqueDiagOp(vec![1.0, 2.0]);
    let sys = LinearSystem {
        op: &opaque,
        rhs: rhs.clone(),
        weights: weights.clone(),
        constraint: Constraint::None,
    };
    let err = cg_solve(&sys, &cfg).unwrap_err();
    assert!(err.to_string().contains("no diagonal"), "{err}");

    let bad = DiagOp(vec![1.0, 0.0]);
    let sys = LinearSystem { op: &bad, rhs, weights, constraint: Constraint::None };
    let err = cg_solve(&sys, &cfg).unwrap_err();
    assert!(err.to_string().contains("positive diagonal"), "{err}");
}

#[test]
fn zero_mean_constraint_solves_the_singular_path_laplacian() {
    // Graph Laplacian of a path: null space = constants.
    let n = 30;
    let mut triplets = Vec::new();
    for i in 0..n {
        let mut d = 0.0;
        if i > 0 {
            triplets.push((i as u32, (i - 1) as u32, -1.0));
            d += 1.0;
        }
        if i + 1 < n {
            triplets.push((i as u32, (i + 1) as u32, -1.0));
            d += 1.0;
        }
        triplets.push((i as u32, i as u32, d));
    }
    let csr = CsrMatrix::from_triplets(n, triplets);
    let weights = vec![1.0; n];

    // Manufactured zero-mean solution, plus a deliberate constant offset in
    // the right-hand side that the constraint must remove and record.
    let mean: f64 = (0..n).map(|i| (i as f64 * 0.3).sin()).sum::<f64>() / n as f64;
    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() - mean).collect();
    let mut rhs = CsrOp(&csr).0.matvec(&x_true);
    for e in rhs.iter_mut() {
        *e += 0.25;
    }

    let sys = LinearSystem { op: &CsrOp(&csr), rhs, weights: weights.clone(), constraint: Constraint::ZeroMean };
    let (x, report) = cg_solve(&sys, &SolverConfig::default()).unwrap();
    assert!(report.converged);
    // Constant component magnitude: |0.25|·√n.
    assert!((report.deflated_norm - 0.25 * (n as f64).sqrt()).abs() <= 1e-12);
    let mean_x: f64 = x.iter().sum::<f64>() / n as f64;
    assert!(mean_x.abs() <= 1e-10, "mean {mean_x}");
    for i in 0..n {
        assert!((x[i] - x_true[i]).abs() <= 1e-7, "entry {i}: {} vs {}", x[i], x_true[i]);
    }
    assert!(wdot(&x, &vec![1.0; n], &weights).abs() <= 1e-9);
}

#[test]
fn deflation_probes_find_a_null_mode_the_candidates_missed() {
    // diag(0, 1, 2, ...): null space is e0, not among the candidates.
    let n = 20;
    let diag: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let op = DiagOp(diag);
    let weights = vec![1.0; n];

    let basis = build_deflation_basis(&op, &weights, vec![], 2, 5).unwrap();
    assert_eq!(basis.len(), 1, "probe should find exactly the one null mode");
    let v = &basis.vectors[0];
    // The found mode is ±e0.
    assert!((v[0].abs() - 1.0).abs() <= 1e-8);
    assert!(v[1..].iter().all(|c| c.abs() <= 1e-8));

    // A candidate that is not null must be rejected.
    let bogus = vec![vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                          0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
    let basis2 = build_deflation_basis(&op, &weights, bogus, 0, 5).unwrap();
    assert_eq!(basis2.len(), 0);
}

#[test]
fn deflated_solve_matches_the_dense_pseudoinverse() {
    let n = 20;
    let diag: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let op = DiagOp(diag.clone());
    let weights = vec![1.0; n];
    let basis = build_deflation_basis(&op, &weights, vec![], 2, 5).unwrap();

    // rhs with a null component of size 3 on e0.
    let mut rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.9).cos()).collect();
    rhs[0] = 3.0;
    let sys = LinearSystem { op: &op, rhs: rhs.clone(), weights, constraint: Constraint::Deflate(basis) };
    let (x, report) = cg_solve(&sys, &SolverConfig::default()).unwrap();
    assert!(report.converged);
    assert!((report.deflated_norm - 3.0).abs() <= 1e-12);
    assert!(x[0].abs() <= 1e-12, "null component of the solution is pinned to zero");
    for i in 1..n {
        assert!((x[i] - rhs[i] / i as f64).abs() <= 1e-8, "entry {i}");
    }
}

#[test]
fn negative_curvature_is_reported_as_an_error() {
    let op = DiagOp(vec![-1.0, 2.0]);
    let sys = LinearSystem {
        op: &op,
        rhs: vec![1.0, 0.0],
        weights: vec![1.0, 1.0],
        constraint: Constraint::None,
    };
    let err = cg_solve(&sys, &SolverConfig::default()).unwrap_err();
    assert!(err.to_string().contains("negative curvature"), "{err}");
}

#[test]
fn hitting_maxiter_flags_nonconvergence_without_erroring() {
    let n = 50;
    let (csr, _) = random_spd(n, 33);
    let rhs: Vec<f64> = (0..n).map(|i| ((i * i) as f64).sin()).collect();
    let sys = LinearSystem {
        op: &CsrOp(&csr),
        rhs,
        weights: vec![1.0; n],
        constraint: Constraint::None,
    };
    let cfg = SolverConfig { maxiter: Some(1), ..Default::default() };
    let (_, report) = cg_solve(&sys, &cfg).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 1);
    assert!(report.relative_residual > 1e-10);
}

#[test]
fn solver_rejects_malformed_systems() {
    let op = DiagOp(vec![1.0, 2.0]);
    let sys = LinearSystem {
        op: &op,
        rhs: vec![1.0],
        weights: vec![1.0, 1.0],
        constraint: Constraint::None,
    };
    assert!(cg_solve(&sys, &SolverConfig::default()).unwrap_err().to_string().contains("dimension"));

    let sys = LinearSystem {
        op: &op,
        rhs: vec![1.0, f64::NAN],
        weights: vec![1.0, 1.0],
        constraint: Constraint::None,
    };
    assert!(cg_solve(&sys, &SolverConfig::default()).unwrap_err().to_string().contains("non-finite"));

    let sys = LinearSystem {
        op: &op,
        rhs: vec![1.0, 1.0],
        weights: vec![1.0, 1.0],
        constraint: Constraint::None,
    };
    let cfg = SolverConfig { tol: 0.0, ..Default::default() };
    assert!(cg_solve(&sys, &cfg).unwrap_err().to_string().contains("solver.tol"));
}

#[test]
fn orthonormalize_builds_a_weighted_orthonormal_basis_and_drops_dependents() {
    let w = vec![2.0, 1.0, 0.5, 1.5];
    let raw = vec![
        vec![1.0, 1.0, 1.0, 1.0],
        vec![2.0, 2.0, 2.0, 2.0], // dependent: dropped
        vec![1.0, 0.0, -1.0, 0.5],
    ];
    let basis = Basis::orthonormalize(raw, &w);
    assert_eq!(basis.len(), 2);
    for a in 0..basis.len() {
        assert!((wnorm(&basis.vectors[a], &w) - 1.0).abs() <= 1e-12);
        for b in 0..a {
            assert!(wdot(&basis.vectors[a], &basis.vectors[b], &w).abs() <= 1e-12);
        }
    }

    let mut x = vec![3.0, -1.0, 2.0, 0.0];
    let before = basis.component_norm(&x, &w);
    assert!(before > 0.0);
    basis.project_out(&mut x, &w);
    assert!(basis.component_norm(&x, &w) <= 1e-12 * wnorm(&x, &w).max(1.0));

    let mut basis2 = Basis::empty();
    assert!(basis2.push(vec![0.0, 1.0, 0.0, 0.0], &w));
    assert!(!basis2.push(vec![0.0, 2.0, 0.0, 0.0], &w), "dependent vector is refused");
}

#[test]
fn solvability_probe_splits_range_and_null_components() {
    let w = vec![1.0; 4];
    let basis = Basis::orthonormalize(vec![vec![1.0, 0.0, 0.0, 0.0]], &w);
    assert_eq!(
        solvability_probe(&[0.0, 1.0, -2.0, 0.5], &w, &basis, 1e-10),
        SolvabilityReport::ConsistentInRange
    );
    match solvability_probe(&[0.3, 1.0, 0.0, 0.0], &w, &basis, 1e-10) {
        SolvabilityReport::DefectComponent(d) => assert!((d - 0.3).abs() <= 1e-14),
        other => panic!("expected a defect, got {other:?}"),
    }
}

#[test]
fn eigenvalue_estimate_lands_near_the_top_of_the_spectrum() {
    let n = 16;
    let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let op = DiagOp(diag);
    let est = largest_eigenvalue_estimate(&op, &vec![1.0; n], 3);
    assert!(est <= n as f64 * (1.0 + 1e-12), "estimate {est} exceeds the true maximum");
    assert!(est >= 0.5 * n as f64, "estimate {est} too far below the maximum");
}
