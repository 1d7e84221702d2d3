//! Conjugate-gradient solver for the two volume-constrained symmetric
//! positive-semidefinite systems, with null-space deflation, compatibility
//! checks, and range/null splitting of right-hand sides.
//!
//! All inner products are weighted by the quadrature volumes of the
//! unknowns, in which both system operators are self-adjoint regardless of
//! volume uniformity. Solves are deterministic: dot products are sequential
//! and iterates depend only on the inputs.

use crate::error::{NlvcError, Result};
use crate::fields::{ScalarField, TwoPointField};
use crate::linalg::CsrMatrix;
use crate::operators::OperatorContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Abstract symmetric PSD operator action on unknown vectors.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal for Jacobi preconditioning, if available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Assembled sparse operator.
pub struct CsrOp<'a>(pub &'a CsrMatrix);

impl LinearOp for CsrOp<'_> {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.matvec_into(x, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.0.diagonal())
    }
}

pub fn wdot(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i] * y[i] * w[i];
    }
    acc
}

pub fn wnorm(x: &[f64], w: &[f64]) -> f64 {
    wdot(x, x, w).sqrt()
}

/// Volume-orthonormal set of null-space vectors used for deflation.
#[derive(Clone, Debug, Default)]
pub struct Basis {
    pub vectors: Vec<Vec<f64>>,
}

impl Basis {
    pub fn empty() -> Basis {
        Basis { vectors: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Modified Gram–Schmidt in the weighted inner product; vectors whose
    /// residual norm falls below 1e-12 of their original norm are dropped
    /// as dependent.
    pub fn orthonormalize(raw: Vec<Vec<f64>>, w: &[f64]) -> Basis {
        let mut basis = Basis::empty();
        for mut v in raw {
            let original = wnorm(&v, w);
            if original == 0.0 {
                continue;
            }
            basis.project_out(&mut v, w);
            let n = wnorm(&v, w);
            if n > 1e-12 * original {
                let inv = 1.0 / n;
                for e in v.iter_mut() {
                    *e *= inv;
                }
                basis.vectors.push(v);
            }
        }
        basis
    }

    /// Append one vector, orthonormalized against the current set; returns
    /// false if it was dependent.
    pub fn push(&mut self, mut v: Vec<f64>, w: &[f64]) -> bool {
        let original = wnorm(&v, w);
        if original == 0.0 {
            return false;
        }
        self.project_out(&mut v, w);
        let n = wnorm(&v, w);
        if n <= 1e-12 * original {
            return false;
        }
        let inv = 1.0 / n;
        for e in v.iter_mut() {
            *e *= inv;
        }
        self.vectors.push(v);
        true
    }

    pub fn project_out(&self, x: &mut [f64], w: &[f64]) {
        for q in &self.vectors {
            let c = wdot(q, x, w);
            for i in 0..x.len() {
                x[i] -= c * q[i];
            }
        }
    }

    /// Weighted norm of the component of x inside the basis span.
    pub fn component_norm(&self, x: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for q in &self.vectors {
            let c = wdot(q, x, w);
            acc += c * c;
        }
        acc.sqrt()
    }
}

/// Null-space handling for a solve.
#[derive(Clone, Debug)]
pub enum Constraint {
    /// Operator is definite on the unknowns (e.g. after Dirichlet folding).
    None,
    /// Deflate the constant vector (zero weighted-mean gauge).
    ZeroMean,
    /// Deflate an explicit orthonormal basis.
    Deflate(Basis),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

impl Preconditioner {
    pub fn parse(s: &str) -> Result<Preconditioner> {
        match s {
            "none" => Ok(Preconditioner::None),
            "jacobi" => Ok(Preconditioner::Jacobi),
            other => Err(NlvcError::InvalidInput(format!(
                "solver.preconditioner: unknown value {other:?} (expected none or jacobi)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxiter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig { tol: 1e-10, maxiter: None, preconditioner: Preconditioner::None }
    }
}

/// One constrained symmetric PSD system.
pub struct LinearSystem<'a> {
    pub op: &'a dyn LinearOp,
    pub rhs: Vec<f64>,
    /// Quadrature weight of each unknown.
    pub weights: Vec<f64>,
    pub constraint: Constraint,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Weighted norm of the right-hand-side component removed by deflation.
    pub deflated_norm: f64,
    /// Compatibility defect of the flux data, when the treatment has one.
    pub compat_defect: Option<f64>,
}

fn default_maxiter(n: usize) -> usize {
    50 * (n as f64).sqrt().ceil() as usize + 200
}

/// Conjugate gradients in the weighted inner product, started from zero.
/// The right-hand side (and every residual) is projected off the constraint
/// basis, so iterates stay in the operator's range; the returned field is
/// orthogonal to the deflated basis. Exceeding maxiter returns the best
/// iterate flagged `converged = false`; detected negative curvature is an
/// error (the operator was not PSD on the deflated space).
pub fn cg_solve(sys: &LinearSystem, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let n = sys.op.dim();
    if sys.rhs.len() != n || sys.weights.len() != n {
        return Err(NlvcError::InvalidInput(format!(
            "system dimension mismatch: op {n}, rhs {}, weights {}",
            sys.rhs.len(),
            sys.weights.len()
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(NlvcError::InvalidInput(format!(
            "solver.tol: must be positive, got {}",
            cfg.tol
        )));
    }
    if sys.rhs.iter().any(|v| !v.is_finite()) {
        return Err(NlvcError::InvalidInput("non-finite right-hand side".into()));
    }
    let w = &sys.weights;
    let maxiter = cfg.maxiter.unwrap_or_else(|| default_maxiter(n));

    let zero_mean_holder;
    let basis: Option<&Basis> = match &sys.constraint {
        Constraint::None => None,
        Constraint::ZeroMean => {
            zero_mean_holder = Basis::orthonormalize(vec![vec![1.0; n]], w);
            Some(&zero_mean_holder)
        }
        Constraint::Deflate(b) => Some(b),
    };

    let mut b = sys.rhs.clone();
    let mut deflated_norm = 0.0;
    if let Some(basis) = basis {
        deflated_norm = basis.component_norm(&b, w);
        basis.project_out(&mut b, w);
    }

    let bnorm = wnorm(&b, w);
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        deflated_norm,
        compat_defect: None,
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], report));
    }

    let inv_diag: Option<Vec<f64>> = match cfg.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => {
            let diag = sys.op.diagonal().ok_or_else(|| {
                NlvcError::InvalidInput(
                    "jacobi preconditioner requested but the operator provides no diagonal".into(),
                )
            })?;
            if diag.iter().any(|d| !(*d > 0.0)) {
                return Err(NlvcError::Numerical(
                    "jacobi preconditioner requires a strictly positive diagonal".into(),
                ));
            }
            Some(diag.iter().map(|d| 1.0 / d).collect())
        }
    };
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        z.clear();
        match &inv_diag {
            Some(m) => z.extend(r.iter().zip(m.iter()).map(|(a, b)| a * b)),
            None => z.extend_from_slice(r),
        }
        if let Some(basis) = basis {
            basis.project_out(z, w);
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b;
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = wdot(&r, &z, w);
    let mut ap = vec![0.0; n];

    for k in 1..=maxiter {
        sys.op.apply(&p, &mut ap);
        let pap = wdot(&p, &ap, w);
        if pap <= 0.0 {
            let scale = wnorm(&p, w) * wnorm(&ap, w);
            if pap < -1e-10 * scale {
                return Err(NlvcError::Numerical(format!(
                    "negative curvature at iteration {k} (p·Ap = {pap:.3e}): \
                     operator is not positive semidefinite on the deflated space"
                )));
            }
            return Err(NlvcError::Numerical(format!(
                "curvature vanished at iteration {k}: the system is singular beyond \
                 the deflated basis"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(basis) = basis {
            basis.project_out(&mut r, w);
        }
        let rel = wnorm(&r, w) / bnorm;
        report.iterations = k;
        report.relative_residual = rel;
        if rel <= cfg.tol {
            return Ok((x, report));
        }
        precondition(&r, &mut z);
        let rz_new = wdot(&r, &z, w);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    log::debug!(
        "cg reached maxiter {maxiter} at relative residual {:.3e}",
        report.relative_residual
    );
    report.converged = false;
    Ok((x, report))
}

/// Flux compatibility defect |Σ_Ω (D₁u)_i V_i − Σ_Γ g_i V_i| of a pair
/// field u against layer data g; zero-mean-solvable systems require it
/// below tolerance.
pub fn check_compatibility(
    ctx: &OperatorContext,
    u: &TwoPointField,
    g: &ScalarField,
) -> Result<f64> {
    let div = ctx.apply_div(1, u)?;
    let f = div.as_scalar()?;
    g.validate(ctx.nodes.len())?;
    Ok((ctx.integral_omega(f) - ctx.integral_gamma(g)).abs())
}

/// Range/null splitting of a right-hand side against a deflation basis.
#[derive(Clone, Debug, PartialEq)]
pub enum SolvabilityReport {
    ConsistentInRange,
    /// Weighted norm of the null-space component.
    DefectComponent(f64),
}

/// Splits rhs into range + null parts using the basis; the right-hand side
/// is consistent when its null component is at most `rel_tol` of its norm.
pub fn solvability_probe(
    rhs: &[f64],
    weights: &[f64],
    basis: &Basis,
    rel_tol: f64,
) -> SolvabilityReport {
    let total = wnorm(rhs, weights);
    let null = basis.component_norm(rhs, weights);
    if null <= rel_tol * total.max(f64::MIN_POSITIVE) {
        SolvabilityReport::ConsistentInRange
    } else {
        SolvabilityReport::DefectComponent(null)
    }
}

/// Estimate the largest eigenvalue of a PSD operator by a few fixed-seed
/// power iterations; used to scale null-mode acceptance thresholds.
pub fn largest_eigenvalue_estimate(op: &dyn LinearOp, weights: &[f64], seed: u64) -> f64 {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut av = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..10 {
        let nv = wnorm(&v, weights);
        if nv == 0.0 {
            return 0.0;
        }
        for e in v.iter_mut() {
            *e /= nv;
        }
        op.apply(&v, &mut av);
        lambda = wnorm(&av, weights);
        std::mem::swap(&mut v, &mut av);
    }
    lambda
}

/// Build a deflation basis for a PSD operator: every candidate is verified
/// to be a numerical null vector (relative action ≤ 1e-8 of the operator
/// scale) before acceptance, then `probes` random inverse-iteration probes
/// look for additional null modes the candidates missed. Deterministic for
/// a fixed seed.
pub fn build_deflation_basis(
    op: &dyn LinearOp,
    weights: &[f64],
    candidates: Vec<Vec<f64>>,
    probes: usize,
    seed: u64,
) -> Result<Basis> {
    let n = op.dim();
    let scale = largest_eigenvalue_estimate(op, weights, seed ^ 0x9e37_79b9);
    if scale == 0.0 {
        return Err(NlvcError::Numerical(
            "operator scale estimate is zero; cannot calibrate null-mode detection".into(),
        ));
    }
    let mut basis = Basis::empty();
    let mut av = vec![0.0; n];
    let is_null = |v: &[f64], av: &mut Vec<f64>| {
        op.apply(v, av);
        wnorm(av, weights) <= 1e-8 * scale * wnorm(v, weights)
    };
    for cand in candidates {
        if cand.len() != n {
            return Err(NlvcError::InvalidInput(format!(
                "null-space candidate has {} entries for {} unknowns",
                cand.len(),
                n
            )));
        }
        if is_null(&cand, &mut av) {
            basis.push(cand, weights);
        } else {
            log::warn!("rejected a null-space candidate with nonzero operator action");
        }
    }
    // Shifted inverse iteration: solving (A + σ)y = q amplifies null
    // components by 1/σ relative to range components; two rounds square the
    // separation, so a surviving direction with negligible action is a null
    // mode the candidates missed.
    let sigma = 1e-9 * scale;
    let shifted = ShiftedOp { inner: op, sigma };
    let cfg = SolverConfig { tol: 1e-10, maxiter: Some(400), preconditioner: Preconditioner::None };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        basis.project_out(&mut q, weights);
        for _round in 0..2 {
            let qn = wnorm(&q, weights);
            if qn == 0.0 {
                break;
            }
            for e in q.iter_mut() {
                *e /= qn;
            }
            let sys = LinearSystem {
                op: &shifted,
                rhs: q.clone(),
                weights: weights.to_vec(),
                constraint: Constraint::None,
            };
            let (y, _) = cg_solve(&sys, &cfg)?;
            q = y;
            basis.project_out(&mut q, weights);
        }
        let qn = wnorm(&q, weights);
        if qn == 0.0 {
            continue;
        }
        for e in q.iter_mut() {
            *e /= qn;
        }
        if is_null(&q, &mut av) && basis.push(q, weights) {
            log::warn!("deflation probe detected an extra null mode beyond the candidates");
        }
    }
    Ok(basis)
}

struct ShiftedOp<'a> {
    inner: &'a dyn LinearOp,
    sigma: f64,
}

impl LinearOp for ShiftedOp<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        for i in 0..x.len() {
            y[i] += self.sigma * x[i];
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        self.inner.diagonal().map(|d| d.iter().map(|v| v + self.sigma).collect())
    }
}
