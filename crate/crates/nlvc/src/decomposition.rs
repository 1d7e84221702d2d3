//! Splitting of a two-point vector field into a gradient part, a curl part,
//! and a residual: u = Gφ + C*w + h, where φ solves the constrained scalar
//! system (−Lφ)|rows = (D₁u)|rows and w solves the curl-curl system
//! (CC*w)|rows = (Cu)|rows. The two potential pieces are orthogonal in the
//! directed-pair inner product by construction (D C* = 0 and C G = 0), and
//! the residual h carries whatever part of u the two ranges miss.
//!
//! The boundary treatment selects the constraint on the scalar potential and
//! the row set of both solves:
//! * `DirichletZero` / `DirichletLift` pin potential values on the layer and
//!   solve interior-row systems (the folded matrices are positive definite);
//! * `Neumann` / `FluxMatching` solve over every node with a zero-mean gauge
//!   for φ, prescribing the flux N(Gφ) on the layer rows (zero flux, or the
//!   flux of u itself).
//! The stream solve always runs over every node with the affine null space
//! (constants and the homothety) deflated, except under `DirichletLift`,
//! which pins the prescribed layer values instead.

use crate::error::{NlvcError, Result};
use crate::fields::{ScalarField, TwoPointField, VectorField};
use crate::operators::OperatorContext;
use crate::solver::{
    cg_solve, build_deflation_basis, solvability_probe, Constraint, CsrOp, LinearOp,
    LinearSystem, SolvabilityReport, SolveReport, SolverConfig,
};

/// Relative size below which the null component of a stream right-hand side
/// is considered numerical noise rather than an inconsistency.
const RANGE_TOL: f64 = 1e-10;

/// Constraint applied to the potential solves.
#[derive(Clone, Debug)]
pub enum BoundaryTreatment {
    /// Zero potential values on the layer; interior-row solves.
    DirichletZero,
    /// Prescribed potential values on the layer; interior-row solves.
    DirichletLift { phi_gamma: ScalarField, w_gamma: VectorField },
    /// Zero flux through the layer; whole-domain zero-mean solve.
    Neumann,
    /// Flux of the input field through the layer: the scalar potential
    /// reproduces N(u), so the layer flux of Gφ matches that of u.
    FluxMatching,
}

impl BoundaryTreatment {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTreatment::DirichletZero => "dirichlet_zero",
            BoundaryTreatment::DirichletLift { .. } => "dirichlet_lift",
            BoundaryTreatment::Neumann => "neumann",
            BoundaryTreatment::FluxMatching => "flux_matching",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionConfig {
    pub bc: BoundaryTreatment,
    pub solver: SolverConfig,
    /// Relative tolerance on the flux compatibility defect of zero-mean
    /// potential solves.
    pub compat_tol: f64,
    /// Proceed on incompatible or out-of-range data, solving the projected
    /// problem instead of failing.
    pub allow_incompatible: bool,
    /// Random inverse-iteration probes run after the analytic null-space
    /// candidates when building the stream deflation basis.
    pub deflation_probes: usize,
    pub seed: u64,
}

impl Default for DecompositionConfig {
    fn default() -> DecompositionConfig {
        DecompositionConfig {
            bc: BoundaryTreatment::DirichletZero,
            solver: SolverConfig::default(),
            compat_tol: 1e-8,
            allow_incompatible: false,
            deflation_probes: 1,
            seed: 7,
        }
    }
}

/// −L over every node, acting on scalar unknowns; self-adjoint PSD in the
/// volume inner product with null space = constants.
pub struct FullNegLaplacianOp<'a> {
    pub ctx: &'a OperatorContext<'a>,
}

impl LinearOp for FullNegLaplacianOp<'_> {
    fn dim(&self) -> usize {
        self.ctx.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let f = ScalarField { values: x.to_vec() };
        let lf = self
            .ctx
            .apply_laplacian_all(&f)
            .expect("operator adapter dimensions are consistent");
        for (yi, v) in y.iter_mut().zip(lf.values) {
            *yi = -v;
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let ctx = self.ctx;
        let mut d = vec![0.0; ctx.nodes.len()];
        for i in 0..ctx.nodes.len() {
            for t in ctx.pairs.range(i) {
                let j = ctx.pairs.neighbors[t] as usize;
                let sep = ctx.nodes.positions[j] - ctx.nodes.positions[i];
                d[i] += 2.0 * ctx.kernel.gamma_of_separation(sep) * ctx.nodes.volumes[j];
            }
        }
        Some(d)
    }
}

/// CC* over every node, acting on flattened [w1, w2, w3] unknowns;
/// self-adjoint PSD in the volume inner product with the affine null space.
pub struct FullCurlCurlOp<'a> {
    pub ctx: &'a OperatorContext<'a>,
}

impl LinearOp for FullCurlCurlOp<'_> {
    fn dim(&self) -> usize {
        3 * self.ctx.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = unpack_vector(x);
        let cw = self
            .ctx
            .apply_curlcurl_all(&w)
            .expect("operator adapter dimensions are consistent");
        pack_vector(&cw, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let ctx = self.ctx;
        let mut d = vec![0.0; 3 * ctx.nodes.len()];
        for i in 0..ctx.nodes.len() {
            for t in ctx.pairs.range(i) {
                let j = ctx.pairs.neighbors[t] as usize;
                let a = ctx.alpha(i, j);
                let g = a.dot(a);
                let s = 2.0 * ctx.nodes.volumes[j];
                d[3 * i] += s * (g - a.x1 * a.x1);
                d[3 * i + 1] += s * (g - a.x2 * a.x2);
                d[3 * i + 2] += s * (g - a.x3 * a.x3);
            }
        }
        Some(d)
    }
}

fn unpack_vector(x: &[f64]) -> VectorField {
    let values = x
        .chunks_exact(3)
        .map(|c| crate::linalg::Point3::new(c[0], c[1], c[2]))
        .collect();
    VectorField { values }
}

fn pack_vector(f: &VectorField, out: &mut [f64]) {
    for (i, v) in f.values.iter().enumerate() {
        out[3 * i] = v.x1;
        out[3 * i + 1] = v.x2;
        out[3 * i + 2] = v.x3;
    }
}

/// Volume weight of each scalar unknown in the flattened vector layout.
fn weights3(ctx: &OperatorContext) -> Vec<f64> {
    let mut w = Vec::with_capacity(3 * ctx.nodes.len());
    for &v in &ctx.nodes.volumes {
        w.extend([v, v, v]);
    }
    w
}

/// Analytic null-space candidates of CC*: the three constant fields and the
/// homothety w(x) = x (its pair differences are parallel to the kernel).
fn stream_null_candidates(ctx: &OperatorContext) -> Vec<Vec<f64>> {
    let n = ctx.nodes.len();
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let mut v = vec![0.0; 3 * n];
        for i in 0..n {
            v[3 * i + k] = 1.0;
        }
        out.push(v);
    }
    let mut hom = vec![0.0; 3 * n];
    for (i, p) in ctx.nodes.positions.iter().enumerate() {
        hom[3 * i] = p.x1;
        hom[3 * i + 1] = p.x2;
        hom[3 * i + 2] = p.x3;
    }
    out.push(hom);
    out
}

fn require_converged(which: &str, report: &SolveReport) -> Result<()> {
    if report.converged {
        Ok(())
    } else {
        Err(NlvcError::Numerical(format!(
            "{which} solve stalled at relative residual {:.3e} after {} iterations; \
             raise solver.maxiter or loosen solver.tol",
            report.relative_residual, report.iterations
        )))
    }
}

/// Solve the scalar-potential system for the boundary treatment in `cfg`:
/// interior rows (−Lφ)_i = (D₁u)_i, with either pinned layer values or a
/// zero-mean whole-domain system whose layer rows prescribe the flux.
pub fn solve_potential(
    ctx: &OperatorContext,
    u: &TwoPointField,
    cfg: &DecompositionConfig,
) -> Result<(ScalarField, SolveReport)> {
    let div = ctx.apply_div(1, u)?;
    let f = div.as_scalar()?;
    match &cfg.bc {
        BoundaryTreatment::DirichletZero | BoundaryTreatment::DirichletLift { .. } => {
            let lift = match &cfg.bc {
                BoundaryTreatment::DirichletLift { phi_gamma, .. } => phi_gamma.clone(),
                _ => ScalarField::zeros(ctx.nodes.len()),
            };
            let asm = ctx.assemble_laplacian()?;
            let fold = asm.fold_rhs(ctx, &lift)?;
            let mut rhs = asm.restrict(f);
            for (r, c) in rhs.iter_mut().zip(fold) {
                *r += c;
            }
            let weights: Vec<f64> =
                asm.omega.iter().map(|&gi| ctx.nodes.volumes[gi as usize]).collect();
            let op = CsrOp(&asm.matrix);
            let sys = LinearSystem { op: &op, rhs, weights, constraint: Constraint::None };
            let (x, report) = cg_solve(&sys, &cfg.solver)?;
            require_converged("potential", &report)?;
            Ok((asm.expand(&x, &lift), report))
        }
        BoundaryTreatment::Neumann | BoundaryTreatment::FluxMatching => {
            let g = match &cfg.bc {
                BoundaryTreatment::FluxMatching => ctx.interaction_n(u)?,
                _ => ScalarField::zeros(ctx.nodes.len()),
            };
            let defect = (ctx.integral_omega(f) - ctx.integral_gamma(&g)).abs();
            let scale = ctx.norm_omega(f).max(ctx.dot_gamma(&g, &g).sqrt()).max(1.0);
            if defect > cfg.compat_tol * scale {
                if cfg.allow_incompatible {
                    log::warn!(
                        "flux data incompatible (defect {defect:.3e}); solving the \
                         projected problem"
                    );
                } else {
                    return Err(NlvcError::Incompatible(format!(
                        "flux data incompatible with the interior source: defect \
                         {defect:.3e} exceeds {:.3e}; set allow_incompatible to \
                         solve the projected problem",
                        cfg.compat_tol * scale
                    )));
                }
            }
            // Layer rows of −L realize the flux of Gφ, with the sign of −N:
            // (−L φ)_i = −N(Gφ)_i there, so prescribing N(Gφ) = g means
            // right-hand side −g on the layer.
            let rhs: Vec<f64> =
                f.values.iter().zip(&g.values).map(|(&fi, &gi)| fi - gi).collect();
            let op = FullNegLaplacianOp { ctx };
            let sys = LinearSystem {
                op: &op,
                rhs,
                weights: ctx.nodes.volumes.clone(),
                constraint: Constraint::ZeroMean,
            };
            let (x, mut report) = cg_solve(&sys, &cfg.solver)?;
            require_converged("potential", &report)?;
            report.compat_defect = Some(defect);
            Ok((ScalarField { values: x }, report))
        }
    }
}

/// Solve the stream system (CC*w)|rows = (Cu)|rows: whole-domain with the
/// affine null space deflated, or interior rows with pinned layer values
/// under `DirichletLift`. Fails when the right-hand side has a null-space
/// component beyond tolerance (the curl data is inconsistent), unless
/// overridden.
pub fn solve_stream(
    ctx: &OperatorContext,
    u: &TwoPointField,
    cfg: &DecompositionConfig,
) -> Result<(VectorField, SolveReport)> {
    let cu = ctx.apply_curl_all(u)?;
    if let BoundaryTreatment::DirichletLift { w_gamma, .. } = &cfg.bc {
        let asm = ctx.assemble_curlcurl()?;
        let fold = asm.fold_rhs(ctx, w_gamma)?;
        let mut rhs = asm.restrict(&cu);
        for (r, c) in rhs.iter_mut().zip(fold) {
            *r += c;
        }
        let mut weights = Vec::with_capacity(rhs.len());
        for &gi in &asm.omega {
            let v = ctx.nodes.volumes[gi as usize];
            weights.extend([v, v, v]);
        }
        let op = CsrOp(&asm.matrix);
        let sys = LinearSystem { op: &op, rhs, weights, constraint: Constraint::None };
        let (x, report) = cg_solve(&sys, &cfg.solver)?;
        require_converged("stream", &report)?;
        return Ok((asm.expand(&x, w_gamma), report));
    }

    let op = FullCurlCurlOp { ctx };
    let weights = weights3(ctx);
    let basis = build_deflation_basis(
        &op,
        &weights,
        stream_null_candidates(ctx),
        cfg.deflation_probes,
        cfg.seed,
    )?;
    let mut rhs = vec![0.0; 3 * ctx.nodes.len()];
    pack_vector(&cu, &mut rhs);
    if let SolvabilityReport::DefectComponent(null_norm) =
        solvability_probe(&rhs, &weights, &basis, RANGE_TOL)
    {
        if cfg.allow_incompatible {
            log::warn!(
                "curl data has a null-space component of weighted norm {null_norm:.3e}; \
                 solving the projected problem"
            );
        } else {
            return Err(NlvcError::Incompatible(format!(
                "curl data lies outside the stream operator's range: null-space \
                 component of weighted norm {null_norm:.3e}; set allow_incompatible \
                 to solve the projected problem"
            )));
        }
    }
    let sys = LinearSystem { op: &op, rhs, weights, constraint: Constraint::Deflate(basis) };
    let (x, report) = cg_solve(&sys, &cfg.solver)?;
    require_converged("stream", &report)?;
    Ok((unpack_vector(&x), report))
}

/// The three pieces of u = Gφ + C*w + h together with their potentials.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub phi: ScalarField,
    pub w: VectorField,
    /// Gradient part Gφ.
    pub g_phi: TwoPointField,
    /// Curl part C*w.
    pub c_w: TwoPointField,
    /// Residual u − Gφ − C*w.
    pub h: TwoPointField,
    pub diagnostics: DecompositionDiagnostics,
}

/// Residual norms and pairings measured on the computed split. All pair
/// quantities use the directed-pair inner product; point quantities use the
/// volume inner product over their row set.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DecompositionDiagnostics {
    /// ‖D₁h‖ over interior rows.
    pub div_h: f64,
    /// ‖Ch‖ over interior rows.
    pub curl_h: f64,
    pub pairing_gphi_cw: f64,
    pub pairing_gphi_h: f64,
    pub pairing_cw_h: f64,
    /// ‖(Gφ + C*w + h) − u‖ over directed pairs.
    pub reconstruction_defect: f64,
    /// ‖N(Gφ) − N(u)‖ over layer rows.
    pub flux_residual_n: f64,
    /// ‖T(C*w) − T(u)‖ over layer rows.
    pub flux_residual_t: f64,
    pub potential_report: SolveReport,
    pub stream_report: SolveReport,
}

/// Run both solves and assemble the split with its diagnostics.
pub fn decompose(
    ctx: &OperatorContext,
    u: &TwoPointField,
    cfg: &DecompositionConfig,
) -> Result<DecompositionResult> {
    u.validate(ctx.pairs)?;
    if u.rank() != crate::fields::Rank::Vector {
        return Err(NlvcError::InvalidInput(
            "decomposition expects a vector two-point field".into(),
        ));
    }
    let (phi, potential_report) = solve_potential(ctx, u, cfg)?;
    let (w, stream_report) = solve_stream(ctx, u, cfg)?;
    let g_phi = ctx.apply_grad(&phi)?;
    let c_w = ctx.apply_curl_adjoint(&w)?;
    let h = u.sub(&g_phi)?.sub(&c_w)?;

    let div_h = ctx.norm_omega(ctx.apply_div(1, &h)?.as_scalar()?);
    let curl_h = ctx.norm_omega_vec(&ctx.apply_curl(&h)?);
    let pairing_gphi_cw = ctx.dot_pairs(&g_phi, &c_w)?;
    let pairing_gphi_h = ctx.dot_pairs(&g_phi, &h)?;
    let pairing_cw_h = ctx.dot_pairs(&c_w, &h)?;
    let rebuilt = g_phi.add(&c_w)?.add(&h)?;
    let reconstruction_defect = ctx.norm_pairs(&rebuilt.sub(u)?)?;

    let n_u = ctx.interaction_n(u)?;
    let n_g = ctx.interaction_n(&g_phi)?;
    let dn = ScalarField {
        values: n_g.values.iter().zip(&n_u.values).map(|(a, b)| a - b).collect(),
    };
    let flux_residual_n = ctx.dot_gamma(&dn, &dn).sqrt();
    let t_u = ctx.interaction_t(u)?;
    let t_c = ctx.interaction_t(&c_w)?;
    let dt = VectorField {
        values: t_c.values.iter().zip(&t_u.values).map(|(&a, &b)| a - b).collect(),
    };
    let flux_residual_t = ctx.dot_gamma_vec(&dt, &dt).sqrt();

    Ok(DecompositionResult {
        phi,
        w,
        g_phi,
        c_w,
        h,
        diagnostics: DecompositionDiagnostics {
            div_h,
            curl_h,
            pairing_gphi_cw,
            pairing_gphi_h,
            pairing_cw_h,
            reconstruction_defect,
            flux_residual_n,
            flux_residual_t,
            potential_report,
            stream_report,
        },
    })
}

/// Mutual pairings of the computed split in the directed-pair inner product:
/// (⟨Gφ, C*w + h⟩, ⟨C*w, Gφ + h⟩, ⟨Gφ, C*w⟩); all three vanish for an
/// orthogonal three-way split.
pub fn verify_orthogonality(
    ctx: &OperatorContext,
    result: &DecompositionResult,
) -> Result<(f64, f64, f64)> {
    let a = ctx.dot_pairs(&result.g_phi, &result.c_w.add(&result.h)?)?;
    let b = ctx.dot_pairs(&result.c_w, &result.g_phi.add(&result.h)?)?;
    let c = ctx.dot_pairs(&result.g_phi, &result.c_w)?;
    Ok((a, b, c))
}
