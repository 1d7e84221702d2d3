//! Command implementations. Each command resolves its config, runs the
//! library pipeline, writes its CSV artifacts into the output directory, and
//! returns the checks/metrics for the summary.

use std::io::Write as _;
use std::path::Path;

use nlvc::analytic;
use nlvc::decomposition::{decompose, BoundaryTreatment, DecompositionConfig};
use nlvc::fields::{
    example32_fields, lift_average, lift_difference, mask_omega_pairs, read_two_point,
    translation_residual_field, write_one_point, write_two_point, OnePointField, TwoPointField,
    VectorField,
};
use nlvc::geometry::{
    build_grid, classify_interaction_domain, neighbor_pairs, write_nodes, BoxBounds, GammaSplit,
    GridMode, NodeSet, PairStructure,
};
use nlvc::kernels::{KernelFamily, KernelSpec};
use nlvc::linalg::Point3;
use nlvc::operators::OperatorContext;
use nlvc::solver::{Preconditioner, SolverConfig};
use nlvc::verify::identity_suite;
use nlvc::{convergence, NlvcError, Result};
use serde_json::Value;

use crate::config::{RawConfig, Resolver};
use crate::report::{num, Check, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Identities,
    Example32,
    Decompose,
    Converge,
    Moments,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Identities => "identities",
            CommandKind::Example32 => "example32",
            CommandKind::Decompose => "decompose",
            CommandKind::Converge => "converge",
            CommandKind::Moments => "moments",
        }
    }
}

pub fn run(kind: CommandKind, raw: &RawConfig, out_dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let mut r = Resolver::new(raw);
    let mut outcome = match kind {
        CommandKind::Identities => run_identities(&mut r, out_dir),
        CommandKind::Example32 => run_example32(&mut r, out_dir),
        CommandKind::Decompose => run_decompose(&mut r, out_dir),
        CommandKind::Converge => run_converge(&mut r, out_dir),
        CommandKind::Moments => run_moments(&mut r, out_dir),
    }?;
    outcome.resolved = r.into_echo();
    outcome.artifacts.push("summary.json".to_string());
    Ok(outcome)
}

fn parse_mode(s: &str) -> Result<GridMode> {
    match s {
        "full3d" => Ok(GridMode::Full3D),
        "plane" => Ok(GridMode::PlaneEmbedded),
        other => Err(NlvcError::InvalidInput(format!(
            "geometry.mode: expected full3d or plane, got {other:?}"
        ))),
    }
}

fn parse_solver(r: &mut Resolver) -> Result<SolverConfig> {
    Ok(SolverConfig {
        tol: r.get_f64("solver", "tol", 1e-10)?,
        maxiter: r.get_opt_usize("solver", "maxiter")?,
        preconditioner: Preconditioner::parse(&r.get_str("solver", "preconditioner", "none"))?,
    })
}

struct Domain {
    nodes: NodeSet,
    pairs: PairStructure,
    spec: KernelSpec,
}

/// Resolve the [geometry]/[kernel] blocks into a classified node set with
/// its horizon pair structure. The grid covers the box enlarged by `margin`
/// (default: one horizon) on every side; exterior nodes within kernel reach
/// become the interaction layer, unreachable ones are dropped.
fn build_domain(r: &mut Resolver, default_family: &str) -> Result<Domain> {
    let delta = r.require_f64("kernel", "delta")?;
    let family = KernelFamily::parse(&r.get_str("kernel", "family", default_family))?;
    let beta = r.get_opt_f64("kernel", "beta")?;
    let spec = match (family, beta) {
        (KernelFamily::FractionalPrototype, Some(b)) => KernelSpec::fractional(delta, b),
        (KernelFamily::FractionalPrototype, None) => {
            return Err(NlvcError::InvalidInput(
                "config: kernel.beta is required for the fractional_prototype family".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(NlvcError::InvalidInput(format!(
                "config: kernel.beta applies only to fractional_prototype, not {}",
                family.as_str()
            )))
        }
        (_, None) => KernelSpec::new(family, delta),
    };

    let lo = r.get_triple("geometry", "lo", [0.0, 0.0, 0.0])?;
    let hi = r.get_triple("geometry", "hi", [1.0, 1.0, 1.0])?;
    let h = r.require_f64("geometry", "h")?;
    let mode = parse_mode(&r.get_str("geometry", "mode", "full3d"))?;
    let margin = r.get_f64("geometry", "margin", delta)?;
    let bounds = BoxBounds::new(Point3::new(lo[0], lo[1], lo[2]), Point3::new(hi[0], hi[1], hi[2]));
    let mut nodes = build_grid(bounds, h, mode, margin)?;
    if margin > 0.0 {
        nodes = classify_interaction_domain(&nodes, delta, GammaSplit::AllDirichlet)?;
    }
    spec.validate(nodes.mode)?;
    let pairs = neighbor_pairs(&nodes, delta)?;
    Ok(Domain { nodes, pairs, spec })
}

fn count_metrics(outcome: &mut Outcome, nodes: &NodeSet, pairs: &PairStructure) {
    outcome.metrics.insert("nodes".into(), Value::from(nodes.len() as u64));
    outcome.metrics.insert("omega_nodes".into(), Value::from(nodes.omega_count() as u64));
    outcome.metrics.insert("layer_nodes".into(), Value::from(nodes.gamma_count() as u64));
    outcome.metrics.insert("directed_pairs".into(), Value::from(pairs.n_pairs() as u64));
}

fn run_identities(r: &mut Resolver, _out_dir: &Path) -> Result<Outcome> {
    let domain = build_domain(r, "peridynamic_unit")?;
    let seed = r.get_u64("identities", "seed", 2024)?;
    let ctx = OperatorContext::new(&domain.nodes, &domain.pairs, domain.spec)?;
    let checks = identity_suite(&ctx, seed)?;
    let mut outcome = Outcome::default();
    count_metrics(&mut outcome, &domain.nodes, &domain.pairs);
    outcome.checks = checks
        .into_iter()
        .map(|c| Check { name: c.name.to_string(), value: c.value, tol: c.tol, pass: c.pass })
        .collect();
    Ok(outcome)
}

/// The planar worked-example pipeline over a refinement ladder at fixed
/// horizon/spacing ratio m: build the closed-form pair field, verify it
/// coincides with Gφ + C*w entrywise, zero-extend it off the interior pair
/// set, decompose with the analytic layer traces, and report interior
/// relative errors of the recovered components, which must fall monotonically
/// under refinement.
fn run_example32(r: &mut Resolver, out_dir: &Path) -> Result<Outcome> {
    let hs = r.get_f64_list("example32", "h", &[0.125, 0.0625, 0.03125])?;
    let m = r.get_usize("example32", "m", 4)?;
    if m == 0 {
        return Err(NlvcError::InvalidInput("config: example32.m must be positive".into()));
    }
    let solver = parse_solver(r)?;
    let seed = r.get_u64("decompose", "seed", 7)?;
    let probes = r.get_usize("decompose", "deflation_probes", 1)?;

    let mut outcome = Outcome::default();
    let mut err_g = Vec::new();
    let mut err_c = Vec::new();
    let mut h_rel = Vec::new();
    let mut table = Vec::new();
    for (level, &h) in hs.iter().enumerate() {
        let delta = m as f64 * h;
        let nodes = build_grid(BoxBounds::unit_square(), h, GridMode::PlaneEmbedded, delta)?;
        let nodes = classify_interaction_domain(&nodes, delta, GammaSplit::AllDirichlet)?;
        let pairs = neighbor_pairs(&nodes, delta)?;
        let spec = KernelSpec::new(KernelFamily::PlanarScaled, delta);
        let ctx = OperatorContext::new(&nodes, &pairs, spec.clone())?;
        let (phi_star, w_star, u_full) = example32_fields(&nodes, &pairs, &spec)?;

        let g_star = ctx.apply_grad(&phi_star)?;
        let c_star = ctx.apply_curl_adjoint(&w_star)?;
        let closed_form =
            u_full.sub(&g_star.add(&c_star)?)?.inf_norm() / u_full.inf_norm().max(1.0);
        outcome.checks.push(Check::bound(format!("closed_form_identity_l{level}"), closed_form, 1e-13));

        let u = mask_omega_pairs(&u_full, &nodes, &pairs);
        let cfg = DecompositionConfig {
            bc: BoundaryTreatment::DirichletLift {
                phi_gamma: phi_star.clone(),
                w_gamma: w_star.clone(),
            },
            solver: solver.clone(),
            compat_tol: 1e-8,
            allow_incompatible: false,
            deflation_probes: probes,
            seed,
        };
        let res = decompose(&ctx, &u, &cfg)?;

        let interior = |f: &TwoPointField| mask_omega_pairs(f, &nodes, &pairs);
        let eg = ctx.norm_pairs(&interior(&res.g_phi.sub(&g_star)?))?
            / ctx.norm_pairs(&interior(&g_star))?;
        let ec = ctx.norm_pairs(&interior(&res.c_w.sub(&c_star)?))?
            / ctx.norm_pairs(&interior(&c_star))?;
        let u_norm = ctx.norm_pairs(&u)?;
        let hr = ctx.norm_pairs(&interior(&res.h))? / u_norm;
        let recon = res.diagnostics.reconstruction_defect / u_norm;
        outcome.checks.push(Check::bound(format!("reconstruction_defect_l{level}"), recon, 1e-12));
        err_g.push(eg);
        err_c.push(ec);
        h_rel.push(hr);
        table.push((h, delta, eg, ec, hr, closed_form, recon));
    }

    let worst_ratio = |e: &[f64]| {
        e.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max)
    };
    if hs.len() > 1 {
        outcome.checks.push(Check::flag("gphi_error_decreases", worst_ratio(&err_g), worst_ratio(&err_g) < 1.0));
        outcome.checks.push(Check::flag("cw_error_decreases", worst_ratio(&err_c), worst_ratio(&err_c) < 1.0));
        outcome.checks.push(Check::flag("residual_norm_decreases", worst_ratio(&h_rel), worst_ratio(&h_rel) < 1.0));
    }
    for (level, &eg) in err_g.iter().enumerate() {
        outcome.metric(&format!("err_gphi_l{level}"), eg);
        outcome.metric(&format!("err_cw_l{level}"), err_c[level]);
        outcome.metric(&format!("h_rel_l{level}"), h_rel[level]);
    }

    let path = out_dir.join("example32.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(file, "level,h,delta,err_gphi,err_cw,h_rel,closed_form_defect,recon_defect")?;
    for (level, row) in table.iter().enumerate() {
        writeln!(
            file,
            "{level},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.0, row.1, row.2, row.3, row.4, row.5, row.6
        )?;
    }
    file.flush()?;
    outcome.artifacts.push("example32.csv".to_string());
    Ok(outcome)
}

fn run_decompose(r: &mut Resolver, out_dir: &Path) -> Result<Outcome> {
    let domain = build_domain(r, "peridynamic_unit")?;
    let ctx = OperatorContext::new(&domain.nodes, &domain.pairs, domain.spec.clone())?;

    let kind = r.require_str("input", "kind")?;
    let mut traces = None;
    let u_raw = match kind.as_str() {
        "example32" => {
            let (phi_star, w_star, u) = example32_fields(&domain.nodes, &domain.pairs, &domain.spec)?;
            traces = Some((phi_star, w_star));
            u
        }
        "translation" => translation_residual_field(&domain.nodes, &domain.pairs),
        "analytic" => {
            let name = r.require_str("input", "field")?;
            let field = analytic::lookup(&name)?;
            match r.get_str("input", "lift", "average").as_str() {
                "average" => lift_average(
                    &VectorField::from_fn(&domain.nodes, field.f),
                    &domain.pairs,
                ),
                "difference" => lift_difference(field.f, &domain.nodes, &domain.pairs),
                other => {
                    return Err(NlvcError::InvalidInput(format!(
                        "input.lift: expected average or difference, got {other:?}"
                    )))
                }
            }
        }
        "file" => {
            let path = r.require_str("input", "path")?;
            read_two_point(Path::new(&path), &domain.pairs)?
        }
        other => {
            return Err(NlvcError::InvalidInput(format!(
                "input.kind: expected example32, translation, analytic, or file, got {other:?}"
            )))
        }
    };
    let mask = r.get_bool("input", "mask", kind == "example32")?;
    let u = if mask { mask_omega_pairs(&u_raw, &domain.nodes, &domain.pairs) } else { u_raw };

    let bc = match r.get_str("decompose", "bc", "dirichlet_zero").as_str() {
        "dirichlet_zero" => BoundaryTreatment::DirichletZero,
        "neumann" => BoundaryTreatment::Neumann,
        "flux_matching" => BoundaryTreatment::FluxMatching,
        "dirichlet_lift" => match traces.take() {
            Some((phi_gamma, w_gamma)) => BoundaryTreatment::DirichletLift { phi_gamma, w_gamma },
            None => {
                return Err(NlvcError::InvalidInput(
                    "decompose.bc: dirichlet_lift needs analytic layer traces; only \
                     input.kind = example32 provides them"
                        .into(),
                ))
            }
        },
        other => {
            return Err(NlvcError::InvalidInput(format!(
                "decompose.bc: expected dirichlet_zero, dirichlet_lift, neumann, or \
                 flux_matching, got {other:?}"
            )))
        }
    };
    let cfg = DecompositionConfig {
        bc,
        solver: parse_solver(r)?,
        compat_tol: r.get_f64("decompose", "compat_tol", 1e-8)?,
        allow_incompatible: r.get_bool("decompose", "allow_incompatible", false)?,
        deflation_probes: r.get_usize("decompose", "deflation_probes", 1)?,
        seed: r.get_u64("decompose", "seed", 7)?,
    };
    let recon_tol = r.get_f64("decompose", "recon_tol", 1e-12)?;
    let orth_tol = r.get_f64("decompose", "orth_tol", 1e-9)?;

    let res = decompose(&ctx, &u, &cfg)?;

    let mut outcome = Outcome::default();
    count_metrics(&mut outcome, &domain.nodes, &domain.pairs);
    let d = &res.diagnostics;
    let u_norm = ctx.norm_pairs(&u)?;
    let scale = if u_norm > 0.0 { u_norm } else { 1.0 };
    outcome.checks.push(Check::bound("reconstruction_defect_rel", d.reconstruction_defect / scale, recon_tol));
    let g_norm = ctx.norm_pairs(&res.g_phi)?;
    let c_norm = ctx.norm_pairs(&res.c_w)?;
    let denom = g_norm * c_norm;
    let orth = if denom > 0.0 { d.pairing_gphi_cw.abs() / denom } else { d.pairing_gphi_cw.abs() };
    outcome.checks.push(Check::bound("orthogonality_gphi_cw_rel", orth, orth_tol));
    outcome.checks.push(Check::flag(
        "potential_solve_converged",
        d.potential_report.relative_residual,
        d.potential_report.converged,
    ));
    outcome.checks.push(Check::flag(
        "stream_solve_converged",
        d.stream_report.relative_residual,
        d.stream_report.converged,
    ));

    outcome.metric("u_norm", u_norm);
    outcome.metric("gphi_norm", g_norm);
    outcome.metric("cw_norm", c_norm);
    outcome.metric("h_norm", ctx.norm_pairs(&res.h)?);
    outcome.metric("div_h", d.div_h);
    outcome.metric("curl_h", d.curl_h);
    outcome.metric("pairing_gphi_cw", d.pairing_gphi_cw);
    outcome.metric("pairing_gphi_h", d.pairing_gphi_h);
    outcome.metric("pairing_cw_h", d.pairing_cw_h);
    outcome.metric("reconstruction_defect", d.reconstruction_defect);
    outcome.metric("flux_residual_n", d.flux_residual_n);
    outcome.metric("flux_residual_t", d.flux_residual_t);
    outcome.metrics.insert(
        "potential_iterations".into(),
        Value::from(d.potential_report.iterations as u64),
    );
    outcome.metrics.insert(
        "stream_iterations".into(),
        Value::from(d.stream_report.iterations as u64),
    );
    outcome.metric("potential_residual", d.potential_report.relative_residual);
    outcome.metric("stream_residual", d.stream_report.relative_residual);
    outcome.metric("stream_deflated_norm", d.stream_report.deflated_norm);
    if let Some(c) = d.potential_report.compat_defect {
        outcome.metric("potential_compat_defect", c);
    }

    write_nodes(&out_dir.join("nodes.csv"), &domain.nodes)?;
    write_two_point(&out_dir.join("u.csv"), &u, &domain.pairs)?;
    write_one_point(&out_dir.join("phi.csv"), &OnePointField::Scalar(res.phi))?;
    write_one_point(&out_dir.join("w.csv"), &OnePointField::Vector(res.w))?;
    write_two_point(&out_dir.join("g_phi.csv"), &res.g_phi, &domain.pairs)?;
    write_two_point(&out_dir.join("c_w.csv"), &res.c_w, &domain.pairs)?;
    write_two_point(&out_dir.join("h.csv"), &res.h, &domain.pairs)?;
    for name in ["nodes.csv", "u.csv", "phi.csv", "w.csv", "g_phi.csv", "c_w.csv", "h.csv"] {
        outcome.artifacts.push(name.to_string());
    }
    Ok(outcome)
}

fn run_converge(r: &mut Resolver, out_dir: &Path) -> Result<Outcome> {
    let op = r.require_str("study", "operator")?;
    let field = r.require_str("study", "field")?;
    let deltas = r.get_f64_list("study", "deltas", &[0.4, 0.2, 0.1])?;
    let m = r.get_usize("study", "m", 4)? as u32;
    let study = match op.as_str() {
        "laplacian" => convergence::laplacian_limit_study(&field, &deltas, m)?,
        "curlcurl" => convergence::curlcurl_limit_study(&field, &deltas, m)?,
        other => {
            return Err(NlvcError::InvalidInput(format!(
                "study.operator: expected laplacian or curlcurl, got {other:?}"
            )))
        }
    };

    let mut outcome = Outcome::default();
    outcome.metric("slope", study.slope);
    outcome.metric("scaled_slope", study.scaled_slope);
    outcome.metrics.insert("degenerate".into(), Value::Bool(study.degenerate));
    outcome
        .metrics
        .insert("matched_scaling".into(), Value::String(study.matched_scaling.to_string()));
    if !study.defects.is_empty() {
        let defects: Vec<Value> = study
            .defects
            .iter()
            .map(|p| Value::Array(vec![num(p.x1), num(p.x2), num(p.x3)]))
            .collect();
        outcome.metrics.insert("defects".into(), Value::Array(defects));
    }

    if let Some(expect) = r.get_opt_f64("study", "expect_slope")? {
        let tol = r.get_f64("study", "slope_tol", 0.3)?;
        outcome.checks.push(Check::near("slope_matches_expectation", study.slope, expect, tol));
    }
    if let Some(raw) = r.get_opt_str("study", "expect_defect") {
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                NlvcError::InvalidInput(format!(
                    "config: study.expect_defect: expected three numbers, got {raw:?}"
                ))
            })?;
        if parts.len() != 3 {
            return Err(NlvcError::InvalidInput(format!(
                "config: study.expect_defect: expected three numbers, got {raw:?}"
            )));
        }
        let tol = r.get_f64("study", "defect_tol", 0.1)?;
        let last = study.defects.last().copied().ok_or_else(|| {
            NlvcError::InvalidInput("study.expect_defect: this study reports no defects".into())
        })?;
        let expect = Point3::new(parts[0], parts[1], parts[2]);
        let scale = parts.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        let dev = (last - expect).inf_norm() / scale;
        outcome.checks.push(Check::bound("defect_matches_expectation_rel", dev, tol));
    }

    let artifact = format!("study_{op}_{field}.csv");
    convergence::write_study_csv(&out_dir.join(&artifact), &study)?;
    outcome.artifacts.push(artifact);
    Ok(outcome)
}

fn run_moments(r: &mut Resolver, out_dir: &Path) -> Result<Outcome> {
    let delta = r.get_f64("moments", "delta", 1.0)?;
    let resolution = r.get_usize("moments", "resolution", 64)?;
    let tol_even = r.get_f64("moments", "tol_even", 0.01)?;
    let tol_odd = r.get_f64("moments", "tol_odd", 1e-3)?;
    let tol_homog = r.get_f64("moments", "tol_homog", 1e-6)?;

    let table = convergence::ball_moments(delta, resolution)?;
    let homog = convergence::homogeneity_exponent(delta, resolution)?;

    let mut outcome = Outcome::default();
    for row in &table.rows {
        let name = format!("moment[{}]", row.name);
        if row.analytic != 0.0 {
            outcome.checks.push(Check::near(name, row.ratio, 1.0, tol_even));
        } else {
            outcome.checks.push(Check::bound(name, row.ratio, tol_odd));
        }
        outcome.metric(&format!("computed[{}]", row.name), row.computed);
    }
    outcome.checks.push(Check::near("homogeneity_exponent", homog, 5.0, tol_homog));

    convergence::write_moments_csv(&out_dir.join("moments.csv"), &table)?;
    outcome.artifacts.push("moments.csv".to_string());
    Ok(outcome)
}

/// Map a finished run to the exit-code contract: 0 all checks pass, 2 any
/// tolerance check failed. (Errors exit 1 from `main`.)
pub fn exit_code(outcome: &Outcome) -> i32 {
    if outcome.all_passed() {
        0
    } else {
        2
    }
}
