use nlvc::geometry::{
    build_grid, classify_interaction_domain, neighbor_pairs, BoxBounds, GammaSplit, GridMode,
};
use nlvc::kernels::{KernelFamily, KernelSpec};
use nlvc::operators::OperatorContext;
use nlvc::verify::{all_passed, identity_suite};

fn report(checks: &[nlvc::verify::IdentityCheck]) -> String {
    checks
        .iter()
        .map(|c| format!("{}: {:.3e} (tol {:.1e}) {}", c.name, c.value, c.tol, c.pass))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identity_suite_passes_on_a_unit_kernel_cube() {
    let h = 1.0 / 6.0;
    let delta = 3.0 * h;
    let raw = build_grid(BoxBounds::unit_cube(), h, GridMode::Full3D, delta).unwrap();
    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    let ctx = OperatorContext::new(
        &nodes,
        &pairs,
        KernelSpec::new(KernelFamily::PeridynamicUnit, delta),
    )
    .unwrap();

    let checks = identity_suite(&ctx, 42).unwrap();
    assert_eq!(checks.len(), 16);
    assert!(all_passed(&checks), "failing checks:\n{}", report(&checks));
    // Names are unique (they key the summary report).
    let mut names: Vec<&str> = checks.iter().map(|c| c.name).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), 16);
}

#[test]
fn identity_suite_passes_on_a_planar_scaled_grid() {
    let h = 1.0 / 6.0;
    let delta = 2.0 * h;
    let raw = build_grid(BoxBounds::unit_square(), h, GridMode::PlaneEmbedded, delta).unwrap();
    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    let ctx = OperatorContext::new(
        &nodes,
        &pairs,
        KernelSpec::new(KernelFamily::PlanarScaled, delta),
    )
    .unwrap();

    let checks = identity_suite(&ctx, 7).unwrap();
    assert!(all_passed(&checks), "failing checks:\n{}", report(&checks));
}

#[test]
fn identity_suite_passes_on_a_fractional_kernel() {
    let h = 0.2;
    let delta = 0.4;
    let raw = build_grid(BoxBounds::unit_cube(), h, GridMode::Full3D, delta).unwrap();
    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    let ctx =
        OperatorContext::new(&nodes, &pairs, KernelSpec::fractional(delta, 1.0)).unwrap();

    let checks = identity_suite(&ctx, 3).unwrap();
    assert!(all_passed(&checks), "failing checks:\n{}", report(&checks));
}

#[test]
fn identity_suite_is_deterministic_for_a_fixed_seed() {
    let h = 0.25;
    let delta = 0.5;
    let raw = build_grid(BoxBounds::unit_cube(), h, GridMode::Full3D, delta).unwrap();
    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    let ctx = OperatorContext::new(
        &nodes,
        &pairs,
        KernelSpec::new(KernelFamily::PeridynamicUnit, delta),
    )
    .unwrap();

    let a = identity_suite(&ctx, 123).unwrap();
    let b = identity_suite(&ctx, 123).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.value.to_bits(), y.value.to_bits(), "check {}", x.name);
    }
    // A different seed draws different random fields.
    let c = identity_suite(&ctx, 124).unwrap();
    assert!(a.iter().zip(&c).any(|(x, y)| x.value != y.value));
}
