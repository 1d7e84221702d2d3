use nlvc::fields::{
    example32_fields, lift_average, lift_difference, mask_omega_pairs, read_one_point,
    read_two_point, translation_residual_field, write_one_point, write_two_point, OnePointField,
    Rank, ScalarField, TwoPointField, VectorField,
};
use nlvc::geometry::{
    build_grid, classify_interaction_domain, neighbor_pairs, BoxBounds, GammaSplit, GridMode,
    NodeSet, PairStructure,
};
use nlvc::kernels::{KernelFamily, KernelSpec};
use nlvc::linalg::Point3;
use nlvc::operators::OperatorContext;

fn planar_setup(h: f64, delta: f64) -> (NodeSet, PairStructure, KernelSpec) {
    let raw = build_grid(BoxBounds::unit_square(), h, GridMode::PlaneEmbedded, delta).unwrap();
    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    (nodes, pairs, KernelSpec::new(KernelFamily::PlanarScaled, delta))
}

#[test]
fn lifts_have_the_advertised_symmetry() {
    let nodes = build_grid(BoxBounds::unit_cube(), 0.25, GridMode::Full3D, 0.0).unwrap();
    let pairs = neighbor_pairs(&nodes, 0.5).unwrap();
    let v = VectorField::from_fn(&nodes, |p| Point3::new(p.x1, p.x2 * p.x2, -p.x3));

    let avg = lift_average(&v, &pairs);
    let a = avg.as_vector().unwrap();
    for (t, _, _) in pairs.iter_pairs() {
        let r = pairs.reverse[t] as usize;
        assert_eq!(a[t], a[r], "average lift is pair-symmetric");
    }

    let diff = lift_difference(|d| d * 2.0, &nodes, &pairs);
    let d = diff.as_vector().unwrap();
    for (t, _, _) in pairs.iter_pairs() {
        let r = pairs.reverse[t] as usize;
        assert!((d[t] + d[r]).norm() == 0.0, "odd difference lift is antisymmetric");
    }

    let h = translation_residual_field(&nodes, &pairs);
    let hv = h.as_vector().unwrap();
    for (t, i, j) in pairs.iter_pairs() {
        assert_eq!(hv[t], nodes.positions[j] - nodes.positions[i]);
    }
}

#[test]
fn planar_example_spot_value() {
    // u(x, y) at x = origin, y = (1/2, 0, 0) with unit horizon.
    let positions = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0)];
    let n = positions.len();
    let nodes = NodeSet {
        positions,
        volumes: vec![1.0; n],
        region: vec![nlvc::geometry::Region::InteriorOmega; n],
        mode: GridMode::PlaneEmbedded,
    };
    let pairs = neighbor_pairs(&nodes, 1.0).unwrap();
    let spec = KernelSpec::new(KernelFamily::PlanarScaled, 1.0);
    let (_, _, u) = example32_fields(&nodes, &pairs, &spec).unwrap();
    let t = pairs.pair_index(0, 1).unwrap();
    assert_eq!(u.as_vector().unwrap()[t], Point3::new(-0.25, 0.0, 0.0));
}

#[test]
fn planar_example_closed_form_equals_grad_plus_curl_adjoint_pointwise() {
    let (nodes, pairs, spec) = planar_setup(0.125, 0.25);
    let ctx = OperatorContext::new(&nodes, &pairs, spec).unwrap();
    let (phi, w, u) = example32_fields(&nodes, &pairs, &spec).unwrap();
    let built = ctx.apply_grad(&phi).unwrap().add(&ctx.apply_curl_adjoint(&w).unwrap()).unwrap();
    let defect = built.sub(&u).unwrap().inf_norm();
    assert!(defect <= 1e-13 * u.inf_norm().max(1.0), "defect {defect}");
}

#[test]
fn planar_example_rejects_wrong_mode_or_kernel() {
    let nodes = build_grid(BoxBounds::unit_cube(), 0.25, GridMode::Full3D, 0.0).unwrap();
    let pairs = neighbor_pairs(&nodes, 0.5).unwrap();
    let spec = KernelSpec::new(KernelFamily::PlanarScaled, 0.5);
    let err = example32_fields(&nodes, &pairs, &spec).unwrap_err();
    assert!(err.to_string().contains("plane-embedded"), "{err}");

    let (pn, pp, _) = planar_setup(0.25, 0.25);
    let unit = KernelSpec::new(KernelFamily::PeridynamicUnit, 0.25);
    let err = example32_fields(&pn, &pp, &unit).unwrap_err();
    assert!(err.to_string().contains("planar_scaled"), "{err}");
}

#[test]
fn masking_zeros_exactly_the_layer_touching_pairs() {
    let (nodes, pairs, _) = planar_setup(0.25, 0.25);
    let ones = TwoPointField::Scalar(vec![1.0; pairs.n_pairs()]);
    let masked = mask_omega_pairs(&ones, &nodes, &pairs);
    let m = masked.as_scalar().unwrap();
    for (t, i, j) in pairs.iter_pairs() {
        let expect = if nodes.is_omega(i) && nodes.is_omega(j) { 1.0 } else { 0.0 };
        assert_eq!(m[t], expect, "pair ({i},{j})");
    }
}

#[test]
fn arithmetic_checks_rank_and_length() {
    let a = TwoPointField::Scalar(vec![1.0, 2.0]);
    let b = TwoPointField::Vector(vec![Point3::ZERO, Point3::ZERO]);
    let err = a.add(&b).unwrap_err();
    assert!(err.to_string().contains("ranks"), "{err}");
    let c = TwoPointField::Scalar(vec![1.0]);
    let err = a.sub(&c).unwrap_err();
    assert!(err.to_string().contains("lengths"), "{err}");

    let d = a.add(&a).unwrap().scale(0.5).sub(&a).unwrap();
    assert_eq!(d.inf_norm(), 0.0);
}

#[test]
fn one_point_io_round_trips_bit_exactly() {
    let nodes = build_grid(BoxBounds::unit_cube(), 0.25, GridMode::Full3D, 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let phi = ScalarField::from_fn(&nodes, |p| (p.x1 * 7.3).sin() + p.x2 / 3.0);
    let path = dir.path().join("phi.csv");
    write_one_point(&path, &OnePointField::Scalar(phi.clone())).unwrap();
    let back = read_one_point(&path, nodes.len()).unwrap();
    assert_eq!(back.as_scalar().unwrap().values, phi.values);

    let v = VectorField::from_fn(&nodes, |p| Point3::new(p.x1.exp(), -p.x2, p.x3 * p.x1));
    let path = dir.path().join("v.csv");
    write_one_point(&path, &OnePointField::Vector(v.clone())).unwrap();
    let back = read_one_point(&path, nodes.len()).unwrap();
    assert_eq!(back.as_vector().unwrap().values, v.values);
}

#[test]
fn two_point_io_round_trips_bit_exactly_for_every_rank() {
    let (nodes, pairs, spec) = planar_setup(0.25, 0.25);
    let ctx = OperatorContext::new(&nodes, &pairs, spec).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let phi = ScalarField::from_fn(&nodes, |p| p.x1 * p.x2 + 0.3);
    let w = VectorField::from_fn(&nodes, |p| Point3::new(p.x2, -p.x1, 0.0));
    let scalar = ctx.apply_adjoint(0, &OnePointField::Vector(w.clone())).unwrap();
    let vector = ctx.apply_grad(&phi).unwrap();
    let matrix = ctx.apply_adjoint(2, &OnePointField::Vector(w)).unwrap();

    for (name, field) in [("s", scalar), ("v", vector), ("m", matrix)] {
        let path = dir.path().join(format!("{name}.csv"));
        write_two_point(&path, &field, &pairs).unwrap();
        let back = read_two_point(&path, &pairs).unwrap();
        assert_eq!(back.rank(), field.rank());
        assert_eq!(back.sub(&field).unwrap().inf_norm(), 0.0, "rank {:?}", field.rank());
    }
}

#[test]
fn two_point_reader_rejects_out_of_order_pairs() {
    let (_, pairs, _) = planar_setup(0.5, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    // Swap the first two data rows.
    let field = TwoPointField::Scalar((0..pairs.n_pairs()).map(|t| t as f64).collect());
    write_two_point(&path, &field, &pairs).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let err = read_two_point(&path, &pairs).unwrap_err();
    assert!(err.to_string().contains("does not match structure pair"), "{err}");
}

#[test]
fn validation_distinguishes_length_from_content() {
    let pairs = {
        let nodes = build_grid(BoxBounds::unit_cube(), 0.5, GridMode::Full3D, 0.0).unwrap();
        neighbor_pairs(&nodes, 0.5).unwrap()
    };
    let mut vals = vec![0.0; pairs.n_pairs()];
    vals[0] = f64::NAN;
    let field = TwoPointField::Scalar(vals);
    assert!(field.validate_len(&pairs).is_ok());
    assert!(field.validate(&pairs).is_err());

    let short = TwoPointField::zeros(Rank::Scalar, pairs.n_pairs() - 1);
    assert!(short.validate_len(&pairs).is_err());
}
