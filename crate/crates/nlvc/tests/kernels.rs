use nlvc::geometry::{build_grid, neighbor_pairs, BoxBounds, GridMode};
use nlvc::kernels::{
    energy_seminorm, eval_kernel, micromodulus_coefficients, micromodulus_relation_residual,
    KernelFamily, KernelSpec,
};
use nlvc::linalg::Point3;
use proptest::prelude::*;

#[test]
fn unit_direction_kernel_has_unit_gamma_inside_the_ball() {
    let spec = KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0);
    let d = Point3::new(0.3, -0.4, 0.5);
    let a = spec.alpha_of_separation(d);
    assert!((a.norm() - 1.0).abs() < 1e-15);
    assert!((spec.gamma_of_separation(d) - 1.0).abs() < 1e-15);
    // Direction preserved.
    assert!((a.cross(d)).norm() < 1e-15);
}

#[test]
fn planar_kernel_spot_value_and_zero_third_component() {
    let spec = KernelSpec::new(KernelFamily::PlanarScaled, 1.0);
    // |d| = 1, delta = 1: scaling factor delta^(-3/2)/|d| = 1.
    let a = spec.alpha_of_separation(Point3::new(0.6, 0.8, 0.0));
    assert_eq!(a, Point3::new(0.6, 0.8, 0.0));
    // Any third component in the separation is projected out.
    let b = spec.alpha_of_separation(Point3::new(0.3, 0.0, 0.2));
    assert_eq!(b.x3, 0.0);
}

#[test]
fn support_cutoff_is_a_closed_ball() {
    let spec = KernelSpec::new(KernelFamily::PeridynamicUnit, 0.5);
    let on = spec.alpha_of_separation(Point3::new(0.5, 0.0, 0.0));
    assert!(on.norm() > 0.9, "boundary of the ball is in support");
    let off = spec.alpha_of_separation(Point3::new(0.5 + 1e-6, 0.0, 0.0));
    assert_eq!(off, Point3::ZERO);
}

#[test]
fn fractional_kernel_matches_direct_formula() {
    let spec = KernelSpec::fractional(2.0, 0.5);
    let d = Point3::new(0.3, 0.4, 0.0); // r = 0.5
    let a = spec.alpha_of_separation(d);
    let expect = d * 0.5f64.powf(-1.5);
    assert!((a - expect).norm() < 1e-15);
}

#[test]
fn validation_rejects_bad_specs() {
    let err = KernelSpec::new(KernelFamily::PeridynamicUnit, 0.0)
        .validate(GridMode::Full3D)
        .unwrap_err();
    assert!(err.to_string().contains("kernel.delta"), "{err}");

    let err = KernelSpec::new(KernelFamily::FractionalPrototype, 1.0)
        .validate(GridMode::Full3D)
        .unwrap_err();
    assert!(err.to_string().contains("kernel.beta"), "{err}");

    // Exponent bound depends on the spatial dimension.
    assert!(KernelSpec::fractional(1.0, 2.5).validate(GridMode::Full3D).is_ok());
    let err = KernelSpec::fractional(1.0, 2.5).validate(GridMode::PlaneEmbedded).unwrap_err();
    assert!(err.to_string().contains("kernel.beta"), "{err}");

    let mut spec = KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0);
    spec.beta = Some(1.0);
    let err = spec.validate(GridMode::Full3D).unwrap_err();
    assert!(err.to_string().contains("kernel.beta"), "{err}");
}

#[test]
fn eval_kernel_rejects_coincident_points() {
    let spec = KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0);
    let p = Point3::new(0.1, 0.2, 0.3);
    let err = eval_kernel(&spec, p, p).unwrap_err();
    assert!(err.to_string().contains("coincident"), "{err}");
}

#[test]
fn micromodulus_pair_collapses_to_a_single_radial_profile() {
    let spec = KernelSpec::fractional(4.0, 1.0);
    let coeff = micromodulus_coefficients(&spec).unwrap();
    assert_eq!(coeff.rho(2.0), 0.5);
    assert_eq!(coeff.f0(2.0), 0.5);
    // Unit-family kernels have no radial micromodulus data.
    let err =
        micromodulus_coefficients(&KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0))
            .unwrap_err();
    assert!(err.to_string().contains("fractional_prototype"), "{err}");
}

#[test]
fn micromodulus_tensor_relation_holds_in_support() {
    let spec = KernelSpec::fractional(1.0, 1.5);
    for xi in [
        Point3::new(0.3, 0.2, 0.1),
        Point3::new(-0.5, 0.0, 0.4),
        Point3::new(0.0, 0.9, 0.0),
    ] {
        let res = micromodulus_relation_residual(&spec, xi).unwrap();
        // Normalize by the magnitude of the radial coefficient itself.
        let rho2 = xi.norm().powf(-3.0);
        assert!(res / rho2 < 1e-14, "residual {res} at {xi:?}");
    }
}

#[test]
fn energy_seminorm_vanishes_for_constant_fields() {
    let nodes = build_grid(BoxBounds::unit_cube(), 0.25, GridMode::Full3D, 0.0).unwrap();
    let pairs = neighbor_pairs(&nodes, 0.5).unwrap();
    let spec = KernelSpec::new(KernelFamily::PeridynamicUnit, 0.5);
    let c = nlvc::fields::VectorField::from_fn(&nodes, |_| Point3::new(1.0, -2.0, 0.5));
    assert_eq!(energy_seminorm(&c, &spec, &nodes, &pairs).unwrap(), 0.0);

    let lin = nlvc::fields::VectorField::from_fn(&nodes, |p| Point3::new(p.x1, 0.0, 0.0));
    assert!(energy_seminorm(&lin, &spec, &nodes, &pairs).unwrap() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// gamma = |alpha|^2 for every family at every in-support separation.
    #[test]
    fn prop_gamma_is_alpha_norm_squared(
        dx in -0.9f64..0.9, dy in -0.9f64..0.9, dz in -0.9f64..0.9, beta in 0.1f64..2.9,
    ) {
        prop_assume!(dx * dx + dy * dy + dz * dz > 1e-4);
        let d = Point3::new(dx, dy, dz);
        for spec in [
            KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0),
            KernelSpec::new(KernelFamily::ConstantGamma, 1.0),
            KernelSpec::new(KernelFamily::PlanarScaled, 1.0),
            KernelSpec::fractional(1.0, beta),
        ] {
            let a = spec.alpha_of_separation(d);
            let g = spec.gamma_of_separation(d);
            prop_assert!((g - a.dot(a)).abs() <= 1e-15 * (1.0 + g.abs()));
        }
    }

    /// alpha is antisymmetric in the separation: alpha(-d) = -alpha(d).
    #[test]
    fn prop_alpha_antisymmetric(
        dx in -0.9f64..0.9, dy in -0.9f64..0.9, dz in -0.9f64..0.9,
    ) {
        prop_assume!(dx * dx + dy * dy + dz * dz > 1e-4);
        let d = Point3::new(dx, dy, dz);
        for spec in [
            KernelSpec::new(KernelFamily::PeridynamicUnit, 1.0),
            KernelSpec::new(KernelFamily::PlanarScaled, 1.0),
            KernelSpec::fractional(1.0, 1.0),
        ] {
            let a = spec.alpha_of_separation(d);
            let b = spec.alpha_of_separation(-d);
            prop_assert!((a + b).norm() < 1e-15 * (1.0 + a.norm()));
        }
    }
}
