use nlvc::geometry::{
    build_grid, classify_interaction_domain, in_closed_ball, neighbor_pairs, read_nodes,
    write_nodes, BoxBounds, GammaSplit, GridMode, NodeSet, Region,
};
use nlvc::linalg::Point3;
use proptest::prelude::*;

fn unit_grid(h: f64, margin: f64) -> NodeSet {
    build_grid(BoxBounds::unit_cube(), h, GridMode::Full3D, margin).unwrap()
}

#[test]
fn margin_free_grid_is_all_interior() {
    let nodes = unit_grid(0.25, 0.0);
    assert_eq!(nodes.len(), 64);
    assert_eq!(nodes.omega_count(), 64);
    assert!(nodes.volumes.iter().all(|&v| v == 0.25f64.powi(3)));
    // Cell centers: first at h/2, last at 1 - h/2.
    assert_eq!(nodes.positions[0], Point3::new(0.125, 0.125, 0.125));
    assert_eq!(nodes.positions[63], Point3::new(0.875, 0.875, 0.875));
}

#[test]
fn margin_cells_cover_horizon_and_classify_keeps_reachable_ones() {
    let h = 0.25;
    let delta = 0.5;
    let raw = unit_grid(h, delta);
    // margin of 2 cells per side: (4 + 4)^3 total candidates.
    assert_eq!(raw.len(), 512);
    assert_eq!(raw.omega_count(), 64);

    let nodes = classify_interaction_domain(&raw, delta, GammaSplit::AllDirichlet).unwrap();
    assert_eq!(nodes.omega_count(), 64);
    assert!(nodes.gamma_count() > 0);
    // Every kept layer node is horizon-reachable from some interior node,
    // and every dropped candidate was not.
    let omega: Vec<Point3> =
        (0..nodes.len()).filter(|&i| nodes.is_omega(i)).map(|i| nodes.positions[i]).collect();
    for i in 0..nodes.len() {
        if !nodes.is_omega(i) {
            assert!(
                omega.iter().any(|&q| in_closed_ball(nodes.positions[i], q, delta)),
                "unreachable layer node kept at {:?}",
                nodes.positions[i]
            );
        }
    }
    let kept: Vec<Point3> = nodes.positions.clone();
    for i in 0..raw.len() {
        let p = raw.positions[i];
        let reachable = omega.iter().any(|&q| in_closed_ball(p, q, delta));
        assert_eq!(kept.contains(&p), reachable || raw.is_omega(i));
    }
}

#[test]
fn neumann_split_labels_by_predicate() {
    let raw = unit_grid(0.25, 0.25);
    let split = GammaSplit::NeumannWhere(|p| p.x1 < 0.0);
    let nodes = classify_interaction_domain(&raw, 0.25, split).unwrap();
    for i in 0..nodes.len() {
        if !nodes.is_omega(i) {
            let expect =
                if nodes.positions[i].x1 < 0.0 { Region::GammaN } else { Region::GammaD };
            assert_eq!(nodes.region[i], expect);
        }
    }
}

#[test]
fn plane_embedded_grid_has_zero_x3_and_area_volumes() {
    let nodes =
        build_grid(BoxBounds::unit_square(), 0.25, GridMode::PlaneEmbedded, 0.25).unwrap();
    assert_eq!(nodes.len(), 36);
    assert!(nodes.positions.iter().all(|p| p.x3 == 0.0));
    assert!(nodes.volumes.iter().all(|&v| v == 0.0625));
}

#[test]
fn grid_spacing_must_tile_the_box() {
    let err = build_grid(BoxBounds::unit_cube(), 0.3, GridMode::Full3D, 0.0).unwrap_err();
    assert!(err.to_string().contains("does not tile"), "{err}");
}

#[test]
fn pairs_match_brute_force_on_a_grid() {
    let nodes = unit_grid(0.25, 0.0);
    let delta = 0.5;
    let pairs = neighbor_pairs(&nodes, delta).unwrap();
    for i in 0..nodes.len() {
        let mut expect: Vec<u32> = (0..nodes.len() as u32)
            .filter(|&j| {
                j as usize != i
                    && in_closed_ball(nodes.positions[i], nodes.positions[j as usize], delta)
            })
            .collect();
        expect.sort_unstable();
        assert_eq!(pairs.neighbors_of(i), expect.as_slice(), "row {i}");
    }
}

#[test]
fn reverse_is_an_involution_matching_the_transpose() {
    let nodes = unit_grid(0.2, 0.0);
    let pairs = neighbor_pairs(&nodes, 0.4).unwrap();
    assert!(pairs.n_pairs() > 0);
    for (t, i, j) in pairs.iter_pairs() {
        let r = pairs.reverse[t] as usize;
        assert_eq!(pairs.reverse[r] as usize, t);
        // reverse of (i, j) is the flat slot of (j, i).
        assert_eq!(pairs.pair_index(j, i), Some(r));
        assert!(pairs.range(j).contains(&r));
        assert_eq!(pairs.neighbors[r] as usize, i);
    }
}

#[test]
fn closed_ball_keeps_exact_horizon_separations() {
    // Axis-aligned neighbors at exactly delta = 2h must be included.
    let nodes = unit_grid(0.25, 0.0);
    let pairs = neighbor_pairs(&nodes, 0.5).unwrap();
    let i = 0;
    let j = 2; // (0.125, 0.125, 0.625): separation exactly 0.5 in x3
    assert!(pairs.pair_index(i, j).is_some());
}

#[test]
fn coincident_nodes_are_rejected() {
    let nodes = NodeSet {
        positions: vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 0.0)],
        volumes: vec![1.0, 1.0],
        region: vec![Region::InteriorOmega, Region::InteriorOmega],
        mode: GridMode::Full3D,
    };
    let err = neighbor_pairs(&nodes, 1.0).unwrap_err();
    assert!(err.to_string().contains("coincident"), "{err}");
}

#[test]
fn node_csv_round_trips_bit_exactly() {
    let raw = unit_grid(1.0 / 3.0, 1.0 / 3.0);
    let nodes = classify_interaction_domain(&raw, 1.0 / 3.0, GammaSplit::AllDirichlet).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nodes.csv");
    write_nodes(&path, &nodes).unwrap();
    let back = read_nodes(&path, GridMode::Full3D).unwrap();
    assert_eq!(back.len(), nodes.len());
    for i in 0..nodes.len() {
        assert_eq!(back.positions[i], nodes.positions[i], "position {i}");
        assert_eq!(back.volumes[i], nodes.volumes[i], "volume {i}");
        assert_eq!(back.region[i], nodes.region[i], "region {i}");
    }
}

#[test]
fn read_rejects_nonconsecutive_ids() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "id,x1,x2,x3,volume,region\n1,0.0,0.0,0.0,1.0,omega\n",
    )
    .unwrap();
    let err = read_nodes(&path, GridMode::Full3D).unwrap_err();
    assert!(err.to_string().contains("consecutive"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Binned neighbor search equals the brute-force closed-ball predicate
    /// on arbitrary point clouds.
    #[test]
    fn prop_pairs_equal_brute_force(
        seeds in prop::collection::vec((0u32..50, 0u32..50, 0u32..50), 2..40),
        dnum in 1u32..8,
    ) {
        // Snap to a lattice to avoid coincident nodes, then scale.
        let mut uniq: Vec<(u32, u32, u32)> = seeds;
        uniq.sort_unstable();
        uniq.dedup();
        let positions: Vec<Point3> = uniq
            .iter()
            .map(|&(a, b, c)| Point3::new(a as f64 * 0.02, b as f64 * 0.02, c as f64 * 0.02))
            .collect();
        let n = positions.len();
        let nodes = NodeSet {
            positions,
            volumes: vec![1.0; n],
            region: vec![Region::InteriorOmega; n],
            mode: GridMode::Full3D,
        };
        let delta = dnum as f64 * 0.05;
        let pairs = neighbor_pairs(&nodes, delta).unwrap();
        prop_assert_eq!(pairs.n_nodes(), n);
        for i in 0..n {
            let mut expect: Vec<u32> = (0..n as u32)
                .filter(|&j| j as usize != i
                    && in_closed_ball(nodes.positions[i], nodes.positions[j as usize], delta))
                .collect();
            expect.sort_unstable();
            prop_assert_eq!(pairs.neighbors_of(i), expect.as_slice());
        }
        for (t, _, j) in pairs.iter_pairs() {
            let r = pairs.reverse[t] as usize;
            prop_assert_eq!(pairs.reverse[r] as usize, t);
            prop_assert!(pairs.range(j).contains(&r));
        }
    }
}
