use lsrb_core::mesh::{interval_mesh, refine_times, refine_uniform, unit_square_mesh, BoundaryTag, TriMesh};
use proptest::prelude::*;

fn quadrants(x: [f64; 2]) -> usize {
    (x[0] > 0.5) as usize + 2 * (x[1] > 0.5) as usize
}

fn check_topology(m: &TriMesh) {
    // Euler characteristic of a disk
    assert_eq!(m.n_vertices() + m.n_cells(), m.n_edges() + 1);
    let total: f64 = (0..m.n_cells()).map(|c| m.area(c)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((0..m.n_cells()).all(|c| m.area(c) > 0.0));

    let mut boundary_len = 0.0;
    for e in 0..m.n_edges() {
        let [a, b] = m.edges()[e];
        assert!(a < b);
        let cells = m.edge_cells(e);
        match cells {
            [Some(c0), Some(c1)] => {
                assert!(!m.is_boundary(e));
                let s0 = m.cell_edges(c0).iter().find(|(g, _)| *g == e).unwrap().1;
                let s1 = m.cell_edges(c1).iter().find(|(g, _)| *g == e).unwrap().1;
                assert_eq!(s0, -s1, "interior edge {e} must have opposite signs");
            }
            [Some(_), None] => {
                assert!(m.is_boundary(e));
                assert!(m.boundary_tag(e).is_some());
                boundary_len += m.edge_length(e);
            }
            _ => panic!("edge {e} has no first cell"),
        }
    }
    assert!((boundary_len - 4.0).abs() < 1e-12);
}

#[test]
fn structured_mesh_counts_and_tags() {
    let m = unit_square_mesh(4, quadrants).unwrap();
    assert_eq!(m.n_vertices(), 25);
    assert_eq!(m.n_cells(), 32);
    assert_eq!(m.n_edges(), 56);
    check_topology(&m);
    for s in 0..4 {
        let area: f64 = (0..m.n_cells()).filter(|&c| m.subdomain(c) == s).map(|c| m.area(c)).sum();
        assert!((area - 0.25).abs() < 1e-14);
    }
    for e in 0..m.n_edges() {
        let x = m.edge_midpoint(e);
        match m.boundary_tag(e) {
            Some(BoundaryTag::Bottom) => assert_eq!(x[1], 0.0),
            Some(BoundaryTag::Top) => assert_eq!(x[1], 1.0),
            Some(BoundaryTag::Left) => assert_eq!(x[0], 0.0),
            Some(BoundaryTag::Right) => assert_eq!(x[0], 1.0),
            None => {}
        }
    }
}

#[test]
fn locate_finds_containing_cell() {
    let m = unit_square_mesh(6, |_| 0).unwrap();
    for x in [[0.1, 0.9], [0.5, 0.5], [0.99, 0.01], [0.0, 0.0]] {
        let c = m.locate(x).unwrap();
        assert!(m.barycentric(c, x).iter().all(|&l| l >= -1e-12));
    }
    assert!(m.locate([1.5, 0.5]).is_none());
}

#[test]
fn interval_mesh_is_uniform() {
    let m = interval_mesh(8).unwrap();
    assert_eq!(m.nodes().len(), 9);
    assert!((m.h() - 0.125).abs() < 1e-15);
    assert!(interval_mesh(0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refinement_preserves_topology_and_parents(half in 1usize..5, depth in 0usize..3) {
        let coarse = unit_square_mesh(2 * half, quadrants).unwrap();
        let (fine, parent) = refine_times(&coarse, depth).unwrap();
        prop_assert_eq!(fine.n_cells(), coarse.n_cells() << (2 * depth));
        check_topology(&fine);
        for f in 0..fine.n_cells() {
            let p = parent[f];
            prop_assert_eq!(fine.subdomain(f), coarse.subdomain(p));
            let lam = coarse.barycentric(p, fine.centroid(f));
            prop_assert!(lam.iter().all(|&l| l > 0.0));
            prop_assert!((fine.area(f) * (1 << (2 * depth)) as f64 - coarse.area(p)).abs() < 1e-14);
        }
        let h_ratio = coarse.max_diameter() / fine.max_diameter();
        prop_assert!((h_ratio - (1 << depth) as f64).abs() < 1e-9);
    }

    #[test]
    fn one_refinement_keeps_coarse_vertices(half in 1usize..5) {
        let coarse = unit_square_mesh(2 * half, |_| 0).unwrap();
        let (fine, _) = refine_uniform(&coarse).unwrap();
        prop_assert_eq!(&fine.vertices()[..coarse.n_vertices()], coarse.vertices());
        prop_assert_eq!(fine.n_vertices(), coarse.n_vertices() + coarse.n_edges());
    }
}
