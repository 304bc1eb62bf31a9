use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use proptest::prelude::*;

use isoheat::geometry::{
    check_assumptions_with, combinatorial_ball, generate, project, spanner_stats, validate_isoradial,
};
use isoheat::{Error, GeneratorSpec, IsoradialGraph, Point, SpacingConvention};

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

fn key(p: Point, unit: f64) -> (i64, i64) {
    ((p.x / unit).round() as i64, (p.y / unit).round() as i64)
}

#[test]
fn orthogonal_tracks_reproduce_the_square_lattice() {
    let h = 0.8;
    let g = generate(&GeneratorSpec::rhombic_tracks(h, 6, vec![0.0], vec![FRAC_PI_2], 0.5)).unwrap();
    let sq = generate(&GeneratorSpec::square(h, 12, SpacingConvention::CircumdiameterIsH)).unwrap();
    let s = h / SQRT_2;
    // Primal edges run along the rhombus diagonals, at 45 degrees.
    let sq_edges: HashSet<((i64, i64), (i64, i64))> = sq
        .edges()
        .iter()
        .flat_map(|&[a, b]| {
            let (ka, kb) = (key(sq.position(a), s), key(sq.position(b), s));
            [(ka, kb), (kb, ka)]
        })
        .collect();
    for &[a, b] in g.edges() {
        let ka = key(rotate(g.position(a), -FRAC_PI_4), s);
        let kb = key(rotate(g.position(b), -FRAC_PI_4), s);
        assert!(sq_edges.contains(&(ka, kb)), "edge {a}-{b} missing from the square lattice");
    }
    for u in g.interior_vertices() {
        assert_eq!(g.degree(u), 4);
        assert!((g.dual_area(u).unwrap() - s * s).abs() < 1e-12);
    }
}

#[test]
fn ball_sizes_match_lattice_counts() {
    let sq = generate(&GeneratorSpec::square(1.0, 12, SpacingConvention::SpacingIsH)).unwrap();
    let tri = generate(&GeneratorSpec::triangular(1.0, 12)).unwrap();
    for n in 0..8 {
        assert_eq!(combinatorial_ball(&sq, sq.project(Point::ORIGIN), n).unwrap().len(), 2 * n * n + 2 * n + 1);
        assert_eq!(combinatorial_ball(&tri, tri.project(Point::ORIGIN), n).unwrap().len(), 3 * n * n + 3 * n + 1);
    }
    let u = sq.project(Point::ORIGIN);
    assert!(matches!(combinatorial_ball(&sq, u, 12), Err(Error::BallClipped { .. })));
}

#[test]
fn triangular_spanner_constant() {
    let g = generate(&GeneratorSpec::triangular(1.0, 8)).unwrap();
    let sources: Vec<usize> = (0..g.num_vertices()).collect();
    let s = spanner_stats(&g, &sources);
    assert!((s.max_weighted_ratio - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    assert!((s.min_weighted_ratio - 1.0).abs() < 1e-12);
}

fn brute_projection(g: &IsoradialGraph, p: Point) -> usize {
    (0..g.num_vertices())
        .min_by(|&a, &b| {
            let (pa, pb) = (g.position(a), g.position(b));
            let d2 = |q: Point| (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
            d2(pa)
                .total_cmp(&d2(pb))
                .then(pa.x.total_cmp(&pb.x))
                .then(pa.y.total_cmp(&pb.y))
                .then(a.cmp(&b))
        })
        .unwrap()
}

fn track_angles() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-0.35f64..0.35, 1..4),
        prop::collection::vec(1.2f64..1.95, 1..4),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rhombic_tracks_are_isoradial((rows, cols) in track_angles(), h in 0.2f64..2.0) {
        let eps = 0.2;
        let g = generate(&GeneratorSpec::rhombic_tracks(h, 5, rows, cols, eps)).unwrap();
        let r = validate_isoradial(&g, 1e-9);
        prop_assert!(r.all_invariants_hold(), "{:?}", (r.max_deviation, r.crossings));
        let a = check_assumptions_with(&g, 8).unwrap();
        let floor = (eps / 2.0).sin() - 1e-12;
        prop_assert!(a.c_p >= floor && a.c_d >= floor, "c_p {} c_d {}", a.c_p, a.c_d);
        prop_assert!(a.c_p <= 1.0 && a.c_d <= 1.0);
    }

    #[test]
    fn projection_is_nearest_vertex(x in -3.0f64..3.0, y in -3.0f64..3.0, (rows, cols) in track_angles()) {
        let g = generate(&GeneratorSpec::rhombic_tracks(1.0, 5, rows, cols, 0.2)).unwrap();
        let p = Point::new(x, y);
        prop_assert_eq!(project(&g, p), brute_projection(&g, p));
    }

    #[test]
    fn stored_graphs_round_trip(extent in 1usize..5, h in 0.1f64..3.0, which in 0usize..3) {
        let spec = match which {
            0 => GeneratorSpec::square(h, extent, SpacingConvention::SpacingIsH),
            1 => GeneratorSpec::triangular(h, extent),
            _ => GeneratorSpec::rhombic_tracks(h, extent, vec![0.1, -0.2], vec![1.3, 1.8], 0.3),
        };
        let g = generate(&spec).unwrap();
        let dir = std::env::temp_dir().join(format!("isoheat-rt-{}-{which}-{extent}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.json");
        g.write_json(&path).unwrap();
        let back = IsoradialGraph::read_json(&path).unwrap();
        prop_assert_eq!(back.to_graph_file(), g.to_graph_file());
    }
}

#[test]
fn perturbed_vertex_fails_validation() {
    let g = generate(&GeneratorSpec::square(1.0, 4, SpacingConvention::SpacingIsH)).unwrap();
    let mut file = g.to_graph_file();
    let u = g.project(Point::ORIGIN);
    file.vertices[u].x += 0.3 * g.h();
    let bad = IsoradialGraph::from_graph_file(file).unwrap();
    let r = validate_isoradial(&bad, 1e-9);
    assert!(!r.passes);
    assert!(r.max_deviation > 0.1 * bad.circumdiameter());
}

#[test]
fn extreme_rhombi_attain_the_angle_floor() {
    use std::f64::consts::PI;
    let eps = PI / 6.0;
    let g = generate(&GeneratorSpec::rhombic_tracks(1.0, 6, vec![0.0], vec![eps, PI - eps], eps)).unwrap();
    let a = check_assumptions_with(&g, 8).unwrap();
    let floor = (PI / 12.0).sin();
    assert!((a.c_p - floor).abs() < 1e-12 && (a.c_d - floor).abs() < 1e-12, "{} {}", a.c_p, a.c_d);
}

#[test]
fn single_track_rhombi_have_cotangent_weights() {
    // All faces come from one rhombus of angle θ, so every primal/dual pair
    // is the short and long diagonal in some order: ω ∈ {tan(θ/2), cot(θ/2)}.
    let theta = 1.2;
    let g = generate(&GeneratorSpec::rhombic_tracks(1.0, 6, vec![0.0], vec![theta], 0.3)).unwrap();
    let w = isoheat::operators::compute_weights(&g).unwrap();
    let (tan, cot) = ((theta / 2.0).tan(), 1.0 / (theta / 2.0).tan());
    for om in w.omega.iter().flatten() {
        assert!((om - tan).abs() < 1e-12 || (om - cot).abs() < 1e-12, "{om}");
    }
}
