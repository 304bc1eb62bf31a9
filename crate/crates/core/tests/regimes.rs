mod common;

use proptest::prelude::*;
use serde::Deserialize;

use isoheat::kernel::Disk;
use isoheat::regimes::{
    euclidean_sweep, graph_sweep, ldp_monte_carlo, ldp_sweep, ldp_target, rate_function, verdict, SweepConfig,
    Verdict,
};
use isoheat::{Error, Family, Point, SpacingConvention};

use common::square_lattice_ln_kernel;

fn config(beta: f64, h: Vec<f64>, tol: f64) -> SweepConfig {
    SweepConfig {
        family: Family::Square {
            spacing: SpacingConvention::SpacingIsH,
        },
        x: Point::ORIGIN,
        y: Point::new(1.0, 0.0),
        t: 1.0,
        beta,
        h_sequence: h,
        tol,
        threshold: 1.0,
        max_vertices: 2_000_000,
    }
}

/// `ln P[X_t ∈ disk]` on `hℤ²` from the product Bessel kernel.
fn lattice_ln_event(h: f64, t: f64, disk: &Disk) -> f64 {
    let reach = ((disk.center.norm() + disk.radius) / h).ceil() as i64 + 1;
    let mut logs = Vec::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            let p = Point::new(i as f64 * h, j as f64 * h);
            if p.dist(disk.center) <= disk.radius * (1.0 + 1e-12) {
                logs.push(square_lattice_ln_kernel(h, t, i, j));
            }
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

#[test]
fn euclidean_rows_match_the_lattice_oracle() {
    let beta = 0.5;
    let res = euclidean_sweep(&config(beta, vec![0.25, 0.2, 0.125], 1e-9)).unwrap();
    for r in &res.rows {
        assert!(r.failure.is_none());
        let time = r.h.powf(beta);
        let i = (1.0 / r.h).round() as i64;
        let exact = square_lattice_ln_kernel(r.h, time, i, 0);
        assert!((r.log_kernel - exact).abs() <= 2e-9 * exact.abs(), "h {}: {} vs {exact}", r.h, r.log_kernel);
        assert_eq!(r.distance as i64, i);
        assert_eq!(r.target, -0.5);
        assert!((r.gap - (r.scaled_log_kernel + 0.5)).abs() < 1e-15);
    }
    assert_eq!(res.l1_limit, Some(1.0));
}

#[test]
fn graph_rows_match_the_lattice_oracle() {
    let beta = 2.0;
    let res = graph_sweep(&config(beta, vec![0.25, 0.2, 0.125], 1e-9)).unwrap();
    for r in &res.rows {
        let time = r.h.powf(beta);
        let i = (1.0 / r.h).round() as i64;
        let exact = square_lattice_ln_kernel(r.h, time, i, 0);
        assert!((r.log_kernel - exact).abs() <= 2e-9 * exact.abs());
        assert!((r.h_distance - 1.0).abs() < 1e-12);
        let scale = r.h / ((beta - 1.0) * r.h.ln());
        assert!((r.scaled_log_kernel - scale * exact).abs() < 1e-8);
    }
}

#[test]
fn ldp_rows_match_the_lattice_oracle() {
    let disk = Disk::new(Point::new(1.0, 0.0), 0.25);
    let res = ldp_sweep(&config(0.5, vec![0.25, 0.2, 0.125], 1e-10), &disk, 1.0).unwrap();
    for r in &res.rows {
        let exact = lattice_ln_event(r.h, r.h.sqrt(), &disk);
        assert!((r.log_kernel - exact).abs() <= 1e-6, "h {}: {} vs {exact}", r.h, r.log_kernel);
        assert!((r.target + 0.28125).abs() < 1e-15);
    }
}

#[test]
fn coincident_endpoints() {
    // With x = y the Euclidean target is 0 and the scaled log kernel tends
    // to 0 from below.
    let mut cfg = config(0.5, vec![0.2, 0.1, 0.05], 1e-9);
    cfg.y = cfg.x;
    cfg.threshold = 1.5;
    let res = euclidean_sweep(&cfg).unwrap();
    let gaps = res.gaps();
    for r in &res.rows {
        assert_eq!(r.distance, 0);
        assert_eq!(r.target, 0.0);
        assert!(r.scaled_log_kernel < 0.0);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert_eq!(res.verdict, Verdict::Converging);
}

#[derive(Deserialize)]
struct Pin {
    h: Vec<f64>,
    gaps: Vec<f64>,
}

#[derive(Deserialize)]
struct Pins {
    euclidean: Pin,
    graph: Pin,
    ldp: Pin,
}

#[test]
fn cheap_rows_reproduce_the_pinned_sweeps() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/sweeps.toml");
    let pins: Pins = toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let cheap = |p: &Pin| -> (Vec<f64>, Vec<f64>) {
        p.h.iter().zip(&p.gaps).filter(|(&h, _)| h >= 0.1).map(|(&h, &g)| (h, g)).unzip()
    };
    let disk = Disk::new(Point::new(1.0, 0.0), 0.25);
    let runs = [
        (cheap(&pins.euclidean), euclidean_sweep(&config(0.5, cheap(&pins.euclidean).0, 1e-6)).unwrap()),
        (cheap(&pins.graph), graph_sweep(&config(2.0, cheap(&pins.graph).0, 1e-6)).unwrap()),
        (cheap(&pins.ldp), ldp_sweep(&config(0.5, cheap(&pins.ldp).0, 1e-8), &disk, 1.0).unwrap()),
    ];
    for ((h, gaps), res) in runs {
        assert_eq!(res.rows.len(), h.len());
        for (r, g) in res.rows.iter().zip(gaps) {
            assert!((r.gap - g).abs() <= 1e-9 * g.abs().max(1.0), "h {}: {} vs pinned {g}", r.h, r.gap);
        }
    }
}

#[test]
fn configs_are_validated() {
    assert!(matches!(euclidean_sweep(&config(1.0, vec![0.2], 1e-6)), Err(Error::CriticalBeta)));
    assert!(matches!(graph_sweep(&config(1.0, vec![0.2], 1e-6)), Err(Error::CriticalBeta)));
    assert!(matches!(euclidean_sweep(&config(1.5, vec![0.2], 1e-6)), Err(Error::Config(_))));
    assert!(matches!(graph_sweep(&config(0.5, vec![0.2], 1e-6)), Err(Error::Config(_))));
    assert!(euclidean_sweep(&config(0.5, vec![0.1, 0.2], 1e-6)).is_err());
    assert!(euclidean_sweep(&config(0.5, vec![], 1e-6)).is_err());
    assert!(euclidean_sweep(&config(0.5, vec![0.2], 0.0)).is_err());
    let mut small = config(0.5, vec![0.01], 1e-6);
    small.max_vertices = 1000;
    let res = euclidean_sweep(&small).unwrap();
    assert!(res.rows[0].failure.is_some());
    assert_eq!(res.verdict, Verdict::Inconclusive);
}

#[test]
fn verdict_rules() {
    let base = euclidean_sweep(&config(0.5, vec![0.2, 0.1, 0.05], 1e-6)).unwrap();
    assert_eq!(verdict(&base.rows, 10.0), Verdict::Converging);
    assert_eq!(verdict(&base.rows, 0.5), Verdict::Inconclusive);
    let mut reversed = base.rows.clone();
    reversed.reverse();
    assert_eq!(verdict(&reversed, 10.0), Verdict::Inconclusive);
    let mut flagged = base.rows.clone();
    flagged[0].flagged = true;
    assert_eq!(verdict(&flagged, 10.0), Verdict::Inconclusive);
    assert_eq!(verdict(&[], 10.0), Verdict::Inconclusive);
}

#[test]
fn monte_carlo_agrees_with_the_certified_probability() {
    let disk = Disk::new(Point::new(1.0, 0.0), 0.25);
    let cfg = config(0.5, vec![0.25], 1e-10);
    let exact = ldp_sweep(&cfg, &disk, 1.0).unwrap().rows[0].log_kernel.exp();
    let mc = ldp_monte_carlo(&cfg, &disk, 1.0, 40_000, 17).unwrap();
    assert_eq!(mc, ldp_monte_carlo(&cfg, &disk, 1.0, 40_000, 17).unwrap());
    let row = &mc[0];
    assert!((row.estimate - exact).abs() < 5.0 * row.standard_error, "{} vs {exact}", row.estimate);
    assert!(ldp_monte_carlo(&cfg, &disk, 1.0, 0, 17).is_err());
}

#[test]
fn ldp_targets() {
    let disk = Disk::new(Point::new(1.0, 0.0), 0.25);
    assert_eq!(ldp_target(Point::ORIGIN, &disk, 1.0), -0.28125);
    assert_eq!(ldp_target(Point::ORIGIN, &disk, 2.0), -0.140625);
    assert_eq!(ldp_target(Point::new(1.1, 0.1), &disk, 1.0), 0.0);
}

proptest! {
    #[test]
    fn rate_function_is_convex_and_quadratic(
        ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0, s in 0.0f64..1.0,
    ) {
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        let mix = Point::new(s * ax + (1.0 - s) * bx, s * ay + (1.0 - s) * by);
        let chord = s * rate_function(a) + (1.0 - s) * rate_function(b);
        prop_assert!(rate_function(mix) <= chord + 1e-12);
        prop_assert!((rate_function(a) - 0.5 * (ax * ax + ay * ay)).abs() < 1e-12);
        prop_assert!((rate_function(Point::new(2.0 * ax, 2.0 * ay)) - 4.0 * rate_function(a)).abs() < 1e-9);
    }
}
