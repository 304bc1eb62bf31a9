//! Isoradiality checks and the empirical constants of the assumptions.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use super::{spanner_stats, IsoradialGraph, Point};
use crate::{Error, Result};

/// Per-face isoradiality measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceCheck {
    pub face: usize,
    pub circumradius: f64,
    /// `max_v | |v − c| − D/2 | / D` over the cycle, with `D` the circumdiameter.
    pub deviation: f64,
    pub center_inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub faces: Vec<FaceCheck>,
    pub max_deviation: f64,
    pub all_centers_inside: bool,
    /// `max |e| / D` over all edges.
    pub max_edge_ratio: f64,
    /// `max |e*| / D` over all dual edges.
    pub max_dual_ratio: f64,
    /// `max |cos∠(e, e*)|` over all dual edges.
    pub max_orthogonality_defect: f64,
    /// Number of pairs of stored edges that cross.
    pub crossings: usize,
    /// Max deviation within `tol` and every circumcenter strictly inside.
    pub passes: bool,
}

impl ValidationReport {
    /// `passes` together with the edge-length bounds, orthogonality and
    /// planarity of the embedding.
    pub fn all_invariants_hold(&self) -> bool {
        let slack = 1.0 + self.tol;
        self.passes
            && self.max_edge_ratio <= slack
            && self.max_dual_ratio <= slack
            && self.max_orthogonality_defect <= self.tol
            && self.crossings == 0
    }

    /// Writes one CSV row per face.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for f in &self.faces {
            w.serialize(f)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn strictly_inside(cycle: &[Point], c: Point) -> bool {
    (0..cycle.len()).all(|k| {
        let a = cycle[k];
        let b = cycle[(k + 1) % cycle.len()];
        (b - a).cross(c - a) > 0.0
    })
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Counts properly crossing edge pairs using a uniform grid of cell size `D`.
fn count_crossings(g: &IsoradialGraph) -> usize {
    let cell = g.circumdiameter();
    let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (e, &[a, b]) in g.edges.iter().enumerate() {
        let (ka, kb) = (key(g.positions[a]), key(g.positions[b]));
        for i in ka.0.min(kb.0)..=ka.0.max(kb.0) {
            for j in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                buckets.entry((i, j)).or_default().push(e);
            }
        }
    }
    let mut pairs = Vec::new();
    for list in buckets.values() {
        for (k, &e) in list.iter().enumerate() {
            for &f in &list[k + 1..] {
                let [a, b] = g.edges[e];
                let [c, d] = g.edges[f];
                if a == c || a == d || b == c || b == d {
                    continue;
                }
                let p = &g.positions;
                if segments_cross(p[a], p[b], p[c], p[d]) {
                    pairs.push((e.min(f), e.max(f)));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs.len()
}

/// Checks every face against the isoradial definition; `tol` is relative to
/// the circumdiameter. Failures are reported, never thrown.
pub fn validate_isoradial(g: &IsoradialGraph, tol: f64) -> ValidationReport {
    let d = g.circumdiameter();
    let mut faces = Vec::with_capacity(g.num_faces());
    for f in 0..g.num_faces() {
        let face = g.face(f);
        let cycle: Vec<Point> = face.vertex_cycle.iter().map(|&v| g.positions[v]).collect();
        let deviation = cycle
            .iter()
            .map(|p| (p.dist(face.circumcenter) - d / 2.0).abs() / d)
            .fold(0.0, f64::max);
        faces.push(FaceCheck {
            face: f,
            circumradius: face.circumradius,
            deviation,
            center_inside: strictly_inside(&cycle, face.circumcenter),
        });
    }
    let max_deviation = faces.iter().map(|f| f.deviation).fold(0.0, f64::max);
    let all_centers_inside = faces.iter().all(|f| f.center_inside);

    let max_edge_ratio = g.edge_length.iter().fold(0.0f64, |m, &l| m.max(l / d));
    let mut max_dual_ratio = 0.0f64;
    let mut max_orthogonality_defect = 0.0f64;
    for (e, dual) in g.dual.iter().enumerate() {
        if let Some(dual) = dual {
            max_dual_ratio = max_dual_ratio.max(dual.length / d);
            let [a, b] = g.edges[e];
            let primal = g.positions[b] - g.positions[a];
            let star = g.circumcenters[dual.faces[1]] - g.circumcenters[dual.faces[0]];
            if dual.length > 0.0 {
                let cos = primal.dot(star) / (primal.norm() * star.norm());
                max_orthogonality_defect = max_orthogonality_defect.max(cos.abs());
            }
        }
    }

    ValidationReport {
        tol,
        passes: max_deviation <= tol && all_centers_inside,
        faces,
        max_deviation,
        all_centers_inside,
        max_edge_ratio,
        max_dual_ratio,
        max_orthogonality_defect,
        crossings: count_crossings(g),
    }
}

/// Empirical constants: bounded-angle constants `c_p`, `c_d`, maximum degree
/// `M` and the spanner constant `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `min |e| / D`.
    pub c_p: f64,
    /// `min |e*| / D` over edges with a dual.
    pub c_d: f64,
    #[serde(rename = "M")]
    pub max_degree: usize,
    /// `max d_h(u,v)/|u−v|` over the sampled interior pairs.
    pub kappa_empirical: f64,
    /// `max D·d^c(u,v)/|u−v|` over the same pairs.
    pub combinatorial_ratio: f64,
    pub pairs_checked: usize,
}

/// Same as [`check_assumptions_with`] using at most 64 sources.
pub fn check_assumptions(g: &IsoradialGraph) -> Result<AssumptionReport> {
    check_assumptions_with(g, 64)
}

/// Measures the constants, computing `κ` from up to `max_sources` interior
/// sources (spread evenly by id) to every interior vertex. Passing
/// `usize::MAX` checks all interior pairs.
pub fn check_assumptions_with(g: &IsoradialGraph, max_sources: usize) -> Result<AssumptionReport> {
    if g.num_edges() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let d = g.circumdiameter();
    let c_p = g.edge_length.iter().fold(f64::INFINITY, |m, &l| m.min(l)) / d;
    let c_d = g
        .dual
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, e| m.min(e.length))
        / d;

    let interior: Vec<usize> = g.interior_vertices().collect();
    let sources: Vec<usize> = if interior.len() <= max_sources {
        interior
    } else {
        let stride = interior.len() as f64 / max_sources as f64;
        (0..max_sources)
            .map(|k| interior[(k as f64 * stride) as usize])
            .collect()
    };
    let stats = spanner_stats(g, &sources);
    Ok(AssumptionReport {
        c_p,
        c_d,
        max_degree: g.max_degree(),
        kappa_empirical: stats.max_weighted_ratio,
        combinatorial_ratio: stats.max_combinatorial_ratio,
        pairs_checked: stats.pairs,
    })
}
