//! Isoradial graph construction, validation and metric structure.
//!
//! An [`IsoradialGraph`] is a finite window of an infinite isoradial graph.
//! Vertices whose dual face is incomplete (because the window cuts through
//! it) are *boundary* vertices; every other vertex is *interior* and carries
//! a dual area. [`IsoradialGraph::boundary_distance`] gives the combinatorial
//! distance of each vertex to the nearest boundary vertex, which is what the
//! kernel and walk modules use to certify that truncation never matters.

mod generate;
mod io;
mod metric;
mod validate;

use std::f64::consts::SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use generate::generate;
pub use io::{DualRecord, EdgeRecord, FaceRecord, GraphFile, GRAPH_SCHEMA_VERSION};
pub use metric::{
    bfs_distances, combinatorial_ball, combinatorial_distance, dijkstra_distances, project,
    spanner_stats, weighted_distance, SpannerStats,
};
pub use validate::{
    check_assumptions, check_assumptions_with, validate_isoradial, AssumptionReport, FaceCheck,
    ValidationReport,
};

/// A point of the plane, identified with a complex number `x + iy`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector `e^{iθ}`.
    pub fn polar(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn l1_norm(self) -> f64 {
        self.x.abs() + self.y.abs()
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// How the square lattice relates its spacing to the mesh parameter `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpacingConvention {
    /// Lattice `hℤ²`: spacing `h`, face circumdiameter `h√2`.
    #[default]
    SpacingIsH,
    /// Face circumdiameter `h`, spacing `h/√2`.
    CircumdiameterIsH,
}

/// Graph family with its family-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    Square {
        #[serde(default)]
        spacing: SpacingConvention,
    },
    Triangular,
    /// Rhombic tiling built from two families of parallel tracks: rhombus
    /// `(i, j)` is spanned by `e^{iα_i}` and `e^{iβ_j}` with side `h/2`.
    /// Angle sequences repeat periodically over the index window.
    RhombicTracks {
        row_angles: Vec<f64>,
        col_angles: Vec<f64>,
        /// Declared `ε`: every `β_j − α_i` must lie in `[ε, π − ε]`.
        min_angle: f64,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Square { .. } => "square",
            Family::Triangular => "triangular",
            Family::RhombicTracks { .. } => "rhombic-tracks",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub family: Family,
    /// Mesh parameter.
    pub h: f64,
    /// Integer half-width of the index window.
    pub extent: usize,
}

impl GeneratorSpec {
    pub fn square(h: f64, extent: usize, spacing: SpacingConvention) -> Self {
        Self {
            family: Family::Square { spacing },
            h,
            extent,
        }
    }

    pub fn triangular(h: f64, extent: usize) -> Self {
        Self {
            family: Family::Triangular,
            h,
            extent,
        }
    }

    pub fn rhombic_tracks(
        h: f64,
        extent: usize,
        row_angles: Vec<f64>,
        col_angles: Vec<f64>,
        min_angle: f64,
    ) -> Self {
        Self {
            family: Family::RhombicTracks {
                row_angles,
                col_angles,
                min_angle,
            },
            h,
            extent,
        }
    }

    /// Diameter of every face circumcircle produced by this spec.
    pub fn circumdiameter(&self) -> f64 {
        match self.family {
            Family::Square {
                spacing: SpacingConvention::SpacingIsH,
            } => self.h * SQRT_2,
            _ => self.h,
        }
    }

    /// Shortest edge length of the family, used to size windows.
    pub fn min_edge_length(&self) -> f64 {
        match &self.family {
            Family::Square { spacing } => match spacing {
                SpacingConvention::SpacingIsH => self.h,
                SpacingConvention::CircumdiameterIsH => self.h / SQRT_2,
            },
            Family::Triangular => self.h * 3f64.sqrt() / 2.0,
            Family::RhombicTracks { min_angle, .. } => self.h * (min_angle / 2.0).sin(),
        }
    }
}

/// A primal face: its counterclockwise vertex cycle and circumcircle.
#[derive(Debug, Clone, PartialEq)]
pub struct Face<'a> {
    pub vertex_cycle: &'a [usize],
    pub circumcenter: Point,
    pub circumradius: f64,
}

/// Dual edge `e*`: circumcenters of the two faces sharing `e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEdge {
    pub faces: [usize; 2],
    pub length: f64,
}

/// Finite window of an isoradial graph together with its dual data.
#[derive(Debug, Clone)]
pub struct IsoradialGraph {
    pub(crate) h: f64,
    pub(crate) circumdiameter: f64,
    pub(crate) spec: Option<GeneratorSpec>,
    pub(crate) positions: Vec<Point>,
    pub(crate) edges: Vec<[usize; 2]>,
    pub(crate) edge_length: Vec<f64>,
    pub(crate) dual: Vec<Option<DualEdge>>,
    pub(crate) face_offsets: Vec<usize>,
    pub(crate) face_vertices: Vec<usize>,
    pub(crate) circumcenters: Vec<Point>,
    pub(crate) circumradii: Vec<f64>,
    pub(crate) adj_offsets: Vec<usize>,
    /// `(neighbor, edge id)` pairs, sorted by neighbor within each vertex.
    pub(crate) adj: Vec<(usize, usize)>,
    pub(crate) dual_area: Vec<Option<f64>>,
    pub(crate) boundary_distance: Vec<usize>,
}

/// Circumcenter of the triangle `a b c`, computed relative to `a`.
pub(crate) fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let b = b - a;
    let c = c - a;
    let d = 2.0 * b.cross(c);
    if d == 0.0 {
        return None;
    }
    let bb = b.norm_sq();
    let cc = c.norm_sq();
    Some(a + Point::new((c.y * bb - b.y * cc) / d, (b.x * cc - c.x * bb) / d))
}

fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    let origin = points[0];
    let mut twice = 0.0;
    for k in 0..n {
        let p = points[k] - origin;
        let q = points[(k + 1) % n] - origin;
        twice += p.cross(q);
    }
    0.5 * twice.abs()
}

impl IsoradialGraph {
    /// Builds a graph from raw embedding data, deriving edge lengths,
    /// circumcircles, dual edges, dual areas and boundary distances.
    ///
    /// Faces are given in compressed form: face `f` has the cycle
    /// `face_vertices[face_offsets[f]..face_offsets[f + 1]]`, counterclockwise.
    pub fn from_parts(
        h: f64,
        circumdiameter: f64,
        spec: Option<GeneratorSpec>,
        positions: Vec<Point>,
        edges: Vec<[usize; 2]>,
        face_offsets: Vec<usize>,
        face_vertices: Vec<usize>,
    ) -> Result<Self> {
        let n = positions.len();
        if !(h > 0.0 && h.is_finite()) || !(circumdiameter > 0.0 && circumdiameter.is_finite()) {
            return Err(Error::MalformedGraph(format!(
                "mesh parameters must be positive: h = {h}, circumdiameter = {circumdiameter}"
            )));
        }
        if let Some(p) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::MalformedGraph(format!("vertex {p} has a non-finite position")));
        }
        if face_offsets.first() != Some(&0) || face_offsets.last() != Some(&face_vertices.len()) {
            return Err(Error::MalformedGraph("inconsistent face offsets".into()));
        }
        for (e, &[a, b]) in edges.iter().enumerate() {
            if a >= n || b >= n || a == b {
                return Err(Error::MalformedGraph(format!("edge {e} has invalid endpoints")));
            }
        }

        // Adjacency in compressed form.
        let mut degree = vec![0usize; n];
        for &[a, b] in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets[..n].to_vec();
        let mut adj = vec![(0usize, 0usize); 2 * edges.len()];
        for (e, &[a, b]) in edges.iter().enumerate() {
            adj[fill[a]] = (b, e);
            fill[a] += 1;
            adj[fill[b]] = (a, e);
            fill[b] += 1;
        }
        for u in 0..n {
            let slice = &mut adj[adj_offsets[u]..adj_offsets[u + 1]];
            slice.sort_unstable();
            if slice.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::MalformedGraph(format!("duplicate edge at vertex {u}")));
            }
        }

        let edge_length: Vec<f64> = edges
            .iter()
            .map(|&[a, b]| positions[a].dist(positions[b]))
            .collect();

        let num_faces = face_offsets.len() - 1;
        let mut circumcenters = Vec::with_capacity(num_faces);
        let mut circumradii = Vec::with_capacity(num_faces);
        const NONE: usize = usize::MAX;
        let mut edge_faces = vec![[NONE, NONE]; edges.len()];
        for f in 0..num_faces {
            let cycle = &face_vertices[face_offsets[f]..face_offsets[f + 1]];
            if cycle.len() < 3 || cycle.iter().any(|&v| v >= n) {
                return Err(Error::MalformedGraph(format!("face {f} has an invalid cycle")));
            }
            let c = circumcenter(positions[cycle[0]], positions[cycle[1]], positions[cycle[2]])
                .ok_or_else(|| Error::MalformedGraph(format!("face {f} is degenerate")))?;
            circumcenters.push(c);
            circumradii.push(c.dist(positions[cycle[0]]));
            for k in 0..cycle.len() {
                let a = cycle[k];
                let b = cycle[(k + 1) % cycle.len()];
                let slots = &adj[adj_offsets[a]..adj_offsets[a + 1]];
                let e = slots
                    .binary_search_by_key(&b, |&(w, _)| w)
                    .map(|i| slots[i].1)
                    .map_err(|_| {
                        Error::MalformedGraph(format!("face {f} uses missing edge {a}-{b}"))
                    })?;
                let side = &mut edge_faces[e];
                if side[0] == NONE {
                    side[0] = f;
                } else if side[1] == NONE {
                    side[1] = f;
                } else {
                    return Err(Error::MalformedGraph(format!(
                        "edge {e} borders more than two faces"
                    )));
                }
            }
        }
        let dual: Vec<Option<DualEdge>> = edge_faces
            .iter()
            .map(|&[f, g]| {
                (g != NONE).then(|| DualEdge {
                    faces: [f, g],
                    length: circumcenters[f].dist(circumcenters[g]),
                })
            })
            .collect();

        let mut graph = Self {
            h,
            circumdiameter,
            spec,
            positions,
            edges,
            edge_length,
            dual,
            face_offsets,
            face_vertices,
            circumcenters,
            circumradii,
            adj_offsets,
            adj,
            dual_area: Vec::new(),
            boundary_distance: Vec::new(),
        };
        graph.dual_area = (0..n).map(|u| graph.compute_dual_area(u)).collect();
        graph.recompute_boundary_distance();
        Ok(graph)
    }

    /// Area of the dual face of `u`: the polygon through the circumcenters
    /// of the faces around `u`, taken in angular order.
    fn compute_dual_area(&self, u: usize) -> Option<f64> {
        let mut faces: Vec<usize> = Vec::with_capacity(2 * self.degree(u));
        for &(_, e) in self.neighbors(u) {
            let d = self.dual[e]?;
            faces.extend_from_slice(&d.faces);
        }
        if faces.len() < 6 {
            return None;
        }
        faces.sort_unstable();
        faces.dedup();
        let p = self.positions[u];
        let mut centers: Vec<(f64, Point)> = faces
            .iter()
            .map(|&f| {
                let c = self.circumcenters[f];
                let d = c - p;
                (d.y.atan2(d.x), c)
            })
            .collect();
        centers.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pts: Vec<Point> = centers.into_iter().map(|(_, c)| c).collect();
        Some(polygon_area(&pts))
    }

    pub(crate) fn recompute_boundary_distance(&mut self) {
        let n = self.positions.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for u in 0..n {
            if self.dual_area[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &(w, _) in self.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        self.boundary_distance = dist;
    }

    /// Mesh parameter used for scaling (lattice spacing for `hℤ²`).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Common diameter of the face circumcircles.
    pub fn circumdiameter(&self) -> f64 {
        self.circumdiameter
    }

    pub fn spec(&self) -> Option<&GeneratorSpec> {
        self.spec.as_ref()
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.face_offsets.len() - 1
    }

    pub fn position(&self, u: usize) -> Point {
        self.positions[u]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Euclidean length `|e|`.
    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_length[e]
    }

    /// Dual edge of `e`, absent when `e` lies on the outer boundary.
    pub fn dual_edge(&self, e: usize) -> Option<DualEdge> {
        self.dual[e]
    }

    /// Length `|e*|` of the dual edge.
    pub fn dual_length(&self, e: usize) -> Option<f64> {
        self.dual[e].map(|d| d.length)
    }

    pub fn face(&self, f: usize) -> Face<'_> {
        Face {
            vertex_cycle: self.face_cycle(f),
            circumcenter: self.circumcenters[f],
            circumradius: self.circumradii[f],
        }
    }

    pub fn face_cycle(&self, f: usize) -> &[usize] {
        &self.face_vertices[self.face_offsets[f]..self.face_offsets[f + 1]]
    }

    /// `(neighbor, edge id)` pairs of `u`.
    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_offsets[u]..self.adj_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj_offsets[u + 1] - self.adj_offsets[u]
    }

    /// Offset of `u`'s first adjacency slot; slots are numbered globally.
    pub(crate) fn adjacency_offset(&self, u: usize) -> usize {
        self.adj_offsets[u]
    }

    pub(crate) fn num_adjacency_slots(&self) -> usize {
        self.adj.len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_vertices()).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    /// Area `A_u` of the dual face; `None` on boundary vertices.
    pub fn dual_area(&self, u: usize) -> Option<f64> {
        self.dual_area[u]
    }

    /// Whether `u` has a complete dual face.
    pub fn is_interior(&self, u: usize) -> bool {
        self.dual_area[u].is_some()
    }

    /// Combinatorial distance to the nearest boundary vertex
    /// (`usize::MAX` when the graph has none).
    pub fn boundary_distance(&self, u: usize) -> usize {
        self.boundary_distance[u]
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(|&u| self.is_interior(u))
    }

    /// Vertices at combinatorial distance at least `margin` from the boundary.
    pub fn vertices_with_margin(&self, margin: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(move |&u| self.boundary_distance[u] >= margin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circumcenter_of_right_triangle_is_hypotenuse_midpoint() {
        let c = circumcenter(Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 2.0))
            .unwrap();
        assert!((c.x - 1.0).abs() < 1e-15 && (c.y - 1.0).abs() < 1e-15);
        assert!(circumcenter(Point::ORIGIN, Point::new(1.0, 1.0), Point::new(2.0, 2.0)).is_none());
    }

    #[test]
    fn polygon_area_of_unit_square() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert!((polygon_area(&sq) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_parts_rejects_bad_faces() {
        let pos = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let err = IsoradialGraph::from_parts(
            1.0,
            1.0,
            None,
            pos,
            vec![[0, 1], [1, 2]],
            vec![0, 3],
            vec![0, 1, 2],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedGraph(_)));
    }
}
