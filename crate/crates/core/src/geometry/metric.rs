//! Projection, graph distances and combinatorial balls.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{IsoradialGraph, Point};
use crate::{Error, Result};

impl IsoradialGraph {
    /// Closest vertex to `p`; ties go to the smallest `(x, y, id)`.
    pub fn project(&self, p: Point) -> usize {
        project(self, p)
    }
}

/// Closest vertex to `p`; ties go to the smallest `(x, y, id)`.
pub fn project(g: &IsoradialGraph, p: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (v, q) in g.positions.iter().enumerate() {
        let d = (*q - p).norm_sq();
        let better = match d.total_cmp(&best_d) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => {
                let b = g.positions[best];
                (q.x, q.y).partial_cmp(&(b.x, b.y)) == Some(std::cmp::Ordering::Less)
            }
            std::cmp::Ordering::Greater => false,
        };
        if better {
            best = v;
            best_d = d;
        }
    }
    best
}

fn check_vertex(g: &IsoradialGraph, u: usize) -> Result<()> {
    if u >= g.num_vertices() {
        return Err(Error::UnknownVertex(u));
    }
    Ok(())
}

/// Breadth-first distances from `source`, stopping after depth `limit`.
/// Unreached vertices get `usize::MAX`.
pub fn bfs_distances(g: &IsoradialGraph, source: usize, limit: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_vertices()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        if dist[u] == limit {
            continue;
        }
        for &(w, _) in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Shortest-path distances with Euclidean edge lengths from `source`.
pub fn dijkstra_distances(g: &IsoradialGraph, source: usize) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }

    let mut dist = vec![f64::INFINITY; g.num_vertices()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Reverse((Key(0.0), source))]);
    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(w, e) in g.neighbors(u) {
            let nd = d + g.edge_length(e);
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((Key(nd), w)));
            }
        }
    }
    dist
}

/// Weighted graph distance `d_h(u, v)`.
pub fn weighted_distance(g: &IsoradialGraph, u: usize, v: usize) -> Result<f64> {
    check_vertex(g, u)?;
    check_vertex(g, v)?;
    let d = dijkstra_distances(g, u)[v];
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Disconnected(u, v))
    }
}

/// Combinatorial distance `d^c(u, v)`.
pub fn combinatorial_distance(g: &IsoradialGraph, u: usize, v: usize) -> Result<usize> {
    check_vertex(g, u)?;
    check_vertex(g, v)?;
    match bfs_distances(g, u, usize::MAX)[v] {
        usize::MAX => Err(Error::Disconnected(u, v)),
        d => Ok(d),
    }
}

/// The ball `B_n(u)` in increasing distance order (ties by id). Fails when
/// the ball contains a boundary vertex, since the window would then cut it.
pub fn combinatorial_ball(g: &IsoradialGraph, u: usize, n: usize) -> Result<Vec<usize>> {
    check_vertex(g, u)?;
    if g.boundary_distance(u) <= n {
        return Err(Error::BallClipped { center: u, radius: n });
    }
    let dist = bfs_distances(g, u, n);
    let mut ball: Vec<usize> = (0..g.num_vertices()).filter(|&v| dist[v] <= n).collect();
    ball.sort_by_key(|&v| (dist[v], v));
    Ok(ball)
}

/// Extremes of `d_h/|u−v|` and `h·d^c/|u−v|` over a set of vertex pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpannerStats {
    pub pairs: usize,
    pub max_weighted_ratio: f64,
    pub min_weighted_ratio: f64,
    /// Uses the circumdiameter as the length scale.
    pub max_combinatorial_ratio: f64,
    pub min_combinatorial_ratio: f64,
}

/// Spanner ratios from every `source` to every interior vertex.
pub fn spanner_stats(g: &IsoradialGraph, sources: &[usize]) -> SpannerStats {
    use rayon::prelude::*;
    let per_source: Vec<SpannerStats> = sources
        .par_iter()
        .map(|&u| {
            let dw = dijkstra_distances(g, u);
            let dc = bfs_distances(g, u, usize::MAX);
            let mut s = SpannerStats {
                pairs: 0,
                max_weighted_ratio: 0.0,
                min_weighted_ratio: f64::INFINITY,
                max_combinatorial_ratio: 0.0,
                min_combinatorial_ratio: f64::INFINITY,
            };
            let pu = g.position(u);
            for v in g.interior_vertices() {
                if v == u || dc[v] == usize::MAX {
                    continue;
                }
                let euclid = pu.dist(g.position(v));
                let rw = dw[v] / euclid;
                let rc = g.circumdiameter() * dc[v] as f64 / euclid;
                s.pairs += 1;
                s.max_weighted_ratio = s.max_weighted_ratio.max(rw);
                s.min_weighted_ratio = s.min_weighted_ratio.min(rw);
                s.max_combinatorial_ratio = s.max_combinatorial_ratio.max(rc);
                s.min_combinatorial_ratio = s.min_combinatorial_ratio.min(rc);
            }
            s
        })
        .collect();
    per_source.into_iter().fold(
        SpannerStats {
            pairs: 0,
            max_weighted_ratio: 0.0,
            min_weighted_ratio: f64::INFINITY,
            max_combinatorial_ratio: 0.0,
            min_combinatorial_ratio: f64::INFINITY,
        },
        |a, b| SpannerStats {
            pairs: a.pairs + b.pairs,
            max_weighted_ratio: a.max_weighted_ratio.max(b.max_weighted_ratio),
            min_weighted_ratio: a.min_weighted_ratio.min(b.min_weighted_ratio),
            max_combinatorial_ratio: a.max_combinatorial_ratio.max(b.max_combinatorial_ratio),
            min_combinatorial_ratio: a.min_combinatorial_ratio.min(b.min_combinatorial_ratio),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate, GeneratorSpec, SpacingConvention};

    fn unit_square(extent: usize) -> IsoradialGraph {
        generate(&GeneratorSpec::square(1.0, extent, SpacingConvention::SpacingIsH)).unwrap()
    }

    #[test]
    fn projection_ties_go_left() {
        let g = unit_square(3);
        let v = g.project(Point::new(0.5, 0.0));
        assert_eq!(g.position(v), Point::new(0.0, 0.0));
        let v = g.project(Point::new(0.3, 0.1));
        assert_eq!(g.position(v), Point::ORIGIN);
        let v = g.project(Point::new(0.5, 0.5));
        assert_eq!(g.position(v), Point::new(0.0, 0.0));
    }

    #[test]
    fn lattice_distances() {
        let g = unit_square(5);
        let u = g.project(Point::ORIGIN);
        let v = g.project(Point::new(3.0, 4.0));
        assert_eq!(combinatorial_distance(&g, u, v).unwrap(), 7);
        assert!((weighted_distance(&g, u, v).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(combinatorial_distance(&g, u, u).unwrap(), 0);
        assert_eq!(weighted_distance(&g, u, u).unwrap(), 0.0);
        assert!(matches!(combinatorial_distance(&g, u, 10_000), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn balls_have_diamond_sizes() {
        let g = unit_square(6);
        let u = g.project(Point::ORIGIN);
        for n in 0..5 {
            assert_eq!(combinatorial_ball(&g, u, n).unwrap().len(), 2 * n * n + 2 * n + 1);
        }
        assert_eq!(combinatorial_ball(&g, u, 0).unwrap(), vec![u]);
        assert!(matches!(
            combinatorial_ball(&g, u, 6),
            Err(Error::BallClipped { .. })
        ));
    }
}
