//! Monte Carlo sampler for the continuous-time walk.
//!
//! The walk at `u` waits an `Exp(λ(u))` time and then jumps to a neighbor
//! `v` with probability `ω_uv/m_u`. Every trajectory index owns its own
//! ChaCha stream derived from the seed, so results do not depend on how
//! trajectories are scheduled across threads.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{IsoradialGraph, Point};
use crate::kernel::KernelRow;
use crate::operators::WeightSet;
use crate::{Error, Result};

/// Piecewise-constant path: `jumps[i] = (time, vertex entered)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrajectory {
    pub start: usize,
    pub end_time: f64,
    pub seed: u64,
    pub stream: u64,
    pub jumps: Vec<(f64, usize)>,
}

impl WalkTrajectory {
    /// Vertex occupied at the end time.
    pub fn end_vertex(&self) -> usize {
        self.jumps.last().map_or(self.start, |&(_, v)| v)
    }

    /// Vertex occupied at time `s`.
    pub fn vertex_at(&self, s: f64) -> usize {
        let k = self.jumps.partition_point(|&(t, _)| t <= s);
        if k == 0 {
            self.start
        } else {
            self.jumps[k - 1].1
        }
    }

    /// Writes `time,vertex,x,y`, starting with the initial state at time 0.
    pub fn write_csv<W: Write>(&self, g: &IsoradialGraph, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            time: f64,
            vertex: usize,
            x: f64,
            y: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (time, vertex) in std::iter::once((0.0, self.start)).chain(self.jumps.iter().copied()) {
            let p = g.position(vertex);
            w.serialize(Row {
                time,
                vertex,
                x: p.x,
                y: p.y,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_start(g: &IsoradialGraph, w: &WeightSet, u0: usize, end_time: f64) -> Result<()> {
    if u0 >= g.num_vertices() {
        return Err(Error::UnknownVertex(u0));
    }
    if w.lambda[u0].is_none() {
        return Err(Error::BoundaryVertex(u0));
    }
    if !(end_time >= 0.0 && end_time.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "end time must be finite and nonnegative, got {end_time}"
        )));
    }
    Ok(())
}

/// Runs the walk from `u0` until `end_time`, calling `on_jump` per jump.
fn run<R: Rng>(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    rng: &mut R,
    mut on_jump: impl FnMut(f64, usize),
) -> Result<usize> {
    let mut time = 0.0;
    let mut v = u0;
    loop {
        let (Some(rate), Some(m)) = (w.lambda[v], w.m[v]) else {
            return Err(Error::BoundaryHit {
                start: u0,
                depth: g.boundary_distance(u0),
            });
        };
        let hold: f64 = Exp1.sample(rng);
        time += hold / rate;
        if time > end_time {
            return Ok(v);
        }
        let pick = rng.gen::<f64>() * m;
        let neighbors = g.neighbors(v);
        let mut next = neighbors[neighbors.len() - 1].0;
        let mut cumulative = 0.0;
        for &(z, e) in neighbors {
            cumulative += w.omega[e].expect("interior vertex has all duals");
            if pick < cumulative {
                next = z;
                break;
            }
        }
        v = next;
        on_jump(time, v);
    }
}

/// Samples one trajectory on stream 0 of `seed`.
pub fn sample_trajectory(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    seed: u64,
) -> Result<WalkTrajectory> {
    sample_trajectory_stream(g, w, u0, end_time, seed, 0)
}

/// Samples the trajectory with index `stream` of `seed`.
pub fn sample_trajectory_stream(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    seed: u64,
    stream: u64,
) -> Result<WalkTrajectory> {
    check_start(g, w, u0, end_time)?;
    let mut rng = stream_rng(seed, stream);
    let mut jumps = Vec::new();
    run(g, w, u0, end_time, &mut rng, |t, v| jumps.push((t, v)))?;
    Ok(WalkTrajectory {
        start: u0,
        end_time,
        seed,
        stream,
        jumps,
    })
}

/// End vertices of trajectories `0..n_samples`, in index order.
pub fn sample_endpoints(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_start(g, w, u0, end_time)?;
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| run(g, w, u0, end_time, &mut stream_rng(seed, i), |_, _| {}))
        .collect()
}

/// Counts of end vertices over `n_samples` trajectories.
pub fn endpoint_counts(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    n_samples: usize,
    seed: u64,
) -> Result<BTreeMap<usize, usize>> {
    let mut counts = BTreeMap::new();
    for v in sample_endpoints(g, w, u0, end_time, n_samples, seed)? {
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Total variation distance between empirical end-vertex counts and a
/// kernel row; mass the row leaves unaccounted counts as disagreement.
pub fn total_variation(row: &KernelRow, counts: &BTreeMap<usize, usize>, n_samples: usize) -> f64 {
    let n = n_samples as f64;
    let mut seen = 0.0;
    let mut diff = 0.0;
    for (v, p) in row.iter() {
        let q = counts.get(&v).copied().unwrap_or(0) as f64 / n;
        seen += q;
        diff += (p - q).abs();
    }
    // Empirical mass outside the ball, plus the row's own leaked mass.
    diff += (1.0 - seen).max(0.0) + row.leaked_mass_bound;
    0.5 * diff
}

/// Sample moments of `X_T − X_0` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalMoments {
    pub n_samples: usize,
    pub mean: Point,
    pub mean_se: Point,
    /// `E[Re(X_T − X_0)²]`; equals the variance since the mean is zero.
    pub var_re: f64,
    pub var_re_se: f64,
    pub var_im: f64,
    pub var_im_se: f64,
    pub cov: f64,
    pub cov_se: f64,
    /// `E[Re⁴] / (3 E[Re²]²)`, equal to one for a centered Gaussian.
    pub fourth_ratio: f64,
    pub fourth_ratio_se: f64,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Moments of the displacement over `n_samples ≥ 1000` trajectories.
pub fn empirical_moments(
    g: &IsoradialGraph,
    w: &WeightSet,
    u0: usize,
    end_time: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalMoments> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let origin = g.position(u0);
    let disp: Vec<Point> = sample_endpoints(g, w, u0, end_time, n_samples, seed)?
        .into_iter()
        .map(|v| g.position(v) - origin)
        .collect();
    let col = |f: &dyn Fn(Point) -> f64| disp.iter().map(|&d| f(d)).collect::<Vec<f64>>();
    let (mx, mx_se) = mean_and_se(&col(&|d| d.x));
    let (my, my_se) = mean_and_se(&col(&|d| d.y));
    let (sxx, sxx_se) = mean_and_se(&col(&|d| d.x * d.x));
    let (syy, syy_se) = mean_and_se(&col(&|d| d.y * d.y));
    let (sxy, sxy_se) = mean_and_se(&col(&|d| d.x * d.y));

    let n = n_samples as f64;
    let raw = |p: i32| disp.iter().map(|d| d.x.powi(p)).sum::<f64>() / n;
    let (m2, m4, m6, m8) = (raw(2), raw(4), raw(6), raw(8));
    let ratio = m4 / (3.0 * m2 * m2);
    let d4 = 1.0 / (3.0 * m2 * m2);
    let d2 = -2.0 * m4 / (3.0 * m2 * m2 * m2);
    let var = (d4 * d4 * (m8 - m4 * m4) + d2 * d2 * (m4 - m2 * m2) + 2.0 * d4 * d2 * (m6 - m2 * m4))
        / n;

    Ok(EmpiricalMoments {
        n_samples,
        mean: Point::new(mx, my),
        mean_se: Point::new(mx_se, my_se),
        var_re: sxx,
        var_re_se: sxx_se,
        var_im: syy,
        var_im_se: syy_se,
        cov: sxy,
        cov_se: sxy_se,
        fourth_ratio: ratio,
        fourth_ratio_se: var.max(0.0).sqrt(),
    })
}

fn rescale(traj: &WalkTrajectory, factor: impl Fn(usize) -> f64) -> WalkTrajectory {
    let mut out = traj.clone();
    let mut old_t = 0.0;
    let mut new_t = 0.0;
    let mut v = traj.start;
    for (slot, &(t, next)) in out.jumps.iter_mut().zip(&traj.jumps) {
        new_t += (t - old_t) * factor(v);
        *slot = (new_t, next);
        old_t = t;
        v = next;
    }
    out.end_time = new_t + (traj.end_time - old_t) * factor(v);
    out
}

/// Re-clocks a variable-speed trajectory so it runs at unit jump rate.
///
/// With `τ(t) = ∫_0^t 2A/m (X_s) ds`, a stretch spent at `v` is multiplied
/// by `m_v/(2A_v)`. The result has the law of the walk generated by `Δ̃`.
pub fn time_change(traj: &WalkTrajectory, w: &WeightSet) -> WalkTrajectory {
    rescale(traj, |v| w.lambda[v].expect("trajectory stays interior"))
}

/// Inverse of [`time_change`].
pub fn inverse_time_change(traj: &WalkTrajectory, w: &WeightSet) -> WalkTrajectory {
    rescale(traj, |v| 1.0 / w.lambda[v].expect("trajectory stays interior"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate, GeneratorSpec, SpacingConvention};
    use crate::operators::compute_weights;

    fn lattice() -> (IsoradialGraph, WeightSet, usize) {
        let g = generate(&GeneratorSpec::square(1.0, 12, SpacingConvention::SpacingIsH)).unwrap();
        let w = compute_weights(&g).unwrap();
        let u = g.project(Point::ORIGIN);
        (g, w, u)
    }

    #[test]
    fn zero_time_has_no_jumps() {
        let (g, w, u) = lattice();
        let traj = sample_trajectory(&g, &w, u, 0.0, 1).unwrap();
        assert!(traj.jumps.is_empty());
        assert_eq!(traj.end_vertex(), u);
    }

    #[test]
    fn trajectories_are_reproducible_and_adjacent() {
        let (g, w, u) = lattice();
        let a = sample_trajectory_stream(&g, &w, u, 2.0, 9, 4).unwrap();
        let b = sample_trajectory_stream(&g, &w, u, 2.0, 9, 4).unwrap();
        assert_eq!(a, b);
        let mut prev = (0.0, u);
        for &(t, v) in &a.jumps {
            assert!(t > prev.0 && t <= 2.0);
            assert!(g.neighbors(prev.1).iter().any(|&(z, _)| z == v));
            prev = (t, v);
        }
    }

    #[test]
    fn boundary_hit_is_reported() {
        let g = generate(&GeneratorSpec::square(1.0, 2, SpacingConvention::SpacingIsH)).unwrap();
        let w = compute_weights(&g).unwrap();
        let u = g.project(Point::ORIGIN);
        let err = sample_trajectory(&g, &w, u, 1e3, 3).unwrap_err();
        assert!(matches!(err, Error::BoundaryHit { depth: 2, .. }));
    }

    #[test]
    fn time_change_on_square_lattice_is_linear() {
        let (g, w, u) = lattice();
        let traj = sample_trajectory(&g, &w, u, 1.5, 2).unwrap();
        let y = time_change(&traj, &w);
        assert_eq!(y.end_time, 3.0);
        for (a, b) in traj.jumps.iter().zip(&y.jumps) {
            assert!((b.0 - 2.0 * a.0).abs() < 1e-12 && a.1 == b.1);
        }
        let back = inverse_time_change(&y, &w);
        for (a, b) in traj.jumps.iter().zip(&back.jumps) {
            assert!((a.0 - b.0).abs() < 1e-12);
        }
    }
}
