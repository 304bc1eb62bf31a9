//! Path-product kernel bounds, volume growth, Poincaré constants and a
//! fitted Gaussian lower bound.

mod poincare;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::PI;

use serde::Serialize;

use crate::geometry::{combinatorial_ball, IsoradialGraph};
use crate::kernel::kernel_log_entries;
use crate::operators::{SparseGenerator, Variant, WeightSet};
use crate::{Error, Result};

pub use poincare::{poincare_constant, poincare_forms, PoincareForms};

/// Directed edge weights `μ_uv` in row-compressed form.
#[derive(Debug, Clone)]
pub struct PathWeights {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    log_mu: Vec<f64>,
    /// `α₂h⁻² = max μ`.
    pub mu_max: f64,
    /// `α₁h⁻² = min μ`.
    pub mu_min: f64,
    /// Maximum degree `M`.
    pub max_degree: usize,
}

impl PathWeights {
    /// `μ_uv = ω_uv/A_u` on every edge leaving an interior vertex.
    pub fn from_weights(g: &IsoradialGraph, w: &WeightSet) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut log_mu = Vec::new();
        for u in 0..g.num_vertices() {
            for (k, &(v, _)) in g.neighbors(u).iter().enumerate() {
                if let Some(mu) = w.mu_at(g, u, k) {
                    targets.push(v);
                    log_mu.push(mu.ln());
                }
            }
            offsets.push(targets.len());
        }
        Self::finish(offsets, targets, log_mu, w.consts.max_degree)
    }

    /// Reads `μ = 2Q_uv` off a variable-speed generator.
    pub fn from_generator(gen: &SparseGenerator) -> Result<Self> {
        if gen.variant() != Variant::VariableSpeed {
            return Err(Error::InvalidArgument(
                "path weights need the variable-speed generator".into(),
            ));
        }
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut log_mu = Vec::new();
        for u in 0..gen.dim() {
            let (cols, vals) = gen.row(u);
            for (&v, &q) in cols.iter().zip(vals) {
                targets.push(v);
                log_mu.push((2.0 * q).ln());
            }
            offsets.push(targets.len());
        }
        Ok(Self::finish(offsets, targets, log_mu, gen.max_row_len()))
    }

    fn finish(offsets: Vec<usize>, targets: Vec<usize>, log_mu: Vec<f64>, max_degree: usize) -> Self {
        let mu_max = log_mu.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
        let mu_min = log_mu.iter().copied().fold(f64::INFINITY, f64::min).exp();
        Self {
            offsets,
            targets,
            log_mu,
            mu_max,
            mu_min,
            max_degree,
        }
    }

    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(target, ln μ)` pairs leaving `u`.
    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()].iter().copied().zip(self.log_mu[r].iter().copied())
    }

    /// Directed breadth-first distances from `x`.
    pub fn distances(&self, x: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.dim()];
        dist[x] = 0;
        let mut queue = VecDeque::from([x]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in self.out_edges(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// `L_n(v) = max over n-step paths x → v of Σ ln μ`, for `n ≤ n_max`,
    /// with `ln μ` optionally shifted by `shift` per step.
    fn max_plus_table(&self, x: usize, n_max: usize, shift: f64) -> Vec<Vec<f64>> {
        let mut table = Vec::with_capacity(n_max + 1);
        let mut cur = vec![f64::NEG_INFINITY; self.dim()];
        cur[x] = 0.0;
        table.push(cur.clone());
        for _ in 0..n_max {
            let mut next = vec![f64::NEG_INFINITY; self.dim()];
            for u in 0..self.dim() {
                if cur[u] == f64::NEG_INFINITY {
                    continue;
                }
                for (v, lm) in self.out_edges(u) {
                    let cand = cur[u] + lm + shift;
                    if cand > next[v] {
                        next[v] = cand;
                    }
                }
            }
            table.push(next.clone());
            cur = next;
        }
        table
    }

    /// `max_γ Σ ln(μ/μ_max)` over all paths `x → v`, by Dijkstra on the
    /// nonnegative costs `−ln(μ/μ_max)`; returns `(value, path length)`.
    fn best_normalized_paths(&self, x: usize) -> Vec<(f64, usize)> {
        #[derive(PartialEq)]
        struct Key(f64, usize);
        impl Eq for Key {}
        impl PartialOrd for Key {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Key {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
            }
        }
        let ln_max = self.mu_max.ln();
        let mut best = vec![(f64::INFINITY, usize::MAX); self.dim()];
        best[x] = (0.0, 0);
        let mut heap = BinaryHeap::from([Reverse((Key(0.0, 0), x))]);
        while let Some(Reverse((Key(c, len), u))) = heap.pop() {
            if (c, len) > best[u] {
                continue;
            }
            for (v, lm) in self.out_edges(u) {
                let cand = (c + (ln_max - lm).max(0.0), len + 1);
                if cand < best[v] {
                    best[v] = cand;
                    heap.push(Reverse((Key(cand.0, cand.1), v)));
                }
            }
        }
        best.into_iter().map(|(c, len)| (-c, len)).collect()
    }
}

/// Log-domain path-product bounds on `p_t(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathProductBound {
    pub distance: usize,
    pub lower: f64,
    pub upper: f64,
    /// Path length attaining the lower-bound supremum.
    pub lower_path_len: usize,
    /// Length of the path maximizing `∏ μ/μ_max`.
    pub upper_path_len: usize,
    pub n_max: usize,
    /// Whether the per-step factor `tμ_max/n_max` is below one, which
    /// certifies that no longer path improves the lower bound.
    pub cutoff_certified: bool,
}

/// Default cutoff `d + 4⌈λ_max t⌉ + 20`.
pub fn default_n_max(distance: usize, lambda_max: f64, t: f64) -> usize {
    distance + 4 * (lambda_max * t).ceil() as usize + 20
}

/// Lower and upper path-product bounds for one pair.
pub fn metzger_bounds(
    pw: &PathWeights,
    x: usize,
    y: usize,
    t: f64,
    n_max: Option<usize>,
) -> Result<PathProductBound> {
    metzger_bounds_many(pw, x, &[y], t, n_max)?.remove(0)
}

/// Bounds from `x` to every target, sharing one dynamic program. The
/// default cutoff uses the largest target distance.
///
/// ```text
/// ln p ≥ −μ_max M t − ½ ln 2π + sup_n [n ln(t/n) + L_n(y)]
/// ln p ≤  μ_max M t + 1 + sup_γ Σ ln(μ/μ_max) + d ln(e M μ_max t / d)
/// ```
pub fn metzger_bounds_many(
    pw: &PathWeights,
    x: usize,
    targets: &[usize],
    t: f64,
    n_max: Option<usize>,
) -> Result<Vec<Result<PathProductBound>>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    for &v in std::iter::once(&x).chain(targets) {
        if v >= pw.dim() {
            return Err(Error::UnknownVertex(v));
        }
    }
    let dist = pw.distances(x);
    let far = targets
        .iter()
        .map(|&y| dist[y])
        .filter(|&d| d != usize::MAX)
        .max()
        .unwrap_or(0);
    let lambda_max = pw.mu_max * pw.max_degree as f64;
    let n_max = n_max.unwrap_or_else(|| default_n_max(far, lambda_max, t));
    let table = pw.max_plus_table(x, n_max, 0.0);
    let upper_paths = pw.best_normalized_paths(x);
    let m = pw.max_degree as f64;
    let prefactor = pw.mu_max * m * t;

    Ok(targets
        .iter()
        .map(|&y| {
            if y == x {
                return Err(Error::CoincidentEndpoints);
            }
            let d = dist[y];
            if d == usize::MAX {
                return Err(Error::Disconnected(x, y));
            }
            if n_max < d {
                return Err(Error::CutoffTooSmall { n_max, distance: d });
            }
            let mut best = (f64::NEG_INFINITY, d);
            for (n, row) in table.iter().enumerate().skip(d.max(1)) {
                let nf = n as f64;
                let val = nf * (t / nf).ln() + row[y];
                if val > best.0 {
                    best = (val, n);
                }
            }
            let lower = -prefactor - 0.5 * (2.0 * PI).ln() + best.0;
            let df = d as f64;
            let (path_factor, upper_len) = upper_paths[y];
            let upper = prefactor + 1.0 + path_factor + df * (std::f64::consts::E * m * pw.mu_max * t / df).ln();
            Ok(PathProductBound {
                distance: d,
                lower,
                upper,
                lower_path_len: best.1,
                upper_path_len: upper_len,
                n_max,
                cutoff_certified: t * pw.mu_max / (n_max as f64) < 1.0,
            })
        })
        .collect())
}

/// `max_{n ≤ n_max} max_{|γ| = n} Σ ln(μ/μ_max)` by the max-plus recursion;
/// agrees with the Dijkstra path factor whenever the optimal path has at
/// most `n_max` steps.
pub fn upper_path_factor_dp(pw: &PathWeights, x: usize, y: usize, n_max: usize) -> f64 {
    let table = pw.max_plus_table(x, n_max, -pw.mu_max.ln());
    table.iter().map(|row| row[y]).fold(f64::NEG_INFINITY, f64::max)
}

/// `ln` of `e^{−α₂h^{β−2}Mt}/√(2π) · (α₁h^{β−2}t/d)^d` with `d = d^c(x, y)`.
///
/// Only valid when `d > α₁h^{β−2}t`, where `(c/k)^k` is decreasing in `k`.
pub fn improved_lower_bound(
    w: &WeightSet,
    distance: usize,
    t: f64,
    h: f64,
    beta: f64,
) -> Result<f64> {
    if distance == 0 {
        return Err(Error::CoincidentEndpoints);
    }
    let scale = h.powf(beta - 2.0) * t;
    let c = w.consts.alpha1 * scale;
    let d = distance as f64;
    if d <= c {
        return Err(Error::Precondition(format!(
            "distance {distance} must exceed α₁h^(β−2)t = {c}"
        )));
    }
    let m = w.consts.max_degree as f64;
    Ok(-w.consts.alpha2 * scale * m - 0.5 * (2.0 * PI).ln() + d * (c / d).ln())
}

/// `vol(u, n) = Σ_{v ∈ B_n(u)} m_v`.
pub fn volume(g: &IsoradialGraph, w: &WeightSet, u: usize, n: usize) -> Result<f64> {
    let ball = combinatorial_ball(g, u, n)?;
    Ok(ball.iter().map(|&v| w.m[v].expect("ball is interior")).sum())
}

/// Least-squares fit of `ln vol(u, n)` against `ln n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub volumes: Vec<(usize, f64)>,
}

pub fn volume_growth_fit(
    g: &IsoradialGraph,
    w: &WeightSet,
    u: usize,
    n_range: std::ops::RangeInclusive<usize>,
) -> Result<VolumeFit> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if lo == 0 || hi <= lo {
        return Err(Error::InvalidArgument("need 1 ≤ start < end".into()));
    }
    let ball = combinatorial_ball(g, u, hi)?;
    let dist = crate::geometry::bfs_distances(g, u, hi);
    let mut shells = vec![0.0; hi + 1];
    for &v in &ball {
        shells[dist[v]] += w.m[v].expect("ball is interior");
    }
    let mut volumes = Vec::new();
    let mut acc = 0.0;
    for (n, s) in shells.iter().enumerate() {
        acc += s;
        if n >= lo {
            volumes.push((n, acc));
        }
    }
    let pts: Vec<(f64, f64)> = volumes.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    Ok(VolumeFit {
        exponent,
        log_prefactor: my - exponent * mx,
        volumes,
    })
}

/// Grids for [`gaussian_lower_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitGrid {
    /// Candidate `c_l`, any order.
    pub c_values: Vec<f64>,
    /// Candidate `C_l`, any order.
    pub big_c_values: Vec<f64>,
}

impl Default for FitGrid {
    /// `c_l ∈ {10^{−3}, 10^{−2.9}, …, 1}`, `C_l ∈ {0.05, 0.10, …, 5}`.
    fn default() -> Self {
        Self {
            c_values: (0..=30).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect(),
            big_c_values: (1..=100).map(|k| 0.05 * k as f64).collect(),
        }
    }
}

/// One certified sample `(u, v, t)` used by the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSample {
    pub u: usize,
    pub v: usize,
    pub t: f64,
    pub distance: usize,
    /// Certified lower end of `ln p̃_t(u, v)`.
    pub log_kernel_lower: f64,
    pub log_mass: f64,
    pub log_volume: f64,
}

impl GaussianSample {
    /// Largest `ln c_l` compatible with this sample for a given `C_l`.
    pub fn log_c_ceiling(&self, big_c: f64) -> f64 {
        let d = self.distance as f64;
        self.log_kernel_lower - self.log_mass + self.log_volume + big_c * d * d / self.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianFit {
    pub c_l: f64,
    pub big_c_l: f64,
    pub samples: Vec<GaussianSample>,
}

impl GaussianFit {
    /// Whether `(c_l, C_l)` satisfies every sample.
    pub fn holds_on(&self, samples: &[GaussianSample]) -> bool {
        samples
            .iter()
            .all(|s| self.c_l.ln() <= s.log_c_ceiling(self.big_c_l))
    }
}

/// Certified samples of `p̃` for every pair and time with `t ≥ d^c(u, v)`.
pub fn gaussian_samples(
    gen_constant_speed: &SparseGenerator,
    g: &IsoradialGraph,
    w: &WeightSet,
    pairs: &[(usize, usize)],
    times: &[f64],
    rel: f64,
) -> Result<Vec<GaussianSample>> {
    use rayon::prelude::*;
    if gen_constant_speed.variant() != Variant::ConstantSpeed {
        return Err(Error::InvalidArgument("the fit needs the constant-speed generator".into()));
    }
    let mut jobs: Vec<(usize, usize, f64, usize)> = Vec::new();
    for &(u, v) in pairs {
        let d = crate::geometry::combinatorial_distance(g, u, v)?;
        for &t in times {
            if t >= d as f64 {
                jobs.push((u, v, t, d));
            }
        }
    }
    jobs.par_iter()
        .map(|&(u, v, t, d)| {
            let e = kernel_log_entries(gen_constant_speed, u, &[v], t, rel)?[0];
            let radius = t.sqrt().floor() as usize;
            Ok(GaussianSample {
                u,
                v,
                t,
                distance: d,
                log_kernel_lower: e.log_value + (1.0 - e.rel_error_bound).ln(),
                log_mass: w.m[v].ok_or(Error::BoundaryVertex(v))?.ln(),
                log_volume: volume(g, w, u, radius)?.ln(),
            })
        })
        .collect()
}

/// Fits `p̃_t(u,v) ≥ c_l m_v / vol(u, ⌊√t⌋) · e^{−C_l d²/t}`.
///
/// Picks the smallest `C_l` on the grid for which some grid `c_l` is
/// feasible on every sample, then the largest such `c_l`.
pub fn gaussian_lower_fit(samples: Vec<GaussianSample>, grid: &FitGrid) -> Result<GaussianFit> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples with t ≥ d".into()));
    }
    let mut big_cs = grid.big_c_values.clone();
    big_cs.sort_by(f64::total_cmp);
    for big_c in big_cs {
        let ceiling = samples
            .iter()
            .map(|s| s.log_c_ceiling(big_c))
            .fold(f64::INFINITY, f64::min);
        let best = grid
            .c_values
            .iter()
            .copied()
            .filter(|c| c.ln() <= ceiling)
            .fold(f64::NEG_INFINITY, f64::max);
        if best > 0.0 {
            return Ok(GaussianFit {
                c_l: best,
                big_c_l: big_c,
                samples,
            });
        }
    }
    Err(Error::InfeasibleGrid)
}
