//! Heat kernel rows and entries by uniformization.
//!
//! With `P = I + Q/λ_max` and `Λ = λ_max t`,
//!
//! ```text
//! p_t(u, ·) = Σ_k Pois(Λ)(k) · δ_u P^k
//! ```
//!
//! `P` moves mass across at most one edge per step, so the first `K` terms
//! live on the combinatorial ball `B_K(u)` and never see the window boundary
//! as long as `K` does not exceed the distance from `u` to the nearest
//! absorbing vertex. The only truncation error is then the Poisson tail,
//! which is bounded in closed form. Each power is renormalized by its
//! maximum with the logarithm kept aside, so entries far below the smallest
//! positive double remain representable.

use std::io::Write;

use serde::Serialize;

use crate::geometry::{IsoradialGraph, Point};
use crate::logmath::{log_add_exp, poisson_cutoff, poisson_log_pmf, poisson_log_tail_bound};
use crate::operators::SparseGenerator;
use crate::{Error, Result};

const EPS: f64 = f64::EPSILON;

/// One row of the kernel on a truncation ball. Vertex `vertices[i]` has
/// probability `values[i] · e^{log_scale}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub source: usize,
    pub t: f64,
    pub vertices: Vec<usize>,
    pub values: Vec<f64>,
    pub log_scale: f64,
    /// Upper bound on `1 − Σ values`, covering the Poisson tail and rounding.
    pub leaked_mass_bound: f64,
    pub steps_used: usize,
}

impl KernelRow {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `(vertex, probability)` pairs in ball order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let scale = self.log_scale.exp();
        self.vertices
            .iter()
            .zip(&self.values)
            .map(move |(&v, &x)| (v, x * scale))
    }

    /// Probability at `v` (zero outside the ball).
    pub fn value(&self, v: usize) -> f64 {
        self.iter().find(|&(w, _)| w == v).map_or(0.0, |(_, p)| p)
    }

    /// Natural log of the probability at `v`.
    pub fn log_value(&self, v: usize) -> f64 {
        self.vertices
            .iter()
            .position(|&w| w == v)
            .map_or(f64::NEG_INFINITY, |i| self.values[i].ln() + self.log_scale)
    }

    /// Row as a dense vector of length `dim`.
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (v, p) in self.iter() {
            out[v] = p;
        }
        out
    }

    /// Compensated sum of the stored probabilities.
    pub fn mass(&self) -> f64 {
        neumaier_sum(self.iter().map(|(_, p)| p))
    }

    /// Writes `vertex,x,y,value,log_value` rows.
    pub fn write_csv<W: Write>(&self, g: &IsoradialGraph, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            vertex: usize,
            x: f64,
            y: f64,
            value: f64,
            log_value: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, &v) in self.vertices.iter().enumerate() {
            let p = g.position(v);
            w.serialize(Row {
                vertex: v,
                x: p.x,
                y: p.y,
                value: self.values[i] * self.log_scale.exp(),
                log_value: self.values[i].ln() + self.log_scale,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Fail as soon as an absorbing vertex could influence the result.
    Confined,
    /// Treat the finite chain, absorbing rows included, as the object.
    Finite,
}

/// Iterates `π_k = δ_u P^k` on the growing ball `B_k(u)`.
struct Propagator<'a> {
    gen: &'a SparseGenerator,
    mode: Mode,
    source: usize,
    rate: f64,
    cur: Vec<f64>,
    next: Vec<f64>,
    in_ball: Vec<bool>,
    /// Ball vertices in breadth-first order.
    ball: Vec<usize>,
    frontier_start: usize,
    steps: usize,
    /// `π_k = cur · e^{log_scale}` with `max cur = 1`.
    log_scale: f64,
    /// Sum of `|ln max|` over renormalizations, for the rounding bound.
    scale_magnitude: f64,
    /// Depth of the first ball layer containing an absorbing vertex.
    absorbing_depth: Option<usize>,
}

impl<'a> Propagator<'a> {
    fn new(gen: &'a SparseGenerator, source: usize, mode: Mode) -> Result<Self> {
        if source >= gen.dim() {
            return Err(Error::UnknownVertex(source));
        }
        if gen.is_absorbing(source) {
            return Err(Error::BoundaryVertex(source));
        }
        let n = gen.dim();
        let mut cur = vec![0.0; n];
        cur[source] = 1.0;
        let mut in_ball = vec![false; n];
        in_ball[source] = true;
        Ok(Self {
            gen,
            mode,
            source,
            rate: gen.uniformization_rate(),
            cur,
            next: vec![0.0; n],
            in_ball,
            ball: vec![source],
            frontier_start: 0,
            steps: 0,
            log_scale: 0.0,
            scale_magnitude: 0.0,
            absorbing_depth: None,
        })
    }

    /// Largest `k` for which `π_k` is unaffected by absorbing rows.
    fn exact_horizon(&self) -> usize {
        self.absorbing_depth.unwrap_or(usize::MAX)
    }

    fn window_error(&self, required: usize) -> Error {
        Error::WindowTooSmall {
            vertex: self.source,
            required,
            available: self.exact_horizon(),
        }
    }

    fn step(&mut self) -> Result<()> {
        if self.mode == Mode::Confined && self.steps >= self.exact_horizon() {
            return Err(self.window_error(self.steps + 1));
        }
        let gen = self.gen;
        let rate = self.rate;
        for &w in &self.ball {
            let x = self.cur[w];
            if x == 0.0 {
                continue;
            }
            if gen.is_absorbing(w) {
                self.next[w] += x;
                continue;
            }
            self.next[w] += x * (1.0 + gen.diag(w) / rate);
            let (cols, vals) = gen.row(w);
            for (&v, &q) in cols.iter().zip(vals) {
                self.next[v] += x * (q / rate);
            }
        }
        // Grow the ball by one layer.
        let old_len = self.ball.len();
        for i in self.frontier_start..old_len {
            let w = self.ball[i];
            for &v in gen.row(w).0 {
                if !self.in_ball[v] {
                    self.in_ball[v] = true;
                    self.ball.push(v);
                    if gen.is_absorbing(v) && self.absorbing_depth.is_none() {
                        self.absorbing_depth = Some(self.steps + 1);
                    }
                }
            }
        }
        self.frontier_start = old_len;
        self.steps += 1;

        let max = self.ball.iter().fold(0.0f64, |m, &v| m.max(self.next[v]));
        for &v in &self.ball {
            self.cur[v] = self.next[v] / max;
            self.next[v] = 0.0;
        }
        let ln_max = max.ln();
        self.log_scale += ln_max;
        self.scale_magnitude += ln_max.abs();
        Ok(())
    }

    /// First-order relative rounding bound for `Pois(k)·π_k` after `k` steps.
    fn relative_rounding(&self, big_lambda: f64) -> f64 {
        let k = self.steps as f64;
        let per_step = (self.gen.max_row_len() + 4) as f64;
        let pois = big_lambda + k * big_lambda.ln().abs() + statrs::function::gamma::ln_gamma(k + 1.0);
        8.0 * EPS * ((k + 1.0) * per_step + pois + self.scale_magnitude + self.log_scale.abs())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

/// `p_t(u, ·)` with total leaked mass at most `tol`.
///
/// Fails with [`Error::WindowTooSmall`] when the Poisson cutoff exceeds the
/// distance from `u` to the window boundary.
pub fn kernel_row(gen: &SparseGenerator, u: usize, t: f64, tol: f64) -> Result<KernelRow> {
    row_impl(gen, u, t, tol, Mode::Confined)
}

/// Row of `e^{tQ}` for the finite chain itself, absorbing rows included.
/// Used where the window is the object of interest, e.g. against a dense
/// matrix exponential of the same generator.
pub fn finite_kernel_row(gen: &SparseGenerator, u: usize, t: f64, tol: f64) -> Result<KernelRow> {
    if u < gen.dim() && gen.is_absorbing(u) {
        // An absorbing state stays put.
        check_time(t)?;
        return Ok(KernelRow {
            source: u,
            t,
            vertices: vec![u],
            values: vec![1.0],
            log_scale: 0.0,
            leaked_mass_bound: 0.0,
            steps_used: 0,
        });
    }
    row_impl(gen, u, t, tol, Mode::Finite)
}

/// Cutoff `K` used by [`kernel_row`] for the given time and tolerance.
pub fn step_cutoff(gen: &SparseGenerator, t: f64, tol: f64) -> usize {
    poisson_cutoff(gen.uniformization_rate() * t, (tol / 2.0).ln())
}

fn row_impl(gen: &SparseGenerator, u: usize, t: f64, tol: f64, mode: Mode) -> Result<KernelRow> {
    check_time(t)?;
    check_tol(tol)?;
    let mut prop = Propagator::new(gen, u, mode)?;
    let big_lambda = gen.uniformization_rate() * t;
    if big_lambda == 0.0 {
        return Ok(KernelRow {
            source: u,
            t,
            vertices: vec![u],
            values: vec![1.0],
            log_scale: 0.0,
            leaked_mass_bound: 0.0,
            steps_used: 0,
        });
    }
    let cutoff = poisson_cutoff(big_lambda, (tol / 2.0).ln());
    if mode == Mode::Confined {
        // Check the window once up front so the error reports the real need.
        let mut probe = Propagator::new(gen, u, mode)?;
        while probe.steps < cutoff && probe.frontier_start < probe.ball.len() {
            if probe.absorbing_depth.is_some_and(|d| d < cutoff) {
                return Err(probe.window_error(cutoff));
            }
            probe.grow_only();
        }
        if probe.absorbing_depth.is_some_and(|d| d < cutoff) {
            return Err(probe.window_error(cutoff));
        }
    }

    let mut acc: Vec<f64> = vec![0.0];
    let mut acc_scale = f64::NEG_INFINITY;
    for k in 0..=cutoff {
        if k > 0 {
            prop.step()?;
            acc.resize(prop.ball.len(), 0.0);
        }
        let lw = poisson_log_pmf(big_lambda, k) + prop.log_scale;
        if lw > acc_scale {
            let shrink = (acc_scale - lw).exp();
            for a in &mut acc {
                *a *= shrink;
            }
            acc_scale = lw;
        }
        let c = (lw - acc_scale).exp();
        for (a, &v) in acc.iter_mut().zip(&prop.ball) {
            *a += c * prop.cur[v];
        }
    }

    let rounding = prop.relative_rounding(big_lambda) + (acc.len() as f64 + cutoff as f64) * EPS;
    let tail = poisson_log_tail_bound(big_lambda, cutoff, 0).exp();
    if rounding > tol / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol:e} is below the attainable rounding accuracy {rounding:e}"
        )));
    }
    let mut row = KernelRow {
        source: u,
        t,
        vertices: prop.ball,
        values: acc,
        log_scale: acc_scale,
        leaked_mass_bound: tail + rounding,
        steps_used: cutoff,
    };
    // Rounding may push the computed mass a hair above one; pull it back.
    let mass = row.mass();
    if mass > 1.0 {
        let f = (1.0 - 4.0 * EPS) / mass;
        for x in &mut row.values {
            *x *= f;
        }
    }
    Ok(row)
}

impl Propagator<'_> {
    /// Grows the ball by one layer without moving mass.
    fn grow_only(&mut self) {
        let old_len = self.ball.len();
        for i in self.frontier_start..old_len {
            let w = self.ball[i];
            for &v in self.gen.row(w).0 {
                if !self.in_ball[v] {
                    self.in_ball[v] = true;
                    self.ball.push(v);
                    if self.gen.is_absorbing(v) && self.absorbing_depth.is_none() {
                        self.absorbing_depth = Some(self.steps + 1);
                    }
                }
            }
        }
        self.frontier_start = old_len;
        self.steps += 1;
    }
}

/// `ln p_t(u, v)` with a bound on the relative error of `e^{log_value}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogEntry {
    pub log_value: f64,
    pub rel_error_bound: f64,
    pub steps_used: usize,
}

impl LogEntry {
    /// Bound on `|log_value − ln p|`.
    pub fn log_error_bound(&self) -> f64 {
        if self.rel_error_bound >= 1.0 {
            f64::INFINITY
        } else {
            -(1.0 - self.rel_error_bound).ln()
        }
    }
}

/// `ln p_t(u, v)` for a single target.
pub fn kernel_log_entry(
    gen: &SparseGenerator,
    u: usize,
    v: usize,
    t: f64,
    rel: f64,
) -> Result<LogEntry> {
    Ok(kernel_log_entries(gen, u, &[v], t, rel)?[0])
}

/// `ln p_t(u, v)` for several targets sharing one propagation.
///
/// Terms are accumulated by log-sum-exp. Summation stops once the Poisson
/// tail beyond the current step is below `rel/2` times every partial sum;
/// since partial sums only grow, this certifies the relative error. Targets
/// that the walk cannot reach get `-inf` with zero error.
pub fn kernel_log_entries(
    gen: &SparseGenerator,
    u: usize,
    targets: &[usize],
    t: f64,
    rel: f64,
) -> Result<Vec<LogEntry>> {
    check_time(t)?;
    check_tol(rel)?;
    if let Some(&v) = targets.iter().find(|&&v| v >= gen.dim()) {
        return Err(Error::UnknownVertex(v));
    }
    let mut prop = Propagator::new(gen, u, Mode::Confined)?;
    let big_lambda = gen.uniformization_rate() * t;
    if big_lambda == 0.0 {
        return Ok(targets
            .iter()
            .map(|&v| LogEntry {
                log_value: if v == u { 0.0 } else { f64::NEG_INFINITY },
                rel_error_bound: 0.0,
                steps_used: 0,
            })
            .collect());
    }
    let log_half_rel = (rel / 2.0).ln();
    let mut sums = vec![f64::NEG_INFINITY; targets.len()];
    let mut ops_magnitude = 0.0f64;
    loop {
        let k = prop.steps;
        let lw = poisson_log_pmf(big_lambda, k) + prop.log_scale;
        for (s, &v) in sums.iter_mut().zip(targets) {
            let x = prop.cur[v];
            if x > 0.0 {
                *s = log_add_exp(*s, lw + x.ln());
                ops_magnitude += s.abs();
            }
        }
        let tail = poisson_log_tail_bound(big_lambda, k, 0);
        let exhausted = prop.frontier_start == prop.ball.len();
        let done = sums.iter().zip(targets).all(|(&s, &v)| {
            if s == f64::NEG_INFINITY {
                exhausted && !prop.in_ball[v]
            } else {
                tail <= log_half_rel + s
            }
        });
        if done {
            let rounding = prop.relative_rounding(big_lambda) + 4.0 * EPS * ops_magnitude;
            if rounding > rel / 2.0 {
                return Err(Error::InvalidArgument(format!(
                    "relative tolerance {rel:e} is below the attainable rounding accuracy {rounding:e}"
                )));
            }
            return Ok(sums
                .iter()
                .map(|&s| LogEntry {
                    log_value: s,
                    rel_error_bound: if s == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (tail - s).exp() + rounding
                    },
                    steps_used: k,
                })
                .collect());
        }
        if prop.steps >= prop.exact_horizon() {
            let floor = sums.iter().copied().fold(f64::INFINITY, f64::min);
            let required = if floor == f64::NEG_INFINITY {
                2 * prop.steps + 1
            } else {
                poisson_cutoff(big_lambda, log_half_rel + floor)
            };
            return Err(prop.window_error(required));
        }
        prop.step()?;
    }
}

/// Kernel moments of `X_t − u` with certified error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMoments {
    pub mean: Point,
    /// `E[Re(X_t − u)²]`.
    pub second_re: f64,
    /// `E[Im(X_t − u)²]`.
    pub second_im: f64,
    /// `E[Re(X_t − u)·Im(X_t − u)]`.
    pub cross: f64,
    /// Bound on the error of each mean coordinate.
    pub mean_error_bound: f64,
    /// Bound on the error of each second moment.
    pub second_error_bound: f64,
    pub steps_used: usize,
}

/// First and second moments of the kernel row at `u`.
///
/// Beyond the cutoff `K` the walk has moved at most `k·ℓ` after `k` steps
/// (`ℓ` the longest edge), so the neglected terms contribute at most
/// `ℓ·Σ_{k>K} Pois(k)k` to the mean and `ℓ²·Σ_{k>K} Pois(k)k²` to second
/// moments.
pub fn kernel_moments(
    gen: &SparseGenerator,
    g: &IsoradialGraph,
    u: usize,
    t: f64,
    tol: f64,
) -> Result<KernelMoments> {
    let row = kernel_row(gen, u, t, tol)?;
    let origin = g.position(u);
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut reach = 0.0f64;
    for (v, p) in row.iter() {
        let d = g.position(v) - origin;
        mx += p * d.x;
        my += p * d.y;
        sxx += p * d.x * d.x;
        syy += p * d.y * d.y;
        sxy += p * d.x * d.y;
        reach = reach.max(d.norm());
    }
    let ell = (0..g.num_edges()).map(|e| g.edge_length(e)).fold(0.0, f64::max);
    let big_lambda = gen.uniformization_rate() * t;
    let k = row.steps_used;
    let rounding = row.leaked_mass_bound - poisson_log_tail_bound(big_lambda, k, 0).exp();
    let mean_error_bound =
        ell * poisson_log_tail_bound(big_lambda, k, 1).exp() + 2.0 * rounding.max(0.0) * reach;
    let second_error_bound = ell * ell * poisson_log_tail_bound(big_lambda, k, 2).exp()
        + 2.0 * rounding.max(0.0) * reach * reach;
    Ok(KernelMoments {
        mean: Point::new(mx, my),
        second_re: sxx,
        second_im: syy,
        cross: sxy,
        mean_error_bound,
        second_error_bound,
        steps_used: k,
    })
}

/// A set of points in the plane.
pub trait Region: Sync {
    fn contains(&self, p: Point) -> bool;
}

impl<F: Fn(Point) -> bool + Sync> Region for F {
    fn contains(&self, p: Point) -> bool {
        self(p)
    }
}

/// Closed Euclidean disk. Membership allows a relative slack of
/// [`Disk::BOUNDARY_SLACK`] so that lattice points on the circle are not
/// lost to coordinate rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub const BOUNDARY_SLACK: f64 = 1e-12;

    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    /// `inf_{p ∈ disk} |p − x|`.
    pub fn infimum_distance(&self, x: Point) -> f64 {
        (self.center.dist(x) - self.radius).max(0.0)
    }
}

impl Region for Disk {
    fn contains(&self, p: Point) -> bool {
        p.dist(self.center) <= self.radius * (1.0 + Self::BOUNDARY_SLACK)
    }
}

/// Probability with an additive error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventProbability {
    pub value: f64,
    pub error_bound: f64,
}

/// `P[X_t ∈ U]` started from `u`, to additive accuracy `tol`.
pub fn kernel_event_probability(
    gen: &SparseGenerator,
    g: &IsoradialGraph,
    u: usize,
    t: f64,
    region: &dyn Region,
    tol: f64,
) -> Result<EventProbability> {
    let row = kernel_row(gen, u, t, tol)?;
    let value = neumaier_sum(
        row.iter()
            .filter(|&(v, _)| region.contains(g.position(v)))
            .map(|(_, p)| p),
    );
    Ok(EventProbability {
        value,
        error_bound: row.leaked_mass_bound,
    })
}
