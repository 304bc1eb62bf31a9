//! Short-time scaling sweeps over decreasing mesh size.
//!
//! Each sweep evaluates one certified kernel quantity per `h` on a window
//! sized from the kernel's own step cutoff, and compares a rescaled log
//! value with its limit:
//!
//! | Regime | Scaled quantity | Target |
//! |--------|-----------------|--------|
//! | Euclidean (`β < 1`) | `h^β ln p_{h^β t}(x, y)` | `−|x−y|²/(2t)` |
//! | Graph (`β > 1`) | `h/ln h^{β−1} · ln p_{h^β t}(x, y)` | `h·d^c(x, y)` |
//! | LDP (`β < 1`) | `h^β ln P[X_{h^β T} ∈ U]` | `−inf_U |u−x|²/(2T)` |
//!
//! Convergence verdicts are trend checks against a calibrated threshold;
//! no limit value is asserted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{combinatorial_distance, generate, Family, GeneratorSpec, IsoradialGraph, Point};
use crate::kernel::{kernel_event_probability, kernel_log_entry, step_cutoff, Disk, Region};
use crate::operators::{compute_weights, SparseGenerator, Variant};
use crate::{Error, Result};

/// `Λ*(v) = |v|²/2`.
pub fn rate_function(v: Point) -> f64 {
    0.5 * v.norm_sq()
}

/// `−inf_{u ∈ U} |u − x|²/(2T)` for a disk `U`, attained on the straight
/// line from `x` toward the center.
pub fn ldp_target(x: Point, region: &Disk, big_t: f64) -> f64 {
    -rate_function(Point::new(region.infimum_distance(x), 0.0)) / big_t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Euclidean,
    Graph,
    Ldp,
}

/// Parameters shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    pub x: Point,
    pub y: Point,
    /// Unscaled time; the kernel is evaluated at `h^β t`.
    pub t: f64,
    pub beta: f64,
    /// Strictly decreasing mesh sizes.
    pub h_sequence: Vec<f64>,
    /// Relative tolerance of log entries (Euclidean and graph sweeps) or
    /// absolute tolerance of event probabilities (LDP sweep).
    pub tol: f64,
    /// Final `|gap|` below which a monotone sweep counts as converging.
    pub threshold: f64,
    /// Refuse windows with more vertices than this.
    pub max_vertices: usize,
}

impl SweepConfig {
    pub fn validate(&self, regime: Regime) -> Result<()> {
        if self.beta == 1.0 {
            return Err(Error::CriticalBeta);
        }
        let ok_beta = match regime {
            Regime::Euclidean | Regime::Ldp => self.beta > 0.0 && self.beta < 1.0,
            Regime::Graph => self.beta > 1.0 && self.beta.is_finite(),
        };
        if !ok_beta {
            return Err(Error::Config(format!(
                "beta = {} is outside the range of the {regime:?} regime",
                self.beta
            )));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::Config(format!("t must be positive, got {}", self.t)));
        }
        if self.h_sequence.is_empty()
            || self.h_sequence.iter().any(|&h| !(h > 0.0 && h.is_finite()))
            || self.h_sequence.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config("h sequence must be positive and strictly decreasing".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Config("x and y must be finite".into()));
        }
        Ok(())
    }
}

/// One mesh size of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub window_vertices: usize,
    pub distance: usize,
    /// `h·d^c(x, y)`.
    pub h_distance: f64,
    /// `ln p` (or `ln P[X ∈ U]`) at time `h^β t`.
    pub log_kernel: f64,
    pub scaled_log_kernel: f64,
    pub target: f64,
    pub gap: f64,
    /// Certified bound on the error of `scaled_log_kernel`.
    pub kernel_error_bound: f64,
    pub steps_used: usize,
    /// Error bound above 1% of the scaled value, or a failed certificate.
    pub flagged: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub regime: Regime,
    pub beta: f64,
    pub t: f64,
    pub x: Point,
    pub y: Point,
    pub threshold: f64,
    pub rows: Vec<SweepRow>,
    /// `‖x − y‖₁`, the limit of `h·d^c` on the square lattice.
    pub l1_limit: Option<f64>,
    pub verdict: Verdict,
}

impl SweepResult {
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap.abs()).collect()
    }

    /// Writes one CSV row per mesh size.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `h,value,target` columns for plotting.
    pub fn write_plot_data<W: std::io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Point3 {
            h: f64,
            value: f64,
            target: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(Point3 {
                h: r.h,
                value: r.scaled_log_kernel,
                target: r.target,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Converging iff no row failed, `|gap|` is nonincreasing over the last
/// three rows and the final `|gap|` is below the threshold.
pub fn verdict(rows: &[SweepRow], threshold: f64) -> Verdict {
    if rows.is_empty() || rows.iter().any(|r| r.failure.is_some() || r.flagged) {
        return Verdict::Inconclusive;
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.abs()).collect();
    let tail = &gaps[gaps.len().saturating_sub(3)..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0]);
    if monotone && *gaps.last().unwrap() < threshold {
        Verdict::Converging
    } else {
        Verdict::Inconclusive
    }
}

struct Window {
    graph: IsoradialGraph,
    generator: SparseGenerator,
    x: usize,
    y: usize,
}

fn estimated_vertices(family: &Family, extent: usize) -> usize {
    let side = 2 * extent + 1;
    match family {
        Family::RhombicTracks { .. } => side * side / 2 + 1,
        _ => side * side,
    }
}

/// Generates a window in which `x` has boundary distance at least `radius`.
fn build_window(cfg: &SweepConfig, h: f64, radius: usize) -> Result<Window> {
    let probe = GeneratorSpec {
        family: cfg.family.clone(),
        h,
        extent: 1,
    };
    let offset = (cfg.x.norm() / probe.min_edge_length()).ceil() as usize + 1;
    let mut extent = radius + offset + 2;
    for _ in 0..8 {
        let need = estimated_vertices(&cfg.family, extent);
        if need > cfg.max_vertices {
            return Err(Error::InvalidArgument(format!(
                "window of extent {extent} needs about {need} vertices, above the limit {}",
                cfg.max_vertices
            )));
        }
        let graph = generate(&GeneratorSpec {
            family: cfg.family.clone(),
            h,
            extent,
        })?;
        let x = graph.project(cfg.x);
        let y = graph.project(cfg.y);
        let bx = graph.boundary_distance(x);
        if bx >= radius && graph.is_interior(y) {
            let w = compute_weights(&graph)?;
            let generator = SparseGenerator::assemble(&graph, &w, Variant::VariableSpeed);
            return Ok(Window {
                graph,
                generator,
                x,
                y,
            });
        }
        extent += radius.saturating_sub(bx) + 2;
    }
    Err(Error::InvalidArgument("could not size the window".into()))
}

/// Jump-rate ceiling of the family at mesh size `h`, from a small window.
fn family_rate(family: &Family, h: f64) -> Result<f64> {
    let period = match family {
        Family::RhombicTracks {
            row_angles,
            col_angles,
            ..
        } => row_angles.len().max(col_angles.len()),
        _ => 1,
    };
    let g = generate(&GeneratorSpec {
        family: family.clone(),
        h,
        extent: 2 * period + 3,
    })?;
    Ok(compute_weights(&g)?.consts.lambda_max)
}

/// Evaluates `ln p_{h^β t}(x, y)` with retries on windows that turn out too
/// small; returns the row core `(window, distance, log entry)`.
fn log_kernel_at(cfg: &SweepConfig, h: f64) -> Result<(usize, usize, crate::kernel::LogEntry)> {
    let time = h.powf(cfg.beta) * cfg.t;
    let rate = family_rate(&cfg.family, h)?;
    let min_edge = GeneratorSpec {
        family: cfg.family.clone(),
        h,
        extent: 1,
    }
    .min_edge_length();
    let d_est = ((cfg.x - cfg.y).norm() / min_edge).ceil() as usize;
    let mut radius = step_cutoff_for(rate * time, 1e-12).max(d_est + 2);
    for _ in 0..8 {
        let win = build_window(cfg, h, radius)?;
        let d = combinatorial_distance(&win.graph, win.x, win.y)?;
        match kernel_log_entry(&win.generator, win.x, win.y, time, cfg.tol) {
            Ok(entry) => return Ok((win.graph.num_vertices(), d, entry)),
            Err(Error::WindowTooSmall { required, .. }) => {
                radius = required.max(radius + 1);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument("window sizing did not converge".into()))
}

fn step_cutoff_for(big_lambda: f64, tol: f64) -> usize {
    crate::logmath::poisson_cutoff(big_lambda, (tol / 2.0).ln())
}

fn failed_row(h: f64, err: Error) -> SweepRow {
    SweepRow {
        h,
        window_vertices: 0,
        distance: 0,
        h_distance: f64::NAN,
        log_kernel: f64::NAN,
        scaled_log_kernel: f64::NAN,
        target: f64::NAN,
        gap: f64::NAN,
        kernel_error_bound: f64::NAN,
        steps_used: 0,
        flagged: true,
        failure: Some(err.to_string()),
    }
}

fn finish_row(mut row: SweepRow) -> SweepRow {
    row.gap = row.scaled_log_kernel - row.target;
    let scale = row.scaled_log_kernel.abs();
    row.flagged = !(row.kernel_error_bound <= 0.01 * scale) && row.kernel_error_bound > 0.0;
    row
}

fn run_rows(cfg: &SweepConfig, f: impl Fn(f64) -> Result<SweepRow> + Sync) -> Vec<SweepRow> {
    cfg.h_sequence
        .par_iter()
        .map(|&h| f(h).unwrap_or_else(|e| failed_row(h, e)))
        .collect()
}

fn l1_limit(cfg: &SweepConfig) -> Option<f64> {
    matches!(cfg.family, Family::Square { .. }).then(|| (cfg.x - cfg.y).l1_norm())
}

/// Checks `h^β ln p_{h^β t}(x, y) → −|x−y|²/(2t)` for `β < 1`.
pub fn euclidean_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate(Regime::Euclidean)?;
    let target = -(cfg.x - cfg.y).norm_sq() / (2.0 * cfg.t);
    let rows = run_rows(cfg, |h| {
        let (n, d, e) = log_kernel_at(cfg, h)?;
        let s = h.powf(cfg.beta);
        Ok(finish_row(SweepRow {
            h,
            window_vertices: n,
            distance: d,
            h_distance: h * d as f64,
            log_kernel: e.log_value,
            scaled_log_kernel: s * e.log_value,
            target,
            gap: 0.0,
            kernel_error_bound: s * e.log_error_bound(),
            steps_used: e.steps_used,
            flagged: false,
            failure: None,
        }))
    });
    Ok(SweepResult {
        regime: Regime::Euclidean,
        beta: cfg.beta,
        t: cfg.t,
        x: cfg.x,
        y: cfg.y,
        threshold: cfg.threshold,
        verdict: verdict(&rows, cfg.threshold),
        rows,
        l1_limit: l1_limit(cfg),
    })
}

/// Checks `h/ln h^{β−1} · ln p_{h^β t}(x, y) − h·d^c(x, y) → 0` for `β > 1`.
pub fn graph_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate(Regime::Graph)?;
    let rows = run_rows(cfg, |h| {
        let (n, d, e) = log_kernel_at(cfg, h)?;
        let s = h / ((cfg.beta - 1.0) * h.ln());
        Ok(finish_row(SweepRow {
            h,
            window_vertices: n,
            distance: d,
            h_distance: h * d as f64,
            log_kernel: e.log_value,
            scaled_log_kernel: s * e.log_value,
            target: h * d as f64,
            gap: 0.0,
            kernel_error_bound: s.abs() * e.log_error_bound(),
            steps_used: e.steps_used,
            flagged: false,
            failure: None,
        }))
    });
    Ok(SweepResult {
        regime: Regime::Graph,
        beta: cfg.beta,
        t: cfg.t,
        x: cfg.x,
        y: cfg.y,
        threshold: cfg.threshold,
        verdict: verdict(&rows, cfg.threshold),
        rows,
        l1_limit: l1_limit(cfg),
    })
}

/// Checks `h^β ln P[X_{h^β T} ∈ U] → −inf_U |u−x|²/(2T)` for a disk `U`.
/// `cfg.y` is ignored; `cfg.tol` is the absolute probability tolerance.
pub fn ldp_sweep(cfg: &SweepConfig, region: &Disk, big_t: f64) -> Result<SweepResult> {
    let cfg = SweepConfig {
        t: big_t,
        y: cfg.x,
        ..cfg.clone()
    };
    cfg.validate(Regime::Ldp)?;
    let target = ldp_target(cfg.x, region, big_t);
    let rows = run_rows(&cfg, |h| {
        let time = h.powf(cfg.beta) * big_t;
        let rate = family_rate(&cfg.family, h)?;
        let mut radius = step_cutoff_for(rate * time, cfg.tol);
        let mut attempt = 0;
        let (win, p) = loop {
            let win = build_window(&cfg, h, radius)?;
            match kernel_event_probability(&win.generator, &win.graph, win.x, time, region, cfg.tol) {
                Ok(p) => break (win, p),
                Err(Error::WindowTooSmall { required, .. }) if attempt < 4 => {
                    radius = required.max(radius + 1);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let s = h.powf(cfg.beta);
        let rel = p.error_bound / p.value;
        let log_err = if rel < 1.0 { -(1.0 - rel).ln() } else { f64::INFINITY };
        Ok(finish_row(SweepRow {
            h,
            window_vertices: win.graph.num_vertices(),
            distance: 0,
            h_distance: 0.0,
            log_kernel: p.value.ln(),
            scaled_log_kernel: s * p.value.ln(),
            target,
            gap: 0.0,
            kernel_error_bound: s * log_err,
            steps_used: step_cutoff(&win.generator, time, cfg.tol),
            flagged: false,
            failure: None,
        }))
    });
    Ok(SweepResult {
        regime: Regime::Ldp,
        beta: cfg.beta,
        t: big_t,
        x: cfg.x,
        y: cfg.x,
        threshold: cfg.threshold,
        verdict: verdict(&rows, cfg.threshold),
        rows,
        l1_limit: None,
    })
}

/// Walk estimate of one LDP event probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRow {
    pub h: f64,
    pub samples: usize,
    pub hits: usize,
    pub estimate: f64,
    pub standard_error: f64,
}

/// Estimates `P[X_{h^β T} ∈ U]` at every mesh size from `samples` walks of
/// the given seed. Windows are sized so that leaving them has probability
/// below `1e-12` per walk.
pub fn ldp_monte_carlo(
    cfg: &SweepConfig,
    region: &Disk,
    big_t: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<MonteCarloRow>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let cfg = SweepConfig {
        t: big_t,
        y: cfg.x,
        ..cfg.clone()
    };
    cfg.validate(Regime::Ldp)?;
    let mut rows = Vec::with_capacity(cfg.h_sequence.len());
    for &h in &cfg.h_sequence {
        let time = h.powf(cfg.beta) * big_t;
        let rate = family_rate(&cfg.family, h)?;
        let radius = step_cutoff_for(rate * time, 1e-12);
        let win = build_window(&cfg, h, radius)?;
        let w = compute_weights(&win.graph)?;
        let ends = crate::walk::sample_endpoints(&win.graph, &w, win.x, time, samples, seed)?;
        let hits = ends
            .iter()
            .filter(|&&v| region.contains(win.graph.position(v)))
            .count();
        let p = hits as f64 / samples as f64;
        rows.push(MonteCarloRow {
            h,
            samples,
            hits,
            estimate: p,
            standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
        });
    }
    Ok(rows)
}
