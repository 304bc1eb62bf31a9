//! Invariant suite run by `isoheat check` on a stored graph.

use serde::Serialize;

use isoheat::bounds::{metzger_bounds_many, PathWeights};
use isoheat::geometry::validate_isoradial;
use isoheat::kernel::{finite_kernel_row, kernel_row, step_cutoff};
use isoheat::operators::{apply_laplacian, compute_weights};
use isoheat::{Error, IsoradialGraph, SparseGenerator, Variant, WeightSet};

/// Graphs above this size skip the kernel invariants.
const KERNEL_VERTEX_LIMIT: usize = 20_000;
const KERNEL_TOL: f64 = 1e-12;
const QUADRATIC_TOL: f64 = 1e-9;
const REVERSIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Invariant {
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl Invariant {
    fn measured(name: &'static str, measured: f64, limit: f64, detail: String) -> Self {
        Self {
            name,
            passed: measured <= limit,
            skipped: false,
            measured,
            limit,
            detail,
        }
    }

    fn skipped(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            skipped: true,
            measured: f64::NAN,
            limit: f64::NAN,
            detail,
        }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            skipped: false,
            measured: f64::NAN,
            limit: f64::NAN,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub h: f64,
    pub circumdiameter: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub c_p: f64,
    pub c_d: f64,
    pub max_degree: usize,
    pub invariants: Vec<Invariant>,
    pub passed: bool,
}

pub fn run_checks(g: &IsoradialGraph, tol: f64) -> Result<CheckReport, Error> {
    let w = compute_weights(g)?;
    let mut invariants = vec![isoradial(g, tol), weight_bounds(g, &w, tol), quadratic(g, &w)];
    if g.num_vertices() > KERNEL_VERTEX_LIMIT {
        let why = format!("{} vertices exceed the limit {KERNEL_VERTEX_LIMIT}", g.num_vertices());
        invariants.push(Invariant::skipped("kernel-reversibility", why.clone()));
        invariants.push(Invariant::skipped("path-product-bounds", why));
    } else {
        let gen = SparseGenerator::assemble(g, &w, Variant::VariableSpeed);
        invariants.push(reversibility(g, &gen));
        invariants.push(path_bounds(g, &gen));
    }
    let passed = invariants.iter().all(|i| i.passed);
    Ok(CheckReport {
        vertices: g.num_vertices(),
        edges: g.num_edges(),
        faces: g.num_faces(),
        h: g.h(),
        circumdiameter: g.circumdiameter(),
        omega_min: w.consts.omega_min,
        omega_max: w.consts.omega_max,
        c_p: w.consts.c_p,
        c_d: w.consts.c_d,
        max_degree: w.consts.max_degree,
        invariants,
        passed,
    })
}

fn isoradial(g: &IsoradialGraph, tol: f64) -> Invariant {
    let r = validate_isoradial(g, tol);
    let mut inv = Invariant::measured(
        "isoradial",
        r.max_deviation,
        tol,
        format!(
            "centers inside: {}, max |e|/D {:.6}, max |e*|/D {:.6}, orthogonality defect {:.3e}, crossings {}",
            r.all_centers_inside, r.max_edge_ratio, r.max_dual_ratio, r.max_orthogonality_defect, r.crossings
        ),
    );
    inv.passed = r.all_invariants_hold();
    inv
}

/// Every dual edge must join the circumcenters of its faces, and each
/// rhombus must satisfy `|e|² + |e*|² = D²`, so that `ω = tan θ`.
fn weight_bounds(g: &IsoradialGraph, w: &WeightSet, tol: f64) -> Invariant {
    let d = g.circumdiameter();
    let mut worst = 0.0f64;
    let mut worst_edge = None;
    for e in 0..g.num_edges() {
        let Some(dual) = g.dual_edge(e) else { continue };
        let primal = g.edge_length(e);
        let centers = g.face(dual.faces[0]).circumcenter.dist(g.face(dual.faces[1]).circumcenter);
        let defect = ((dual.length - centers).abs() / d).max((primal * primal + dual.length * dual.length - d * d).abs() / (d * d));
        if worst_edge.is_none() || defect > worst {
            worst = defect;
            worst_edge = Some(e);
        }
    }
    let detail = match worst_edge {
        Some(e) => format!(
            "omega in [{:.12}, {:.12}], worst edge {e}",
            w.consts.omega_min, w.consts.omega_max
        ),
        None => "no dual edges".to_string(),
    };
    Invariant::measured("weight-bounds", worst, tol, detail)
}

/// `Δ(ax² + bxy + cy²) = 2(a + c)` at every interior vertex.
fn quadratic(g: &IsoradialGraph, w: &WeightSet) -> Invariant {
    const COEFFS: [(f64, f64, f64); 3] = [(1.0, 0.0, 1.0), (0.3, -1.7, 2.2), (-1.25, 0.5, 0.25)];
    let interior: Vec<usize> = (0..g.num_vertices()).filter(|&u| w.area[u].is_some()).collect();
    if interior.is_empty() {
        return Invariant::skipped("laplacian-quadratics", "no interior vertices".into());
    }
    let mut worst = 0.0f64;
    for (a, b, c) in COEFFS {
        let f: Vec<f64> = g
            .positions()
            .iter()
            .map(|p| a * p.x * p.x + b * p.x * p.y + c * p.y * p.y)
            .collect();
        let exact = 2.0 * (a + c);
        for &u in &interior {
            match apply_laplacian(g, w, &f, u) {
                Ok(v) => worst = worst.max((v - exact).abs() / exact.abs()),
                Err(e) => return Invariant::failed("laplacian-quadratics", e.to_string()),
            }
        }
    }
    Invariant::measured(
        "laplacian-quadratics",
        worst,
        QUADRATIC_TOL,
        format!("{} interior vertices, 3 quadratics", interior.len()),
    )
}

/// Interior vertices farthest from the boundary, ties by id.
fn deepest(g: &IsoradialGraph, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = g.interior_vertices().collect();
    order.sort_by_key(|&u| (std::cmp::Reverse(g.boundary_distance(u)), u));
    order.truncate(count);
    order
}

/// Detailed balance `A_u P_u[X_t = v] = A_v P_v[X_t = u]` for the absorbed
/// walk on the window.
fn reversibility(g: &IsoradialGraph, gen: &SparseGenerator) -> Invariant {
    const NAME: &str = "kernel-reversibility";
    let sources = deepest(g, 3);
    if sources.len() < 2 {
        return Invariant::skipped(NAME, "fewer than two interior vertices".into());
    }
    let t = 2.0 / gen.uniformization_rate();
    let mut rows = Vec::new();
    for &u in &sources {
        match finite_kernel_row(gen, u, t, KERNEL_TOL) {
            Ok(r) => rows.push(r),
            Err(e) => return Invariant::failed(NAME, e.to_string()),
        }
    }
    let mut worst = 0.0f64;
    let mut max_mass = 0.0f64;
    for (i, ri) in rows.iter().enumerate() {
        max_mass = max_mass.max(ri.mass());
        for rj in &rows[i + 1..] {
            let (u, v) = (ri.source, rj.source);
            let (au, av) = (g.dual_area(u).unwrap(), g.dual_area(v).unwrap());
            let lhs = au * ri.value(v);
            let rhs = av * rj.value(u);
            let slack = au * ri.leaked_mass_bound + av * rj.leaked_mass_bound;
            let scale = lhs.abs().max(rhs.abs());
            if scale > 0.0 {
                worst = worst.max(((lhs - rhs).abs() - slack).max(0.0) / scale);
            }
        }
    }
    let mut inv = Invariant::measured(
        NAME,
        worst,
        REVERSIBILITY_TOL,
        format!("t = {t:.6}, sources {sources:?}, max row mass {max_mass:.15}"),
    );
    inv.passed &= max_mass <= 1.0 + KERNEL_TOL;
    inv
}

/// Certified kernel values lie between the path-product bounds.
fn path_bounds(g: &IsoradialGraph, gen: &SparseGenerator) -> Invariant {
    const NAME: &str = "path-product-bounds";
    let Some(&u) = deepest(g, 1).first() else {
        return Invariant::skipped(NAME, "no interior vertex".into());
    };
    // Largest halving of `1/λ_max` whose step cutoff stays off the boundary.
    let mut t = 1.0 / gen.uniformization_rate();
    while step_cutoff(gen, t, KERNEL_TOL) > g.boundary_distance(u) && t * gen.uniformization_rate() > 1e-3 {
        t /= 2.0;
    }
    let row = match kernel_row(gen, u, t, KERNEL_TOL) {
        Ok(r) => r,
        Err(Error::WindowTooSmall { .. } | Error::BoundaryHit { .. }) => {
            return Invariant::skipped(NAME, "window too small for a confined kernel row".into())
        }
        Err(e) => return Invariant::failed(NAME, e.to_string()),
    };
    let pw = match PathWeights::from_generator(gen) {
        Ok(pw) => pw,
        Err(e) => return Invariant::failed(NAME, e.to_string()),
    };
    let targets: Vec<usize> = row.iter().filter(|&(v, p)| v != u && p > 0.0).map(|(v, _)| v).collect();
    let bounds = match metzger_bounds_many(&pw, u, &targets, t, None) {
        Ok(b) => b,
        Err(e) => return Invariant::failed(NAME, e.to_string()),
    };
    // Positive slack means a violation beyond the certified error.
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for (&v, b) in targets.iter().zip(bounds) {
        let Ok(b) = b else { continue };
        let p = row.value(v);
        let hi = (p + row.leaked_mass_bound).ln();
        let lo = (p - row.leaked_mass_bound).max(f64::MIN_POSITIVE).ln();
        worst = worst.max(b.lower - hi).max(lo - b.upper);
        checked += 1;
    }
    Invariant::measured(NAME, worst, 0.0, format!("source {u}, t = {t:.6}, {checked} targets"))
}
