//! Geometric weights and the sparse heat-semigroup generators.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::IsoradialGraph;
use crate::{Error, Result};

/// Edge, vertex and directed-edge weights of a graph window.
///
/// Entries are `None` where the window cuts the dual structure: `ω` needs a
/// dual edge, and the vertex quantities need a complete dual face.
#[derive(Debug, Clone)]
pub struct WeightSet {
    /// `ω_e = |e*|/|e|` per edge.
    pub omega: Vec<Option<f64>>,
    /// `m_u = Σ_{z∼u} ω_uz` per vertex.
    pub m: Vec<Option<f64>>,
    /// Dual area `A_u` per vertex.
    pub area: Vec<Option<f64>>,
    /// Jump rate `λ(u) = m_u/(2A_u)` per vertex.
    pub lambda: Vec<Option<f64>>,
    /// `μ_uv = ω_uv/A_u` per adjacency slot of `u`.
    pub mu: Vec<Option<f64>>,
    pub consts: WeightConstants,
}

/// Constants realized on the interior of a window. `c_p`, `c_d` are relative
/// to the circumdiameter `D`; `κ` and `α` are relative to the mesh
/// parameter `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    pub c_p: f64,
    pub c_d: f64,
    #[serde(rename = "M")]
    pub max_degree: usize,
    /// `min A_u / h²`.
    pub kappa1: f64,
    /// `max A_u / h²`.
    pub kappa2: f64,
    /// `min μ h²`.
    pub alpha1: f64,
    /// `max μ h²`.
    pub alpha2: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub lambda_max: f64,
}

impl WeightSet {
    pub fn omega(&self, e: usize) -> Option<f64> {
        self.omega[e]
    }

    /// `μ_uv` for the `k`-th neighbor of `u`.
    pub fn mu_at(&self, g: &IsoradialGraph, u: usize, k: usize) -> Option<f64> {
        self.mu[g.adjacency_offset(u) + k]
    }

    /// `μ_uv` looked up by endpoint.
    pub fn mu(&self, g: &IsoradialGraph, u: usize, v: usize) -> Option<f64> {
        let k = g.neighbors(u).iter().position(|&(w, _)| w == v)?;
        self.mu_at(g, u, k)
    }
}

/// Computes all weights of `g`.
pub fn compute_weights(g: &IsoradialGraph) -> Result<WeightSet> {
    if g.num_edges() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let mut omega = Vec::with_capacity(g.num_edges());
    for e in 0..g.num_edges() {
        let len = g.edge_length(e);
        if len <= 0.0 {
            return Err(Error::ZeroLengthEdge(e));
        }
        omega.push(g.dual_length(e).map(|d| d / len));
    }

    let n = g.num_vertices();
    let mut m = vec![None; n];
    let mut lambda = vec![None; n];
    let mut mu = vec![None; g.num_adjacency_slots()];
    let area: Vec<Option<f64>> = (0..n).map(|u| g.dual_area(u)).collect();
    for u in 0..n {
        let Some(a) = area[u] else { continue };
        let mut sum = 0.0;
        let mut complete = true;
        for &(_, e) in g.neighbors(u) {
            match omega[e] {
                Some(w) => sum += w,
                None => complete = false,
            }
        }
        if !complete {
            continue;
        }
        m[u] = Some(sum);
        lambda[u] = Some(sum / (2.0 * a));
        let base = g.adjacency_offset(u);
        for (k, &(_, e)) in g.neighbors(u).iter().enumerate() {
            mu[base + k] = omega[e].map(|w| w / a);
        }
    }

    let h2 = g.h() * g.h();
    let d = g.circumdiameter();
    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (c_p, _) = fold(&mut (0..g.num_edges()).map(|e| g.edge_length(e) / d));
    let (c_d, _) = fold(&mut (0..g.num_edges()).filter_map(|e| g.dual_length(e)).map(|l| l / d));
    let (kappa1, kappa2) = fold(&mut area.iter().flatten().map(|a| a / h2));
    let (alpha1, alpha2) = fold(&mut mu.iter().flatten().map(|x| x * h2));
    let (omega_min, omega_max) = fold(&mut omega.iter().flatten().copied());
    let (m_min, m_max) = fold(&mut m.iter().flatten().copied());
    let (_, lambda_max) = fold(&mut lambda.iter().flatten().copied());
    let max_degree = (0..n)
        .filter(|&u| m[u].is_some())
        .map(|u| g.degree(u))
        .max()
        .unwrap_or(0);

    Ok(WeightSet {
        omega,
        m,
        area,
        lambda,
        mu,
        consts: WeightConstants {
            c_p,
            c_d,
            max_degree,
            kappa1,
            kappa2,
            alpha1,
            alpha2,
            omega_min,
            omega_max,
            m_min,
            m_max,
            lambda_max,
        },
    })
}

/// `(Δf)(u) = (1/A_u) Σ_{v∼u} ω_uv (f(v) − f(u))`.
pub fn apply_laplacian(g: &IsoradialGraph, w: &WeightSet, f: &[f64], u: usize) -> Result<f64> {
    if u >= g.num_vertices() {
        return Err(Error::UnknownVertex(u));
    }
    let (Some(a), Some(_)) = (w.area[u], w.m[u]) else {
        return Err(Error::BoundaryVertex(u));
    };
    let mut sum = 0.0;
    for &(v, e) in g.neighbors(u) {
        sum += w.omega[e].expect("interior vertex has all duals") * (f[v] - f[u]);
    }
    Ok(sum / a)
}

/// Which generator to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `½Δ`: entries `ω_uv/(2A_u)`.
    VariableSpeed,
    /// `½Δ̃`: entries `ω_uv/(2m_u)`.
    ConstantSpeed,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::VariableSpeed => "variable-speed",
            Variant::ConstantSpeed => "constant-speed",
        }
    }
}

/// Generator `Q` of a continuous-time chain in row-compressed form.
///
/// Only off-diagonal entries are stored in the compressed arrays; the
/// diagonal is kept separately and equals minus the off-diagonal row sum.
/// Absorbing rows (window boundary) are identically zero.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    variant: Variant,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
    absorbing: Vec<bool>,
    rate: f64,
    max_row_len: usize,
}

impl SparseGenerator {
    /// Assembles `½Δ` or `½Δ̃` on `g`.
    pub fn assemble(g: &IsoradialGraph, w: &WeightSet, variant: Variant) -> Self {
        let n = g.num_vertices();
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut cols = Vec::with_capacity(g.num_adjacency_slots());
        let mut values = Vec::with_capacity(g.num_adjacency_slots());
        let mut absorbing = vec![true; n];
        for u in 0..n {
            if let (Some(a), Some(m)) = (w.area[u], w.m[u]) {
                absorbing[u] = false;
                let denom = match variant {
                    Variant::VariableSpeed => 2.0 * a,
                    Variant::ConstantSpeed => 2.0 * m,
                };
                for &(v, e) in g.neighbors(u) {
                    cols.push(v);
                    values.push(w.omega[e].expect("interior vertex has all duals") / denom);
                }
            }
            row_offsets.push(cols.len());
        }
        Self::finish(variant, row_offsets, cols, values, absorbing)
    }

    /// Generator of a closed weighted graph: `Q[u][v] = ω_uv/(2 c_u)` for
    /// each undirected edge `(u, v, ω)`, with `c` the areas or masses.
    pub fn from_weighted_edges(
        variant: Variant,
        normalizers: &[f64],
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = normalizers.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, v, omega) in edges {
            if u >= n || v >= n || u == v || !(omega > 0.0) {
                return Err(Error::InvalidArgument(format!("bad edge ({u}, {v}, {omega})")));
            }
            rows[u].push((v, omega / (2.0 * normalizers[u])));
            rows[v].push((u, omega / (2.0 * normalizers[v])));
        }
        let mut row_offsets = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for mut r in rows {
            r.sort_by_key(|&(v, _)| v);
            for (v, q) in r {
                cols.push(v);
                values.push(q);
            }
            row_offsets.push(cols.len());
        }
        Ok(Self::finish(variant, row_offsets, cols, values, vec![false; n]))
    }

    fn finish(
        variant: Variant,
        row_offsets: Vec<usize>,
        cols: Vec<usize>,
        values: Vec<f64>,
        absorbing: Vec<bool>,
    ) -> Self {
        let n = absorbing.len();
        let diag: Vec<f64> = (0..n)
            .map(|u| -values[row_offsets[u]..row_offsets[u + 1]].iter().sum::<f64>())
            .collect();
        let rate = diag.iter().fold(0.0f64, |r, &d| r.max(-d));
        let max_row_len = row_offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        Self {
            variant,
            row_offsets,
            cols,
            values,
            diag,
            absorbing,
            rate,
            max_row_len,
        }
    }

    /// Largest number of off-diagonal entries in a row.
    pub fn max_row_len(&self) -> usize {
        self.max_row_len
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Stored nonzeros, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len() + self.diag.iter().filter(|&&d| d != 0.0).count()
    }

    /// Uniformization rate `λ_max = max_u −Q[u][u]`.
    pub fn uniformization_rate(&self) -> f64 {
        self.rate
    }

    /// Off-diagonal columns and values of row `u`.
    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[u]..self.row_offsets[u + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn diag(&self, u: usize) -> f64 {
        self.diag[u]
    }

    pub fn is_absorbing(&self, u: usize) -> bool {
        self.absorbing[u]
    }

    /// Entry `Q[u][v]`.
    pub fn get(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return self.diag[u];
        }
        let (cols, vals) = self.row(u);
        cols.iter().position(|&c| c == v).map_or(0.0, |k| vals[k])
    }

    /// `(Qf)(u)` for every `u`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|u| {
                let (cols, vals) = self.row(u);
                let off: f64 = cols.iter().zip(vals).map(|(&v, &q)| q * f[v]).sum();
                off + self.diag[u] * f[u]
            })
            .collect()
    }

    /// Row-major dense copy, for small-graph oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for (u, row) in out.iter_mut().enumerate() {
            row[u] = self.diag[u];
            let (cols, vals) = self.row(u);
            for (&v, &q) in cols.iter().zip(vals) {
                row[v] = q;
            }
        }
        out
    }

    /// Writes the triplet text format:
    ///
    /// ```text
    /// # isoheat-generator v1 dim=<n> nnz=<k> variant=<name> rate=<λ_max>
    /// <row> <col> <value>
    /// ```
    ///
    /// one line per nonzero, rows ascending, columns ascending within a
    /// row, values in `{:.17e}` so they round-trip exactly.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# isoheat-generator v1 dim={} nnz={} variant={} rate={:.17e}",
            self.dim(),
            self.nnz(),
            self.variant.name(),
            self.rate
        )?;
        for u in 0..self.dim() {
            let (cols, vals) = self.row(u);
            let mut entries: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            if self.diag[u] != 0.0 {
                entries.push((u, self.diag[u]));
            }
            entries.sort_by_key(|&(v, _)| v);
            for (v, q) in entries {
                writeln!(out, "{u} {v} {q:.17e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate, GeneratorSpec, Point, SpacingConvention};

    fn square(s: f64) -> IsoradialGraph {
        generate(&GeneratorSpec::square(s, 4, SpacingConvention::SpacingIsH)).unwrap()
    }

    #[test]
    fn square_lattice_weights() {
        let s = 0.5;
        let g = square(s);
        let w = compute_weights(&g).unwrap();
        for u in g.interior_vertices() {
            assert_eq!(w.m[u], Some(4.0));
            assert!((w.lambda[u].unwrap() - 2.0 / (s * s)).abs() < 1e-12);
        }
        assert!((w.consts.alpha1 - 1.0).abs() < 1e-12 && (w.consts.alpha2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_weight() {
        let g = generate(&GeneratorSpec::triangular(1.0, 3)).unwrap();
        let w = compute_weights(&g).unwrap();
        for om in w.omega.iter().flatten() {
            assert!((om - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_entries_on_unit_square() {
        let g = square(1.0);
        let w = compute_weights(&g).unwrap();
        let q = SparseGenerator::assemble(&g, &w, Variant::VariableSpeed);
        let qc = SparseGenerator::assemble(&g, &w, Variant::ConstantSpeed);
        let u = g.project(Point::ORIGIN);
        assert_eq!(q.diag(u), -2.0);
        assert!(q.row(u).1.iter().all(|&x| x == 0.5));
        assert_eq!(qc.diag(u), -0.5);
        assert!(qc.row(u).1.iter().all(|&x| x == 0.125));
        assert_eq!(q.uniformization_rate(), 2.0);
    }

    #[test]
    fn two_vertex_generator() {
        let q = SparseGenerator::from_weighted_edges(Variant::VariableSpeed, &[1.0, 3.0], &[(0, 1, 2.0)])
            .unwrap();
        let d = q.to_dense();
        assert_eq!(d[0][0] + d[0][1], 0.0);
        assert_eq!(d[1][0] + d[1][1], 0.0);
        assert_eq!(d[0][1], 1.0);
    }

    #[test]
    fn laplacian_of_x_squared() {
        let g = square(0.3);
        let w = compute_weights(&g).unwrap();
        let f: Vec<f64> = g.positions().iter().map(|p| p.x * p.x).collect();
        for u in g.interior_vertices() {
            assert!((apply_laplacian(&g, &w, &f, u).unwrap() - 2.0).abs() < 1e-9);
        }
        let b = (0..g.num_vertices()).find(|&u| !g.is_interior(u)).unwrap();
        assert!(matches!(apply_laplacian(&g, &w, &f, b), Err(Error::BoundaryVertex(_))));
    }

    #[test]
    fn triplets_have_header_and_count() {
        let g = square(1.0);
        let w = compute_weights(&g).unwrap();
        let q = SparseGenerator::assemble(&g, &w, Variant::VariableSpeed);
        let mut buf = Vec::new();
        q.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# isoheat-generator v1"));
        assert_eq!(lines.count(), q.nnz());
    }
}
