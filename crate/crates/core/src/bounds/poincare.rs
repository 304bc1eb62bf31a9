//! Poincaré constant on combinatorial balls.
//!
//! `C_P(n)` is the smallest `C` with
//!
//! ```text
//! Σ_{v∈B_n} m_v (f(v) − f̄)² ≤ C n² Σ_{v,w∈B_2n} ω_vw (f(w) − f(v))²
//! ```
//!
//! where the right-hand double sum runs over ordered pairs, so it equals
//! `2 fᵀLf` for the weighted Laplacian `L` of the subgraph induced by
//! `B_2n`. Hence `C_P(n) = θ/n²` with `θ` the largest generalized
//! eigenvalue of the pair `(M_c, 2L)` on functions orthogonal to constants,
//! `M_c` being the left-hand quadratic form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{combinatorial_ball, IsoradialGraph};
use crate::operators::WeightSet;
use crate::{Error, Result};

/// The two quadratic forms on the vertices of `B_2n`, indexed locally.
#[derive(Debug, Clone)]
pub struct PoincareForms {
    /// Vertices of `B_2n` by increasing distance; the first `inner` of them
    /// form `B_n`.
    pub vertices: Vec<usize>,
    pub inner: usize,
    /// `m_v` for the inner vertices.
    pub masses: Vec<f64>,
    /// Induced edges `(i, j, ω)` with `i < j` in local indices.
    pub edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    adj: Vec<(usize, f64)>,
    degree: Vec<f64>,
}

/// Builds the forms for `B_n(u)`; fails when `B_2n` reaches the boundary.
pub fn poincare_forms(g: &IsoradialGraph, w: &WeightSet, u: usize, n: usize) -> Result<PoincareForms> {
    if n == 0 {
        return Err(Error::InvalidArgument("the Poincaré radius must be at least 1".into()));
    }
    let vertices = combinatorial_ball(g, u, 2 * n)?;
    let dist = crate::geometry::bfs_distances(g, u, n);
    let inner = vertices.iter().take_while(|&&v| dist[v] <= n).count();
    let mut local = std::collections::HashMap::with_capacity(vertices.len());
    for (i, &v) in vertices.iter().enumerate() {
        local.insert(v, i);
    }
    let masses = vertices[..inner]
        .iter()
        .map(|&v| w.m[v].expect("ball is interior"))
        .collect();
    let mut edges = Vec::new();
    for (i, &v) in vertices.iter().enumerate() {
        for &(z, e) in g.neighbors(v) {
            if let Some(&j) = local.get(&z) {
                if i < j {
                    edges.push((i, j, w.omega[e].expect("ball is interior")));
                }
            }
        }
    }
    let size = vertices.len();
    let mut lists = vec![Vec::new(); size];
    let mut degree = vec![0.0; size];
    for &(i, j, om) in &edges {
        lists[i].push((j, om));
        lists[j].push((i, om));
        degree[i] += om;
        degree[j] += om;
    }
    let mut offsets = vec![0];
    let mut adj = Vec::new();
    for l in lists {
        adj.extend(l);
        offsets.push(adj.len());
    }
    Ok(PoincareForms {
        vertices,
        inner,
        masses,
        edges,
        offsets,
        adj,
        degree,
    })
}

impl PoincareForms {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    /// `M_c x`: the left-hand form, zero outside `B_n`.
    pub fn apply_mass(&self, x: &[f64]) -> Vec<f64> {
        let vol: f64 = self.masses.iter().sum();
        let mean = self.masses.iter().zip(x).map(|(m, v)| m * v).sum::<f64>() / vol;
        let mut y = vec![0.0; self.size()];
        for i in 0..self.inner {
            y[i] = self.masses[i] * (x[i] - mean);
        }
        y
    }

    /// `L x` for the induced weighted Laplacian.
    pub fn apply_laplacian(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|i| {
                let off: f64 = self.adj[self.offsets[i]..self.offsets[i + 1]]
                    .iter()
                    .map(|&(j, om)| om * x[j])
                    .sum();
                self.degree[i] * x[i] - off
            })
            .collect()
    }

    /// Left-hand side `Σ m (f − f̄)²`.
    pub fn lhs(&self, f: &[f64]) -> f64 {
        dot(f, &self.apply_mass(f))
    }

    /// Right-hand double sum over ordered pairs.
    pub fn rhs(&self, f: &[f64]) -> f64 {
        2.0 * self
            .edges
            .iter()
            .map(|&(i, j, om)| om * (f[i] - f[j]).powi(2))
            .sum::<f64>()
    }

    /// Solves `L y = b` for `b ⊥ 1` by conjugate gradients; `y ⊥ 1`.
    fn solve_laplacian(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        remove_mean(&mut r);
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let stop = 1e-28 * rr;
        for _ in 0..20 * n {
            if rr <= stop || rr == 0.0 {
                break;
            }
            let ap = self.apply_laplacian(&p);
            let alpha = rr / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        remove_mean(&mut x);
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x {
        *v -= mean;
    }
}

/// Orthonormalizes the columns against constants and each other, dropping
/// columns that are numerically dependent.
fn orthonormalize(cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols {
        remove_mean(&mut c);
        let norm0 = dot(&c, &c).sqrt();
        for _ in 0..2 {
            for q in &out {
                let s = dot(&c, q);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= s * qi;
                }
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm > 1e-10 * norm0 && norm > 0.0 {
            for v in &mut c {
                *v /= norm;
            }
            out.push(c);
        }
    }
    out
}

/// Rayleigh–Ritz for the pair `(M_c, 2L)` on `span(basis)`; returns Ritz
/// values in decreasing order and matching coefficient vectors.
fn rayleigh_ritz(forms: &PoincareForms, basis: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = basis.len();
    let mass: Vec<Vec<f64>> = basis.iter().map(|b| forms.apply_mass(b)).collect();
    let lap: Vec<Vec<f64>> = basis.iter().map(|b| forms.apply_laplacian(b)).collect();
    let a = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&basis[i], &mass[j]) + dot(&basis[j], &mass[i])));
    let b = DMatrix::from_fn(p, p, |i, j| dot(&basis[i], &lap[j]) + dot(&basis[j], &lap[i]));
    let chol = b.cholesky().expect("energy form is positive on non-constant functions");
    let l = chol.l();
    let l_inv = l.clone().try_inverse().expect("triangular factor is invertible");
    let c = &l_inv * &a * l_inv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lt_inv = l_inv.transpose();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let coeffs: DVector<f64> = &lt_inv * eig.eigenvectors.column(k);
            coeffs.iter().copied().collect()
        })
        .collect();
    (values, vectors)
}

/// `C_P(n)` at `u` by block subspace iteration on `L⁺ M_c`.
pub fn poincare_constant(g: &IsoradialGraph, w: &WeightSet, u: usize, n: usize) -> Result<f64> {
    let forms = poincare_forms(g, w, u, n)?;
    let size = forms.size();
    let block = 6.min(forms.inner - 1).max(1);
    let origin = g.position(u);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|k| {
            forms
                .vertices
                .iter()
                .map(|&v| {
                    let p = g.position(v) - origin;
                    match k {
                        0 => p.x,
                        1 => p.y,
                        _ => rng.gen::<f64>() - 0.5,
                    }
                })
                .collect()
        })
        .collect();

    let mut theta = 0.0;
    for iteration in 0..2000 {
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|col| forms.solve_laplacian(&forms.apply_mass(col)))
            .collect();
        let basis = orthonormalize(y);
        if basis.is_empty() {
            return Ok(0.0);
        }
        let (values, vectors) = rayleigh_ritz(&forms, &basis);
        let new_theta = values[0];
        x = vectors
            .iter()
            .map(|coef| {
                let mut col = vec![0.0; size];
                for (c, b) in coef.iter().zip(&basis) {
                    for (ci, bi) in col.iter_mut().zip(b) {
                        *ci += c * bi;
                    }
                }
                col
            })
            .collect();
        if iteration > 2 && (new_theta - theta).abs() <= 1e-14 * new_theta.abs() {
            theta = new_theta;
            break;
        }
        theta = new_theta;
    }
    Ok(theta / (n * n) as f64)
}
