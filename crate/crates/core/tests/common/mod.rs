//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use isoheat::bounds::PoincareForms;
use isoheat::{IsoradialGraph, SparseGenerator};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Every shipped graph fixture with its file stem.
pub fn fixtures() -> Vec<(String, IsoradialGraph)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .expect("fixture directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, IsoradialGraph::read_json(&p).expect("fixture loads"))
        })
        .collect()
}

pub fn dense(gen: &SparseGenerator) -> DMatrix<f64> {
    let rows = gen.to_dense();
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// `e^{tQ}` by nalgebra's Padé approximant with scaling and squaring.
pub fn expm(gen: &SparseGenerator, t: f64) -> DMatrix<f64> {
    (dense(gen) * t).exp()
}

/// `ln(e^{−r} I_k(r))` from the power series, summed in log space.
pub fn ln_scaled_bessel_i(k: u32, r: f64) -> f64 {
    let k = k as f64;
    let half = (r / 2.0).ln();
    let term = |m: f64| (2.0 * m + k) * half - ln_gamma(m + 1.0) - ln_gamma(m + k + 1.0);
    // Terms peak near m ≈ r/2; sum well past the peak.
    let m_max = (r + 60.0 + 10.0 * r.sqrt()) as usize;
    let logs: Vec<f64> = (0..=m_max).map(|m| term(m as f64)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln() - r
}

/// `ln p_t` between lattice offsets `(i, j)` on `hℤ²` for the walk with
/// generator `½Δ`: the coordinates are independent walks with total jump
/// rate `1/h²`.
pub fn square_lattice_ln_kernel(h: f64, t: f64, i: i64, j: i64) -> f64 {
    let r = t / (h * h);
    ln_scaled_bessel_i(i.unsigned_abs() as u32, r) + ln_scaled_bessel_i(j.unsigned_abs() as u32, r)
}

/// Largest generalized eigenvalue of `(M_c, 2L)` off the constants, from a
/// dense eigendecomposition of `L`.
pub fn dense_poincare_theta(forms: &PoincareForms) -> f64 {
    let n = forms.size();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(i, j, om) in &forms.edges {
        l[(i, j)] -= om;
        l[(j, i)] -= om;
        l[(i, i)] += om;
        l[(j, j)] += om;
    }
    let vol: f64 = forms.masses.iter().sum();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..forms.inner {
        m[(i, i)] += forms.masses[i];
        for j in 0..forms.inner {
            m[(i, j)] -= forms.masses[i] * forms.masses[j] / vol;
        }
    }
    let eig = l.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // Drop the constant mode.
    let keep = &order[1..];
    let basis = DMatrix::from_fn(n, keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] / (2.0 * eig.eigenvalues[keep[c]]).sqrt()
    });
    let c = basis.transpose() * m * &basis;
    c.symmetric_eigen().eigenvalues.max()
}
