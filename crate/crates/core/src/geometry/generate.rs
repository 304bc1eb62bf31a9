//! Closed-form generators for the three graph families.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use super::{Family, GeneratorSpec, IsoradialGraph, Point, SpacingConvention};
use crate::{Error, Result};

/// Builds the finite window described by `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<IsoradialGraph> {
    if !(spec.h > 0.0 && spec.h.is_finite()) {
        return Err(Error::InvalidSpec(format!("h must be positive and finite, got {}", spec.h)));
    }
    if spec.extent == 0 {
        return Err(Error::InvalidSpec("extent must be at least 1".into()));
    }
    match &spec.family {
        Family::Square { spacing } => square(spec, *spacing),
        Family::Triangular => triangular(spec),
        Family::RhombicTracks {
            row_angles,
            col_angles,
            min_angle,
        } => rhombic_tracks(spec, row_angles, col_angles, *min_angle),
    }
}

fn square(spec: &GeneratorSpec, spacing: SpacingConvention) -> Result<IsoradialGraph> {
    let s = match spacing {
        SpacingConvention::SpacingIsH => spec.h,
        SpacingConvention::CircumdiameterIsH => spec.h / SQRT_2,
    };
    let e = spec.extent as i64;
    let w = (2 * e + 1) as usize;
    let id = |i: i64, j: i64| ((j + e) as usize) * w + (i + e) as usize;

    let mut positions = Vec::with_capacity(w * w);
    for j in -e..=e {
        for i in -e..=e {
            positions.push(Point::new(s * i as f64, s * j as f64));
        }
    }
    let mut edges = Vec::with_capacity(2 * w * (w - 1));
    for j in -e..=e {
        for i in -e..=e {
            if i < e {
                edges.push([id(i, j), id(i + 1, j)]);
            }
            if j < e {
                edges.push([id(i, j), id(i, j + 1)]);
            }
        }
    }
    let mut offsets = vec![0];
    let mut cycles = Vec::with_capacity(4 * (w - 1) * (w - 1));
    for j in -e..e {
        for i in -e..e {
            cycles.extend_from_slice(&[id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            offsets.push(cycles.len());
        }
    }
    IsoradialGraph::from_parts(
        spec.h,
        s * SQRT_2,
        Some(spec.clone()),
        positions,
        edges,
        offsets,
        cycles,
    )
}

fn triangular(spec: &GeneratorSpec) -> Result<IsoradialGraph> {
    let side = spec.h * 3f64.sqrt() / 2.0;
    let e = spec.extent as i64;
    let w = (2 * e + 1) as usize;
    let id = |i: i64, j: i64| ((j + e) as usize) * w + (i + e) as usize;
    let row = 3f64.sqrt() / 2.0;

    let mut positions = Vec::with_capacity(w * w);
    for j in -e..=e {
        for i in -e..=e {
            positions.push(Point::new(
                side * (i as f64 + 0.5 * j as f64),
                side * row * j as f64,
            ));
        }
    }
    let mut edges = Vec::with_capacity(3 * w * w);
    for j in -e..=e {
        for i in -e..=e {
            if i < e {
                edges.push([id(i, j), id(i + 1, j)]);
            }
            if j < e {
                edges.push([id(i, j), id(i, j + 1)]);
                if i > -e {
                    edges.push([id(i, j), id(i - 1, j + 1)]);
                }
            }
        }
    }
    let mut offsets = vec![0];
    let mut cycles = Vec::with_capacity(6 * (w - 1) * (w - 1));
    for j in -e..e {
        for i in -e..e {
            cycles.extend_from_slice(&[id(i, j), id(i + 1, j), id(i, j + 1)]);
            offsets.push(cycles.len());
            cycles.extend_from_slice(&[id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            offsets.push(cycles.len());
        }
    }
    IsoradialGraph::from_parts(
        spec.h,
        spec.h,
        Some(spec.clone()),
        positions,
        edges,
        offsets,
        cycles,
    )
}

/// Checks the bounded-angle property of a track specification.
pub(crate) fn check_track_angles(row: &[f64], col: &[f64], min_angle: f64) -> Result<()> {
    if row.is_empty() || col.is_empty() {
        return Err(Error::DegenerateAngles("angle sequences must be nonempty".into()));
    }
    if let Some(a) = row.iter().chain(col).find(|a| !a.is_finite()) {
        return Err(Error::DegenerateAngles(format!("non-finite angle {a}")));
    }
    if !(min_angle > 0.0 && min_angle <= FRAC_PI_2) {
        return Err(Error::InvalidSpec(format!(
            "min_angle must lie in (0, π/2], got {min_angle}"
        )));
    }
    let max = std::f64::consts::PI - min_angle;
    for (r, a) in row.iter().enumerate() {
        for (c, b) in col.iter().enumerate() {
            let diff = b - a;
            if !(diff >= min_angle && diff <= max) {
                return Err(Error::BoundedAngle {
                    row: r,
                    col: c,
                    diff,
                    min: min_angle,
                    max,
                });
            }
        }
    }
    Ok(())
}

/// Rhombic tiling from two track families.
///
/// Tiling vertex `(i, j)` sits at `(h/2)(F(i) + G(j))` where `F` and `G`
/// are the signed partial sums of `e^{iα}` and `e^{iβ}`. Even-parity tiling
/// vertices are primal vertices, odd-parity ones are face circumcenters,
/// and each rhombus contributes its even diagonal as a primal edge.
fn rhombic_tracks(
    spec: &GeneratorSpec,
    row_angles: &[f64],
    col_angles: &[f64],
    min_angle: f64,
) -> Result<IsoradialGraph> {
    check_track_angles(row_angles, col_angles, min_angle)?;
    let n = spec.extent as i64;
    let half = spec.h / 2.0;
    let alpha = |i: i64| row_angles[i.rem_euclid(row_angles.len() as i64) as usize];
    let beta = |j: i64| col_angles[j.rem_euclid(col_angles.len() as i64) as usize];

    let partial = |angle: &dyn Fn(i64) -> f64| -> Vec<Point> {
        // Index k in 0..=2n corresponds to position k - n.
        let mut out = vec![Point::ORIGIN; (2 * n + 1) as usize];
        for k in 1..=n {
            out[(n + k) as usize] = out[(n + k - 1) as usize] + Point::polar(angle(k - 1));
            out[(n - k) as usize] = out[(n - k + 1) as usize] - Point::polar(angle(-k));
        }
        out
    };
    let f = partial(&alpha);
    let g = partial(&beta);

    let w = (2 * n + 1) as usize;
    let cell = |i: i64, j: i64| ((j + n) as usize) * w + (i + n) as usize;
    let mut ids = vec![usize::MAX; w * w];
    let mut positions = Vec::with_capacity(w * w / 2 + 1);
    for j in -n..=n {
        for i in -n..=n {
            if (i + j).rem_euclid(2) == 0 {
                ids[cell(i, j)] = positions.len();
                positions.push((f[(i + n) as usize] + g[(j + n) as usize]) * half);
            }
        }
    }
    let mut edges = Vec::new();
    for j in -n..n {
        for i in -n..n {
            let e = if (i + j).rem_euclid(2) == 0 {
                [ids[cell(i, j)], ids[cell(i + 1, j + 1)]]
            } else {
                [ids[cell(i + 1, j)], ids[cell(i, j + 1)]]
            };
            edges.push(e);
        }
    }
    let mut offsets = vec![0];
    let mut cycles = Vec::new();
    for j in -n + 1..n {
        for i in -n + 1..n {
            if (i + j).rem_euclid(2) == 1 {
                cycles.extend_from_slice(&[
                    ids[cell(i + 1, j)],
                    ids[cell(i, j + 1)],
                    ids[cell(i - 1, j)],
                    ids[cell(i, j - 1)],
                ]);
                offsets.push(cycles.len());
            }
        }
    }
    IsoradialGraph::from_parts(
        spec.h,
        spec.h,
        Some(spec.clone()),
        positions,
        edges,
        offsets,
        cycles,
    )
}
