//! JSON graph serialization.
//!
//! The file stores the embedding together with every derived quantity
//! (`|e|`, `|e*|`, circumcircles, dual areas). Loading rebuilds the topology
//! from the embedding but keeps the stored measurements, so a file whose
//! numbers were edited is detected by the invariant checks rather than
//! silently repaired.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeneratorSpec, IsoradialGraph, Point};
use crate::{Error, Result};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualRecord {
    pub faces: [usize; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub endpoints: [usize; 2],
    pub length: f64,
    pub dual: Option<DualRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceRecord {
    pub cycle: Vec<usize>,
    pub circumcenter: Point,
    pub circumradius: f64,
}

/// On-disk form of an [`IsoradialGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub schema_version: u32,
    pub h: f64,
    pub circumdiameter: f64,
    pub generator: Option<GeneratorSpec>,
    pub vertices: Vec<Point>,
    /// `null` marks a boundary vertex.
    pub dual_areas: Vec<Option<f64>>,
    pub edges: Vec<EdgeRecord>,
    pub faces: Vec<FaceRecord>,
}

impl IsoradialGraph {
    pub fn to_graph_file(&self) -> GraphFile {
        GraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            h: self.h,
            circumdiameter: self.circumdiameter,
            generator: self.spec.clone(),
            vertices: self.positions.clone(),
            dual_areas: self.dual_area.clone(),
            edges: (0..self.num_edges())
                .map(|e| EdgeRecord {
                    endpoints: self.edges[e],
                    length: self.edge_length[e],
                    dual: self.dual[e].map(|d| DualRecord {
                        faces: d.faces,
                        length: d.length,
                    }),
                })
                .collect(),
            faces: (0..self.num_faces())
                .map(|f| FaceRecord {
                    cycle: self.face_cycle(f).to_vec(),
                    circumcenter: self.circumcenters[f],
                    circumradius: self.circumradii[f],
                })
                .collect(),
        }
    }

    pub fn from_graph_file(file: GraphFile) -> Result<Self> {
        if file.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(Error::MalformedGraph(format!(
                "unsupported schema version {} (expected {GRAPH_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let n = file.vertices.len();
        if file.dual_areas.len() != n {
            return Err(Error::MalformedGraph("dual_areas length differs from vertex count".into()));
        }
        let mut offsets = Vec::with_capacity(file.faces.len() + 1);
        offsets.push(0);
        let mut cycles = Vec::new();
        for f in &file.faces {
            cycles.extend_from_slice(&f.cycle);
            offsets.push(cycles.len());
        }
        let edges: Vec<[usize; 2]> = file.edges.iter().map(|e| e.endpoints).collect();
        let mut g = IsoradialGraph::from_parts(
            file.h,
            file.circumdiameter,
            file.generator,
            file.vertices,
            edges,
            offsets,
            cycles,
        )?;

        for (e, rec) in file.edges.iter().enumerate() {
            g.edge_length[e] = rec.length;
            match (&mut g.dual[e], &rec.dual) {
                (Some(d), Some(r)) => {
                    let mut ours = d.faces;
                    let mut theirs = r.faces;
                    ours.sort_unstable();
                    theirs.sort_unstable();
                    if ours != theirs {
                        return Err(Error::MalformedGraph(format!(
                            "edge {e}: stored dual faces disagree with the face cycles"
                        )));
                    }
                    d.faces = r.faces;
                    d.length = r.length;
                }
                (None, None) => {}
                _ => {
                    return Err(Error::MalformedGraph(format!(
                        "edge {e}: stored dual presence disagrees with the face cycles"
                    )))
                }
            }
        }
        for (f, rec) in file.faces.iter().enumerate() {
            g.circumcenters[f] = rec.circumcenter;
            g.circumradii[f] = rec.circumradius;
        }
        for (u, &area) in file.dual_areas.iter().enumerate() {
            if area.is_some() != g.dual_area[u].is_some() {
                return Err(Error::MalformedGraph(format!(
                    "vertex {u}: stored dual area presence disagrees with the face cycles"
                )));
            }
            g.dual_area[u] = area;
        }
        g.recompute_boundary_distance();
        Ok(g)
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &self.to_graph_file())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file: GraphFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_graph_file(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate, SpacingConvention};

    #[test]
    fn json_round_trip_is_exact() {
        let g = generate(&GeneratorSpec::rhombic_tracks(
            0.8,
            4,
            vec![0.1, -0.2],
            vec![1.4, 1.9],
            0.3,
        ))
        .unwrap();
        let text = serde_json::to_string(&g.to_graph_file()).unwrap();
        let back = IsoradialGraph::from_graph_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.to_graph_file(), g.to_graph_file());
        assert_eq!(back.boundary_distance, g.boundary_distance);
    }

    #[test]
    fn stored_lengths_are_kept() {
        let g = generate(&GeneratorSpec::square(1.0, 2, SpacingConvention::SpacingIsH)).unwrap();
        let mut file = g.to_graph_file();
        let e = file.edges.iter().position(|e| e.dual.is_some()).unwrap();
        file.edges[e].dual.as_mut().unwrap().length = 5.0;
        let back = IsoradialGraph::from_graph_file(file).unwrap();
        assert_eq!(back.dual_length(e), Some(5.0));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let g = generate(&GeneratorSpec::triangular(1.0, 1)).unwrap();
        let mut value = serde_json::to_value(g.to_graph_file()).unwrap();
        value["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<GraphFile>(value).is_err());
    }
}
