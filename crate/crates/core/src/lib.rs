//! Isoradial planar graphs, their geometric Laplacians, and discrete heat
//! kernels with certified truncation error.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`geometry`] | generators, isoradiality validation, metrics, projection |
//! | [`operators`] | edge/vertex weights and the sparse generators ½Δ and ½Δ̃ |
//! | [`kernel`] | uniformization with Poisson-tail certificates, log-domain entries |
//! | [`walk`] | Monte Carlo sampler for the continuous-time walk and its time change |
//! | [`bounds`] | path-product kernel bounds, volume growth, Poincaré constants |
//! | [`regimes`] | short-time scaling sweeps over decreasing mesh size |
//! | [`config`] | versioned run configuration shared with the CLI |
//!
//! All heavy objects are immutable after construction and may be shared
//! between threads.

pub mod bounds;
pub mod config;
mod error;
pub mod geometry;
pub mod kernel;
pub mod logmath;
pub mod operators;
pub mod regimes;
pub mod walk;

pub use error::{Error, Result};
pub use geometry::{Family, GeneratorSpec, IsoradialGraph, Point, SpacingConvention};
pub use kernel::{KernelRow, LogEntry};
pub use operators::{SparseGenerator, Variant, WeightSet};
