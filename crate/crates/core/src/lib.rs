//! Graph-signal-processing sampling for correspondence-based point cloud
//! registration.
//!
//! The pipeline builds a second-order compatibility graph over putative
//! correspondences, scores nodes with a graph filter, samples a subset,
//! searches maximal cliques in the induced graph and estimates a rigid pose
//! from the best clique.

pub mod clique;
pub mod correspondence;
pub mod error;
pub mod eval;
pub mod graph;
pub mod gsp;
pub mod registration;
pub mod sampling;
pub mod synth;

pub use correspondence::{Correspondence, CorrespondenceSet};
pub use error::{Error, Result};
pub use graph::{build_graph, CompatibilityGraph, GraphConfig};
pub use registration::{fastmac_register, PipelineConfig, RegistrationResult, RigidTransform};
