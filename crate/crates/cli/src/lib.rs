//! Experiment harness: instance generation, reachable-state sampling,
//! training manifests, robustness studies and growth tables.

pub mod growth;
pub mod instgen;
pub mod manifest;
pub mod maskcheck;
pub mod robustness;
pub mod sampling;
