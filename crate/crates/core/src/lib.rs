//! Dual-branch video classifier built on bidirectional selective state-space
//! (Mamba-style) encoder blocks with gated class-token fusion, together with
//! the numerics it needs: a small reverse-mode tensor graph, exact-ZOH
//! state-space kernels, an AdamW training harness, exact McNemar statistics,
//! and a dataset-hygiene pipeline (crop unions, clip manifests, leakage scans,
//! synthetic corpora).

pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod fdcheck;
pub mod graph;
pub mod model;
pub mod params;
pub mod ssm;
pub mod stats;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Graph, TensorId};
pub use params::{ParamId, ParamStore, Precision};
pub use tensor::Tensor;
