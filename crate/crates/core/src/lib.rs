//! Explainable graph-attention regression of stroke severity from EEG
//! connectivity.
//!
//! The pipeline runs per patient: band connectivity matrices are sparsified
//! ([`rewire`]), stacked into a multi-layer graph ([`graph`]), given
//! positional node features ([`encoding`]) and fed to a two-layer GATv2
//! regressor ([`nn`]) trained with cross-validation ([`train`]). Attention
//! coefficients and classical graph metrics are extracted by [`explain`].

pub mod autodiff;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod explain;
pub mod fsio;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod rewire;
pub mod train;

pub use dataset::{class_of, Cohort, PatientRecord, SeverityClass, StrokeSide};
pub use error::{Error, Result};
pub use graph::{
    build_multilayer, global_id, BandLayer, BrodmannArea, ConnectivityMatrix, EdgeType, FrequencyBand,
    MultiLayerGraph,
};
