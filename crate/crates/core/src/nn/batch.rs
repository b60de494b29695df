use std::sync::Arc;

use crate::autodiff::{Index, Tensor};
use crate::error::{Error, Result};
use crate::graph::{EdgeType, MultiLayerGraph};

/// Directed message edge `src -> dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MessageEdge {
    pub dst: usize,
    pub src: usize,
    pub kind: EdgeType,
}

/// Model input for one graph: node features, directed message edges (both
/// directions of every undirected edge, one per self-loop) and the band
/// layer of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub n_nodes: usize,
    pub n_bands: usize,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub edges: Vec<MessageEdge>,
    pub node_band: Vec<usize>,
}

impl GraphInput {
    pub fn from_graph(graph: &MultiLayerGraph) -> Result<Self> {
        let features = graph
            .node_features()
            .ok_or_else(|| Error::Structure("graph has no node features; run encoding first".into()))?;
        let feature_dim = graph.feature_dim().unwrap_or(0);
        let mut edges = Vec::new();
        for (u, v, _, kind) in graph.typed_edges() {
            edges.push(MessageEdge { dst: v, src: u, kind });
            if u != v {
                edges.push(MessageEdge { dst: u, src: v, kind });
            }
        }
        edges.sort_unstable();
        let n = graph.node_count();
        let input = Self {
            n_nodes: n,
            n_bands: graph.n_layers(),
            feature_dim,
            features: features.iter().flatten().copied().collect(),
            edges,
            node_band: (0..n).map(|id| graph.locate(id).1).collect(),
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.n_nodes * self.feature_dim {
            return Err(Error::Shape("feature buffer does not match node count".into()));
        }
        let mut has_loop = vec![false; self.n_nodes];
        for e in &self.edges {
            if e.src >= self.n_nodes || e.dst >= self.n_nodes {
                return Err(Error::Structure(format!("edge {}->{} out of range", e.src, e.dst)));
            }
            if e.src == e.dst {
                has_loop[e.dst] = true;
            }
        }
        if let Some(v) = has_loop.iter().position(|&h| !h) {
            return Err(Error::Structure(format!(
                "node {v} has no self-loop; attention is undefined on empty neighborhoods"
            )));
        }
        if self.node_band.len() != self.n_nodes || self.node_band.iter().any(|&b| b >= self.n_bands) {
            return Err(Error::Structure("node band assignment out of range".into()));
        }
        Ok(())
    }

    /// Relabels node `i` as `perm[i]`, moving features and edges with it.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let d = self.feature_dim;
        let mut features = vec![0.0; self.features.len()];
        let mut node_band = vec![0; self.n_nodes];
        for (i, &p) in perm.iter().enumerate() {
            features[p * d..(p + 1) * d].copy_from_slice(&self.features[i * d..(i + 1) * d]);
            node_band[p] = self.node_band[i];
        }
        let mut edges: Vec<MessageEdge> = self
            .edges
            .iter()
            .map(|e| MessageEdge { dst: perm[e.dst], src: perm[e.src], kind: e.kind })
            .collect();
        edges.sort_unstable();
        Self {
            features,
            node_band,
            edges,
            ..self.clone()
        }
    }
}

/// Several graphs merged into one disjoint union.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub n_graphs: usize,
    pub n_nodes: usize,
    pub n_bands: usize,
    pub features: Tensor,
    pub src: Index,
    pub dst: Index,
    pub kind: Index,
    /// `graph * n_bands + band` per node.
    pub pool_segment: Index,
    /// Start of each graph's nodes and edges, with a trailing total.
    pub node_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphInput]) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Argument("empty batch".into()))?;
        let (d, bands) = (first.feature_dim, first.n_bands);
        let mut features = Vec::new();
        let (mut src, mut dst, mut kind, mut pool) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut node_offsets = vec![0];
        let mut edge_offsets = vec![0];
        for (g, input) in graphs.iter().enumerate() {
            if input.feature_dim != d || input.n_bands != bands {
                return Err(Error::Shape(format!(
                    "graph {g} has {} features over {} bands, expected {d} over {bands}",
                    input.feature_dim, input.n_bands
                )));
            }
            let offset = *node_offsets.last().unwrap();
            features.extend_from_slice(&input.features);
            for e in &input.edges {
                src.push(offset + e.src);
                dst.push(offset + e.dst);
                kind.push(e.kind.index());
            }
            pool.extend(input.node_band.iter().map(|&b| g * bands + b));
            node_offsets.push(offset + input.n_nodes);
            edge_offsets.push(src.len());
        }
        let n_nodes = *node_offsets.last().unwrap();
        Ok(Self {
            n_graphs: graphs.len(),
            n_nodes,
            n_bands: bands,
            features: Tensor::from_rows(n_nodes, d, features),
            src: Arc::from(src),
            dst: Arc::from(dst),
            kind: Arc::from(kind),
            pool_segment: Arc::from(pool),
            node_offsets,
            edge_offsets,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }
}
