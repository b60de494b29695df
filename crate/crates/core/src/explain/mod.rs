//! Attention-based explanations and classical graph metrics.

mod export;
mod metrics;

pub use export::{centrality_csv, export_report, render_report, ExportFormat};
pub use metrics::{edge_betweenness, layer_edges, weighted_clustering, weighted_in_degree, WeightedEdge, PATH_TIE_TOL};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeType, FrequencyBand, MultiLayerGraph};
use crate::nn::{GatModel, GraphBatch, GraphInput, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionEdge {
    pub weight: f64,
    #[serde(rename = "type")]
    pub kind: EdgeType,
}

/// Directed attention graph: edge `src -> dst` carries the coefficient `dst`
/// assigns to the message from `src`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionGraph {
    /// `None` for graphs spanning several bands.
    pub band: Option<FrequencyBand>,
    pub labels: Vec<String>,
    #[serde(with = "edge_list")]
    edges: BTreeMap<(usize, usize), AttentionEdge>,
}

mod edge_list {
    use super::AttentionEdge;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        src: usize,
        dst: usize,
        #[serde(flatten)]
        edge: AttentionEdge,
    }

    pub fn serialize<S: Serializer>(edges: &BTreeMap<(usize, usize), AttentionEdge>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Row> = edges.iter().map(|(&(src, dst), &edge)| Row { src, dst, edge }).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), AttentionEdge>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| ((r.src, r.dst), r.edge)).collect())
    }
}

impl AttentionGraph {
    pub fn new(band: Option<FrequencyBand>, labels: Vec<String>) -> Self {
        Self { band, labels, edges: BTreeMap::new() }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn insert(&mut self, src: usize, dst: usize, edge: AttentionEdge) {
        self.edges.insert((src, dst), edge);
    }

    pub fn get(&self, src: usize, dst: usize) -> Option<&AttentionEdge> {
        self.edges.get(&(src, dst))
    }

    /// Edges in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&(usize, usize), &AttentionEdge)> {
        self.edges.iter()
    }

    pub fn edges_of(&self, kind: EdgeType) -> impl Iterator<Item = (&(usize, usize), &AttentionEdge)> {
        self.edges.iter().filter(move |(_, e)| e.kind == kind)
    }

    /// Incoming coefficient mass per node.
    pub fn target_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.node_count()];
        for (&(_, dst), e) in &self.edges {
            sums[dst] += e.weight;
        }
        sums
    }
}

/// Head-averaged coefficients of one attention layer for one patient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionExtraction {
    pub layer: usize,
    /// Every edge of the multi-layer graph, node ids as in the input graph.
    pub full: AttentionGraph,
    /// Intra-layer edges per band, node ids are atlas indices.
    pub bands: Vec<AttentionGraph>,
}

/// Runs the model in eval mode and collects the coefficients of `layer`
/// (the final attention layer when `None`), averaged over heads.
pub fn extract_attention(model: &GatModel, graph: &MultiLayerGraph, layer: Option<usize>) -> Result<AttentionExtraction> {
    if !model.is_finite() {
        return Err(Error::Numeric {
            op: "extract_attention".into(),
            reason: "model parameters hold non-finite values".into(),
        });
    }
    let input = GraphInput::from_graph(graph)?;
    let out = model.forward(&GraphBatch::new(&[&input])?, Mode::Eval)?;
    let layer = layer.unwrap_or(out.attention.len() - 1);
    let record = out.attention.get(layer).ok_or_else(|| {
        Error::Argument(format!("model has {} attention layers, asked for {layer}", out.attention.len()))
    })?;

    let n_labels = graph.n_labels();
    let bands = graph.bands();
    let full_labels = (0..graph.node_count())
        .map(|id| {
            let (label, layer) = graph.locate(id);
            format!("{}@{}", graph.labels()[label], bands[layer].short())
        })
        .collect();
    let mut full = AttentionGraph::new(None, full_labels);
    let mut per_band: Vec<AttentionGraph> =
        bands.iter().map(|&b| AttentionGraph::new(Some(b), graph.labels().to_vec())).collect();
    for e in 0..record.n_edges() {
        let (src, dst, kind) = (record.src[e], record.dst[e], record.kind[e]);
        let edge = AttentionEdge { weight: record.head_mean(e), kind };
        full.insert(src, dst, edge);
        if kind == EdgeType::Intra {
            let (ls, band) = graph.locate(src);
            per_band[band].insert(ls, dst % n_labels, edge);
        }
    }
    Ok(AttentionExtraction { layer, full, bands: per_band })
}

/// Per ordered pair, the largest coefficient among the graphs holding it.
pub fn combine_bands(graphs: &[AttentionGraph]) -> Result<AttentionGraph> {
    let first = graphs.first().ok_or_else(|| Error::Argument("no graphs to combine".into()))?;
    let mut combined = AttentionGraph::new(None, first.labels.clone());
    for g in graphs {
        if g.labels != first.labels {
            return Err(Error::Structure("attention graphs span different node sets".into()));
        }
        for (&key, &edge) in &g.edges {
            combined
                .edges
                .entry(key)
                .and_modify(|e| {
                    if edge.weight > e.weight {
                        *e = edge;
                    }
                })
                .or_insert(edge);
        }
    }
    if graphs.iter().all(|g| g.band == first.band) {
        combined.band = first.band;
    }
    Ok(combined)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub id: usize,
    pub label: String,
    pub in_degree: f64,
    pub clustering: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub src: usize,
    pub dst: usize,
    pub attention: f64,
    #[serde(rename = "type")]
    pub kind: EdgeType,
    /// Betweenness of the undirected coherence edge under this pair, if any.
    pub betweenness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralityReport {
    pub name: String,
    pub nodes: Vec<NodeMetrics>,
    pub edges: Vec<EdgeMetrics>,
}

/// Attention in-degree per node plus clustering and edge betweenness of the
/// coherence graph `coherence` over the same nodes.
pub fn centrality_report(
    name: &str,
    attention: &AttentionGraph,
    coherence: &[WeightedEdge],
    weighted_betweenness: bool,
) -> Result<CentralityReport> {
    let n = attention.node_count();
    let in_degree = weighted_in_degree(attention);
    let clustering = weighted_clustering(n, coherence);
    let betweenness = edge_betweenness(n, coherence, weighted_betweenness)?;
    let nodes = (0..n)
        .map(|id| NodeMetrics {
            id,
            label: attention.labels[id].clone(),
            in_degree: in_degree[id],
            clustering: clustering[id],
        })
        .collect();
    let edges = attention
        .edges()
        .map(|(&(src, dst), e)| EdgeMetrics {
            src,
            dst,
            attention: e.weight,
            kind: e.kind,
            betweenness: betweenness.get(&(src.min(dst), src.max(dst))).copied(),
        })
        .collect();
    Ok(CentralityReport { name: name.into(), nodes, edges })
}

/// Coherence edges of a multi-layer graph keyed by atlas labels, one list
/// per band, plus the per-pair maximum over bands.
pub fn coherence_edges(graph: &MultiLayerGraph) -> (Vec<Vec<WeightedEdge>>, Vec<WeightedEdge>) {
    let per_band: Vec<Vec<WeightedEdge>> = graph.layers().iter().map(layer_edges).collect();
    let mut max: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(u, v, w) in per_band.iter().flatten() {
        let slot = max.entry((u, v)).or_insert(w);
        *slot = slot.max(w);
    }
    let combined = max.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    (per_band, combined)
}
