//! Brodmann-area graphs: per-band connectivity, sparsified band layers and
//! the multi-layer graph that stacks them.
//!
//! Global node ids are layer-major: every node of layer 0 first, then layer 1,
//! and so on, so `id = layer * n_labels + label`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of Brodmann areas in a full cohort parcellation.
pub const N_AREAS: usize = 84;

/// Tolerance used to accept a matrix as symmetric once ingested.
pub const SYMMETRY_TOL: f64 = 1e-9;

const DEFAULT_CENTROIDS: &str = include_str!("../data/brodmann_centroids_v1.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrodmannArea {
    pub index: usize,
    pub label: String,
    /// MNI-like coordinate in millimeters.
    pub centroid: [f64; 3],
}

impl BrodmannArea {
    pub fn distance(&self, other: &BrodmannArea) -> f64 {
        self.centroid
            .iter()
            .zip(other.centroid.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// The bundled 84-area centroid table (`data/brodmann_centroids_v1.csv`).
pub fn default_areas() -> Vec<BrodmannArea> {
    parse_areas(DEFAULT_CENTROIDS, "brodmann_centroids_v1.csv")
        .expect("bundled centroid table is valid")
}

/// Reads a centroid table with header `index,label,x,y,z`.
pub fn load_areas(path: &std::path::Path) -> Result<Vec<BrodmannArea>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_areas(&text, path.display().to_string())
}

fn parse_areas(text: &str, origin: impl AsRef<str>) -> Result<Vec<BrodmannArea>> {
    let origin = origin.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut areas = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(origin, e))?;
        if record.len() != 5 {
            return Err(Error::format(
                origin,
                format!("row {}: expected 5 columns, got {}", row + 1, record.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::format(origin, format!("row {}: {e}", row + 1)))
        };
        let index = record[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::format(origin, format!("row {}: {e}", row + 1)))?;
        areas.push(BrodmannArea {
            index,
            label: record[1].trim().to_string(),
            centroid: [num(2)?, num(3)?, num(4)?],
        });
    }
    validate_areas(&areas)?;
    Ok(areas)
}

/// Indices must be exactly `0..n` in order, labels unique, centroids finite.
pub fn validate_areas(areas: &[BrodmannArea]) -> Result<()> {
    let mut labels = BTreeSet::new();
    for (i, area) in areas.iter().enumerate() {
        if area.index != i {
            return Err(Error::Structure(format!(
                "area indices must be contiguous from 0: position {i} holds index {}",
                area.index
            )));
        }
        if !labels.insert(area.label.as_str()) {
            return Err(Error::Structure(format!("duplicate area label `{}`", area.label)));
        }
        if area.centroid.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite centroid for `{}`", area.label)));
        }
    }
    Ok(())
}

/// EEG frequency bands, in canonical (one-hot) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBand {
    Delta,
    Theta,
    Alpha1,
    Alpha2,
    Beta1,
}

impl FrequencyBand {
    pub const ALL: [FrequencyBand; 5] = [
        FrequencyBand::Delta,
        FrequencyBand::Theta,
        FrequencyBand::Alpha1,
        FrequencyBand::Alpha2,
        FrequencyBand::Beta1,
    ];

    /// The bands kept for the multi-layer model by default.
    pub const MODEL_BANDS: [FrequencyBand; 3] = [
        FrequencyBand::Alpha1,
        FrequencyBand::Alpha2,
        FrequencyBand::Beta1,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn range_hz(self) -> (f64, f64) {
        match self {
            FrequencyBand::Delta => (2.0, 4.0),
            FrequencyBand::Theta => (4.0, 8.0),
            FrequencyBand::Alpha1 => (8.0, 10.5),
            FrequencyBand::Alpha2 => (10.5, 13.0),
            FrequencyBand::Beta1 => (13.0, 20.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrequencyBand::Delta => "delta",
            FrequencyBand::Theta => "theta",
            FrequencyBand::Alpha1 => "alpha1",
            FrequencyBand::Alpha2 => "alpha2",
            FrequencyBand::Beta1 => "beta1",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            FrequencyBand::Delta => "d",
            FrequencyBand::Theta => "t",
            FrequencyBand::Alpha1 => "a1",
            FrequencyBand::Alpha2 => "a2",
            FrequencyBand::Beta1 => "b1",
        }
    }
}

impl fmt::Display for FrequencyBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrequencyBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        FrequencyBand::ALL
            .into_iter()
            .find(|b| b.name() == s || b.short() == s)
            .ok_or_else(|| Error::Argument(format!("unknown frequency band `{s}`")))
    }
}

/// Parses a comma-separated band list such as `a1,a2,b1`.
pub fn parse_band_list(s: &str) -> Result<Vec<FrequencyBand>> {
    let bands = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(FrequencyBand::from_str)
        .collect::<Result<Vec<_>>>()?;
    if bands.is_empty() {
        return Err(Error::Argument("empty band list".into()));
    }
    Ok(bands)
}

/// Symmetric, nonnegative connectivity weights for one band.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityMatrix {
    band: FrequencyBand,
    n: usize,
    weights: Vec<f64>,
}

impl ConnectivityMatrix {
    /// Builds a validated matrix from row-major weights. The diagonal is
    /// zeroed; entries must be finite, in `[0, 1]` and symmetric within
    /// [`SYMMETRY_TOL`].
    pub fn new(band: FrequencyBand, n: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Data(format!(
                "expected {n}x{n} = {} weights, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            weights[i * n + i] = 0.0;
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::Data(format!("non-finite weight at ({i},{j})")));
                }
                if w < 0.0 {
                    return Err(Error::Data(format!("negative weight {w} at ({i},{j})")));
                }
                if w > 1.0 {
                    return Err(Error::Data(format!("weight {w} above 1 at ({i},{j})")));
                }
                if j > i && (w - weights[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::Data(format!(
                        "asymmetric weights at ({i},{j}): {w} vs {}",
                        weights[j * n + i]
                    )));
                }
            }
        }
        Ok(Self { band, n, weights })
    }

    pub fn band(&self) -> FrequencyBand {
        self.band
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.n + v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Off-diagonal upper-triangle values in row order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n.saturating_sub(1)) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeType {
    Intra,
    Cross,
    #[serde(rename = "self")]
    SelfLoop,
}

impl EdgeType {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Intra => "intra",
            EdgeType::Cross => "cross",
            EdgeType::SelfLoop => "self",
        }
    }
}

/// One sparsified band graph over the shared label set. Undirected edges are
/// stored once as `(min, max)`; self-loops as `(v, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLayer {
    pub band: FrequencyBand,
    labels: Vec<String>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl BandLayer {
    pub fn new(
        band: FrequencyBand,
        labels: Vec<String>,
        edges: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut map = BTreeMap::new();
        for ((u, v), w) in edges {
            if u >= n || v >= n {
                return Err(Error::Structure(format!(
                    "edge ({u},{v}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() {
                return Err(Error::Data(format!("non-finite weight on edge ({u},{v})")));
            }
            map.insert((u.min(v), u.max(v)), w);
        }
        Ok(Self {
            band,
            labels,
            edges: map,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// All edges, self-loops included, in ascending `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn non_loop_edge_count(&self) -> usize {
        self.edges.keys().filter(|(u, v)| u != v).count()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.weight(u, v).is_some()
    }

    pub fn has_self_loop(&self, v: usize) -> bool {
        self.edges.contains_key(&(v, v))
    }

    /// Weighted neighbor lists without self-loops.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (&(u, v), &w) in &self.edges {
            if u != v {
                adj[u].push((v, w));
                adj[v].push((u, w));
            }
        }
        adj
    }

    /// Dense weighted adjacency, optionally including self-loop weights on
    /// the diagonal.
    pub fn dense_adjacency(&self, with_self_loops: bool) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for (&(u, v), &w) in &self.edges {
            if u == v {
                if with_self_loops {
                    a[u][u] = w;
                }
            } else {
                a[u][v] = w;
                a[v][u] = w;
            }
        }
        a
    }
}

/// Band layers stacked into one graph, with cross-layer edges joining nodes
/// that share a label.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLayerGraph {
    layers: Vec<BandLayer>,
    cross_edges: Vec<(usize, usize)>,
    node_features: Option<Vec<Vec<f64>>>,
}

/// Layer-major global id for `(label, layer)`.
pub fn global_id(
    label_index: usize,
    layer_index: usize,
    n_labels: usize,
    n_layers: usize,
) -> Result<usize> {
    if label_index >= n_labels || layer_index >= n_layers {
        return Err(Error::Argument(format!(
            "(label {label_index}, layer {layer_index}) outside {n_labels} labels x {n_layers} layers"
        )));
    }
    Ok(layer_index * n_labels + label_index)
}

/// Stacks band layers and links every label to itself across each unordered
/// pair of layers.
pub fn build_multilayer(layers: Vec<BandLayer>) -> Result<MultiLayerGraph> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Argument("no layers given".into()))?;
    for layer in &layers[1..] {
        if layer.labels != first.labels {
            return Err(Error::Structure(format!(
                "layer {} has a label set different from layer {}",
                layer.band, first.band
            )));
        }
    }
    let n = first.n();
    let l = layers.len();
    let mut cross_edges = Vec::with_capacity(n * l * (l - 1) / 2);
    for a in 0..l {
        for b in (a + 1)..l {
            for label in 0..n {
                cross_edges.push((a * n + label, b * n + label));
            }
        }
    }
    cross_edges.sort_unstable();
    Ok(MultiLayerGraph {
        layers,
        cross_edges,
        node_features: None,
    })
}

impl MultiLayerGraph {
    pub fn layers(&self) -> &[BandLayer] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_labels(&self) -> usize {
        self.layers[0].n()
    }

    pub fn node_count(&self) -> usize {
        self.n_labels() * self.n_layers()
    }

    pub fn labels(&self) -> &[String] {
        self.layers[0].labels()
    }

    pub fn bands(&self) -> Vec<FrequencyBand> {
        self.layers.iter().map(|l| l.band).collect()
    }

    pub fn cross_edges(&self) -> &[(usize, usize)] {
        &self.cross_edges
    }

    pub fn global_id(&self, label_index: usize, layer_index: usize) -> Result<usize> {
        global_id(label_index, layer_index, self.n_labels(), self.n_layers())
    }

    /// Inverse of [`MultiLayerGraph::global_id`]: `(label, layer)`.
    pub fn locate(&self, id: usize) -> (usize, usize) {
        (id % self.n_labels(), id / self.n_labels())
    }

    pub fn node_features(&self) -> Option<&[Vec<f64>]> {
        self.node_features.as_deref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.node_features
            .as_ref()
            .and_then(|f| f.first().map(Vec::len))
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.node_count() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.len(),
                self.node_count()
            )));
        }
        if let Some(d) = features.first().map(Vec::len) {
            if features.iter().any(|f| f.len() != d) {
                return Err(Error::Shape("ragged node feature rows".into()));
            }
        }
        self.node_features = Some(features);
        Ok(self)
    }

    /// Every undirected edge with global ids, its weight and type, sorted by
    /// `(u, v)`.
    pub fn typed_edges(&self) -> Vec<(usize, usize, f64, EdgeType)> {
        let n = self.n_labels();
        let mut out = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            for ((u, v), w) in layer.edges() {
                let kind = if u == v { EdgeType::SelfLoop } else { EdgeType::Intra };
                out.push((li * n + u, li * n + v, w, kind));
            }
        }
        out.extend(self.cross_edges.iter().map(|&(u, v)| (u, v, 1.0, EdgeType::Cross)));
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn to_document(&self) -> GraphDocument {
        let n = self.n_labels();
        let nodes = (0..self.node_count())
            .map(|id| {
                let (label, layer) = (id % n, id / n);
                NodeRecord {
                    id,
                    label: self.labels()[label].clone(),
                    layer,
                    band: self.layers[layer].band,
                    features: self.node_features.as_ref().map(|f| f[id].clone()),
                }
            })
            .collect();
        let edges = self
            .typed_edges()
            .into_iter()
            .map(|(u, v, weight, kind)| EdgeRecord { u, v, weight, kind })
            .collect();
        GraphDocument { nodes, edges }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let mut bands: Vec<FrequencyBand> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for (pos, node) in doc.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(Error::Structure(format!(
                    "node ids must ascend from 0; position {pos} has id {}",
                    node.id
                )));
            }
            if node.layer == bands.len() {
                bands.push(node.band);
            } else if node.layer + 1 != bands.len() || bands[node.layer] != node.band {
                return Err(Error::Structure(format!(
                    "node {} breaks layer-major ordering",
                    node.id
                )));
            }
            if node.layer == 0 {
                labels.push(node.label.clone());
            }
        }
        let n = labels.len();
        if n == 0 || doc.nodes.len() != n * bands.len() {
            return Err(Error::Structure("layers have unequal node counts".into()));
        }
        for node in &doc.nodes {
            if node.label != labels[node.id % n] {
                return Err(Error::Structure(format!(
                    "node {} label `{}` differs from layer 0",
                    node.id, node.label
                )));
            }
        }
        let mut per_layer: Vec<Vec<((usize, usize), f64)>> = vec![Vec::new(); bands.len()];
        let mut cross = BTreeSet::new();
        for e in &doc.edges {
            let (lu, lv) = (e.u / n, e.v / n);
            if lu >= bands.len() || lv >= bands.len() {
                return Err(Error::Structure(format!("edge ({},{}) out of range", e.u, e.v)));
            }
            match e.kind {
                EdgeType::Cross => {
                    cross.insert((e.u.min(e.v), e.u.max(e.v)));
                }
                EdgeType::Intra | EdgeType::SelfLoop => {
                    if lu != lv {
                        return Err(Error::Structure(format!(
                            "{} edge ({},{}) spans layers",
                            e.kind.name(),
                            e.u,
                            e.v
                        )));
                    }
                    per_layer[lu].push(((e.u % n, e.v % n), e.weight));
                }
            }
        }
        let layers = bands
            .iter()
            .zip(per_layer)
            .map(|(&band, edges)| BandLayer::new(band, labels.clone(), edges))
            .collect::<Result<Vec<_>>>()?;
        let mut graph = build_multilayer(layers)?;
        let expected: BTreeSet<_> = graph.cross_edges.iter().copied().collect();
        if cross != expected {
            return Err(Error::Structure(
                "cross edges do not join every same-label node pair across layers".into(),
            ));
        }
        let features: Option<Vec<Vec<f64>>> =
            doc.nodes.iter().map(|node| node.features.clone()).collect();
        if let Some(features) = features {
            graph = graph.with_features(features)?;
        }
        Ok(graph)
    }
}

/// Serialized form of a [`MultiLayerGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub label: String,
    pub layer: usize,
    pub band: FrequencyBand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    #[serde(rename = "type")]
    pub kind: EdgeType,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("N{i}")).collect()
    }

    fn ring(band: FrequencyBand, n: usize) -> BandLayer {
        let mut edges: Vec<_> = (0..n).map(|i| ((i, (i + 1) % n), 0.5)).collect();
        edges.extend((0..n).map(|i| ((i, i), 1.0)));
        BandLayer::new(band, labels(n), edges).unwrap()
    }

    #[test]
    fn bundled_atlas_has_84_areas() {
        let areas = default_areas();
        assert_eq!(areas.len(), N_AREAS);
        assert_eq!(areas[0].label, "BA1-L");
        assert_eq!(areas[42].label, "BA1-R");
        // hemispheres mirror each other in x
        for i in 0..42 {
            assert_eq!(areas[i].centroid[0], -areas[i + 42].centroid[0]);
        }
    }

    #[test]
    fn global_id_examples() {
        assert_eq!(global_id(0, 0, 84, 3).unwrap(), 0);
        assert_eq!(global_id(83, 2, 84, 3).unwrap(), 251);
        assert_eq!(global_id(5, 1, 84, 3).unwrap(), 89);
        assert!(matches!(global_id(84, 0, 84, 3), Err(Error::Argument(_))));
        assert!(matches!(global_id(0, 3, 84, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn three_layers_of_84() {
        let layers = model_rings(84);
        let g = build_multilayer(layers).unwrap();
        assert_eq!(g.node_count(), 252);
        assert_eq!(g.cross_edges().len(), 252);
        for &(u, v) in g.cross_edges() {
            assert_eq!(u % 84, v % 84);
            assert_ne!(u / 84, v / 84);
        }
    }

    fn model_rings(n: usize) -> Vec<BandLayer> {
        FrequencyBand::MODEL_BANDS.iter().map(|&b| ring(b, n)).collect()
    }

    #[test]
    fn single_layer_has_no_cross_edges() {
        let g = build_multilayer(vec![ring(FrequencyBand::Delta, 84)]).unwrap();
        assert_eq!(g.node_count(), 84);
        assert!(g.cross_edges().is_empty());
    }

    #[test]
    fn empty_and_mismatched_layers_rejected() {
        assert!(matches!(build_multilayer(vec![]), Err(Error::Argument(_))));
        let a = ring(FrequencyBand::Alpha1, 4);
        let b = BandLayer::new(
            FrequencyBand::Alpha2,
            vec!["x".into(), "y".into(), "z".into(), "w".into()],
            [],
        )
        .unwrap();
        assert!(matches!(build_multilayer(vec![a, b]), Err(Error::Structure(_))));
    }

    #[test]
    fn intra_edges_preserved_verbatim() {
        let layers = model_rings(6);
        let g = build_multilayer(layers.clone()).unwrap();
        for (orig, kept) in layers.iter().zip(g.layers()) {
            assert_eq!(orig, kept);
        }
    }

    #[test]
    fn matrix_validation() {
        let ok = ConnectivityMatrix::new(FrequencyBand::Delta, 2, vec![0.7, 0.3, 0.3, 0.9]).unwrap();
        assert_eq!(ok.get(0, 0), 0.0);
        assert_eq!(ok.upper_triangle(), vec![0.3]);
        let neg = ConnectivityMatrix::new(FrequencyBand::Delta, 2, vec![0.0, -0.1, -0.1, 0.0]);
        assert!(matches!(neg, Err(Error::Data(_))));
        let nan = ConnectivityMatrix::new(FrequencyBand::Delta, 2, vec![0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(matches!(nan, Err(Error::Data(_))));
        let asym = ConnectivityMatrix::new(FrequencyBand::Delta, 2, vec![0.0, 0.2, 0.3, 0.0]);
        assert!(matches!(asym, Err(Error::Data(_))));
        let dim = ConnectivityMatrix::new(FrequencyBand::Delta, 3, vec![0.0; 4]);
        assert!(matches!(dim, Err(Error::Data(_))));
    }

    #[test]
    fn band_parsing() {
        assert_eq!("a1".parse::<FrequencyBand>().unwrap(), FrequencyBand::Alpha1);
        assert_eq!("beta1".parse::<FrequencyBand>().unwrap(), FrequencyBand::Beta1);
        assert_eq!(
            parse_band_list("a1,a2,b1").unwrap(),
            FrequencyBand::MODEL_BANDS.to_vec()
        );
        assert!("gamma".parse::<FrequencyBand>().is_err());
        assert_eq!(FrequencyBand::Alpha2.index(), 3);
        assert_eq!(FrequencyBand::Beta1.range_hz(), (13.0, 20.0));
    }

    #[test]
    fn document_round_trip_and_order() {
        let g = build_multilayer(model_rings(5)).unwrap();
        let feats: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64, 0.25]).collect();
        let g = g.with_features(feats).unwrap();
        let doc = g.to_document();
        assert!(doc.nodes.windows(2).all(|w| w[0].id < w[1].id));
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with("{\"nodes\":[{\"id\":0,\"label\":\"N0\",\"layer\":0,\"band\":\"alpha1\""));
        let back: GraphDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(MultiLayerGraph::from_document(&back).unwrap(), g);
    }
}
