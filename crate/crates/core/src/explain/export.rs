use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CentralityReport;
use crate::error::{Error, Result};
use crate::fsio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Graphml,
    Dot,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Dot => "dot",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "graphml" => Ok(ExportFormat::Graphml),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::Argument(format!("unknown export format `{other}`"))),
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

const GRAPHML_KEYS: [(&str, &str, &str, &str); 6] = [
    ("d0", "node", "label", "string"),
    ("d1", "node", "in_degree", "double"),
    ("d2", "node", "clustering", "double"),
    ("d3", "edge", "weight", "double"),
    ("d4", "edge", "type", "string"),
    ("d5", "edge", "betweenness", "double"),
];

fn graphml(report: &CentralityReport) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns \
         http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
    );
    for (id, domain, name, ty) in GRAPHML_KEYS {
        let _ = writeln!(s, "  <key id=\"{id}\" for=\"{domain}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>");
    }
    let _ = writeln!(s, "  <graph id=\"{}\" edgedefault=\"directed\">", xml_escape(&report.name));
    for n in &report.nodes {
        let _ = writeln!(s, "    <node id=\"n{}\">", n.id);
        let _ = writeln!(s, "      <data key=\"d0\">{}</data>", xml_escape(&n.label));
        let _ = writeln!(s, "      <data key=\"d1\">{}</data>", n.in_degree);
        let _ = writeln!(s, "      <data key=\"d2\">{}</data>", n.clustering);
        s.push_str("    </node>\n");
    }
    for (i, e) in report.edges.iter().enumerate() {
        let _ = writeln!(s, "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">", e.src, e.dst);
        let _ = writeln!(s, "      <data key=\"d3\">{}</data>", e.attention);
        let _ = writeln!(s, "      <data key=\"d4\">{}</data>", e.kind.name());
        if let Some(b) = e.betweenness {
            let _ = writeln!(s, "      <data key=\"d5\">{b}</data>");
        }
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn dot(report: &CentralityReport) -> String {
    let max_att = report.edges.iter().map(|e| e.attention).fold(0.0, f64::max);
    let max_deg = report.nodes.iter().map(|n| n.in_degree).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", dot_escape(&report.name));
    s.push_str("  node [shape=circle, style=filled];\n");
    for n in &report.nodes {
        let rel = if max_deg > 0.0 { n.in_degree / max_deg } else { 0.0 };
        let _ = writeln!(
            s,
            "  n{} [label=\"{}\", width={:.4}, fillcolor=\"{}\", in_degree={}, clustering={}];",
            n.id,
            dot_escape(&n.label),
            0.3 + 0.7 * rel,
            heat(rel),
            n.in_degree,
            n.clustering
        );
    }
    for e in &report.edges {
        let rel = if max_att > 0.0 { e.attention / max_att } else { 0.0 };
        let _ = write!(
            s,
            "  n{} -> n{} [weight={}, penwidth={:.4}, color=\"{}\", type=\"{}\"",
            e.src,
            e.dst,
            e.attention,
            0.2 + 3.8 * rel,
            heat(rel),
            e.kind.name()
        );
        if let Some(b) = e.betweenness {
            let _ = write!(s, ", betweenness={b}");
        }
        s.push_str("];\n");
    }
    s.push_str("}\n");
    s
}

/// Light grey to red as `rel` goes from 0 to 1.
fn heat(rel: f64) -> String {
    let rel = rel.clamp(0.0, 1.0);
    let fade = (220.0 * (1.0 - rel)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", 220u8.max(fade), fade, fade)
}

pub fn render_report(report: &CentralityReport, format: ExportFormat) -> Result<String> {
    Ok(match format {
        ExportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)
                .map_err(|e| Error::Format { path: Default::default(), reason: e.to_string() })?;
            text.push('\n');
            text
        }
        ExportFormat::Graphml => graphml(report),
        ExportFormat::Dot => dot(report),
    })
}

pub fn export_report(report: &CentralityReport, format: ExportFormat, path: &Path) -> Result<()> {
    fsio::write_atomic(path, render_report(report, format)?.as_bytes())
}

/// One row per node of every report: `graph,id,label,in_degree,clustering`.
pub fn centrality_csv(reports: &[CentralityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format { path: Default::default(), reason: e.to_string() };
    w.write_record(["graph", "id", "label", "in_degree", "clustering"]).map_err(csv_err)?;
    for r in reports {
        for n in &r.nodes {
            w.write_record([
                r.name.clone(),
                n.id.to_string(),
                n.label.clone(),
                n.in_degree.to_string(),
                n.clustering.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format { path: Default::default(), reason: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Error::Format { path: Default::default(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::tests::random_patient_graph;
    use crate::explain::{centrality_report, extract_attention, EdgeMetrics, NodeMetrics};
    use crate::graph::EdgeType;
    use crate::nn::{GatModel, ModelConfig};
    use std::collections::{BTreeMap, BTreeSet};

    fn tiny() -> CentralityReport {
        CentralityReport {
            name: "a<b>&\"c\"".into(),
            nodes: vec![
                NodeMetrics { id: 0, label: "BA1-L".into(), in_degree: 0.5, clustering: 0.0 },
                NodeMetrics { id: 1, label: "BA2-L".into(), in_degree: 0.0, clustering: 1.0 },
            ],
            edges: vec![EdgeMetrics { src: 1, dst: 0, attention: 0.5, kind: EdgeType::Intra, betweenness: Some(1.0) }],
        }
    }

    fn full_report() -> CentralityReport {
        let graph = random_patient_graph(8);
        let model = GatModel::new(ModelConfig::default(), 2).unwrap();
        let ex = extract_attention(&model, &graph, None).unwrap();
        let edges: Vec<_> = graph
            .typed_edges()
            .into_iter()
            .filter(|e| e.0 != e.1)
            .map(|(u, v, w, _)| (u, v, w))
            .collect();
        centrality_report("patient", &ex.full, &edges, true).unwrap()
    }

    /// Structural GraphML checks: namespace, declared keys with valid
    /// domains and types, unique node ids, edges between declared nodes and
    /// data elements that reference keys of the right domain.
    fn validate_graphml(text: &str) -> std::result::Result<(usize, usize), String> {
        let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
        let ns = "http://graphml.graphdrawing.org/xmlns";
        let root = doc.root_element();
        if root.tag_name().name() != "graphml" || root.tag_name().namespace() != Some(ns) {
            return Err("root is not a namespaced graphml element".into());
        }
        let mut keys = BTreeMap::new();
        let mut graphs = 0;
        let (mut n_nodes, mut n_edges) = (0, 0);
        for child in root.children().filter(|c| c.is_element()) {
            match child.tag_name().name() {
                "key" => {
                    let id = child.attribute("id").ok_or("key without id")?;
                    let domain = child.attribute("for").unwrap_or("all");
                    if !["graph", "node", "edge", "all"].contains(&domain) {
                        return Err(format!("key {id} has domain {domain}"));
                    }
                    let ty = child.attribute("attr.type").unwrap_or("string");
                    if !["boolean", "int", "long", "float", "double", "string"].contains(&ty) {
                        return Err(format!("key {id} has type {ty}"));
                    }
                    if keys.insert(id.to_string(), (domain.to_string(), ty.to_string())).is_some() {
                        return Err(format!("duplicate key {id}"));
                    }
                }
                "graph" => {
                    graphs += 1;
                    match child.attribute("edgedefault") {
                        Some("directed") | Some("undirected") => {}
                        other => return Err(format!("bad edgedefault {other:?}")),
                    }
                    let mut ids = BTreeSet::new();
                    let elements: Vec<_> = child.children().filter(|c| c.is_element()).collect();
                    for el in &elements {
                        if el.tag_name().name() == "node" {
                            let id = el.attribute("id").ok_or("node without id")?;
                            if !ids.insert(id.to_string()) {
                                return Err(format!("duplicate node {id}"));
                            }
                        }
                    }
                    for el in &elements {
                        let kind = el.tag_name().name();
                        match kind {
                            "node" => n_nodes += 1,
                            "edge" => {
                                for end in ["source", "target"] {
                                    let id = el.attribute(end).ok_or("edge without endpoint")?;
                                    if !ids.contains(id) {
                                        return Err(format!("edge endpoint {id} is not a node"));
                                    }
                                }
                                n_edges += 1;
                            }
                            other => return Err(format!("unexpected <{other}> in graph")),
                        }
                        for data in el.children().filter(|c| c.is_element()) {
                            if data.tag_name().name() != "data" {
                                return Err("non-data child".into());
                            }
                            let key = data.attribute("key").ok_or("data without key")?;
                            let (domain, ty) = keys.get(key).ok_or(format!("undeclared key {key}"))?;
                            if domain != kind && domain != "all" {
                                return Err(format!("key {key} used on {kind}"));
                            }
                            let text = data.text().unwrap_or("");
                            if ty == "double" && text.parse::<f64>().is_err() {
                                return Err(format!("{text} is not a double"));
                            }
                        }
                    }
                }
                other => return Err(format!("unexpected <{other}>")),
            }
        }
        if graphs != 1 {
            return Err(format!("{graphs} graph elements"));
        }
        Ok((n_nodes, n_edges))
    }

    #[test]
    fn graphml_of_full_patient_graph_is_well_formed() {
        let report = full_report();
        let text = render_report(&report, ExportFormat::Graphml).unwrap();
        let (nodes, edges) = validate_graphml(&text).unwrap();
        assert_eq!(nodes, 252);
        assert_eq!(edges, report.edges.len());
    }

    #[test]
    fn graphml_escapes_and_handles_empty_edges() {
        let mut r = tiny();
        let text = render_report(&r, ExportFormat::Graphml).unwrap();
        assert!(text.contains("a&lt;b&gt;&amp;&quot;c&quot;"));
        validate_graphml(&text).unwrap();
        r.edges.clear();
        let text = render_report(&r, ExportFormat::Graphml).unwrap();
        assert_eq!(validate_graphml(&text).unwrap(), (2, 0));
        let dot_text = render_report(&r, ExportFormat::Dot).unwrap();
        assert!(dot_text.starts_with("digraph") && dot_text.ends_with("}\n"));
    }

    #[test]
    fn outputs_are_deterministic() {
        let r = full_report();
        for f in [ExportFormat::Json, ExportFormat::Graphml, ExportFormat::Dot] {
            assert_eq!(render_report(&r, f).unwrap(), render_report(&r.clone(), f).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = full_report();
        export_report(&r, ExportFormat::Json, &path).unwrap();
        let back: CentralityReport = fsio::read_json(&path).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn dot_widths_follow_weights() {
        let text = render_report(&tiny(), ExportFormat::Dot).unwrap();
        assert!(text.contains("penwidth=4.0000"));
        assert!(text.contains("n1 -> n0"));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = export_report(&tiny(), ExportFormat::Json, &blocker.join("y.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn csv_table() {
        let text = centrality_csv(&[tiny()]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "graph,id,label,in_degree,clustering");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("GraphML".parse::<ExportFormat>().unwrap(), ExportFormat::Graphml);
        assert!("png".parse::<ExportFormat>().is_err());
    }
}
