use neurograph_core::dataset::{load_cohort, save_cohort, synth_cohort, validate_cohort, SynthConfig};
use neurograph_core::encoding::EncodingConfig;
use neurograph_core::explain::{
    centrality_report, coherence_edges, combine_bands, extract_attention, render_report, ExportFormat,
};
use neurograph_core::graph::GraphDocument;
use neurograph_core::nn::{GatModel, ModelConfig};
use neurograph_core::pipeline::patient_graph;
use neurograph_core::rewire::RewireConfig;
use neurograph_core::MultiLayerGraph;

#[test]
fn cohort_survives_disk_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth_cohort(6, 9, &SynthConfig::default()).unwrap();
    let manifest = save_cohort(&cohort, dir.path()).unwrap();
    assert!(validate_cohort(&manifest).is_empty());
    let back = load_cohort(dir.path()).unwrap();
    assert_eq!(back.patients(), cohort.patients());
    assert_eq!(back.areas(), cohort.areas());
}

#[test]
fn encoded_graph_document_round_trips() {
    let cohort = synth_cohort(1, 4, &SynthConfig::default()).unwrap();
    let graph = patient_graph(&cohort.patients()[0], cohort.areas(), &RewireConfig::default(), &EncodingConfig::default())
        .unwrap();
    assert_eq!(graph.node_count(), 252);
    assert_eq!(graph.feature_dim(), Some(EncodingConfig::default().feature_dim()));
    let text = serde_json::to_string(&graph.to_document()).unwrap();
    let doc: GraphDocument = serde_json::from_str(&text).unwrap();
    let back = MultiLayerGraph::from_document(&doc).unwrap();
    assert_eq!(serde_json::to_string(&back.to_document()).unwrap(), text);
}

#[test]
fn explanation_of_a_patient_exports_in_every_format() {
    let cohort = synth_cohort(1, 5, &SynthConfig::default()).unwrap();
    let graph = patient_graph(&cohort.patients()[0], cohort.areas(), &RewireConfig::default(), &EncodingConfig::default())
        .unwrap();
    let model = GatModel::new(ModelConfig::default(), 1).unwrap();
    let extraction = extract_attention(&model, &graph, None).unwrap();
    assert_eq!(extraction.bands.len(), 3);
    let (per_band, combined_coherence) = coherence_edges(&graph);
    let combined = combine_bands(&extraction.bands).unwrap();
    for (att, coh) in extraction.bands.iter().zip(&per_band) {
        let report = centrality_report("band", att, coh, false).unwrap();
        assert_eq!(report.nodes.len(), 84);
        assert_eq!(report.edges.len(), att.edge_count());
    }
    let report = centrality_report("combined", &combined, &combined_coherence, false).unwrap();
    for format in [ExportFormat::Json, ExportFormat::Graphml, ExportFormat::Dot] {
        let text = render_report(&report, format).unwrap();
        assert_eq!(text, render_report(&report, format).unwrap());
        assert!(!text.is_empty());
    }
    let graphml = render_report(&report, ExportFormat::Graphml).unwrap();
    assert_eq!(graphml.matches("<node ").count(), 84);
}
