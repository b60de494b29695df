//! Cohort to model inputs: rewire, stack, encode.

use rayon::prelude::*;

use crate::dataset::{Cohort, PatientRecord};
use crate::encoding::{assemble_features, EncodingConfig};
use crate::error::{Error, Result};
use crate::graph::{BrodmannArea, MultiLayerGraph};
use crate::nn::GraphInput;
use crate::rewire::{rewire_patient, RewireConfig};
use crate::train::Sample;

/// Rewired multi-layer graph of one patient with node features attached.
pub fn patient_graph(
    record: &PatientRecord,
    areas: &[BrodmannArea],
    rewire: &RewireConfig,
    encoding: &EncodingConfig,
) -> Result<MultiLayerGraph> {
    let graph = rewire_patient(record, areas, rewire)?;
    assemble_features(graph, encoding).map_err(|e| match e {
        Error::Data(reason) => Error::Data(format!("patient {}: {reason}", record.patient_id)),
        other => other,
    })
}

/// Model-ready samples for every patient, in cohort order.
pub fn prepare_samples(cohort: &Cohort, rewire: &RewireConfig, encoding: &EncodingConfig) -> Result<Vec<Sample>> {
    cohort
        .patients()
        .par_iter()
        .map(|p| {
            let graph = patient_graph(p, cohort.areas(), rewire, encoding)?;
            Ok(Sample {
                patient_id: p.patient_id.clone(),
                input: GraphInput::from_graph(&graph)?,
                target: f64::from(p.nihss),
            })
        })
        .collect()
}
