//! On-disk cohort layout: a JSON manifest, one headerless CSV matrix per
//! (patient, band) and a `patient_id,nihss,stroke_side` label file. Paths in
//! the manifest are relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cohort, PatientRecord, StrokeSide, NIHSS_MAX, NIHSS_MIN};
use crate::error::{Error, Result};
use crate::fsio::{read_json, write_atomic, write_json};
use crate::graph::{default_areas, load_areas, ConnectivityMatrix, FrequencyBand};

/// Asymmetry up to this size is averaged away on ingest; larger is rejected.
pub const INGEST_SYMMETRY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub areas: Option<PathBuf>,
    pub patients: BTreeMap<String, BTreeMap<FrequencyBand, PathBuf>>,
}

/// One problem found by [`validate_cohort`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub file: PathBuf,
    pub location: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{} [{loc}]: {}", self.file.display(), self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

struct LabelRow {
    patient_id: String,
    nihss: i64,
    stroke_side: StrokeSide,
}

fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e))?;
    let headers = reader.headers().map_err(|e| Error::format(path, e))?.clone();
    let expected = ["patient_id", "nihss", "stroke_side"];
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!("header must be `patient_id,nihss,stroke_side`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let nihss = record[1].trim().parse::<i64>().map_err(|e| {
            Error::format(path, format!("line {}: NIHSS `{}`: {e}", line + 2, &record[1]))
        })?;
        rows.push(LabelRow {
            patient_id: record[0].trim().to_string(),
            nihss,
            stroke_side: StrokeSide::parse_field(&record[2])?,
        });
    }
    Ok(rows)
}

fn read_matrix_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::format(path, e),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.trim().parse::<f64>().map_err(|e| {
                    Error::format(path, format!("cell ({i},{j}) `{cell}`: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Problems with a raw matrix, each with an optional `(row, col)` cell.
fn matrix_issues(rows: &[Vec<f64>], n: usize) -> Vec<(Option<(usize, usize)>, String)> {
    let mut issues = Vec::new();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let widths: Vec<usize> = rows.iter().map(Vec::len).collect();
        let width = widths.iter().copied().find(|&w| w != n).unwrap_or(n);
        issues.push((
            None,
            format!("expected {n}x{n} matrix, got {} rows (a row of width {width})", rows.len()),
        ));
        return issues;
    }
    for i in 0..n {
        for j in 0..n {
            let w = rows[i][j];
            if !w.is_finite() {
                issues.push((Some((i, j)), format!("non-finite weight {w}")));
            } else if w < 0.0 {
                issues.push((Some((i, j)), format!("negative weight {w}")));
            } else if w > 1.0 {
                issues.push((Some((i, j)), format!("weight {w} above 1")));
            } else if j > i && rows[j][i].is_finite() {
                let gap = (w - rows[j][i]).abs();
                if gap > INGEST_SYMMETRY_TOL {
                    issues.push((Some((i, j)), format!("asymmetry {gap:.3e} exceeds {INGEST_SYMMETRY_TOL:e}")));
                }
            }
        }
    }
    issues
}

fn symmetrized(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (rows[i][j], rows[j][i]);
            out.push(if a == b { a } else { 0.5 * (a + b) });
        }
    }
    out
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_patient_matrix(
    base: &Path,
    patient: &str,
    files: &BTreeMap<FrequencyBand, PathBuf>,
    band: FrequencyBand,
    n: usize,
) -> Result<ConnectivityMatrix> {
    let ingest = |reason: String| Error::Ingest {
        patient: patient.to_string(),
        band: band.to_string(),
        reason,
    };
    let rel = files
        .get(&band)
        .ok_or_else(|| ingest("no file listed in manifest".into()))?;
    let path = resolve(base, rel);
    if !path.is_file() {
        return Err(ingest(format!("file {} not found", path.display())));
    }
    let rows = read_matrix_rows(&path)?;
    if let Some((cell, msg)) = matrix_issues(&rows, n).into_iter().next() {
        let at = cell.map(|(i, j)| format!(" at cell ({i},{j})")).unwrap_or_default();
        return Err(Error::Data(format!(
            "patient `{patient}` band {band} ({}){at}: {msg}",
            path.display()
        )));
    }
    ConnectivityMatrix::new(band, n, symmetrized(&rows))
}

/// A cohort directory stands for the `manifest.json` inside it.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

/// Loads and validates a cohort from its manifest (or its directory).
pub fn load_cohort(manifest_path: &Path) -> Result<Cohort> {
    let manifest_path = &self::manifest_path(manifest_path);
    let manifest: Manifest = read_json(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let areas = match &manifest.areas {
        Some(p) => load_areas(&resolve(&base, p))?,
        None => default_areas(),
    };
    let labels = read_labels(&resolve(&base, &manifest.labels))?;
    let mut by_id: BTreeMap<&str, &LabelRow> = BTreeMap::new();
    for row in &labels {
        if by_id.insert(row.patient_id.as_str(), row).is_some() {
            return Err(Error::Data(format!(
                "patient `{}` labelled twice",
                row.patient_id
            )));
        }
    }
    for id in by_id.keys() {
        if !manifest.patients.contains_key(*id) {
            return Err(Error::Data(format!(
                "patient `{id}` has a label but no matrices in the manifest"
            )));
        }
    }
    let n = areas.len();
    let patients = manifest
        .patients
        .par_iter()
        .map(|(id, files)| {
            let label = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("patient `{id}` has no label row")))?;
            if label.nihss < 0 {
                return Err(Error::Data(format!("patient `{id}`: negative NIHSS {}", label.nihss)));
            }
            let matrices = FrequencyBand::ALL
                .iter()
                .map(|&band| Ok((band, load_patient_matrix(&base, id, files, band, n)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(PatientRecord {
                patient_id: id.clone(),
                matrices,
                nihss: u32::try_from(label.nihss).unwrap_or(u32::MAX),
                stroke_side: label.stroke_side,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(patients, areas)
}

/// Formats a weight with 9 significant digits.
pub(crate) fn format_weight(w: f64) -> String {
    format!("{w:.8e}")
}

/// Writes `manifest.json`, `labels.csv`, `areas.csv` and one matrix per
/// patient and band under `dir`.
pub fn save_cohort(cohort: &Cohort, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut areas_csv = String::from("index,label,x,y,z\n");
    for a in cohort.areas() {
        areas_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            a.index, a.label, a.centroid[0], a.centroid[1], a.centroid[2]
        ));
    }
    write_atomic(&dir.join("areas.csv"), areas_csv.as_bytes())?;

    let mut labels = String::from("patient_id,nihss,stroke_side\n");
    let mut patients = BTreeMap::new();
    for p in cohort.patients() {
        labels.push_str(&format!("{},{},{}\n", p.patient_id, p.nihss, p.stroke_side.as_field()));
        let mut files = BTreeMap::new();
        for (&band, m) in &p.matrices {
            let rel = PathBuf::from(&p.patient_id).join(format!("{}.csv", band.name()));
            let n = m.n();
            let mut text = String::with_capacity(n * n * 16);
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format_weight(m.get(i, j))).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            write_atomic(&dir.join(&rel), text.as_bytes())?;
            files.insert(band, rel);
        }
        patients.insert(p.patient_id.clone(), files);
    }
    write_atomic(&dir.join("labels.csv"), labels.as_bytes())?;
    let manifest = Manifest {
        labels: PathBuf::from("labels.csv"),
        areas: Some(PathBuf::from("areas.csv")),
        patients,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Checks every file of a cohort and reports all problems instead of
/// stopping at the first one.
pub fn validate_cohort(manifest_path: &Path) -> Vec<Violation> {
    let manifest_path = &self::manifest_path(manifest_path);
    let mut out = Vec::new();
    let violation = |file: &Path, location: Option<String>, message: String| Violation {
        file: file.to_path_buf(),
        location,
        message,
    };
    let manifest: Manifest = match read_json(manifest_path) {
        Ok(m) => m,
        Err(e) => {
            out.push(violation(manifest_path, None, e.to_string()));
            return out;
        }
    };
    let base = manifest_dir(manifest_path);
    let areas = match &manifest.areas {
        Some(p) => match load_areas(&resolve(&base, p)) {
            Ok(a) => a,
            Err(e) => {
                out.push(violation(&resolve(&base, p), None, e.to_string()));
                return out;
            }
        },
        None => default_areas(),
    };
    let n = areas.len();

    let label_path = resolve(&base, &manifest.labels);
    match read_labels(&label_path) {
        Ok(rows) => {
            let mut seen = BTreeMap::new();
            for row in &rows {
                if seen.insert(row.patient_id.clone(), ()).is_some() {
                    out.push(violation(&label_path, Some(row.patient_id.clone()), "duplicate patient id".into()));
                }
                if row.nihss < NIHSS_MIN as i64 || row.nihss > NIHSS_MAX as i64 {
                    out.push(violation(
                        &label_path,
                        Some(row.patient_id.clone()),
                        format!("NIHSS {} outside clinical range {NIHSS_MIN}..={NIHSS_MAX}", row.nihss),
                    ));
                }
                if !manifest.patients.contains_key(&row.patient_id) {
                    out.push(violation(&label_path, Some(row.patient_id.clone()), "no matrices listed in manifest".into()));
                }
            }
            for id in manifest.patients.keys() {
                if !seen.contains_key(id) {
                    out.push(violation(&label_path, Some(id.clone()), "patient missing from label file".into()));
                }
            }
        }
        Err(e) => out.push(violation(&label_path, None, e.to_string())),
    }

    for (id, files) in &manifest.patients {
        for band in FrequencyBand::ALL {
            let Some(rel) = files.get(&band) else {
                out.push(violation(manifest_path, Some(format!("{id}/{band}")), "band file not listed".into()));
                continue;
            };
            let path = resolve(&base, rel);
            match read_matrix_rows(&path) {
                Ok(rows) => {
                    for (cell, msg) in matrix_issues(&rows, n) {
                        let loc = cell.map(|(i, j)| format!("row {i}, col {j}"));
                        out.push(violation(&path, loc, msg));
                    }
                }
                Err(e) => out.push(violation(&path, None, e.to_string())),
            }
        }
    }
    out
}
