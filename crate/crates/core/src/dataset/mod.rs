//! Patient records, severity classes and cohort containers.

mod io;
mod synth;

pub use io::{load_cohort, manifest_path, save_cohort, validate_cohort, Manifest, Violation};
pub use synth::{synth_cohort, SynthConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BrodmannArea, ConnectivityMatrix, FrequencyBand};

/// Accepted NIHSS range for cohort records.
pub const NIHSS_MIN: u32 = 2;
pub const NIHSS_MAX: u32 = 42;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeSide {
    Left,
    Right,
    #[default]
    Unknown,
}

impl StrokeSide {
    /// Label-file spelling; unknown is the empty field.
    pub fn as_field(self) -> &'static str {
        match self {
            StrokeSide::Left => "left",
            StrokeSide::Right => "right",
            StrokeSide::Unknown => "",
        }
    }

    pub fn parse_field(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(StrokeSide::Left),
            "right" | "r" => Ok(StrokeSide::Right),
            "" | "unknown" => Ok(StrokeSide::Unknown),
            other => Err(Error::Data(format!("unknown stroke side `{other}`"))),
        }
    }
}

/// Severity bins over NIHSS: A below 9, B from 9 to 15, C from 16.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityClass {
    A,
    B,
    C,
}

impl SeverityClass {
    pub const ALL: [SeverityClass; 3] = [SeverityClass::A, SeverityClass::B, SeverityClass::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeverityClass::A => "A",
            SeverityClass::B => "B",
            SeverityClass::C => "C",
        };
        f.write_str(s)
    }
}

pub fn class_of(nihss: i64) -> Result<SeverityClass> {
    match nihss {
        n if n < 0 => Err(Error::Argument(format!("negative NIHSS {n}"))),
        n if n < 9 => Ok(SeverityClass::A),
        n if n < 16 => Ok(SeverityClass::B),
        _ => Ok(SeverityClass::C),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub matrices: BTreeMap<FrequencyBand, ConnectivityMatrix>,
    pub nihss: u32,
    pub stroke_side: StrokeSide,
}

impl PatientRecord {
    pub fn severity(&self) -> SeverityClass {
        class_of(self.nihss as i64).expect("nihss is unsigned")
    }

    pub fn matrix(&self, band: FrequencyBand) -> Result<&ConnectivityMatrix> {
        self.matrices.get(&band).ok_or_else(|| {
            Error::Data(format!(
                "patient `{}` has no {band} matrix",
                self.patient_id
            ))
        })
    }

    fn validate(&self, n_areas: usize) -> Result<()> {
        if !(NIHSS_MIN..=NIHSS_MAX).contains(&self.nihss) {
            return Err(Error::Data(format!(
                "patient `{}`: NIHSS {} outside {NIHSS_MIN}..={NIHSS_MAX}",
                self.patient_id, self.nihss
            )));
        }
        for band in FrequencyBand::ALL {
            let m = self.matrices.get(&band).ok_or_else(|| Error::Ingest {
                patient: self.patient_id.clone(),
                band: band.to_string(),
                reason: "matrix missing".into(),
            })?;
            if m.band() != band {
                return Err(Error::Data(format!(
                    "patient `{}`: matrix filed under {band} is tagged {}",
                    self.patient_id,
                    m.band()
                )));
            }
            if m.n() != n_areas {
                return Err(Error::Data(format!(
                    "patient `{}` band {band}: {}x{} matrix for {n_areas} areas",
                    self.patient_id,
                    m.n(),
                    m.n()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    patients: Vec<PatientRecord>,
    areas: Vec<BrodmannArea>,
}

impl Cohort {
    /// Validates ids, NIHSS range, band coverage and matrix dimensions
    /// against the area table.
    pub fn new(patients: Vec<PatientRecord>, areas: Vec<BrodmannArea>) -> Result<Self> {
        crate::graph::validate_areas(&areas)?;
        let mut ids = BTreeSet::new();
        for p in &patients {
            if !ids.insert(p.patient_id.as_str()) {
                return Err(Error::Data(format!("duplicate patient id `{}`", p.patient_id)));
            }
            p.validate(areas.len())?;
        }
        Ok(Self { patients, areas })
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn areas(&self) -> &[BrodmannArea] {
        &self.areas
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn patient(&self, id: &str) -> Option<&PatientRecord> {
        self.patients.iter().find(|p| p.patient_id == id)
    }

    pub fn labels(&self) -> Vec<String> {
        self.areas.iter().map(|a| a.label.clone()).collect()
    }

    /// Patient counts per severity class, A to C.
    pub fn class_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for p in &self.patients {
            h[p.severity().index()] += 1;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn class_boundaries() {
        assert_eq!(class_of(8).unwrap(), SeverityClass::A);
        assert_eq!(class_of(9).unwrap(), SeverityClass::B);
        assert_eq!(class_of(15).unwrap(), SeverityClass::B);
        assert_eq!(class_of(16).unwrap(), SeverityClass::C);
        assert_eq!(class_of(22).unwrap(), SeverityClass::C);
        assert_eq!(class_of(0).unwrap(), SeverityClass::A);
        assert!(matches!(class_of(-1), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn class_of_is_monotone(a in 0i64..100, b in 0i64..100) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(class_of(lo).unwrap() <= class_of(hi).unwrap());
        }
    }

    #[test]
    fn stroke_side_fields() {
        assert_eq!(StrokeSide::parse_field("").unwrap(), StrokeSide::Unknown);
        assert_eq!(StrokeSide::parse_field("Right").unwrap(), StrokeSide::Right);
        assert!(StrokeSide::parse_field("both").is_err());
        assert_eq!(StrokeSide::Unknown.as_field(), "");
    }
}
