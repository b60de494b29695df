//! Deterministic synthetic cohorts with a planted severity signal.
//!
//! Baseline coherence decays with centroid distance. Each patient has a
//! contiguous lesion (the areas nearest a seed area in the stroke
//! hemisphere) whose intra-lesion coherence in the alpha/beta bands is scaled
//! by `1 - attenuation * (nihss - 2) / 20`. Uniform noise is added on top and
//! every weight is rounded to 9 significant digits so the cohort survives a
//! save/load cycle bit for bit.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cohort, PatientRecord, SeverityClass, StrokeSide};
use crate::error::{Error, Result};
use crate::graph::{default_areas, BrodmannArea, ConnectivityMatrix, FrequencyBand};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of areas in the lesion.
    pub lesion_size: usize,
    /// Label of the area the lesion grows from, without hemisphere suffix.
    pub lesion_seed: String,
    /// Fraction of intra-lesion coherence removed at NIHSS 22.
    pub attenuation: f64,
    /// Half-width of the uniform noise added to every weight.
    pub noise: f64,
    pub base_level: f64,
    pub proximity_gain: f64,
    pub length_scale_mm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            lesion_size: 16,
            lesion_seed: "BA40".into(),
            attenuation: 0.85,
            noise: 0.04,
            base_level: 0.05,
            proximity_gain: 0.6,
            length_scale_mm: 20.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self, n_areas: usize) -> Result<()> {
        if self.lesion_size == 0 || self.lesion_size > n_areas {
            return Err(Error::Argument(format!(
                "lesion_size must be in 1..={n_areas}, got {}",
                self.lesion_size
            )));
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(Error::Argument("attenuation must lie in [0, 1]".into()));
        }
        let finite = [self.noise, self.base_level, self.proximity_gain, self.length_scale_mm];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) || self.length_scale_mm == 0.0 {
            return Err(Error::Argument(
                "noise, base_level, proximity_gain must be >= 0 and length_scale_mm > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Relative coherence level per band; the high bands carry the lesion effect.
fn band_gain(band: FrequencyBand) -> (f64, bool) {
    match band {
        FrequencyBand::Delta => (0.9, false),
        FrequencyBand::Theta => (0.8, false),
        FrequencyBand::Alpha1 => (1.0, true),
        FrequencyBand::Alpha2 => (0.9, true),
        FrequencyBand::Beta1 => (0.7, true),
    }
}

pub(crate) fn round_9_digits(x: f64) -> f64 {
    super::io::format_weight(x).parse().expect("formatted float parses")
}

/// The `size` areas closest to the seed label in the given hemisphere
/// (ties by index), falling back to the left hemisphere for unknown sides.
pub(crate) fn lesion_areas(
    areas: &[BrodmannArea],
    seed: &str,
    side: StrokeSide,
    size: usize,
) -> Result<Vec<usize>> {
    let suffix = match side {
        StrokeSide::Right => "-R",
        _ => "-L",
    };
    let target = format!("{seed}{suffix}");
    let centre = areas
        .iter()
        .find(|a| a.label == target || (a.label == seed && side == StrokeSide::Unknown))
        .or_else(|| areas.iter().find(|a| a.label == seed))
        .ok_or_else(|| Error::Argument(format!("lesion seed `{target}` not in area table")))?;
    let mut order: Vec<(f64, usize)> = areas.iter().map(|a| (centre.distance(a), a.index)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut lesion: Vec<usize> = order.into_iter().take(size).map(|(_, i)| i).collect();
    lesion.sort_unstable();
    Ok(lesion)
}

fn draw_nihss(rng: &mut ChaCha8Rng, class: SeverityClass) -> u32 {
    match class {
        SeverityClass::A => rng.random_range(2..=8),
        SeverityClass::B => rng.random_range(9..=15),
        SeverityClass::C => rng.random_range(16..=22),
    }
}

/// Generates `n_patients` patients over the bundled 84-area atlas.
pub fn synth_cohort(n_patients: usize, seed: u64, config: &SynthConfig) -> Result<Cohort> {
    synth_cohort_with_areas(n_patients, seed, config, default_areas())
}

pub fn synth_cohort_with_areas(
    n_patients: usize,
    seed: u64,
    config: &SynthConfig,
    areas: Vec<BrodmannArea>,
) -> Result<Cohort> {
    if n_patients == 0 {
        return Err(Error::Argument("n_patients must be at least 1".into()));
    }
    let n = areas.len();
    config.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // classes cycle A, B, C over a shuffled patient order so every class is
    // present once n >= 3
    let mut classes: Vec<SeverityClass> = (0..n_patients).map(|i| SeverityClass::ALL[i % 3]).collect();
    classes.shuffle(&mut rng);

    let mut baseline = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = areas[i].distance(&areas[j]);
                baseline[i * n + j] =
                    config.base_level + config.proximity_gain * (-d / config.length_scale_mm).exp();
            }
        }
    }

    let width = (n_patients as f64).log10().floor() as usize + 1;
    let mut patients = Vec::with_capacity(n_patients);
    for (p, &class) in classes.iter().enumerate() {
        let nihss = draw_nihss(&mut rng, class);
        let side = if rng.random_bool(0.5) { StrokeSide::Left } else { StrokeSide::Right };
        let lesion = lesion_areas(&areas, &config.lesion_seed, side, config.lesion_size)?;
        let mut in_lesion = vec![false; n];
        for &i in &lesion {
            in_lesion[i] = true;
        }
        let keep = 1.0 - config.attenuation * (nihss as f64 - 2.0) / 20.0;

        let mut matrices = BTreeMap::new();
        for band in FrequencyBand::ALL {
            let (gain, lesioned) = band_gain(band);
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut v = gain * baseline[i * n + j];
                    if lesioned && in_lesion[i] && in_lesion[j] {
                        v *= keep;
                    }
                    if config.noise > 0.0 {
                        v += rng.random_range(-config.noise..=config.noise);
                    }
                    let v = round_9_digits(v.clamp(0.0, 1.0));
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
            }
            matrices.insert(band, ConnectivityMatrix::new(band, n, w)?);
        }
        patients.push(PatientRecord {
            patient_id: format!("P{:0width$}", p + 1),
            matrices,
            nihss,
            stroke_side: side,
        });
    }
    Cohort::new(patients, areas)
}
