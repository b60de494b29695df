//! Sparsification of fully connected band graphs.
//!
//! A rewired layer keeps the union of three edge sets: each node's `k`
//! spatially nearest areas (symmetrized), every pair whose coherence reaches
//! the `quantile` threshold, and a self-loop on every node.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::PatientRecord;
use crate::error::{Error, Result};
use crate::graph::{build_multilayer, BandLayer, BrodmannArea, ConnectivityMatrix, FrequencyBand, MultiLayerGraph};

pub type EdgeSet = BTreeSet<(usize, usize)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewireConfig {
    pub k: usize,
    pub quantile: f64,
    pub bands_kept: Vec<FrequencyBand>,
}

impl Default for RewireConfig {
    fn default() -> Self {
        Self {
            k: 3,
            quantile: 0.99,
            bands_kept: FrequencyBand::MODEL_BANDS.to_vec(),
        }
    }
}

impl RewireConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(Error::Argument(format!(
                "quantile must lie in [0, 1], got {}",
                self.quantile
            )));
        }
        if self.bands_kept.is_empty() {
            return Err(Error::Argument("bands_kept is empty".into()));
        }
        Ok(())
    }
}

/// Symmetric union of k-nearest-centroid neighborhoods. Distance ties are
/// broken by lower area index. Pairs come back as `(min, max)`.
pub fn structural_edges(areas: &[BrodmannArea], k: usize) -> Result<EdgeSet> {
    let n = areas.len();
    if k >= n && !(k == 0 && n == 0) {
        return Err(Error::Argument(format!("k = {k} must be below the node count {n}")));
    }
    let mut edges = EdgeSet::new();
    for v in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&u| u != v)
            .map(|u| (areas[v].distance(&areas[u]), u))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, u) in others.iter().take(k) {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    Ok(edges)
}

/// Empirical quantile with linear interpolation between the closest order
/// statistics (the inclusive estimator used by numpy's default).
pub fn linear_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Argument(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Off-diagonal pairs whose weight is at least the `quantile` level of the
/// upper-triangle weights.
pub fn functional_edges(matrix: &ConnectivityMatrix, quantile: f64) -> Result<EdgeSet> {
    let n = matrix.n();
    if n < 2 {
        return Ok(EdgeSet::new());
    }
    let threshold = linear_quantile(&matrix.upper_triangle(), quantile)?;
    let mut edges = EdgeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix.get(i, j) >= threshold {
                edges.insert((i, j));
            }
        }
    }
    Ok(edges)
}

/// Rewires one band matrix. Every kept edge carries its coherence weight;
/// self-loops carry 1.0.
pub fn rewire_layer(
    matrix: &ConnectivityMatrix,
    areas: &[BrodmannArea],
    config: &RewireConfig,
) -> Result<BandLayer> {
    config.validate()?;
    if matrix.n() != areas.len() {
        return Err(Error::Structure(format!(
            "{}x{} matrix for {} areas",
            matrix.n(),
            matrix.n(),
            areas.len()
        )));
    }
    let mut kept = structural_edges(areas, config.k)?;
    kept.extend(functional_edges(matrix, config.quantile)?);
    let edges = kept
        .into_iter()
        .map(|(u, v)| ((u, v), matrix.get(u, v)))
        .chain((0..areas.len()).map(|v| ((v, v), 1.0)));
    BandLayer::new(
        matrix.band(),
        areas.iter().map(|a| a.label.clone()).collect(),
        edges,
    )
}

/// Rewires each kept band of a patient and stacks the layers.
pub fn rewire_patient(
    record: &PatientRecord,
    areas: &[BrodmannArea],
    config: &RewireConfig,
) -> Result<MultiLayerGraph> {
    config.validate()?;
    let layers = config
        .bands_kept
        .iter()
        .map(|&band| rewire_layer(record.matrix(band)?, areas, config))
        .collect::<Result<Vec<_>>>()?;
    build_multilayer(layers)
}

/// Fraction of the complete graph's off-diagonal edges kept in a layer,
/// self-loops excluded.
pub fn retention_fraction(layer: &BandLayer) -> f64 {
    let n = layer.n();
    let total = n * n.saturating_sub(1) / 2;
    if total == 0 {
        return 0.0;
    }
    layer.non_loop_edge_count() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_areas(xs: &[f64]) -> Vec<BrodmannArea> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| BrodmannArea {
                index: i,
                label: format!("A{i}"),
                centroid: [x, 0.0, 0.0],
            })
            .collect()
    }

    fn matrix_from_upper(n: usize, upper: &[f64]) -> ConnectivityMatrix {
        let mut w = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = *it.next().unwrap();
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        ConnectivityMatrix::new(FrequencyBand::Alpha1, n, w).unwrap()
    }

    /// Sorts every upper-triangle value and thresholds, independently of
    /// `linear_quantile`.
    fn brute_force_functional(m: &ConnectivityMatrix, q: f64) -> EdgeSet {
        let n = m.n();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                vals.push(m.get(i, j));
            }
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (vals.len() - 1) as f64 * q;
        let below = h.floor() as usize;
        let above = h.ceil() as usize;
        let t = vals[below] + (h - below as f64) * (vals[above] - vals[below]);
        let mut out = EdgeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) >= t {
                    out.insert((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn collinear_knn_with_ties() {
        let areas = line_areas(&[0.0, 1.0, 2.0, 3.0]);
        let e = structural_edges(&areas, 1).unwrap();
        assert_eq!(e, EdgeSet::from([(0, 1), (1, 2), (2, 3)]));
    }

    #[test]
    fn knn_complete_and_bounds() {
        let areas = line_areas(&[0.0, 1.5, 2.0, 7.0, 7.5]);
        let e = structural_edges(&areas, 4).unwrap();
        assert_eq!(e.len(), 10);
        assert!(matches!(structural_edges(&areas, 5), Err(Error::Argument(_))));
        let atlas = crate::graph::default_areas();
        assert!(structural_edges(&atlas, 3).unwrap().len() <= 252);
    }

    #[test]
    fn duplicate_centroids_sort_by_index() {
        let areas = line_areas(&[0.0, 0.0, 0.0, 5.0]);
        let e = structural_edges(&areas, 1).unwrap();
        // node 0 -> 1, node 1 -> 0, node 2 -> 0, node 3 -> 0 (all at x=0, index 0 wins)
        assert_eq!(e, EdgeSet::from([(0, 1), (0, 2), (0, 3)]));
    }

    #[test]
    fn quantile_example() {
        let m = matrix_from_upper(4, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let t = linear_quantile(&m.upper_triangle(), 0.5).unwrap();
        assert!((t - 0.35).abs() < 1e-15);
        let e = functional_edges(&m, 0.5).unwrap();
        // upper triangle order: (0,1)=.1 (0,2)=.2 (0,3)=.3 (1,2)=.4 (1,3)=.5 (2,3)=.6
        assert_eq!(e, EdgeSet::from([(1, 2), (1, 3), (2, 3)]));
    }

    #[test]
    fn quantile_zero_keeps_everything() {
        let vals: Vec<f64> = (0..3486).map(|i| ((i * 7919) % 3486) as f64 / 3486.0).collect();
        let m = matrix_from_upper(84, &vals);
        assert_eq!(functional_edges(&m, 0.0).unwrap().len(), 3486);
    }

    #[test]
    fn top_one_percent_of_distinct_values_is_35_edges() {
        let vals: Vec<f64> = (0..3486).map(|i| ((i * 7919) % 3486) as f64 / 3486.0).collect();
        let m = matrix_from_upper(84, &vals);
        assert_eq!(functional_edges(&m, 0.99).unwrap().len(), 35);
    }

    #[test]
    fn degenerate_config_keeps_self_loops_and_maxima() {
        let areas = line_areas(&[0.0, 1.0, 2.0, 3.0]);
        let m = matrix_from_upper(4, &[0.2, 0.9, 0.1, 0.9, 0.3, 0.4]);
        let cfg = RewireConfig { k: 0, quantile: 1.0, bands_kept: vec![FrequencyBand::Alpha1] };
        let layer = rewire_layer(&m, &areas, &cfg).unwrap();
        let edges: Vec<_> = layer.edges().map(|(e, _)| e).collect();
        assert_eq!(edges, vec![(0, 0), (0, 2), (1, 1), (1, 2), (2, 2), (3, 3)]);
        assert_eq!(layer.weight(0, 2), Some(0.9));
        assert_eq!(layer.weight(3, 3), Some(1.0));
    }

    #[test]
    fn rewired_layer_is_union_with_llc_weights() {
        let areas = line_areas(&[0.0, 1.0, 2.5, 4.0, 4.2, 9.0]);
        let m = matrix_from_upper(6, &(1..=15).map(|i| i as f64 / 20.0).collect::<Vec<_>>());
        let cfg = RewireConfig { k: 2, quantile: 0.8, bands_kept: vec![FrequencyBand::Alpha1] };
        let layer = rewire_layer(&m, &areas, &cfg).unwrap();
        for (u, v) in structural_edges(&areas, 2).unwrap().into_iter().chain(functional_edges(&m, 0.8).unwrap()) {
            assert_eq!(layer.weight(u, v), Some(m.get(u, v)));
        }
        assert!((0..6).all(|v| layer.has_self_loop(v)));
    }

    fn random_matrix(n: usize, seed: u64) -> ConnectivityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random::<f64>()).collect();
        matrix_from_upper(n, &upper)
    }

    #[test]
    fn default_config_retains_about_five_percent() {
        let areas = crate::graph::default_areas();
        let cfg = RewireConfig::default();
        for seed in 0..5 {
            let layer = rewire_layer(&random_matrix(84, seed), &areas, &cfg).unwrap();
            let f = retention_fraction(&layer);
            assert!((0.03..=0.10).contains(&f), "retention {f}");
        }
    }

    #[test]
    fn patient_rewiring_layers() {
        let cohort = crate::dataset::synth_cohort(1, 5, &Default::default()).unwrap();
        let p = &cohort.patients()[0];
        let g = rewire_patient(p, cohort.areas(), &RewireConfig::default()).unwrap();
        assert_eq!(g.node_count(), 252);
        assert_eq!(g, rewire_patient(p, cohort.areas(), &RewireConfig::default()).unwrap());
        let delta = RewireConfig { bands_kept: vec![FrequencyBand::Delta], ..Default::default() };
        assert_eq!(rewire_patient(p, cohort.areas(), &delta).unwrap().node_count(), 84);
    }

    proptest! {
        #[test]
        fn functional_edges_match_sort_oracle(
            n in 2usize..=8,
            vals in proptest::collection::vec(0.0f64..1.0, 28),
            q in 0.0f64..=1.0,
        ) {
            let upper = &vals[..n * (n - 1) / 2];
            let m = matrix_from_upper(n, upper);
            prop_assert_eq!(functional_edges(&m, q).unwrap(), brute_force_functional(&m, q));
        }

        #[test]
        fn quantile_monotone(seed in 0u64..1000, q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
            let m = random_matrix(8, seed);
            let (lo, hi) = (q1.min(q2), q1.max(q2));
            let a = functional_edges(&m, hi).unwrap();
            let b = functional_edges(&m, lo).unwrap();
            prop_assert!(a.is_subset(&b));
        }

        #[test]
        fn knn_monotone_and_degree(xs in proptest::collection::vec(-50.0f64..50.0, 3..12), k1 in 0usize..10, k2 in 0usize..10) {
            let areas: Vec<BrodmannArea> = xs.iter().enumerate()
                .map(|(i, &x)| BrodmannArea { index: i, label: format!("A{i}"), centroid: [x, (i as f64).sin(), 0.0] })
                .collect();
            let n = areas.len();
            let (lo, hi) = (k1.min(k2) % n, k1.max(k2) % n);
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let a = structural_edges(&areas, lo).unwrap();
            let b = structural_edges(&areas, hi).unwrap();
            prop_assert!(a.is_subset(&b));
            if hi >= 1 {
                let m = matrix_from_upper(n, &vec![0.5; n * (n - 1) / 2]);
                let cfg = RewireConfig { k: hi, quantile: 1.0, bands_kept: vec![FrequencyBand::Alpha1] };
                let layer = rewire_layer(&m, &areas, &cfg).unwrap();
                let adj = layer.neighbors();
                for v in 0..n {
                    prop_assert!(layer.has_self_loop(v));
                    prop_assert!(adj[v].len() + 1 >= 2);
                }
            }
        }

        #[test]
        fn rewiring_is_permutation_equivariant(seed in 0u64..500) {
            use rand::{seq::SliceRandom, SeedableRng, Rng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let areas: Vec<BrodmannArea> = (0..n)
                .map(|i| BrodmannArea { index: i, label: format!("A{i}"), centroid: [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0] })
                .collect();
            let m = random_matrix(n, seed + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            // area i moves to position perm[i]
            let mut p_areas = areas.clone();
            for i in 0..n {
                p_areas[perm[i]] = BrodmannArea { index: perm[i], label: format!("A{}", perm[i]), centroid: areas[i].centroid };
            }
            let mut pw = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    pw[perm[i] * n + perm[j]] = m.get(i, j);
                }
            }
            let pm = ConnectivityMatrix::new(FrequencyBand::Alpha1, n, pw).unwrap();
            let cfg = RewireConfig { k: 2, quantile: 0.8, bands_kept: vec![FrequencyBand::Alpha1] };
            let a = rewire_layer(&m, &areas, &cfg).unwrap();
            let b = rewire_layer(&pm, &p_areas, &cfg).unwrap();
            let mapped: EdgeSet = a.edges().map(|((u, v), _)| (perm[u].min(perm[v]), perm[u].max(perm[v]))).collect();
            let direct: EdgeSet = b.edges().map(|(e, _)| e).collect();
            prop_assert_eq!(mapped, direct);
        }
    }
}
