//! Positional node features for rewired layers: Laplacian eigenvectors and
//! random-walk return probabilities, plus a one-hot of the layer's band.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BandLayer, FrequencyBand, MultiLayerGraph};

/// Eigenvalues below this are treated as zero.
const ZERO_EIGENVALUE: f64 = 1e-8;
const SIGN_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub lap_dim: usize,
    pub rw_steps: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            lap_dim: 8,
            rw_steps: 8,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lap_dim == 0 || self.rw_steps == 0 {
            return Err(Error::Argument("lap_dim and rw_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Length of an assembled node feature vector.
    pub fn feature_dim(&self) -> usize {
        self.lap_dim + self.rw_steps + FrequencyBand::ALL.len()
    }
}

/// Symmetric normalized Laplacian `I - D^-1/2 A D^-1/2` of the layer without
/// self-loops. Rows and columns of isolated nodes are zero.
pub fn normalized_laplacian(layer: &BandLayer) -> DMatrix<f64> {
    let n = layer.n();
    let a = layer.dense_adjacency(false);
    let inv_sqrt: Vec<f64> = a
        .iter()
        .map(|row| {
            let d: f64 = row.iter().sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
        identity - inv_sqrt[i] * a[i][j] * inv_sqrt[j]
    })
}

/// Full spectrum of the normalized Laplacian: eigenvalues ascending and
/// eigenvectors as matching columns, each sign-fixed so its first nonzero
/// component is positive.
pub fn laplacian_spectrum(layer: &BandLayer) -> (Vec<f64>, DMatrix<f64>) {
    let lap = normalized_laplacian(layer);
    let n = lap.nrows();
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Per-node Laplacian encoding: the eigenvectors of the `dim` smallest
/// nonzero eigenvalues, zero-padded when fewer exist.
pub fn laplacian_pe(layer: &BandLayer, dim: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::Argument("laplacian encoding dimension must be >= 1".into()));
    }
    let n = layer.n();
    let (values, vectors) = laplacian_spectrum(layer);
    let columns: Vec<usize> = (0..n).filter(|&c| values[c] > ZERO_EIGENVALUE).take(dim).collect();
    Ok((0..n)
        .map(|v| {
            let mut row = vec![0.0; dim];
            for (slot, &c) in columns.iter().enumerate() {
                row[slot] = vectors[(v, c)];
            }
            row
        })
        .collect())
}

/// Row-stochastic transition matrix `D^-1 A` with self-loops included.
pub fn transition_matrix(layer: &BandLayer) -> Result<DMatrix<f64>> {
    let a = layer.dense_adjacency(true);
    let n = layer.n();
    let mut t = DMatrix::zeros(n, n);
    for (i, row) in a.iter().enumerate() {
        let d: f64 = row.iter().sum();
        if d <= 0.0 {
            return Err(Error::Data(format!(
                "node {i} of the {} layer has zero weighted degree",
                layer.band
            )));
        }
        for (j, w) in row.iter().enumerate() {
            t[(i, j)] = w / d;
        }
    }
    Ok(t)
}

/// Per-node random-walk encoding: the return probability after 1..=steps
/// steps.
pub fn rw_pe(layer: &BandLayer, steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps == 0 {
        return Err(Error::Argument("random-walk steps must be >= 1".into()));
    }
    let t = transition_matrix(layer)?;
    let n = layer.n();
    let mut out = vec![vec![0.0; steps]; n];
    let mut power = t.clone();
    for s in 0..steps {
        for (v, row) in out.iter_mut().enumerate() {
            row[s] = power[(v, v)];
        }
        if s + 1 < steps {
            power = &power * &t;
        }
    }
    Ok(out)
}

/// Features for one layer: Laplacian block, random-walk block, band one-hot.
pub fn layer_features(layer: &BandLayer, config: &EncodingConfig) -> Result<Vec<Vec<f64>>> {
    let lap = laplacian_pe(layer, config.lap_dim)?;
    let rw = rw_pe(layer, config.rw_steps)?;
    let mut onehot = [0.0; 5];
    onehot[layer.band.index()] = 1.0;
    Ok(lap
        .into_iter()
        .zip(rw)
        .map(|(mut row, walk)| {
            row.extend(walk);
            row.extend(onehot);
            row
        })
        .collect())
}

/// Computes node features for every layer independently and attaches them in
/// global id order.
pub fn assemble_features(graph: MultiLayerGraph, config: &EncodingConfig) -> Result<MultiLayerGraph> {
    config.validate()?;
    let per_layer = graph
        .layers()
        .par_iter()
        .map(|layer| layer_features(layer, config))
        .collect::<Result<Vec<_>>>()?;
    let features = per_layer.into_iter().flatten().collect();
    graph.with_features(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_multilayer;
    use proptest::prelude::*;

    fn layer(n: usize, edges: &[(usize, usize, f64)]) -> BandLayer {
        BandLayer::new(
            FrequencyBand::Alpha1,
            (0..n).map(|i| format!("N{i}")).collect(),
            edges.iter().map(|&(u, v, w)| ((u, v), w)),
        )
        .unwrap()
    }

    fn cycle4(self_loops: bool) -> BandLayer {
        let mut e = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
        if self_loops {
            e.extend((0..4).map(|v| (v, v, 1.0)));
        }
        layer(4, &e)
    }

    /// Dense symmetric eigenvalues by cyclic Jacobi rotations, independent of
    /// nalgebra's solver.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn four_cycle_spectrum() {
        let l = cycle4(true);
        let (values, _) = laplacian_spectrum(&l);
        let lap = normalized_laplacian(&l);
        let dense: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| lap[(i, j)]).collect()).collect();
        let oracle = jacobi_eigenvalues(dense);
        for (got, want) in values.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-10);
        }
        for (got, want) in values.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-10, "{values:?}");
        }
    }

    #[test]
    fn single_edge_closed_form() {
        let l = layer(2, &[(0, 1, 1.0)]);
        let pe = laplacian_pe(&l, 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pe[0][0] - r).abs() < 1e-12);
        assert!((pe[1][0] + r).abs() < 1e-12);
        let (values, _) = laplacian_spectrum(&l);
        assert!((values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn padding_beyond_spectrum() {
        let pe = laplacian_pe(&cycle4(false), 6).unwrap();
        for row in &pe {
            assert_eq!(&row[3..], &[0.0, 0.0, 0.0]);
            assert!(row[..3].iter().any(|x| x.abs() > 1e-6));
        }
    }

    #[test]
    fn isolated_node_gets_zero_row() {
        let l = layer(3, &[(0, 1, 1.0), (2, 2, 1.0)]);
        let pe = laplacian_pe(&l, 2).unwrap();
        assert!(pe[2].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn random_walk_examples() {
        let only_loop = layer(1, &[(0, 0, 1.0)]);
        assert_eq!(rw_pe(&only_loop, 4).unwrap(), vec![vec![1.0; 4]]);
        let pe = rw_pe(&cycle4(false), 2).unwrap();
        for row in pe {
            assert_eq!(row[0], 0.0);
            assert!((row[1] - 0.5).abs() < 1e-15);
        }
        let dangling = layer(2, &[(0, 0, 1.0)]);
        assert!(matches!(rw_pe(&dangling, 2), Err(Error::Data(_))));
    }

    #[test]
    fn assembled_dims_and_band_onehot() {
        let cohort = crate::dataset::synth_cohort(1, 3, &Default::default()).unwrap();
        let g = crate::rewire::rewire_patient(&cohort.patients()[0], cohort.areas(), &Default::default()).unwrap();
        let g = assemble_features(g, &EncodingConfig::default()).unwrap();
        assert_eq!(g.feature_dim(), Some(21));
        let f = g.node_features().unwrap();
        // layer 1 is alpha2
        assert_eq!(&f[84 + 5][16..], &[0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn isomorphic_layers_get_identical_blocks() {
        let e = [(0, 1, 0.3), (1, 2, 0.7), (2, 3, 0.2), (0, 3, 0.9), (0, 2, 0.4)];
        let mut with_loops: Vec<_> = e.to_vec();
        with_loops.extend((0..4).map(|v| (v, v, 1.0)));
        let a = layer(4, &with_loops);
        let mut b = a.clone();
        b.band = FrequencyBand::Beta1;
        let g = build_multilayer(vec![a, b]).unwrap();
        let g = assemble_features(g, &EncodingConfig { lap_dim: 3, rw_steps: 4 }).unwrap();
        let f = g.node_features().unwrap();
        for v in 0..4 {
            assert_eq!(&f[v][..7], &f[4 + v][..7]);
        }
    }

    fn random_layer(n: usize, seed: u64, density: f64) -> BandLayer {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 1.0));
            // spanning path keeps it connected
            if i + 1 < n {
                e.push((i, i + 1, 0.05 + rng.random::<f64>()));
            }
            for j in (i + 2)..n {
                if rng.random::<f64>() < density {
                    e.push((i, j, 0.05 + rng.random::<f64>()));
                }
            }
        }
        layer(n, &e)
    }

    #[test]
    fn eigen_residuals_on_84_nodes() {
        for seed in 0..3 {
            let l = random_layer(84, seed, 0.05);
            let lap = normalized_laplacian(&l);
            let (values, vectors) = laplacian_spectrum(&l);
            for (c, &lambda) in values.iter().enumerate() {
                assert!((-1e-12..=2.0 + 1e-12).contains(&lambda));
                let q = vectors.column(c);
                let r = &lap * q - q * lambda;
                assert!(r.norm() <= 1e-8, "residual {}", r.norm());
            }
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    fn explicit_power_diag(t: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
        let n = t.len();
        let mut p = t.to_vec();
        let mut out = vec![vec![0.0; steps]; n];
        for s in 0..steps {
            for v in 0..n {
                out[v][s] = p[v][v];
            }
            let mut next = vec![vec![0.0; n]; n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        next[i][j] += p[i][k] * t[k][j];
                    }
                }
            }
            p = next;
        }
        out
    }

    proptest! {
        #[test]
        fn random_walk_matches_power_oracle(n in 1usize..=8, seed in 0u64..10_000, steps in 1usize..=6) {
            let l = random_layer(n, seed, 0.4);
            let t = transition_matrix(&l).unwrap();
            for i in 0..n {
                let s: f64 = t.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
            let a = l.dense_adjacency(true);
            let dense: Vec<Vec<f64>> = a.iter().map(|row| {
                let d: f64 = row.iter().sum();
                row.iter().map(|w| w / d).collect()
            }).collect();
            let want = explicit_power_diag(&dense, steps);
            let got = rw_pe(&l, steps).unwrap();
            for v in 0..n {
                for s in 0..steps {
                    prop_assert!((got[v][s] - want[v][s]).abs() <= 1e-10);
                    prop_assert!((0.0..=1.0).contains(&got[v][s]));
                }
            }
        }

        #[test]
        fn relabeling_permutes_encodings(seed in 0u64..2_000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = 7;
            let l = random_layer(n, seed, 0.5);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted = layer(n, &l.edges().map(|((u, v), w)| (perm[u], perm[v], w)).collect::<Vec<_>>());
            let (values, _) = laplacian_spectrum(&l);
            let distinct = values.windows(2).all(|w| w[1] - w[0] > 1e-6);
            prop_assume!(distinct);
            let a = laplacian_pe(&l, n - 1).unwrap();
            let b = laplacian_pe(&permuted, n - 1).unwrap();
            let ra = rw_pe(&l, 4).unwrap();
            let rb = rw_pe(&permuted, 4).unwrap();
            for v in 0..n {
                for c in 0..n - 1 {
                    // sign may flip per column when the first nonzero position moves
                    prop_assert!((a[v][c].abs() - b[perm[v]][c].abs()).abs() < 1e-8);
                }
                for s in 0..4 {
                    prop_assert!((ra[v][s] - rb[perm[v]][s]).abs() < 1e-12);
                }
            }
            for c in 0..n - 1 {
                let same = (0..n).all(|v| (a[v][c] - b[perm[v]][c]).abs() < 1e-8);
                let flipped = (0..n).all(|v| (a[v][c] + b[perm[v]][c]).abs() < 1e-8);
                prop_assert!(same || flipped);
            }
        }
    }
}
