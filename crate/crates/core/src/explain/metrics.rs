//! Classical weighted graph metrics on undirected edge lists.

use std::collections::BTreeMap;

use super::AttentionGraph;
use crate::error::{Error, Result};
use crate::graph::BandLayer;

/// Undirected weighted edge `(u, v, w)`.
pub type WeightedEdge = (usize, usize, f64);

/// Relative tolerance under which two path lengths count as tied.
pub const PATH_TIE_TOL: f64 = 1e-12;

/// Edges of a layer without self-loops.
pub fn layer_edges(layer: &BandLayer) -> Vec<WeightedEdge> {
    layer.edges().filter(|&((u, v), _)| u != v).map(|((u, v), w)| (u, v, w)).collect()
}

/// Sum of incoming attention per node, self-loops excluded.
pub fn weighted_in_degree(graph: &AttentionGraph) -> Vec<f64> {
    let mut out = vec![0.0; graph.node_count()];
    for (&(src, dst), e) in graph.edges() {
        if src != dst {
            out[dst] += e.weight;
        }
    }
    out
}

fn weight_matrix(n: usize, edges: &[WeightedEdge]) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for &(u, v, x) in edges {
        if u != v {
            w[u][v] = x;
            w[v][u] = x;
        }
    }
    w
}

/// Onnela clustering with weights scaled by the largest weight. Nodes of
/// degree below two get zero.
pub fn weighted_clustering(n: usize, edges: &[WeightedEdge]) -> Vec<f64> {
    let w = weight_matrix(n, edges);
    let max = w.iter().flatten().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; n];
    }
    let nbrs: Vec<Vec<usize>> = w
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(j, _)| j).collect())
        .collect();
    (0..n)
        .map(|v| {
            let k = nbrs[v].len();
            if k < 2 {
                return 0.0;
            }
            let mut sum = 0.0;
            for (a, &u) in nbrs[v].iter().enumerate() {
                for &x in &nbrs[v][a + 1..] {
                    if w[u][x] > 0.0 {
                        sum += (w[v][u] / max * (w[v][x] / max) * (w[u][x] / max)).cbrt();
                    }
                }
            }
            // each unordered neighbor pair stands for two ordered ones
            2.0 * sum / (k * (k - 1)) as f64
        })
        .collect()
}

/// Brandes edge betweenness over unordered node pairs; tied shortest paths
/// share credit. Weighted mode uses length `1 / w`. Keys are `(min, max)`.
pub fn edge_betweenness(n: usize, edges: &[WeightedEdge], weighted: bool) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut out = BTreeMap::new();
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::Structure(format!("edge ({u}, {v}) outside {n} nodes")));
        }
        if u == v {
            continue;
        }
        if weighted && !(w.is_finite() && w > 0.0) {
            return Err(Error::Data(format!(
                "edge ({u}, {v}) has weight {w}; weighted betweenness needs positive weights"
            )));
        }
        let len = if weighted { 1.0 / w } else { 1.0 };
        adj[u].push((v, len));
        adj[v].push((u, len));
        out.insert((u.min(v), u.max(v)), 0.0);
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }

    let tied = |a: f64, b: f64| (a - b).abs() <= PATH_TIE_TOL * a.abs().max(b.abs());
    for s in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        let mut sigma = vec![0.0f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        dist[s] = 0.0;
        sigma[s] = 1.0;
        // dense Dijkstra; the graphs here have at most a few hundred nodes
        loop {
            let next = (0..n)
                .filter(|&v| !done[v] && dist[v].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
            let Some(v) = next else { break };
            done[v] = true;
            order.push(v);
            for &(x, len) in &adj[v] {
                if done[x] {
                    continue;
                }
                let alt = dist[v] + len;
                if dist[x].is_finite() && tied(alt, dist[x]) {
                    sigma[x] += sigma[v];
                    preds[x].push(v);
                } else if alt < dist[x] {
                    dist[x] = alt;
                    sigma[x] = sigma[v];
                    preds[x] = vec![v];
                }
            }
        }
        let mut delta = vec![0.0; n];
        for &x in order.iter().rev() {
            for &v in &preds[x] {
                let c = sigma[v] / sigma[x] * (1.0 + delta[x]);
                *out.get_mut(&(v.min(x), v.max(x))).expect("edge registered") += c;
                delta[v] += c;
            }
        }
    }
    // every unordered pair was visited from both ends
    for value in out.values_mut() {
        *value /= 2.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{AttentionEdge, AttentionGraph};
    use crate::graph::EdgeType;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Betweenness by enumerating every simple path between every pair.
    fn brute_betweenness(n: usize, edges: &[WeightedEdge], weighted: bool) -> BTreeMap<(usize, usize), f64> {
        let w = weight_matrix(n, edges);
        let len = |u: usize, v: usize| if weighted { 1.0 / w[u][v] } else { 1.0 };
        let mut out: BTreeMap<(usize, usize), f64> =
            edges.iter().map(|&(u, v, _)| ((u.min(v), u.max(v)), 0.0)).collect();
        fn walk(
            v: usize,
            t: usize,
            path: &mut Vec<usize>,
            length: f64,
            w: &[Vec<f64>],
            len: &dyn Fn(usize, usize) -> f64,
            found: &mut Vec<(f64, Vec<usize>)>,
        ) {
            if v == t {
                found.push((length, path.clone()));
                return;
            }
            for x in 0..w.len() {
                if w[v][x] > 0.0 && !path.contains(&x) {
                    path.push(x);
                    walk(x, t, path, length + len(v, x), w, len, found);
                    path.pop();
                }
            }
        }
        for s in 0..n {
            for t in s + 1..n {
                let mut found = Vec::new();
                walk(s, t, &mut vec![s], 0.0, &w, &len, &mut found);
                let Some(best) = found.iter().map(|f| f.0).min_by(f64::total_cmp) else { continue };
                let shortest: Vec<&Vec<usize>> = found
                    .iter()
                    .filter(|f| (f.0 - best).abs() <= PATH_TIE_TOL * best)
                    .map(|f| &f.1)
                    .collect();
                let share = 1.0 / shortest.len() as f64;
                for p in shortest {
                    for pair in p.windows(2) {
                        *out.get_mut(&(pair[0].min(pair[1]), pair[0].max(pair[1]))).unwrap() += share;
                    }
                }
            }
        }
        out
    }

    fn connected(n: usize, edges: &[WeightedEdge]) -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b, _) in edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    #[test]
    fn betweenness_examples() {
        let single = edge_betweenness(2, &[(0, 1, 1.0)], false).unwrap();
        assert_eq!(single[&(0, 1)], 1.0);
        let path = edge_betweenness(3, &[(0, 1, 1.0), (1, 2, 1.0)], false).unwrap();
        assert_eq!(path[&(0, 1)], 2.0);
        assert_eq!(path[&(1, 2)], 2.0);
        let star = edge_betweenness(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], false).unwrap();
        assert!(star.values().all(|&b| b == 3.0));
    }

    #[test]
    fn disconnected_pairs_contribute_nothing() {
        let b = edge_betweenness(4, &[(0, 1, 1.0), (2, 3, 1.0)], false).unwrap();
        assert_eq!(b[&(0, 1)], 1.0);
        assert_eq!(b[&(2, 3)], 1.0);
    }

    #[test]
    fn nonpositive_weight_is_data_error() {
        assert!(matches!(edge_betweenness(2, &[(0, 1, 0.0)], true), Err(Error::Data(_))));
        assert!(matches!(edge_betweenness(2, &[(0, 1, -1.0)], true), Err(Error::Data(_))));
        assert!(edge_betweenness(2, &[(0, 1, 0.0)], false).is_ok());
    }

    fn assert_close(got: &BTreeMap<(usize, usize), f64>, want: &BTreeMap<(usize, usize), f64>) {
        assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (k, v) in want {
            assert!((got[k] - v).abs() <= 1e-9, "{k:?}: {} vs {v}", got[k]);
        }
    }

    #[test]
    fn betweenness_matches_enumeration_on_all_small_graphs() {
        let mut cases = 0;
        for n in 2..=6usize {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            for mask in 0u32..(1 << pairs.len()) {
                let edges: Vec<WeightedEdge> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &(u, v))| (u, v, 1.0))
                    .collect();
                if !connected(n, &edges) {
                    continue;
                }
                assert_close(&edge_betweenness(n, &edges, false).unwrap(), &brute_betweenness(n, &edges, false));
                cases += 1;
            }
        }
        // connected labelled graphs on 2..=6 nodes
        assert_eq!(cases, 1 + 4 + 38 + 728 + 26704);
    }

    #[test]
    fn betweenness_matches_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut cases = 0;
        while cases < 200 {
            let p = rng.random_range(0.25..0.7);
            let mut edges = Vec::new();
            for u in 0..8 {
                for v in u + 1..8 {
                    if rng.random_bool(p) {
                        // a small weight alphabet makes ties common
                        let w = [0.25, 0.5, 1.0][rng.random_range(0..3)];
                        edges.push((u, v, w));
                    }
                }
            }
            if !connected(8, &edges) {
                continue;
            }
            assert_close(&edge_betweenness(8, &edges, false).unwrap(), &brute_betweenness(8, &edges, false));
            assert_close(&edge_betweenness(8, &edges, true).unwrap(), &brute_betweenness(8, &edges, true));
            cases += 1;
        }
    }

    #[test]
    fn clustering_fixtures() {
        let tri = weighted_clustering(3, &[(0, 1, 0.7), (1, 2, 0.7), (0, 2, 0.7)]);
        assert_eq!(tri, vec![1.0; 3]);
        let path = weighted_clustering(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(path, vec![0.0; 3]);
        let skew = weighted_clustering(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 0.125)]);
        assert_eq!(skew[0], 0.5);
        // star: the hub has three neighbors and no triangles
        let star = weighted_clustering(4, &[(0, 1, 1.0), (0, 2, 0.5), (0, 3, 0.2)]);
        assert_eq!(star, vec![0.0; 4]);
        assert_eq!(weighted_clustering(2, &[]), vec![0.0; 2]);
    }

    #[test]
    fn clustering_matches_ordered_pair_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 7;
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.5) {
                        edges.push((u, v, rng.random_range(0.01..1.0)));
                    }
                }
            }
            let got = weighted_clustering(n, &edges);
            let w = weight_matrix(n, &edges);
            let max = w.iter().flatten().copied().fold(0.0, f64::max);
            for v in 0..n {
                let k = (0..n).filter(|&u| w[v][u] > 0.0).count();
                let mut sum = 0.0;
                for u in 0..n {
                    for x in 0..n {
                        if u != x {
                            sum += (w[v][u] * w[v][x] * w[u][x] / max.powi(3)).cbrt();
                        }
                    }
                }
                let want = if k < 2 { 0.0 } else { sum / (k * (k - 1)) as f64 };
                assert!((got[v] - want).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&got[v]));
            }
        }
    }

    #[test]
    fn in_degree_examples() {
        let mut g = AttentionGraph::new(None, vec!["a".into(), "b".into(), "c".into()]);
        g.insert(1, 0, AttentionEdge { weight: 0.3, kind: EdgeType::Intra });
        g.insert(2, 0, AttentionEdge { weight: 0.4, kind: EdgeType::Intra });
        g.insert(0, 0, AttentionEdge { weight: 0.3, kind: EdgeType::SelfLoop });
        let d = weighted_in_degree(&g);
        assert!((d[0] - 0.7).abs() < 1e-15);
        assert_eq!(&d[1..], &[0.0, 0.0]);
    }

    #[test]
    fn in_degree_matches_row_sums_and_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.random_range(1..=10);
            let mut g = AttentionGraph::new(None, (0..n).map(|i| i.to_string()).collect());
            let mut dense = vec![vec![0.0; n]; n];
            for s in 0..n {
                for t in 0..n {
                    if s != t && rng.random_bool(0.4) {
                        let w = rng.random_range(0.01..1.0);
                        dense[t][s] = w;
                        g.insert(s, t, AttentionEdge { weight: w, kind: EdgeType::Intra });
                    }
                }
            }
            let d = weighted_in_degree(&g);
            for t in 0..n {
                assert!((d[t] - dense[t].iter().sum::<f64>()).abs() < 1e-12);
            }
            let mass: f64 = g.edges().map(|(_, e)| e.weight).sum();
            assert!((d.iter().sum::<f64>() - mass).abs() <= 1e-9);
        }
    }
}
