//! K-nearest-neighbor graph over the points `(t_i, tau_i)` and its oriented
//! incidence operator `H`.
//!
//! Edge `(i, k)` exists when either endpoint is among the other's `K` nearest
//! neighbors. The two directed rules are merged into a single undirected edge
//! stored with `i < k`, so row `m` of `H` maps `v` to `v[i_m] - v[k_m]`.
//! Neighbor candidates are ordered by `(distance, index)`, which makes the
//! graph deterministic even with duplicated points.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neighbor-search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnOptions {
    pub k: usize,
    /// Per-axis multipliers applied to `(t, tau)` before measuring distance.
    pub axis_weights: (f64, f64),
}

impl KnnOptions {
    pub fn new(k: usize) -> Self {
        KnnOptions {
            k,
            axis_weights: (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
    // CSR adjacency: neighbors of node v are adj_node[adj_start[v]..adj_start[v + 1]]
    adj_start: Vec<usize>,
    adj_node: Vec<usize>,
    adj_edge: Vec<usize>,
}

#[inline]
fn sq_dist(a: (f64, f64), b: (f64, f64), w: (f64, f64)) -> f64 {
    let dt = w.0 * (a.0 - b.0);
    let dtau = w.1 * (a.1 - b.1);
    dt * dt + dtau * dtau
}

#[inline]
fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Indices of the `k` points nearest to `query`, ordered by distance with
/// ties going to the lower index. `exclude` drops one index from the
/// candidate set (used to keep a node out of its own neighbor list).
pub fn nearest_neighbors(
    points: &[(f64, f64)],
    query: (f64, f64),
    k: usize,
    axis_weights: (f64, f64),
    exclude: Option<usize>,
) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(i, &pt)| (sq_dist(query, pt, axis_weights), i))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_dist_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist_then_index);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// Builds the KNN graph with unit axis weights.
pub fn build_knn_graph(points: &[(f64, f64)], k: usize) -> Result<KnnGraph> {
    build_knn_graph_with(points, &KnnOptions::new(k))
}

pub fn build_knn_graph_with(points: &[(f64, f64)], opts: &KnnOptions) -> Result<KnnGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if opts.k == 0 {
        return Err(crate::error::invalid("k", "must be positive"));
    }
    if opts.k >= n {
        return Err(Error::NeighborCount { k: opts.k, n });
    }
    for (i, &(t, tau)) in points.iter().enumerate() {
        if !t.is_finite() || !tau.is_finite() {
            return Err(Error::NonFinite {
                field: "points",
                row: i + 1,
                col: if t.is_finite() { 2 } else { 1 },
            });
        }
    }
    let (wt, wtau) = opts.axis_weights;
    if !(wt > 0.0 && wtau > 0.0 && wt.is_finite() && wtau.is_finite()) {
        return Err(crate::error::invalid("axis_weights", "must be positive and finite"));
    }

    let neighbor_lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|v| nearest_neighbors(points, points[v], opts.k, opts.axis_weights, Some(v)))
        .collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * opts.k);
    for (v, nbrs) in neighbor_lists.iter().enumerate() {
        for &u in nbrs {
            edges.push((u.min(v), u.max(v)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(KnnGraph::from_edges(n, edges))
}

impl KnnGraph {
    /// Builds a graph from an explicit edge list. Pairs are normalized to
    /// `i < k`, self-loops are dropped and duplicates merged.
    pub fn from_edges(n_nodes: usize, edges: Vec<(usize, usize)>) -> KnnGraph {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|&(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        assert!(
            edges.iter().all(|&(_, b)| b < n_nodes),
            "edge endpoint out of range"
        );

        let mut degree = vec![0usize; n_nodes];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut adj_start = vec![0usize; n_nodes + 1];
        for v in 0..n_nodes {
            adj_start[v + 1] = adj_start[v] + degree[v];
        }
        let mut fill = adj_start.clone();
        let mut adj_node = vec![0usize; 2 * edges.len()];
        let mut adj_edge = vec![0usize; 2 * edges.len()];
        for (m, &(a, b)) in edges.iter().enumerate() {
            adj_node[fill[a]] = b;
            adj_edge[fill[a]] = m;
            fill[a] += 1;
            adj_node[fill[b]] = a;
            adj_edge[fill[b]] = m;
            fill[b] += 1;
        }

        let (components, component_of) = connected_components(n_nodes, &edges);
        KnnGraph {
            n_nodes,
            edges,
            components,
            component_of,
            adj_start,
            adj_node,
            adj_edge,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as 0-based `(i, k)` with `i < k`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj_node[self.adj_start[v]..self.adj_start[v + 1]]
    }

    /// Edge ids parallel to [`neighbors`](Self::neighbors).
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.adj_edge[self.adj_start[v]..self.adj_start[v + 1]]
    }

    /// `(H v)_m = v[i_m] - v[k_m]`.
    pub fn apply_h(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                field: "v",
                expected: self.n_nodes,
                found: v.len(),
            });
        }
        Ok(self.edges.iter().map(|&(a, b)| v[a] - v[b]).collect())
    }

    /// Adjoint of [`apply_h`](Self::apply_h).
    pub fn apply_ht(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.edges.len() {
            return Err(Error::DimensionMismatch {
                field: "w",
                expected: self.edges.len(),
                found: w.len(),
            });
        }
        let mut out = vec![0.0; self.n_nodes];
        for (&(a, b), &wm) in self.edges.iter().zip(w) {
            out[a] += wm;
            out[b] -= wm;
        }
        Ok(out)
    }

    /// `max_m |(H v)_m|`, zero for an edgeless graph.
    pub fn max_abs_diff(&self, v: &[f64]) -> f64 {
        self.edges
            .iter()
            .fold(0.0, |m, &(a, b)| m.max((v[a] - v[b]).abs()))
    }

    /// `||H v||_1`.
    pub fn l1_diff(&self, v: &[f64]) -> f64 {
        self.edges.iter().map(|&(a, b)| (v[a] - v[b]).abs()).sum()
    }

    /// Number of edges whose difference exceeds `eps` in absolute value.
    pub fn count_nonzero_diffs(&self, v: &[f64], eps: f64) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| (v[a] - v[b]).abs() > eps)
            .count()
    }
}

fn connected_components(n: usize, edges: &[(usize, usize)]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(a, b) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut component_of = vec![0usize; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = components.len();
            components.push(Vec::new());
        }
        component_of[v] = label[r];
        components[label[r]].push(v);
    }
    (components, component_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> KnnGraph {
        KnnGraph::from_edges(3, vec![(0, 1), (1, 2)])
    }

    #[test]
    fn three_collinear_points() {
        let pts = [(0.0, 0.0), (0.0, 0.1), (0.0, 0.3)];
        let g = build_knn_graph(&pts, 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| (i as f64 / 7.0, (i * i % 5) as f64 / 5.0)).collect();
        let g = build_knn_graph(&pts, 6).unwrap();
        assert_eq!(g.n_edges(), 7 * 6 / 2);
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn separated_clusters_split() {
        let pts = [
            (0.0, 0.0),
            (0.01, 0.0),
            (0.0, 0.01),
            (0.9, 0.9),
            (0.91, 0.9),
            (0.9, 0.91),
        ];
        let g = build_knn_graph(&pts, 2).unwrap();
        assert_eq!(g.components(), &[vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn duplicate_points_break_ties_by_index() {
        let pts = [(0.5, 0.5), (0.5, 0.5), (0.5, 0.5), (0.9, 0.9)];
        let g = build_knn_graph(&pts, 1).unwrap();
        // node 0 -> 1, node 1 -> 0, node 2 -> 0, node 3 -> 0
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_knn_graph(&[(0.0, 0.0)], 1), Err(Error::TooFewPoints(1))));
        assert!(matches!(
            build_knn_graph(&[(0.0, 0.0), (1.0, 1.0)], 2),
            Err(Error::NeighborCount { k: 2, n: 2 })
        ));
        assert!(build_knn_graph(&[(0.0, f64::NAN), (1.0, 1.0)], 1).is_err());
    }

    #[test]
    fn incidence_examples() {
        let g = KnnGraph::from_edges(2, vec![(0, 1)]);
        assert_eq!(g.apply_h(&[3.0, 5.0]).unwrap(), vec![-2.0]);
        assert_eq!(g.apply_ht(&[1.0]).unwrap(), vec![1.0, -1.0]);
        let g = path3();
        assert_eq!(g.apply_h(&[1.0, 4.0, 9.0]).unwrap(), vec![-3.0, -5.0]);
        assert_eq!(g.apply_ht(&[1.0, 1.0]).unwrap(), vec![1.0, 0.0, -1.0]);
        assert_eq!(g.apply_ht(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert!(g.apply_h(&[1.0]).is_err());
        assert!(g.apply_ht(&[1.0]).is_err());
    }

    #[test]
    fn constant_per_component_is_in_kernel() {
        let g = KnnGraph::from_edges(5, vec![(0, 1), (1, 2), (3, 4)]);
        let v = [2.0, 2.0, 2.0, -1.0, -1.0];
        assert!(g.apply_h(&v).unwrap().iter().all(|&d| d == 0.0));
    }

    fn arb_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..1.0, 0.05f64..0.95), 4..40)
    }

    proptest! {
        #[test]
        fn adjoint_identity(pts in arb_points(), seed in 0u64..1000) {
            let g = build_knn_graph(&pts, 3.min(pts.len() - 1)).unwrap();
            let v: Vec<f64> = (0..g.n_nodes()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 17.0 - 3.0).collect();
            let w: Vec<f64> = (0..g.n_edges()).map(|m| ((m as u64 * 104729 + seed) % 97) as f64 / 13.0 - 3.5).collect();
            let hv = g.apply_h(&v).unwrap();
            let htw = g.apply_ht(&w).unwrap();
            let lhs: f64 = hv.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = v.iter().zip(&htw).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn graph_invariants(pts in arb_points(), k in 1usize..5) {
            let k = k.min(pts.len() - 1);
            let g = build_knn_graph(&pts, k).unwrap();
            for w in g.edges().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for &(a, b) in g.edges() {
                prop_assert!(a < b);
            }
            // edge iff one endpoint is among the other's K nearest
            for v in 0..pts.len() {
                let nb = nearest_neighbors(&pts, pts[v], k, (1.0, 1.0), Some(v));
                for u in nb {
                    let e = (u.min(v), u.max(v));
                    prop_assert!(g.edges().binary_search(&e).is_ok());
                }
            }
            for &(a, b) in g.edges() {
                let na = nearest_neighbors(&pts, pts[a], k, (1.0, 1.0), Some(a));
                let nb = nearest_neighbors(&pts, pts[b], k, (1.0, 1.0), Some(b));
                prop_assert!(na.contains(&b) || nb.contains(&a));
            }
            // kernel of H is exactly the component-wise constants
            let v: Vec<f64> = (0..g.n_nodes()).map(|i| g.component_of(i) as f64 * 1.5).collect();
            prop_assert_eq!(g.max_abs_diff(&v), 0.0);
            let total: usize = g.components().iter().map(Vec::len).sum();
            prop_assert_eq!(total, pts.len());
            for comp in g.components() {
                // a vector that is non-constant on this component must have nonzero H v
                if comp.len() > 1 {
                    let mut v = vec![0.0; g.n_nodes()];
                    v[comp[0]] = 1.0;
                    prop_assert!(g.max_abs_diff(&v) > 0.0);
                }
            }
        }

        #[test]
        fn permutation_gives_isomorphic_graph(pts in arb_points(), rot in 1usize..7) {
            // generic positions, so no distance ties
            let n = pts.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<(f64, f64)> = perm.iter().map(|&i| pts[i]).collect();
            let g = build_knn_graph(&pts, 2).unwrap();
            let gp = build_knn_graph(&permuted, 2).unwrap();
            let mut mapped: Vec<(usize, usize)> = gp
                .edges()
                .iter()
                .map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
                .collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, g.edges().to_vec());
        }
    }
}
