//! Random graph models: stochastic block models and the caveman, random
//! regular, small-world and powerlaw-cluster families.

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Resampling budget for generators that must return a connected graph.
pub const MAX_CONNECT_ATTEMPTS: usize = 100;

/// Planted-partition random graph model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmModel {
    assignment: Vec<usize>,
    link_probabilities: Array2<f64>,
}

impl SbmModel {
    pub fn new(assignment: Vec<usize>, link_probabilities: Array2<f64>) -> Result<Self> {
        let k = link_probabilities.nrows();
        if k == 0 || link_probabilities.ncols() != k {
            return Err(Error::InvalidArgument(
                "link probabilities must be a nonempty square matrix".into(),
            ));
        }
        if assignment.is_empty() {
            return Err(Error::InvalidArgument("SBM needs at least one node".into()));
        }
        for i in 0..k {
            for j in 0..k {
                let p = link_probabilities[[i, j]];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "link probability {p} outside [0, 1]"
                    )));
                }
                if p != link_probabilities[[j, i]] {
                    return Err(Error::InvalidArgument(
                        "link probabilities must be symmetric".into(),
                    ));
                }
            }
        }
        let mut seen = vec![false; k];
        for &c in &assignment {
            if c >= k {
                return Err(Error::InvalidArgument(format!(
                    "community {c} out of range for {k} communities"
                )));
            }
            seen[c] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("community {c} is empty")));
        }
        Ok(Self {
            assignment,
            link_probabilities,
        })
    }

    /// `k` contiguous, near-equal communities (the first `n % k` get one
    /// extra node) with `p_in` on the diagonal of Ω and `p_out` elsewhere.
    pub fn balanced(n_nodes: usize, k: usize, p_in: f64, p_out: f64) -> Result<Self> {
        if k == 0 || k > n_nodes {
            return Err(Error::InvalidArgument(format!(
                "cannot split {n_nodes} nodes into {k} communities"
            )));
        }
        let base = n_nodes / k;
        let extra = n_nodes % k;
        let mut assignment = Vec::with_capacity(n_nodes);
        for c in 0..k {
            let size = base + usize::from(c < extra);
            assignment.extend(std::iter::repeat_n(c, size));
        }
        let omega = Array2::from_shape_fn((k, k), |(i, j)| if i == j { p_in } else { p_out });
        Self::new(assignment, omega)
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn k_communities(&self) -> usize {
        self.link_probabilities.nrows()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn link_probabilities(&self) -> &Array2<f64> {
        &self.link_probabilities
    }

    /// One-hot community indicator `B` (`n × k`).
    pub fn indicator(&self) -> Array2<f64> {
        let mut b = Array2::zeros((self.n_nodes(), self.k_communities()));
        for (i, &c) in self.assignment.iter().enumerate() {
            b[[i, c]] = 1.0;
        }
        b
    }

    /// `B Ω Bᵀ` with the diagonal zeroed.
    pub fn expected_adjacency(&self) -> Array2<f64> {
        let b = self.indicator();
        let mut e = b.dot(&self.link_probabilities).dot(&b.t());
        for i in 0..self.n_nodes() {
            e[[i, i]] = 0.0;
        }
        e
    }

    /// Smallest expected degree.
    pub fn min_expected_degree(&self) -> f64 {
        self.expected_adjacency()
            .sum_axis(ndarray::Axis(1))
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Draws one SBM graph, resampling until connected.
pub fn sample_sbm(model: &SbmModel, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let g = draw_sbm(model, &mut rng)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedAfterRetries(MAX_CONNECT_ATTEMPTS))
}

/// One SBM draw without the connectivity requirement.
pub fn draw_sbm<R: Rng + ?Sized>(model: &SbmModel, rng: &mut R) -> Result<Graph> {
    let n = model.n_nodes();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let p = model.link_probabilities[[model.assignment[i], model.assignment[j]]];
            if rng.random::<f64>() < p {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    Graph::new(a)
}

/// Non-SBM graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    /// `cliques` complete cliques of equal size joined in a ring by one
    /// edge between consecutive cliques.
    Caveman { cliques: usize },
    /// Uniform random `degree`-regular graph.
    Regular { degree: usize },
    /// Watts–Strogatz ring with `k` nearest neighbors and rewiring
    /// probability `p`.
    SmallWorld { k: usize, p: f64 },
    /// Holme–Kim growth with `m` edges per new node and triangle
    /// probability `p`.
    PowerlawCluster { m: usize, p: f64 },
}

/// Draws a connected graph with `n_nodes` nodes from `family`.
pub fn sample_graph(family: GraphFamily, n_nodes: usize, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        GraphFamily::Caveman { cliques } => caveman(cliques, n_nodes),
        GraphFamily::Regular { degree } => retry_connected(|| random_regular(degree, n_nodes, &mut rng)),
        GraphFamily::SmallWorld { k, p } => retry_connected(|| watts_strogatz(n_nodes, k, p, &mut rng)),
        GraphFamily::PowerlawCluster { m, p } => {
            retry_connected(|| powerlaw_cluster(n_nodes, m, p, &mut rng))
        }
    }
}

fn retry_connected(mut draw: impl FnMut() -> Result<Graph>) -> Result<Graph> {
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let g = draw()?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::DisconnectedAfterRetries(MAX_CONNECT_ATTEMPTS))
}

fn graph_from_set(n: usize, edges: &HashSet<(usize, usize)>) -> Result<Graph> {
    let mut sorted: Vec<_> = edges.iter().copied().collect();
    sorted.sort_unstable();
    let triples: Vec<_> = sorted.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    Graph::from_edges(n, &triples)
}

pub fn caveman(cliques: usize, n_nodes: usize) -> Result<Graph> {
    if cliques < 2 || !n_nodes.is_multiple_of(cliques) || n_nodes / cliques < 2 {
        return Err(Error::InvalidArgument(format!(
            "caveman needs >= 2 cliques of >= 2 nodes dividing {n_nodes}, got {cliques} cliques"
        )));
    }
    let size = n_nodes / cliques;
    let mut edges = Vec::new();
    for c in 0..cliques {
        let start = c * size;
        for i in start..start + size {
            for j in (i + 1)..start + size {
                edges.push((i, j, 1.0));
            }
        }
        let last = start + size - 1;
        let next_first = ((c + 1) % cliques) * size;
        edges.push((last, next_first, 1.0));
    }
    Graph::from_edges(n_nodes, &edges)
}

/// Pairing model with suitable-pair selection and restart on dead ends.
fn random_regular<R: Rng + ?Sized>(degree: usize, n: usize, rng: &mut R) -> Result<Graph> {
    if degree == 0 || degree >= n || !(n * degree).is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "no simple {degree}-regular graph on {n} nodes"
        )));
    }
    loop {
        if let Some(edges) = try_regular(degree, n, rng) {
            return graph_from_set(n, &edges);
        }
    }
}

fn try_regular<R: Rng + ?Sized>(
    degree: usize,
    n: usize,
    rng: &mut R,
) -> Option<HashSet<(usize, usize)>> {
    let mut edges = HashSet::new();
    let mut stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, degree)).collect();
    while !stubs.is_empty() {
        let mut potential = vec![0usize; n];
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (s1, s2) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if s1 != s2 && !edges.contains(&(s1, s2)) {
                edges.insert((s1, s2));
            } else {
                potential[s1] += 1;
                potential[s2] += 1;
            }
        }
        let open: Vec<usize> = (0..n).filter(|&i| potential[i] > 0).collect();
        let suitable = open.iter().enumerate().any(|(a, &u)| {
            open[a + 1..].iter().any(|&v| !edges.contains(&(u, v)))
        });
        if !open.is_empty() && !suitable {
            return None;
        }
        stubs = open
            .iter()
            .flat_map(|&i| std::iter::repeat_n(i, potential[i]))
            .collect();
    }
    Some(edges)
}

fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if k < 2 || !k.is_multiple_of(2) || k >= n || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "small world needs even 2 <= k < n and p in [0,1], got k={k}, p={p}"
        )));
    }
    let mut adj = vec![HashSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() < p {
                if adj[u].len() >= n - 1 || !adj[u].contains(&v) {
                    continue;
                }
                let mut w = rng.random_range(0..n);
                while w == u || adj[u].contains(&w) {
                    w = rng.random_range(0..n);
                }
                adj[u].remove(&v);
                adj[v].remove(&u);
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
    }
    let mut edges = HashSet::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    graph_from_set(n, &edges)
}

fn powerlaw_cluster<R: Rng + ?Sized>(n: usize, m: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if m == 0 || m >= n || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "powerlaw cluster needs 1 <= m < n and p in [0,1], got m={m}, p={p}"
        )));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let has_edge = |adj: &Vec<Vec<usize>>, a: usize, b: usize| adj[a].contains(&b);
    let mut repeated: Vec<usize> = (0..m).collect();
    for source in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let x = repeated[rng.random_range(0..repeated.len())];
            if !targets.contains(&x) {
                targets.push(x);
            }
        }
        let mut target = targets.pop().expect("m >= 1");
        adj[source].push(target);
        adj[target].push(source);
        repeated.push(target);
        let mut count = 1;
        while count < m {
            if rng.random::<f64>() < p {
                let hood: Vec<usize> = adj[target]
                    .iter()
                    .copied()
                    .filter(|&nb| nb != source && !has_edge(&adj, source, nb))
                    .collect();
                if !hood.is_empty() {
                    let nb = hood[rng.random_range(0..hood.len())];
                    adj[source].push(nb);
                    adj[nb].push(source);
                    repeated.push(nb);
                    count += 1;
                    continue;
                }
            }
            target = targets.pop().expect("enough preferential targets");
            if !has_edge(&adj, source, target) {
                adj[source].push(target);
                adj[target].push(source);
            }
            repeated.push(target);
            count += 1;
        }
        repeated.extend(std::iter::repeat_n(source, m));
    }
    let mut edges = HashSet::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    graph_from_set(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_graph_invariants(g: &Graph) {
        let a = g.adjacency();
        for i in 0..g.n_nodes() {
            assert_eq!(a[[i, i]], 0.0);
            for j in 0..g.n_nodes() {
                assert_eq!(a[[i, j]], a[[j, i]]);
                assert!(a[[i, j]] >= 0.0);
            }
        }
    }

    #[test]
    fn all_ones_sbm_is_complete() {
        let model = SbmModel::balanced(6, 2, 1.0, 1.0).unwrap();
        let g = sample_sbm(&model, 0).unwrap();
        assert_eq!(g.n_edges(), 15);
    }

    #[test]
    fn disjoint_cliques_fail_connectivity() {
        let model = SbmModel::balanced(6, 2, 1.0, 0.0).unwrap();
        assert!(matches!(
            sample_sbm(&model, 0),
            Err(Error::DisconnectedAfterRetries(MAX_CONNECT_ATTEMPTS))
        ));
    }

    #[test]
    fn sbm_validation() {
        assert!(SbmModel::balanced(4, 5, 0.5, 0.1).is_err());
        assert!(SbmModel::balanced(4, 2, 1.5, 0.1).is_err());
        let omega = Array2::from_elem((2, 2), 0.5);
        assert!(SbmModel::new(vec![0, 0, 0], omega).is_err());
    }

    #[test]
    fn expected_adjacency_has_block_structure() {
        let model = SbmModel::balanced(6, 2, 0.8, 0.1).unwrap();
        let e = model.expected_adjacency();
        assert_eq!(e[[0, 0]], 0.0);
        assert_eq!(e[[0, 1]], 0.8);
        assert_eq!(e[[0, 4]], 0.1);
        assert!((model.min_expected_degree() - (2.0 * 0.8 + 3.0 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn sbm_is_deterministic() {
        let model = SbmModel::balanced(32, 4, 0.8, 0.05).unwrap();
        assert_eq!(sample_sbm(&model, 9).unwrap(), sample_sbm(&model, 9).unwrap());
    }

    #[test]
    fn caveman_two_triangles() {
        let g = caveman(2, 6).unwrap();
        assert_eq!(g.n_nodes(), 6);
        let a = g.adjacency();
        for clique in [[0, 1, 2], [3, 4, 5]] {
            for &i in &clique {
                for &j in &clique {
                    if i != j {
                        assert_eq!(a[[i, j]], 1.0);
                    }
                }
            }
        }
        assert_eq!(a[[2, 3]], 1.0);
        assert_eq!(a[[5, 0]], 1.0);
        assert_eq!(g.n_edges(), 8);
        assert!(g.is_connected());
    }

    #[test]
    fn regular_degrees_exact() {
        let g = sample_graph(GraphFamily::Regular { degree: 3 }, 10, 4).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 3.0));
        let g = sample_graph(GraphFamily::Regular { degree: 32 }, 256, 4).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 32.0));
        assert!(sample_graph(GraphFamily::Regular { degree: 3 }, 9, 0).is_err());
    }

    #[test]
    fn small_world_mean_degree() {
        let g = sample_graph(GraphFamily::SmallWorld { k: 4, p: 0.1 }, 50, 11).unwrap();
        assert!(g.is_connected());
        let mean = g.degrees().sum() / 50.0;
        assert!((mean - 4.0).abs() < 1e-12);
        assert_graph_invariants(&g);
    }

    #[test]
    fn powerlaw_cluster_connected() {
        let g = sample_graph(GraphFamily::PowerlawCluster { m: 3, p: 0.3 }, 80, 2).unwrap();
        assert!(g.is_connected());
        assert_graph_invariants(&g);
        // each added node contributes at most m edges (a triangle step can
        // pick a node that is also a preferential target)
        assert!(g.n_edges() <= 3 * (80 - 3));
        assert!(g.n_edges() > 2 * (80 - 3));
    }
}
