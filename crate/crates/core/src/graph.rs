//! Undirected weighted graphs, degree normalization, polynomial graph
//! filters, the graph Fourier transform and the graph median.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::Spectrum;

/// A real value per node.
pub type GraphSignal = Array1<f64>;

/// Undirected graph with a dense symmetric, nonnegative, zero-diagonal
/// adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<f64>,
}

impl Graph {
    pub fn new(adjacency: Array2<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be a nonempty square matrix, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "self loop at node {i}"
                )));
            }
            for j in 0..n {
                let w = adjacency[[i, j]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "edge ({i},{j}) has invalid weight {w}"
                    )));
                }
                if w != adjacency[[j, i]] {
                    return Err(Error::NotSymmetric((w - adjacency[[j, i]]).abs()));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Builds a graph from `(src, dst, weight)` triples. Repeated edges keep
    /// the last weight.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = Array2::zeros((n_nodes, n_nodes));
        for &(i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i},{j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self loop at node {i}")));
            }
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
        Self::new(a)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn degrees(&self) -> Array1<f64> {
        self.adjacency.sum_axis(ndarray::Axis(1))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(i)
            .into_iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, _)| j)
    }

    /// Number of (undirected) edges.
    pub fn n_edges(&self) -> usize {
        let n = self.n_nodes();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.adjacency[[i, j]] != 0.0).count())
            .sum()
    }

    /// Upper-triangular edge list `(i, j, weight)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[[i, j]];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.hop_distances_from(0).iter().all(Option::is_some)
    }

    /// Unweighted BFS hop counts from `source`; `None` for unreachable nodes.
    pub fn hop_distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let n = self.n_nodes();
        let adj: Vec<Vec<usize>> = (0..n).map(|i| self.neighbors(i).collect()).collect();
        bfs(&adj, source)
    }

    /// All-pairs hop distances. Fails on disconnected graphs.
    pub fn hop_distance_matrix(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.n_nodes();
        let adj: Vec<Vec<usize>> = (0..n).map(|i| self.neighbors(i).collect()).collect();
        (0..n)
            .map(|s| {
                bfs(&adj, s)
                    .into_iter()
                    .map(|d| d.ok_or(Error::Disconnected))
                    .collect()
            })
            .collect()
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = -&self.adjacency;
        for (i, d) in self.degrees().iter().enumerate() {
            l[[i, i]] = *d;
        }
        l
    }
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// `D^{-1/2} A D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(Array2<f64>);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

pub fn normalize_adjacency(g: &Graph) -> Result<NormalizedAdjacency> {
    let a = g.adjacency();
    let deg = g.degrees();
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    let inv_sqrt = deg.mapv(|d| 1.0 / d.sqrt());
    let n = g.n_nodes();
    let m = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    Ok(NormalizedAdjacency(m))
}

/// Polynomial filter `H = Σ_m h_m Ã^m` evaluated with Horner's scheme.
pub fn graph_filter(adj: &NormalizedAdjacency, coeffs: &[f64]) -> Result<Array2<f64>> {
    let a = adj.matrix();
    let n = a.nrows();
    if coeffs.is_empty() || coeffs.len() > n {
        return Err(Error::InvalidArgument(format!(
            "filter needs 1..={n} coefficients, got {}",
            coeffs.len()
        )));
    }
    let eye = Array2::<f64>::eye(n);
    let mut h = &eye * coeffs[coeffs.len() - 1];
    for &c in coeffs[..coeffs.len() - 1].iter().rev() {
        h = h.dot(a);
        h.scaled_add(c, &eye);
    }
    // Products of symmetric polynomials in Ã are symmetric up to rounding.
    let sym = (&h + &h.t()) * 0.5;
    Ok(sym)
}

/// Frequency representation `x̃ = Vᵀ x`.
pub fn gft(spec: &Spectrum, x: &GraphSignal) -> Result<Array1<f64>> {
    check_len(spec.dim(), x.len())?;
    Ok(spec.eigenvectors.t().dot(x))
}

pub fn inverse_gft(spec: &Spectrum, x_freq: &Array1<f64>) -> Result<GraphSignal> {
    check_len(spec.dim(), x_freq.len())?;
    Ok(spec.eigenvectors.dot(x_freq))
}

/// `x = V_K x̃_K` for the `k` leading eigenvectors.
pub fn bandlimited_signal(spec: &Spectrum, k: usize, freq_coeffs: &[f64]) -> Result<GraphSignal> {
    if k == 0 || k > spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {k} outside 1..={}",
            spec.dim()
        )));
    }
    check_len(k, freq_coeffs.len())?;
    let coeffs = Array1::from(freq_coeffs.to_vec());
    Ok(spec.leading(k).dot(&coeffs))
}

/// Median of `x` over each closed neighborhood `{i} ∪ N(i)`. Even-sized
/// neighborhoods take the midpoint of the two middle values.
pub fn graph_median(g: &Graph, x: &GraphSignal) -> Result<GraphSignal> {
    check_len(g.n_nodes(), x.len())?;
    let mut buf = Vec::new();
    let out = (0..g.n_nodes())
        .map(|i| {
            buf.clear();
            buf.push(x[i]);
            buf.extend(g.neighbors(i).map(|j| x[j]));
            median(&mut buf)
        })
        .collect();
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "expected length {expected}, got {got}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, symmetric_eigen};
    use ndarray::array;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn two_node_normalization() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let a = normalize_adjacency(&g).unwrap();
        assert_eq!(a.matrix(), &array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn star_normalization() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let a = normalize_adjacency(&g).unwrap();
        let expect = 1.0 / 3f64.sqrt();
        for leaf in 1..4 {
            assert!((a.matrix()[[0, leaf]] - expect).abs() < 1e-15);
            for other in 1..4 {
                assert_eq!(a.matrix()[[leaf, other]], 0.0);
            }
        }
    }

    #[test]
    fn isolated_node_rejected() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(normalize_adjacency(&g), Err(Error::IsolatedNode(2))));
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(Graph::new(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(Graph::new(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(Graph::new(array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
    }

    #[test]
    fn filter_identity_and_blend() {
        let g = path(5);
        let a = normalize_adjacency(&g).unwrap();
        let h = graph_filter(&a, &[1.0]).unwrap();
        assert_eq!(h, Array2::<f64>::eye(5));
        let gamma = 0.3;
        let h = graph_filter(&a, &[gamma, 1.0 - gamma]).unwrap();
        let expect = Array2::<f64>::eye(5) * gamma + a.matrix() * (1.0 - gamma);
        assert!(frobenius(&(&h - &expect)) < 1e-15);
    }

    #[test]
    fn filter_matches_naive_power_sum() {
        let g = path(10);
        let a = normalize_adjacency(&g).unwrap();
        let h_coeffs = [0.2, -0.7, 1.3];
        let h = graph_filter(&a, &h_coeffs).unwrap();
        let mut power = Array2::<f64>::eye(10);
        let mut naive = Array2::<f64>::zeros((10, 10));
        for &c in &h_coeffs {
            naive.scaled_add(c, &power);
            power = power.dot(a.matrix());
        }
        assert!(frobenius(&(&h - &naive)) < 1e-12);
        let comm = h.dot(a.matrix()) - a.matrix().dot(&h);
        assert!(frobenius(&comm) < 1e-9);
    }

    #[test]
    fn filter_rejects_too_many_coeffs() {
        let a = normalize_adjacency(&path(3)).unwrap();
        assert!(graph_filter(&a, &[1.0; 4]).is_err());
        assert!(graph_filter(&a, &[]).is_err());
    }

    #[test]
    fn gft_of_eigenvector_is_unit_vector() {
        let a = normalize_adjacency(&path(6)).unwrap();
        let spec = symmetric_eigen(a.matrix()).unwrap();
        let v1 = spec.eigenvectors.column(0).to_owned();
        let f = gft(&spec, &v1).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-12);
        assert!(f.iter().skip(1).all(|x| x.abs() < 1e-12));
        let zero = gft(&spec, &Array1::zeros(6)).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        assert!(gft(&spec, &Array1::zeros(5)).is_err());
    }

    #[test]
    fn bandlimited_edge_cases() {
        let a = normalize_adjacency(&path(6)).unwrap();
        let spec = symmetric_eigen(a.matrix()).unwrap();
        let x = bandlimited_signal(&spec, 1, &[1.0]).unwrap();
        assert!(x.iter().zip(spec.eigenvectors.column(0)).all(|(a, b)| (a - b).abs() < 1e-15));
        let y = array![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let f = gft(&spec, &y).unwrap();
        let back = bandlimited_signal(&spec, 6, f.as_slice().unwrap()).unwrap();
        assert!((&back - &y).iter().all(|d| d.abs() < 1e-12));
        assert!(bandlimited_signal(&spec, 0, &[]).is_err());
        assert!(bandlimited_signal(&spec, 7, &[0.0; 7]).is_err());
    }

    #[test]
    fn median_of_path_middle() {
        let g = path(3);
        let m = graph_median(&g, &array![0.0, 10.0, 2.0]).unwrap();
        assert_eq!(m[1], 2.0);
        // endpoints have two-element neighborhoods: midpoint of the pair
        assert_eq!(m[0], 5.0);
        assert_eq!(m[2], 6.0);
    }

    #[test]
    fn median_of_constant_is_constant() {
        let g = path(7);
        let x = Array1::from_elem(7, 3.5);
        assert_eq!(graph_median(&g, &x).unwrap(), x);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let l = path(4).laplacian();
        for row in l.rows() {
            assert!(row.sum().abs() < 1e-15);
        }
    }

    #[test]
    fn hop_distances_on_path() {
        let d = path(4).hop_distance_matrix().unwrap();
        assert_eq!(d[0][3], 3);
        let g = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(!g.is_connected());
        assert!(g.hop_distance_matrix().is_err());
    }
}
