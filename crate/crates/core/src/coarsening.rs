//! Hierarchical coarsening of a graph and the graph upsampling operators
//! built from it.
//!
//! Nodes are clustered agglomeratively with average linkage on unweighted
//! hop distances. Cutting the resulting dendrogram at increasing cluster
//! counts gives nested partitions; consecutive partitions are related by a
//! binary membership matrix `P`, and each partition induces a coarse graph
//! whose edge weights count the original edges between clusters. The
//! upsampling operator of a layer is `U = (γI + (1-γ)A) P`: copy each parent
//! value to its children, then blend every child with its coarse neighbors.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};

/// Default blend between parent copy and neighbor average.
pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub a: usize,
    pub b: usize,
    /// Average hop distance between the two clusters.
    pub height: f64,
}

/// Binary merge tree over `n_leaves` nodes. Leaves are clusters
/// `0..n_leaves`; merge `k` creates cluster `n_leaves + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Node-to-cluster labels after applying the first `n_leaves - count`
    /// merges. Clusters are numbered by their smallest member node.
    pub fn cut_to_count(&self, count: usize) -> Result<Vec<usize>> {
        if count == 0 || count > self.n_leaves {
            return Err(Error::UnachievableSize(count));
        }
        Ok(self.apply_merges(self.n_leaves - count))
    }

    /// Labels for the partition obtained by applying every merge with
    /// height at most `height`.
    pub fn cut_at_height(&self, height: f64) -> Vec<usize> {
        let applied = self.merges.iter().take_while(|m| m.height <= height).count();
        self.apply_merges(applied)
    }

    fn apply_merges(&self, applied: usize) -> Vec<usize> {
        let n = self.n_leaves;
        let mut parent: Vec<usize> = (0..n + applied).collect();
        for (k, m) in self.merges[..applied].iter().enumerate() {
            parent[m.a] = n + k;
            parent[m.b] = n + k;
        }
        let root = |mut c: usize| {
            while parent[c] != c {
                c = parent[c];
            }
            c
        };
        canonical_labels(&(0..n).map(root).collect::<Vec<_>>())
    }
}

/// Relabels arbitrary cluster keys as `0..k` in order of first appearance.
fn canonical_labels(keys: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    keys.iter()
        .map(|&k| {
            let next = map.len();
            *map.entry(k).or_insert(next)
        })
        .collect()
}

/// Average-linkage agglomerative clustering on hop distances.
///
/// Linkage values are compared as exact rationals so that ties are real
/// ties; they are broken by the smallest `(id_a, id_b)` pair.
pub fn build_dendrogram(g: &Graph) -> Result<Dendrogram> {
    let n = g.n_nodes();
    let hops = g.hop_distance_matrix()?;
    // slot -> (cluster id, size); distance sums between slots.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<u64> = vec![1; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut sums: Vec<Vec<u64>> = hops
        .iter()
        .map(|row| row.iter().map(|&d| d as u64).collect())
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                best = match best {
                    None => Some((i, j)),
                    Some((bi, bj)) => {
                        let lhs = sums[i][j] as u128 * (sizes[bi] * sizes[bj]) as u128;
                        let rhs = sums[bi][bj] as u128 * (sizes[i] * sizes[j]) as u128;
                        let key = |x: usize, y: usize| (ids[x].min(ids[y]), ids[x].max(ids[y]));
                        if lhs < rhs || (lhs == rhs && key(i, j) < key(bi, bj)) {
                            Some((i, j))
                        } else {
                            Some((bi, bj))
                        }
                    }
                };
            }
        }
        let (i, j) = best.expect("at least two active clusters");
        let height = sums[i][j] as f64 / (sizes[i] * sizes[j]) as f64;
        merges.push(Merge {
            a: ids[i].min(ids[j]),
            b: ids[i].max(ids[j]),
            height,
        });
        // slot i hosts the merged cluster
        for k in 0..n {
            if active[k] && k != i && k != j {
                let s = sums[i][k] + sums[j][k];
                sums[i][k] = s;
                sums[k][i] = s;
            }
        }
        sizes[i] += sizes[j];
        ids[i] = n + step;
        active[j] = false;
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// Binary child-to-parent matrix between consecutive layers
/// (`children × parents`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix(Array2<f64>);

impl MembershipMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        for (i, row) in m.rows().into_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidArgument(format!(
                    "membership row {i} must contain exactly one 1"
                )));
            }
        }
        for (j, col) in m.columns().into_iter().enumerate() {
            if !col.iter().any(|&v| v == 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "membership column {j} has no children"
                )));
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    /// Parent index of every child.
    pub fn parents(&self) -> Vec<usize> {
        self.0
            .rows()
            .into_iter()
            .map(|r| r.iter().position(|&v| v == 1.0).expect("validated row"))
            .collect()
    }
}

fn validate_sizes(sizes: &[usize], n: usize) -> Result<()> {
    if sizes.is_empty() || *sizes.last().unwrap() != n {
        return Err(Error::InvalidArgument(format!(
            "layer sizes must end with the node count {n}, got {sizes:?}"
        )));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "layer sizes must be positive and strictly increasing, got {sizes:?}"
        )));
    }
    Ok(())
}

/// Cuts `d` into partitions with `sizes[ℓ]` clusters and returns the
/// per-layer node labels.
pub fn cut_partitions(d: &Dendrogram, sizes: &[usize]) -> Result<Vec<Vec<usize>>> {
    validate_sizes(sizes, d.n_leaves())?;
    let parts: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&c| d.cut_to_count(c))
        .collect::<Result<_>>()?;
    for (&c, p) in sizes.iter().zip(&parts) {
        if p.iter().max().map_or(0, |m| m + 1) != c {
            return Err(Error::UnachievableSize(c));
        }
    }
    Ok(parts)
}

/// Membership matrices `P^(1..L)` for the layer sizes `[N^(0), …, N^(L)]`.
pub fn cut_hierarchy(d: &Dendrogram, sizes: &[usize]) -> Result<Vec<MembershipMatrix>> {
    let parts = cut_partitions(d, sizes)?;
    memberships_from_partitions(&parts, sizes)
}

fn memberships_from_partitions(parts: &[Vec<usize>], sizes: &[usize]) -> Result<Vec<MembershipMatrix>> {
    (1..parts.len())
        .map(|l| {
            let mut p = Array2::zeros((sizes[l], sizes[l - 1]));
            for (child, parent) in parts[l].iter().zip(&parts[l - 1]) {
                if p.row(*child).iter().any(|&v| v == 1.0) && p[[*child, *parent]] != 1.0 {
                    return Err(Error::InvalidArgument(
                        "partitions are not nested".into(),
                    ));
                }
                p[[*child, *parent]] = 1.0;
            }
            MembershipMatrix::new(p)
        })
        .collect()
}

/// Degree-normalized coarse adjacency: entry `(i, j)` counts the original
/// edges between clusters `i` and `j`.
pub fn coarse_adjacency(g: &Graph, assignment: &[usize]) -> Result<Array2<f64>> {
    if assignment.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} entries for {} nodes",
            assignment.len(),
            g.n_nodes()
        )));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut counts = Array2::<f64>::zeros((k, k));
    for (i, j, _) in g.edges() {
        let (ci, cj) = (assignment[i], assignment[j]);
        if ci != cj {
            counts[[ci, cj]] += 1.0;
            counts[[cj, ci]] += 1.0;
        }
    }
    let coarse = Graph::new(counts)?;
    match normalize_adjacency(&coarse) {
        Ok(a) => Ok(a.into_inner()),
        Err(Error::IsolatedNode(c)) => Err(Error::IsolatedCluster(c)),
        Err(e) => Err(e),
    }
}

/// `(γI + (1-γ)A) P`.
pub fn upsampling_operator(
    coarse_adj: &Array2<f64>,
    membership: &MembershipMatrix,
    gamma: f64,
) -> Result<Array2<f64>> {
    let p = membership.matrix();
    let n = coarse_adj.nrows();
    if coarse_adj.ncols() != n || p.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "coarse adjacency {}x{} vs membership {}x{}",
            n,
            coarse_adj.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")));
    }
    let blend = Array2::<f64>::eye(n) * gamma + coarse_adj * (1.0 - gamma);
    Ok(blend.dot(p))
}

/// Layer sizes, memberships, coarse adjacencies and upsamplers of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseningHierarchy {
    pub sizes: Vec<usize>,
    /// Node labels at every layer `0..=L`.
    pub assignments: Vec<Vec<usize>>,
    /// `P^(ℓ)` for `ℓ = 1..=L` (index `ℓ - 1`).
    pub memberships: Vec<MembershipMatrix>,
    /// Normalized `A^(ℓ)` for `ℓ = 1..=L` (index `ℓ - 1`).
    pub adjacencies: Vec<Array2<f64>>,
    /// `U^(ℓ)` for `ℓ = 1..=L` (index `ℓ - 1`).
    pub upsamplers: Vec<Array2<f64>>,
    pub gamma: f64,
}

impl CoarseningHierarchy {
    pub fn n_layers(&self) -> usize {
        self.upsamplers.len()
    }

    /// Inspection export: sizes, per-layer labels and γ.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            sizes: &'a [usize],
            assignments: &'a [Vec<usize>],
            gamma: f64,
        }
        Ok(serde_json::to_string_pretty(&Export {
            sizes: &self.sizes,
            assignments: &self.assignments,
            gamma: self.gamma,
        })?)
    }
}

pub fn build_hierarchy(g: &Graph, sizes: &[usize], gamma: f64) -> Result<CoarseningHierarchy> {
    validate_sizes(sizes, g.n_nodes())?;
    let d = build_dendrogram(g)?;
    let assignments = cut_partitions(&d, sizes)?;
    let memberships = memberships_from_partitions(&assignments, sizes)?;
    let mut adjacencies = Vec::with_capacity(memberships.len());
    let mut upsamplers = Vec::with_capacity(memberships.len());
    for (l, p) in memberships.iter().enumerate() {
        let a = coarse_adjacency(g, &assignments[l + 1])?;
        upsamplers.push(upsampling_operator(&a, p, gamma)?);
        adjacencies.push(a);
    }
    Ok(CoarseningHierarchy {
        sizes: sizes.to_vec(),
        assignments,
        memberships,
        adjacencies,
        upsamplers,
        gamma,
    })
}

/// `layers + 1` sizes interpolated geometrically from `n0` to `n`, forced
/// strictly increasing.
pub fn geometric_sizes(n0: usize, n: usize, layers: usize) -> Result<Vec<usize>> {
    if n0 == 0 || n0 > n || layers == 0 || (n0 == n && layers > 0) || n - n0 < layers {
        return Err(Error::InvalidArgument(format!(
            "cannot interpolate {layers} layers from {n0} to {n} nodes"
        )));
    }
    let ratio = (n as f64 / n0 as f64).powf(1.0 / layers as f64);
    let mut sizes: Vec<usize> = (0..=layers)
        .map(|l| (n0 as f64 * ratio.powi(l as i32)).round() as usize)
        .collect();
    sizes[0] = n0;
    sizes[layers] = n;
    for l in 1..layers {
        sizes[l] = sizes[l].max(sizes[l - 1] + 1).min(n - (layers - l));
    }
    Ok(sizes)
}
