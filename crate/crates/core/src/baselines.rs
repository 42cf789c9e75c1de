//! Classical graph-signal denoisers used as reference points.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{graph_median, Graph, GraphSignal};
use crate::linalg::Spectrum;

pub const CG_TOL: f64 = 1e-10;

/// Regularization weights searched by the comparison experiments.
pub const ALPHA_GRID: [f64; 9] = [1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0, 30.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Bl,
    Lr,
    Tv,
    Med,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvSolver {
    pub iters: usize,
    pub step: f64,
}

impl Default for TvSolver {
    fn default() -> Self {
        TvSolver {
            iters: 2000,
            step: 0.1,
        }
    }
}

fn check_len(g: &Graph, x: &GraphSignal) -> Result<()> {
    if x.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} entries for {} nodes",
            x.len(),
            g.n_nodes()
        )));
    }
    Ok(())
}

/// Projection onto the leading `k` eigenvectors.
pub fn bl_denoise(spec: &Spectrum, x: &GraphSignal, k: usize) -> Result<GraphSignal> {
    if k == 0 || k > spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {k} outside 1..={}",
            spec.dim()
        )));
    }
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} entries, spectrum {}",
            x.len(),
            spec.dim()
        )));
    }
    let vk = spec.leading(k);
    Ok(vk.dot(&vk.t().dot(x)))
}

/// Conjugate gradient for a symmetric positive definite system.
pub fn conjugate_gradient(a: &Array2<f64>, b: &Array1<f64>, tol: f64, max_iter: usize) -> Result<Array1<f64>> {
    let b_norm = b.dot(b).sqrt();
    let mut x = Array1::zeros(b.len());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let ap = a.dot(&p);
        let alpha = rr / p.dot(&ap);
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_next = r.dot(&r);
        p = &r + &(p * (rr_next / rr));
        rr = rr_next;
    }
    if rr.sqrt() <= tol * b_norm {
        Ok(x)
    } else {
        Err(Error::SolverNonConvergence {
            iterations: max_iter,
            residual: rr.sqrt() / b_norm,
        })
    }
}

/// `(I + αL)⁻¹ x` with the combinatorial Laplacian, or the symmetric
/// normalized one when `normalized` is set.
pub fn lr_denoise(g: &Graph, x: &GraphSignal, alpha: f64, normalized: bool) -> Result<GraphSignal> {
    check_len(g, x)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be nonnegative, got {alpha}")));
    }
    let n = g.n_nodes();
    let lap = if normalized {
        let d = g.degrees().mapv(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
        let mut l = Array2::<f64>::eye(n);
        for ((i, j), &a) in g.adjacency().indexed_iter() {
            l[[i, j]] -= d[i] * a * d[j];
        }
        l
    } else {
        g.laplacian()
    };
    let system = Array2::<f64>::eye(n) + lap * alpha;
    conjugate_gradient(&system, x, CG_TOL, 10 * n.max(10))
}

/// `‖x - z‖² + α Σ_{i<j} A_ij |z_i - z_j|`.
pub fn tv_objective(g: &Graph, x: &GraphSignal, z: &GraphSignal, alpha: f64) -> f64 {
    let fit = (x - z).mapv(|v| v * v).sum();
    let tv: f64 = g.edges().iter().map(|&(i, j, w)| w * (z[i] - z[j]).abs()).sum();
    fit + alpha * tv
}

/// Subgradient descent on the total-variation objective from `z = x`
/// with step `step / ((1 + α d_max) √k)`, returning the best iterate seen.
pub fn tv_denoise(g: &Graph, x: &GraphSignal, alpha: f64, solver: TvSolver) -> Result<GraphSignal> {
    check_len(g, x)?;
    if !(alpha >= 0.0) || solver.iters == 0 || !(solver.step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid total-variation settings alpha={alpha}, iters={}, step={}",
            solver.iters, solver.step
        )));
    }
    let edges = g.edges();
    let mut z = x.clone();
    let mut best = z.clone();
    let mut best_obj = tv_objective(g, x, &z, alpha);
    let mut grad = Array1::<f64>::zeros(x.len());
    // the subgradient of the penalty at a node is bounded by alpha times its degree
    let max_degree = g.degrees().iter().cloned().fold(0.0, f64::max);
    let base = solver.step / (1.0 + alpha * max_degree);
    for k in 1..=solver.iters {
        grad.assign(&((&z - x) * 2.0));
        for &(i, j, w) in &edges {
            let s = alpha * w * (z[i] - z[j]).signum() * ((z[i] != z[j]) as u8 as f64);
            grad[i] += s;
            grad[j] -= s;
        }
        z.scaled_add(-base / (k as f64).sqrt(), &grad);
        let obj = tv_objective(g, x, &z, alpha);
        if obj < best_obj {
            best_obj = obj;
            best.assign(&z);
        }
    }
    Ok(best)
}

/// `passes` repeated applications of the graph median.
pub fn med_denoise(g: &Graph, x: &GraphSignal, passes: usize) -> Result<GraphSignal> {
    check_len(g, x)?;
    if passes == 0 {
        return Err(Error::InvalidArgument("median needs at least one pass".into()));
    }
    let mut y = x.clone();
    for _ in 0..passes {
        y = graph_median(g, &y)?;
    }
    Ok(y)
}
