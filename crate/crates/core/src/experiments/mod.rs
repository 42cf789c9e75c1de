//! Config-driven experiment harness.
//!
//! Every trial draws its randomness from `split_seed(master_seed, trial)`,
//! further split into per-purpose streams, so output does not depend on the
//! number of worker threads.

mod bound;
mod compare;
pub mod config;
mod denoise;
mod eigsim;
mod fit_curves;
mod jacobian;

use std::path::PathBuf;

use rayon::prelude::*;

pub use bound::{run_bound_curve, BoundCurveOutput, BoundRow};
pub use compare::{run_compare, CompareOutput, CompareRow, CompareSummaryRow};
pub use config::{
    BaselineSpec, BoundSpec, DenoiseSpec, EigsimFamily, EigsimSpec, ExperimentConfig, ExperimentKind, GraphModel,
    GraphSpec, JacobianSpec, ModelSpec, SignalSpec,
};
pub use denoise::{run_denoise_file, DenoiseMetricRow, DenoiseOutput};
pub use eigsim::{run_eigsim, EigsimOutput, EigsimRow, EigsimSummaryRow};
pub use fit_curves::{run_fit_curves, FitCurveRow, FitCurvesOutput, FitSummaryRow, TargetKind};
pub use jacobian::{run_jacobian_check, JacobianOutput, JacobianRow};

use crate::error::{Error, Result};
use crate::generators::MAX_CONNECT_ATTEMPTS;
use crate::graph::{normalize_adjacency, Graph, GraphSignal, NormalizedAdjacency};
use crate::linalg::{symmetric_eigen, Spectrum};
use crate::signals::add_noise;

/// Seed of trial `index` derived from `master` with a SplitMix64 step, so
/// trials are independent of execution order.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Streams split off a trial seed.
pub(crate) mod stream {
    pub const GRAPH: u64 = 0;
    pub const SIGNAL: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const AUX: u64 = 3;
    /// Model `j` uses `MODEL + j`.
    pub const MODEL: u64 = 16;
}

/// Runs `f` on `0..n` in the current pool, keeping results in index order.
pub(crate) fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

/// Median with the midpoint of the two central values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One graph draw with its derived quantities and a noisy signal.
pub(crate) struct TrialData {
    pub seed: u64,
    pub graph: Graph,
    pub adj: NormalizedAdjacency,
    pub spectrum: Spectrum,
    pub x0: GraphSignal,
    pub x: GraphSignal,
    pub noise: GraphSignal,
}

pub(crate) fn prepare_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialData> {
    let seed = split_seed(cfg.master_seed, trial as u64);
    let (graph, assignment) = cfg.graph()?.draw(split_seed(seed, stream::GRAPH))?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedAfterRetries(MAX_CONNECT_ATTEMPTS));
    }
    let adj = normalize_adjacency(&graph)?;
    let spectrum = symmetric_eigen(adj.matrix())?;
    let ctx = config::GraphContext {
        graph: &graph,
        assignment: assignment.as_deref(),
        spectrum: &spectrum,
    };
    let x0 = cfg.signal()?.generate(&ctx, split_seed(seed, stream::SIGNAL))?;
    let (x, noise) = add_noise(&x0, cfg.noise()?, split_seed(seed, stream::NOISE))?;
    Ok(TrialData {
        seed,
        graph,
        adj,
        spectrum,
        x0,
        x,
        noise,
    })
}

/// Runs the configured experiment on `jobs` worker threads and writes its
/// CSV files into the output directory, returning their paths.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let dir = cfg.output_dir.as_path();
    std::fs::create_dir_all(dir)?;
    pool.install(|| match cfg.experiment {
        ExperimentKind::FitCurves => run_fit_curves(cfg)?.write(dir),
        ExperimentKind::Eigsim => run_eigsim(cfg)?.write(dir),
        ExperimentKind::CompareBl | ExperimentKind::CompareDw => run_compare(cfg)?.write(dir, cfg.experiment),
        ExperimentKind::JacobianCheck => run_jacobian_check(cfg)?.write(dir),
        ExperimentKind::BoundCurve => run_bound_curve(cfg)?.write(dir),
        ExperimentKind::DenoiseFile => run_denoise_file(cfg)?.write(dir),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_seed_is_deterministic_and_spread() {
        assert_eq!(split_seed(7, 3), split_seed(7, 3));
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| split_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(0, 0), split_seed(1, 0));
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }
}
