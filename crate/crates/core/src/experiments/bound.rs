//! Early-stopping bound next to the observed gradient-descent error.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{prepare_trial, split_seed, stream, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::write_table;
use crate::linalg::symmetric_eigen;
use crate::models::{fit, FitConfig, Optimizer};
use crate::spectral::{
    eigenvector_similarity, error_bound_curve, expected_sq_jacobian, width_condition_log10, BoundInputs,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub t: usize,
    pub term_signal: f64,
    pub term_width: f64,
    pub term_noise: f64,
    pub total: f64,
    /// `‖x0 - f_t‖` of the network trained with the same step.
    pub observed_error: f64,
}

const HEADER: [&str; 6] = ["t", "term_signal", "term_width", "term_noise", "total", "observed_error"];

/// Scalars behind the curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundDiagnostics {
    pub eta: f64,
    pub sigma_1: f64,
    pub sigma_k: f64,
    pub sigma_n: f64,
    pub delta: f64,
    pub xi: f64,
    /// `log10` of the width the bound asks for; absent when `σ_N = 0`.
    pub width_condition_log10: Option<f64>,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct BoundCurveOutput {
    pub rows: Vec<BoundRow>,
    pub diagnostics: BoundDiagnostics,
}

impl BoundCurveOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let rows = dir.join("bound_curve.csv");
        write_table(&rows, &HEADER, &self.rows)?;
        let diag = dir.join("bound_diagnostics.json");
        std::fs::write(&diag, serde_json::to_string_pretty(&self.diagnostics)? + "\n")?;
        Ok(vec![rows, diag])
    }
}

/// Uses the graph and signal of trial 0.
pub fn run_bound_curve(cfg: &ExperimentConfig) -> Result<BoundCurveOutput> {
    let spec = cfg.bound()?;
    if !spec.model.kind.is_simplified() {
        return Err(Error::Config("bound-curve needs a two-layer model".into()));
    }
    if !(spec.eta_scale > 0.0 && spec.eta_scale <= 1.0) {
        return Err(Error::Config(format!("eta_scale must lie in (0, 1], got {}", spec.eta_scale)));
    }
    let data = prepare_trial(cfg, 0)?;
    let n = data.x0.len();
    if spec.k == 0 || spec.k > n {
        return Err(Error::Config(format!("bound K = {} outside 1..={n}", spec.k)));
    }
    let operator = spec.model.two_layer_operator(&data.graph, &data.adj)?;
    let jac = symmetric_eigen(&expected_sq_jacobian(&operator)?)?;
    let sigmas: Vec<f64> = jac.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let eta = spec.eta_scale / (sigmas[0] * sigmas[0]);
    // subspace distance ‖V_K - W_K Q‖_F
    let delta = spec.k as f64 * eigenvector_similarity(&data.spectrum.leading(spec.k), &jac.leading(spec.k))?;
    let inputs = BoundInputs {
        eta,
        sigmas: sigmas.clone(),
        eigenvectors: jac.eigenvectors.clone(),
        k: spec.k,
        delta,
        xi: spec.xi,
        x0: data.x0.clone(),
        x: data.x.clone(),
        noise: data.noise.clone(),
    };
    let ts: Vec<f64> = (0..=spec.epochs).map(|t| t as f64).collect();
    let terms = error_bound_curve(&inputs, &ts)?;

    let mut model = spec.model.build(&data.graph, &data.adj, split_seed(data.seed, stream::MODEL))?;
    let gd = FitConfig {
        epochs: spec.epochs,
        step: eta,
        optimizer: Optimizer::PlainGd,
    };
    let traj = fit(&mut model, &data.x, &gd, Some(&data.x0))?;
    let x0_norm = data.x0.dot(&data.x0).sqrt();
    let rows = terms
        .iter()
        .zip(&traj.records)
        .enumerate()
        .map(|(t, (b, r))| BoundRow {
            t,
            term_signal: b.term_signal,
            term_width: b.term_width,
            term_noise: b.term_noise,
            total: b.total,
            observed_error: r.nmse.expect("reference given").sqrt() * x0_norm,
        })
        .collect();
    let sigma_n = sigmas[n - 1];
    Ok(BoundCurveOutput {
        rows,
        diagnostics: BoundDiagnostics {
            eta,
            sigma_1: sigmas[0],
            sigma_k: sigmas[spec.k - 1],
            sigma_n,
            delta,
            xi: spec.xi,
            width_condition_log10: width_condition_log10(sigmas[0], sigma_n, spec.xi, n).ok(),
            width: spec.model.width,
        },
    })
}
