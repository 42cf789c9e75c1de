//! Denoising of user-supplied graphs and signals.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use super::{split_seed, stream, ExperimentConfig};
use crate::baselines::{bl_denoise, lr_denoise, med_denoise, tv_denoise};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, GraphSignal};
use crate::io::{load_edge_list, load_signals, write_signals, write_table};
use crate::linalg::symmetric_eigen;
use crate::models::{fit, Checkpoint};
use crate::signals::{error_rate, nmse};

/// Metrics of one method on one signal column. Both are empty without a
/// reference; `error_rate` is also empty for non-binary references.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseMetricRow {
    pub signal: usize,
    pub method: String,
    pub nmse: Option<f64>,
    pub error_rate: Option<f64>,
}

const HEADER: [&str; 4] = ["signal", "method", "nmse", "error_rate"];

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub metrics: Vec<DenoiseMetricRow>,
    /// Method name and its `N × S` estimates.
    pub estimates: Vec<(String, Array2<f64>)>,
    /// Method name, signal index and fitted weights of network methods.
    pub checkpoints: Vec<(String, usize, Checkpoint)>,
}

impl DenoiseOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        let metrics = dir.join("denoise_metrics.csv");
        write_table(&metrics, &HEADER, &self.metrics)?;
        paths.push(metrics);
        for (method, est) in &self.estimates {
            let path = dir.join(format!("denoised_{method}.csv"));
            write_signals(&path, est)?;
            paths.push(path);
        }
        for (method, signal, ckpt) in &self.checkpoints {
            let path = dir.join(format!("checkpoint_{method}_{signal}.json"));
            std::fs::write(&path, ckpt.to_json()? + "\n")?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn check_method_name(cfg: &ExperimentConfig, method: &str) -> Result<()> {
    let known = matches!(method, "bl" | "lr" | "tv" | "med") || cfg.models.iter().any(|m| m.name == method);
    if known {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown method {method}; use bl, lr, tv, med or one of the configured models"
        )))
    }
}

pub fn run_denoise_file(cfg: &ExperimentConfig) -> Result<DenoiseOutput> {
    let spec = cfg.denoise()?;
    if spec.methods.is_empty() {
        return Err(Error::Config("denoise needs at least one method".into()));
    }
    for m in &spec.methods {
        check_method_name(cfg, m)?;
    }
    let graph: Graph = load_edge_list(&spec.graph, None)?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let signals = load_signals(&spec.signal)?;
    let n = graph.n_nodes();
    if signals.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} nodes, graph has {n}",
            spec.signal.display(),
            signals.nrows()
        )));
    }
    let reference = spec.reference.as_ref().map(|p| load_signals(p)).transpose()?;
    if let Some(r) = &reference {
        if r.dim() != signals.dim() {
            return Err(Error::DimensionMismatch(format!(
                "reference is {:?}, signals are {:?}",
                r.dim(),
                signals.dim()
            )));
        }
    }
    let adj = normalize_adjacency(&graph)?;
    let spectrum = if spec.methods.iter().any(|m| m == "bl") {
        Some(symmetric_eigen(adj.matrix())?)
    } else {
        None
    };

    let mut metrics = Vec::new();
    let mut estimates: Vec<(String, Array2<f64>)> = spec
        .methods
        .iter()
        .map(|m| (m.clone(), Array2::zeros(signals.dim())))
        .collect();
    let mut checkpoints = Vec::new();
    for s in 0..signals.ncols() {
        let x: GraphSignal = signals.column(s).to_owned();
        let seed = split_seed(cfg.master_seed, s as u64);
        for (mi, method) in spec.methods.iter().enumerate() {
            let est = match method.as_str() {
                "bl" => {
                    let k = spec.bl_k.ok_or_else(|| Error::Config("bl needs denoise.bl_k".into()))?;
                    bl_denoise(spectrum.as_ref().expect("computed for bl"), &x, k)?
                }
                "lr" => lr_denoise(&graph, &x, spec.alpha, cfg.baselines.lr_normalized)?,
                "tv" => tv_denoise(&graph, &x, spec.alpha, cfg.baselines.tv_solver())?,
                "med" => med_denoise(&graph, &x, spec.med_passes)?,
                name => {
                    let (j, model_spec) = cfg
                        .models
                        .iter()
                        .enumerate()
                        .find(|(_, m)| m.name == name)
                        .expect("checked above");
                    let mut model = model_spec.build(&graph, &adj, split_seed(seed, stream::MODEL + j as u64))?;
                    let traj = fit(&mut model, &x, &cfg.fit_for(model_spec)?, None)?;
                    if spec.checkpoints {
                        checkpoints.push((name.to_string(), s, Checkpoint::from_model(&model)));
                    }
                    traj.estimate
                }
            };
            let (score, rate) = match &reference {
                Some(r) => {
                    let x0 = r.column(s).to_owned();
                    (Some(nmse(&x0, &est)?), error_rate(&x0, &est).ok())
                }
                None => (None, None),
            };
            log::info!("signal {s} {method}: nmse {score:?}");
            metrics.push(DenoiseMetricRow {
                signal: s,
                method: method.clone(),
                nmse: score,
                error_rate: rate,
            });
            estimates[mi].1.column_mut(s).assign(&est);
        }
    }
    Ok(DenoiseOutput {
        metrics,
        estimates,
        checkpoints,
    })
}
