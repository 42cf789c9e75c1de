//! Classical denoisers against fitted networks on synthetic signals.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{map_indexed, mean, median, prepare_trial, split_seed, stream, ExperimentConfig, ExperimentKind};
use crate::baselines::{bl_denoise, lr_denoise, tv_denoise};
use crate::error::{Error, Result};
use crate::io::write_table;
use crate::models::fit;
use crate::signals::nmse;

/// One NMSE value. Baselines leave `epoch` empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub trial: usize,
    pub method: String,
    pub epoch: Option<usize>,
    pub nmse: f64,
}

const HEADER: [&str; 4] = ["trial", "method", "epoch", "nmse"];

/// Aggregate per method: networks at the epoch minimizing the median curve,
/// LR and TV at the weight minimizing the median NMSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummaryRow {
    pub method: String,
    pub epoch: Option<usize>,
    pub alpha: Option<f64>,
    pub median_nmse: f64,
    pub mean_nmse: f64,
}

const SUMMARY_HEADER: [&str; 5] = ["method", "epoch", "alpha", "median_nmse", "mean_nmse"];

#[derive(Debug, Clone, PartialEq, Serialize)]
struct AlphaRow {
    method: &'static str,
    alpha: f64,
    median_nmse: f64,
    mean_nmse: f64,
}

const ALPHA_HEADER: [&str; 4] = ["method", "alpha", "median_nmse", "mean_nmse"];

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub rows: Vec<CompareRow>,
    pub summary: Vec<CompareSummaryRow>,
    alpha_sweep: Vec<AlphaRow>,
}

impl CompareOutput {
    pub fn median_of(&self, method: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).map(|s| s.median_nmse)
    }

    pub fn write(&self, dir: &Path, kind: ExperimentKind) -> Result<Vec<PathBuf>> {
        let stem = kind.name().replace('-', "_");
        let rows = dir.join(format!("{stem}.csv"));
        write_table(&rows, &HEADER, &self.rows)?;
        let summary = dir.join(format!("{stem}_summary.csv"));
        write_table(&summary, &SUMMARY_HEADER, &self.summary)?;
        let alpha = dir.join(format!("{stem}_alpha.csv"));
        write_table(&alpha, &ALPHA_HEADER, &self.alpha_sweep)?;
        Ok(vec![rows, summary, alpha])
    }
}

struct TrialResult {
    bl: f64,
    lr: Vec<f64>,
    tv: Vec<f64>,
    curves: Vec<Vec<f64>>,
}

/// Index and median of the column with the smallest median.
fn best_column(per_trial: &[&[f64]]) -> (usize, f64) {
    let width = per_trial[0].len();
    (0..width)
        .map(|c| (c, median(&per_trial.iter().map(|r| r[c]).collect::<Vec<_>>())))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareOutput> {
    let base = &cfg.baselines;
    if base.alpha_grid.is_empty() {
        return Err(Error::Config("alpha_grid must not be empty".into()));
    }
    let bl_k = base
        .bl_k
        .or_else(|| cfg.graph().ok().and_then(|g| g.communities()))
        .ok_or_else(|| Error::Config("set baselines.bl_k for graphs without planted communities".into()))?;
    let results = map_indexed(cfg.trials, |trial| {
        let data = prepare_trial(cfg, trial)?;
        let bl = nmse(&data.x0, &bl_denoise(&data.spectrum, &data.x, bl_k)?)?;
        let lr = base
            .alpha_grid
            .iter()
            .map(|&a| nmse(&data.x0, &lr_denoise(&data.graph, &data.x, a, base.lr_normalized)?))
            .collect::<Result<Vec<_>>>()?;
        let tv = base
            .alpha_grid
            .iter()
            .map(|&a| nmse(&data.x0, &tv_denoise(&data.graph, &data.x, a, base.tv_solver())?))
            .collect::<Result<Vec<_>>>()?;
        let mut curves = Vec::with_capacity(cfg.models.len());
        for (j, spec) in cfg.models.iter().enumerate() {
            let mut model = spec.build(&data.graph, &data.adj, split_seed(data.seed, stream::MODEL + j as u64))?;
            let traj = fit(&mut model, &data.x, &cfg.fit_for(spec)?, Some(&data.x0))?;
            curves.push(traj.nmse_curve().expect("reference given"));
        }
        log::debug!("trial {trial}: BL {bl:.4}");
        Ok(TrialResult { bl, lr, tv, curves })
    })?;

    let bl: Vec<f64> = results.iter().map(|r| r.bl).collect();
    let mut summary = vec![CompareSummaryRow {
        method: "BL".into(),
        epoch: None,
        alpha: None,
        median_nmse: median(&bl),
        mean_nmse: mean(&bl),
    }];
    let mut alpha_sweep = Vec::new();
    let mut chosen = Vec::new();
    for (method, pick) in [("LR", 0usize), ("TV", 1)] {
        let per_trial: Vec<&[f64]> = results
            .iter()
            .map(|r| if pick == 0 { r.lr.as_slice() } else { r.tv.as_slice() })
            .collect();
        for (c, &alpha) in base.alpha_grid.iter().enumerate() {
            let col: Vec<f64> = per_trial.iter().map(|r| r[c]).collect();
            alpha_sweep.push(AlphaRow {
                method,
                alpha,
                median_nmse: median(&col),
                mean_nmse: mean(&col),
            });
        }
        let (c, med) = best_column(&per_trial);
        let col: Vec<f64> = per_trial.iter().map(|r| r[c]).collect();
        summary.push(CompareSummaryRow {
            method: method.into(),
            epoch: None,
            alpha: Some(base.alpha_grid[c]),
            median_nmse: med,
            mean_nmse: mean(&col),
        });
        chosen.push(c);
    }
    for (j, spec) in cfg.models.iter().enumerate() {
        let per_trial: Vec<&[f64]> = results.iter().map(|r| r.curves[j].as_slice()).collect();
        let (epoch, med) = best_column(&per_trial);
        let col: Vec<f64> = per_trial.iter().map(|r| r[epoch]).collect();
        summary.push(CompareSummaryRow {
            method: spec.name.clone(),
            epoch: Some(epoch),
            alpha: None,
            median_nmse: med,
            mean_nmse: mean(&col),
        });
    }

    let mut rows = Vec::new();
    for (trial, r) in results.iter().enumerate() {
        let mut push = |method: &str, epoch: Option<usize>, value: f64| {
            rows.push(CompareRow {
                trial,
                method: method.into(),
                epoch,
                nmse: value,
            })
        };
        push("BL", None, r.bl);
        push("LR", None, r.lr[chosen[0]]);
        push("TV", None, r.tv[chosen[1]]);
        for (spec, curve) in cfg.models.iter().zip(&r.curves) {
            for (epoch, &v) in curve.iter().enumerate() {
                push(&spec.name, Some(epoch), v);
            }
        }
    }
    Ok(CompareOutput {
        rows,
        summary,
        alpha_sweep,
    })
}
