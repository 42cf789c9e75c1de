//! NMSE per epoch when fitting the clean signal, pure noise and the noisy
//! signal.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{map_indexed, mean, median, prepare_trial, split_seed, stream, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::write_table;
use crate::models::fit;
use crate::signals::white_signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Fit `x0`, scored against `x0`.
    Clean,
    /// Fit unit-variance white noise, scored against itself.
    Noise,
    /// Fit `x0 + n`, scored against `x0`.
    Noisy,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [TargetKind::Clean, TargetKind::Noise, TargetKind::Noisy];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitCurveRow {
    pub trial: usize,
    pub target_kind: TargetKind,
    pub epoch: usize,
    pub nmse: f64,
}

pub const FIT_CURVE_HEADER: [&str; 4] = ["trial", "target_kind", "epoch", "nmse"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummaryRow {
    pub target_kind: TargetKind,
    pub epoch: usize,
    pub mean_nmse: f64,
    pub median_nmse: f64,
}

const SUMMARY_HEADER: [&str; 4] = ["target_kind", "epoch", "mean_nmse", "median_nmse"];

#[derive(Debug, Clone)]
pub struct FitCurvesOutput {
    /// Model name and its rows, in config order.
    pub models: Vec<(String, Vec<FitCurveRow>)>,
}

impl FitCurvesOutput {
    pub fn rows(&self, model: &str) -> Option<&[FitCurveRow]> {
        self.models.iter().find(|(n, _)| n == model).map(|(_, r)| r.as_slice())
    }

    /// Mean and median NMSE per target and epoch.
    pub fn summary(&self, model: &str) -> Option<Vec<FitSummaryRow>> {
        let rows = self.rows(model)?;
        let mut out = Vec::new();
        for target in TargetKind::ALL {
            let mut by_epoch: Vec<Vec<f64>> = Vec::new();
            for r in rows.iter().filter(|r| r.target_kind == target) {
                if by_epoch.len() <= r.epoch {
                    by_epoch.resize(r.epoch + 1, Vec::new());
                }
                by_epoch[r.epoch].push(r.nmse);
            }
            out.extend(by_epoch.iter().enumerate().map(|(epoch, v)| FitSummaryRow {
                target_kind: target,
                epoch,
                mean_nmse: mean(v),
                median_nmse: median(v),
            }));
        }
        Some(out)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for (name, rows) in &self.models {
            let path = dir.join(format!("fit_curves_{name}.csv"));
            write_table(&path, &FIT_CURVE_HEADER, rows)?;
            paths.push(path);
            let path = dir.join(format!("fit_curves_{name}_summary.csv"));
            write_table(&path, &SUMMARY_HEADER, &self.summary(name).unwrap_or_default())?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn run_fit_curves(cfg: &ExperimentConfig) -> Result<FitCurvesOutput> {
    if cfg.models.is_empty() {
        return Err(Error::Config("fit-curves needs at least one model".into()));
    }
    let per_trial = map_indexed(cfg.trials, |trial| {
        let data = prepare_trial(cfg, trial)?;
        let pure_noise = white_signal(data.x0.len(), split_seed(data.seed, stream::AUX));
        let mut per_model = Vec::with_capacity(cfg.models.len());
        for (j, spec) in cfg.models.iter().enumerate() {
            let fit_cfg = cfg.fit_for(spec)?;
            let model_seed = split_seed(data.seed, stream::MODEL + j as u64);
            let mut rows = Vec::with_capacity(3 * (fit_cfg.epochs + 1));
            for target in TargetKind::ALL {
                let (signal, reference) = match target {
                    TargetKind::Clean => (&data.x0, &data.x0),
                    TargetKind::Noise => (&pure_noise, &pure_noise),
                    TargetKind::Noisy => (&data.x, &data.x0),
                };
                // every target starts from the same initialization
                let mut model = spec.build(&data.graph, &data.adj, model_seed)?;
                let traj = fit(&mut model, signal, &fit_cfg, Some(reference))?;
                rows.extend(traj.records.iter().map(|r| FitCurveRow {
                    trial,
                    target_kind: target,
                    epoch: r.epoch,
                    nmse: r.nmse.expect("reference given"),
                }));
            }
            per_model.push(rows);
        }
        Ok(per_model)
    })?;
    let mut models: Vec<(String, Vec<FitCurveRow>)> =
        cfg.models.iter().map(|m| (m.name.clone(), Vec::new())).collect();
    for trial_rows in per_trial {
        for (slot, rows) in models.iter_mut().zip(trial_rows) {
            slot.1.extend(rows);
        }
    }
    Ok(FitCurvesOutput { models })
}
