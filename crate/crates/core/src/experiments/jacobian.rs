//! Monte-Carlo squared Jacobians against the closed form.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{map_indexed, mean, split_seed, stream, ExperimentConfig};
use crate::coarsening::build_hierarchy;
use crate::error::{Error, Result};
use crate::graph::{graph_filter, normalize_adjacency};
use crate::io::write_table;
use crate::models::ModelKind;
use crate::spectral::{expected_sq_jacobian, monte_carlo_sq_jacobian, relative_frobenius_error};

/// Error for one kind and sample count, averaged over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianRow {
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_samples: usize,
    pub rel_frob_err: f64,
}

const HEADER: [&str; 4] = ["kind", "N", "n_samples", "rel_frob_err"];

#[derive(Debug, Clone)]
pub struct JacobianOutput {
    pub rows: Vec<JacobianRow>,
}

impl JacobianOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let path = dir.join("jacobian_check.csv");
        write_table(&path, &HEADER, &self.rows)?;
        Ok(vec![path])
    }
}

pub fn run_jacobian_check(cfg: &ExperimentConfig) -> Result<JacobianOutput> {
    let spec = cfg.jacobian()?;
    if let Some(k) = spec.kinds.iter().find(|k| !k.is_simplified()) {
        return Err(Error::Config(format!(
            "jacobian-check supports gcg2 and gdec2, got {}",
            k.name()
        )));
    }
    // errors[trial][kind][sample count]
    let errors = map_indexed(cfg.trials, |trial| {
        let seed = split_seed(cfg.master_seed, trial as u64);
        let (g, _) = cfg.graph()?.draw(split_seed(seed, stream::GRAPH))?;
        let adj = normalize_adjacency(&g)?;
        let mut per_kind = Vec::new();
        for &kind in &spec.kinds {
            let m = match kind {
                ModelKind::Gcg2 => graph_filter(&adj, &spec.filter)?,
                _ => build_hierarchy(&g, &[spec.coarse_size, g.n_nodes()], spec.gamma)?
                    .upsamplers
                    .swap_remove(0),
            };
            let closed = expected_sq_jacobian(&m)?;
            let errs = spec
                .samples
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let mc = monte_carlo_sq_jacobian(&m, spec.width, s, split_seed(seed, stream::MODEL + i as u64))?;
                    Ok(relative_frobenius_error(&mc, &closed))
                })
                .collect::<Result<Vec<_>>>()?;
            per_kind.push((g.n_nodes(), errs));
        }
        Ok(per_kind)
    })?;
    let mut rows = Vec::new();
    for (ki, kind) in spec.kinds.iter().enumerate() {
        for (si, &n_samples) in spec.samples.iter().enumerate() {
            let vals: Vec<f64> = errors.iter().map(|t| t[ki].1[si]).collect();
            rows.push(JacobianRow {
                kind: kind.name().into(),
                n: errors[0][ki].0,
                n_samples,
                rel_frob_err: mean(&vals),
            });
        }
    }
    Ok(JacobianOutput { rows })
}
