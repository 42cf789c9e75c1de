//! Eigenvector similarity between `Ã` and the expected squared Jacobian.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{map_indexed, mean, median, split_seed, EigsimFamily, EigsimSpec, ExperimentConfig};
use crate::coarsening::build_hierarchy;
use crate::error::{Error, Result};
use crate::graph::{graph_filter, normalize_adjacency};
use crate::io::write_table;
use crate::linalg::symmetric_eigen;
use crate::models::ModelKind;
use crate::spectral::{eigenvector_similarity, expected_sq_jacobian};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigsimRow {
    pub graph_family: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub trial: usize,
    pub similarity: f64,
}

const HEADER: [&str; 5] = ["graph_family", "N", "K", "trial", "similarity"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigsimSummaryRow {
    pub graph_family: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub median_similarity: f64,
    pub mean_similarity: f64,
}

const SUMMARY_HEADER: [&str; 5] = ["graph_family", "N", "K", "median_similarity", "mean_similarity"];

#[derive(Debug, Clone)]
pub struct EigsimOutput {
    pub rows: Vec<EigsimRow>,
}

impl EigsimOutput {
    /// Per family and size, in row order.
    pub fn summary(&self) -> Vec<EigsimSummaryRow> {
        let mut out: Vec<(EigsimSummaryRow, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            match out
                .iter_mut()
                .find(|(s, _)| s.graph_family == r.graph_family && s.n == r.n)
            {
                Some((_, v)) => v.push(r.similarity),
                None => out.push((
                    EigsimSummaryRow {
                        graph_family: r.graph_family.clone(),
                        n: r.n,
                        k: r.k,
                        median_similarity: 0.0,
                        mean_similarity: 0.0,
                    },
                    vec![r.similarity],
                )),
            }
        }
        out.into_iter()
            .map(|(mut s, v)| {
                s.median_similarity = median(&v);
                s.mean_similarity = mean(&v);
                s
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let rows = dir.join("eigsim.csv");
        write_table(&rows, &HEADER, &self.rows)?;
        let summary = dir.join("eigsim_summary.csv");
        write_table(&summary, &SUMMARY_HEADER, &self.summary())?;
        Ok(vec![rows, summary])
    }
}

fn similarity(spec: &EigsimSpec, family: &EigsimFamily, n: usize, seed: u64) -> Result<f64> {
    let (g, _) = family.model.draw(n, seed)?;
    let adj = normalize_adjacency(&g)?;
    let operator = match spec.architecture {
        ModelKind::Gcg2 => graph_filter(&adj, &spec.filter)?,
        ModelKind::Gdec2 => build_hierarchy(&g, &[family.k, n], spec.gamma)?.upsamplers.swap_remove(0),
        other => {
            return Err(Error::Config(format!(
                "eigsim architecture must be gcg2 or gdec2, got {}",
                other.name()
            )))
        }
    };
    let v = symmetric_eigen(adj.matrix())?.leading(family.k);
    let w = symmetric_eigen(&expected_sq_jacobian(&operator)?)?.leading(family.k);
    eigenvector_similarity(&v, &w)
}

pub fn run_eigsim(cfg: &ExperimentConfig) -> Result<EigsimOutput> {
    let spec = cfg.eigsim()?;
    let mut tasks = Vec::new();
    for (fi, family) in spec.families.iter().enumerate() {
        if family.k == 0 {
            return Err(Error::Config(format!("family {}: K must be positive", family.name)));
        }
        for &n in &spec.sizes {
            if family.k > n {
                return Err(Error::Config(format!("family {}: K = {} exceeds N = {n}", family.name, family.k)));
            }
            for trial in 0..cfg.trials {
                tasks.push((fi, n, trial));
            }
        }
    }
    let rows = map_indexed(tasks.len(), |i| {
        let (fi, n, trial) = tasks[i];
        let family = &spec.families[fi];
        let seed = split_seed(split_seed(split_seed(cfg.master_seed, trial as u64), fi as u64), n as u64);
        Ok(EigsimRow {
            graph_family: family.name.clone(),
            n,
            k: family.k,
            trial,
            similarity: similarity(spec, family, n, seed)?,
        })
    })?;
    Ok(EigsimOutput { rows })
}
