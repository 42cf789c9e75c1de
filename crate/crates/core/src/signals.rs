//! Signal synthesis, noise injection and error metrics.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{graph_filter, graph_median, normalize_adjacency, Graph, GraphSignal};

/// Noise model applied to a clean signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Zero-mean Gaussian, rescaled so `‖n‖²/‖x0‖² = power`.
    Gaussian { power: f64 },
    /// Uniform on `[0, a]`, with `a` chosen so `‖n‖²/‖x0‖² = power`.
    Uniform { power: f64 },
    /// Flips exactly `round(flip_fraction · N)` entries of a binary signal.
    BernoulliFlip { flip_fraction: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { power } | NoiseSpec::Uniform { power } => {
                if !(power >= 0.0 && power.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "noise power must be nonnegative, got {power}"
                    )));
                }
            }
            NoiseSpec::BernoulliFlip { flip_fraction } => {
                if !(0.0..=1.0).contains(&flip_fraction) {
                    return Err(Error::InvalidArgument(format!(
                        "flip fraction must lie in [0, 1], got {flip_fraction}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Returns `(x, n)` with `x = x0 + n`.
pub fn add_noise(x0: &GraphSignal, spec: &NoiseSpec, seed: u64) -> Result<(GraphSignal, GraphSignal)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x0.len();
    let noise = match *spec {
        NoiseSpec::Gaussian { power } | NoiseSpec::Uniform { power } => {
            let energy = x0.dot(x0);
            if energy == 0.0 {
                return Err(Error::ZeroSignal);
            }
            if power == 0.0 {
                Array1::zeros(n)
            } else {
                let raw: Array1<f64> = match spec {
                    NoiseSpec::Gaussian { .. } => {
                        Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
                    }
                    _ => Array1::from_shape_fn(n, |_| rng.random::<f64>()),
                };
                let raw_energy = raw.dot(&raw);
                if raw_energy == 0.0 {
                    return Err(Error::ZeroSignal);
                }
                raw * (power * energy / raw_energy).sqrt()
            }
        }
        NoiseSpec::BernoulliFlip { flip_fraction } => {
            check_binary(x0)?;
            let flips = (flip_fraction * n as f64).round() as usize;
            let idx = rand::seq::index::sample(&mut rng, n, flips.min(n));
            let mut noise = Array1::zeros(n);
            for i in idx.iter() {
                noise[i] = 1.0 - 2.0 * x0[i];
            }
            noise
        }
    };
    Ok((x0 + &noise, noise))
}

/// `‖x0 - x̂0‖² / ‖x0‖²`.
pub fn nmse(x0: &GraphSignal, estimate: &GraphSignal) -> Result<f64> {
    if x0.len() != estimate.len() {
        return Err(Error::DimensionMismatch(format!(
            "nmse of lengths {} and {}",
            x0.len(),
            estimate.len()
        )));
    }
    let energy = x0.dot(x0);
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let diff = x0 - estimate;
    Ok(diff.dot(&diff) / energy)
}

/// Fraction of labels that differ after thresholding `estimate` at 0.5.
pub fn error_rate(x0: &GraphSignal, estimate: &GraphSignal) -> Result<f64> {
    if x0.len() != estimate.len() {
        return Err(Error::DimensionMismatch(format!(
            "error rate of lengths {} and {}",
            x0.len(),
            estimate.len()
        )));
    }
    check_binary(x0)?;
    if x0.is_empty() {
        return Ok(0.0);
    }
    let wrong = x0
        .iter()
        .zip(estimate)
        .filter(|(&truth, &est)| (est >= 0.5) != (truth == 1.0))
        .count();
    Ok(wrong as f64 / x0.len() as f64)
}

fn check_binary(x: &GraphSignal) -> Result<()> {
    match x.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(Error::NonBinary {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

/// `M` coefficients drawn uniformly on `[0, 1]` and scaled to unit ℓ1 norm.
pub fn random_lowpass_coeffs<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut unit = vec![0.0; m];
        unit[0] = 1.0;
        return unit;
    }
    raw.into_iter().map(|c| c / total).collect()
}

/// `median(H w | G)` with `H = Σ h_m Ã^m` and `w` iid standard normal.
pub fn diffused_white_signal(g: &Graph, filter_coeffs: &[f64], seed: u64) -> Result<GraphSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array1::from_shape_fn(g.n_nodes(), |_| rng.sample(StandardNormal));
    let filtered = if g.n_nodes() == 1 {
        &w * filter_coeffs.first().copied().unwrap_or(1.0)
    } else {
        let adj = normalize_adjacency(g)?;
        graph_filter(&adj, filter_coeffs)?.dot(&w)
    };
    graph_median(g, &filtered)
}

/// Each node takes the label of its community.
pub fn piecewise_constant(assignment: &[usize]) -> GraphSignal {
    assignment.iter().map(|&c| c as f64).collect()
}

/// Iid standard-normal signal.
pub fn white_signal(n: usize, seed: u64) -> GraphSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
}
