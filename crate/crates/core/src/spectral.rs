//! Expected squared Jacobians of the two-layer generators, subspace
//! alignment, and the early-stopping error bound.
//!
//! For `f(Θ) = relu(MΘ) b` with Gaussian `Θ`, the Jacobian row of output
//! `i` involves `relu'(m_iᵀθ)`. Averaging the step-function outer products
//! gives the arc-cosine kernel of the normalized rows of `M`, so
//!
//! `𝓧 = ½ (𝟏𝟏ᵀ - arccos(C⁻¹MMᵀC⁻¹)/π) ⊙ MMᵀ`, `C = diag(‖m_i‖)`.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::split_seed;
use crate::linalg::{frobenius, gram_schmidt, symmetric_eigen};
use crate::models::{init_model, GeneratorModel, InitMode};

/// Columns drawn per batch in the Monte-Carlo estimator.
const MC_BATCH: usize = 4096;

/// Singular values of `W_Kᵀ V_K` lie in `[0, 1]` for orthonormal bases;
/// those below this are treated as zero by the Procrustes solver.
const RANK_TOL: f64 = 1e-10;

/// Closed-form expected squared Jacobian of `relu(MΘ) b` for any operator
/// `M` (filter or upsampler).
pub fn expected_sq_jacobian(m: &Array2<f64>) -> Result<Array2<f64>> {
    let gram = m.dot(&m.t());
    let n = gram.nrows();
    let norms: Vec<f64> = (0..n).map(|i| gram[[i, i]].sqrt()).collect();
    if let Some(i) = norms.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let mut x = Array2::zeros((n, n));
    for i in 0..n {
        x[[i, i]] = 0.5 * gram[[i, i]];
        for j in (i + 1)..n {
            let rho = (gram[[i, j]] / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            let v = 0.5 * (1.0 - rho.acos() / std::f64::consts::PI) * gram[[i, j]];
            x[[i, j]] = v;
            x[[j, i]] = v;
        }
    }
    Ok(x)
}

/// Closed form for the two-layer GCG; `h` must be square.
pub fn expected_sq_jacobian_gcg(h: &Array2<f64>) -> Result<Array2<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "filter must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    expected_sq_jacobian(h)
}

/// Closed form for the two-layer GDec with upsampler `u` (`N × N_0`).
pub fn expected_sq_jacobian_gdec(u: &Array2<f64>) -> Result<Array2<f64>> {
    expected_sq_jacobian(u)
}

/// Monte-Carlo estimate of the same expectation from `n_samples` draws of
/// `Θ` (each with `f` standard-normal columns and readout weights
/// `b_i² = 1/f`).
pub fn monte_carlo_sq_jacobian(m: &Array2<f64>, f: usize, n_samples: usize, seed: u64) -> Result<Array2<f64>> {
    if f == 0 || !f.is_multiple_of(2) || n_samples == 0 {
        return Err(Error::InvalidArgument(format!(
            "need an even width and at least one sample, got F={f}, n={n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, n0) = m.dim();
    let total = f * n_samples;
    let mut acc = Array2::<f64>::zeros((n, n));
    let mut done = 0;
    while done < total {
        let cols = MC_BATCH.min(total - done);
        // column-major draw order keeps each sample's columns contiguous
        let theta = Array2::from_shape_fn((cols, n0), |_| rng.sample::<f64, _>(StandardNormal)).reversed_axes();
        let s = m.dot(&theta).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        acc += &s.dot(&s.t());
        done += cols;
    }
    let gram = m.dot(&m.t());
    Ok(acc / total as f64 * gram)
}

/// Averages `J Jᵀ` over `n_realizations` fresh initializations of the
/// template's architecture, with Jacobians assembled from reverse passes.
pub fn monte_carlo_deep_jacobian(
    template: &GeneratorModel,
    init: InitMode,
    n_realizations: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let n = template.n_outputs();
    let mut acc = Array2::<f64>::zeros((n, n));
    for r in 0..n_realizations {
        let model = init_model(
            template.kind(),
            template.operators().to_vec(),
            template.widths(),
            init,
            split_seed(seed, r as u64),
        )?;
        let jac = model.jacobian();
        acc += &jac.dot(&jac.t());
    }
    Ok(acc / n_realizations as f64)
}

/// `‖A - B‖_F / ‖B‖_F`.
pub fn relative_frobenius_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius(&(a - b)) / frobenius(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Orthonormal `K × K` rotation minimizing `‖V_K - W_K Q‖_F`.
    pub rotation: Array2<f64>,
    /// Set when `W_Kᵀ V_K` is rank deficient; the rotation is then one of
    /// several minimizers.
    pub rank_deficient: bool,
}

fn check_bases(v: &Array2<f64>, w: &Array2<f64>) -> Result<()> {
    if v.dim() != w.dim() || v.ncols() == 0 || v.ncols() > v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "bases must both be N x K with 1 <= K <= N, got {:?} and {:?}",
            v.dim(),
            w.dim()
        )));
    }
    Ok(())
}

/// Orthogonal Procrustes: `Q = P Rᵀ` from `W_Kᵀ V_K = P S Rᵀ`.
pub fn procrustes_align(v: &Array2<f64>, w: &Array2<f64>) -> Result<Alignment> {
    check_bases(v, w)?;
    let k = v.ncols();
    let m = w.t().dot(v);
    // MᵀM = R S² Rᵀ
    let eig = symmetric_eigen(&m.t().dot(&m))?;
    let r = eig.eigenvectors;
    let s: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let rank = s.iter().take_while(|&&si| si > RANK_TOL).count();
    let mut p = Array2::<f64>::zeros((k, k));
    for i in 0..rank {
        let col = m.dot(&r.column(i)) / s[i];
        p.column_mut(i).assign(&col);
    }
    if rank < k {
        // complete P with any orthonormal directions
        let mut seed = p.slice(ndarray::s![.., ..rank]).to_owned();
        for e in 0..k {
            if seed.ncols() == k {
                break;
            }
            let mut unit = Array1::<f64>::zeros(k);
            unit[e] = 1.0;
            let candidate = ndarray::concatenate(Axis(1), &[seed.view(), unit.view().insert_axis(Axis(1))])
                .expect("same row count");
            if let Some(q) = gram_schmidt(&candidate) {
                seed = q;
            }
        }
        p = seed;
    } else if let Some(q) = gram_schmidt(&p) {
        // re-orthonormalize away rounding from the squared system
        p = q;
    }
    Ok(Alignment {
        rotation: p.dot(&r.t()),
        rank_deficient: rank < k,
    })
}

/// `(1/K) ‖V_K - W_K Q‖_F` with the Procrustes-optimal `Q`.
pub fn eigenvector_similarity(v: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    let q = procrustes_align(v, w)?.rotation;
    Ok(frobenius(&(v - &w.dot(&q))) / v.ncols() as f64)
}

/// Inputs of the early-stopping error bound. `sigmas` are the Jacobian
/// singular values `σ_1 ≥ … ≥ σ_N` (square roots of the eigenvalues of
/// `𝓧`) and `eigenvectors` the matching columns `w_i`.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub eta: f64,
    pub sigmas: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub k: usize,
    pub delta: f64,
    pub xi: f64,
    pub x0: Array1<f64>,
    pub x: Array1<f64>,
    pub noise: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    pub term_signal: f64,
    pub term_width: f64,
    pub term_noise: f64,
    pub total: f64,
}

/// Evaluates the bound at epochs `ts`. `t` may be fractional or infinite.
pub fn error_bound_curve(inputs: &BoundInputs, ts: &[f64]) -> Result<Vec<BoundTerms>> {
    let n = inputs.sigmas.len();
    if n == 0 || inputs.k == 0 || inputs.k > n {
        return Err(Error::InvalidArgument(format!(
            "K = {} outside 1..={n}",
            inputs.k
        )));
    }
    if inputs.eigenvectors.dim() != (n, n) || inputs.x0.len() != n || inputs.x.len() != n || inputs.noise.len() != n {
        return Err(Error::DimensionMismatch("bound inputs disagree on N".into()));
    }
    if inputs.sigmas.windows(2).any(|w| w[0] < w[1]) || inputs.sigmas[n - 1] < 0.0 {
        return Err(Error::InvalidArgument("sigmas must be nonnegative and descending".into()));
    }
    let lead = inputs.eta * inputs.sigmas[0].powi(2);
    if !(inputs.eta > 0.0) || lead > 1.0 + 1e-12 {
        return Err(Error::StepTooLarge(lead));
    }
    let decay: Vec<f64> = inputs
        .sigmas
        .iter()
        .map(|s| (1.0 - inputs.eta * s * s).clamp(0.0, 1.0))
        .collect();
    let proj = inputs.eigenvectors.t().dot(&inputs.noise);
    let x0_norm = inputs.x0.dot(&inputs.x0).sqrt();
    let term_width = inputs.xi * inputs.x.dot(&inputs.x).sqrt();
    let pow = |base: f64, t: f64| if t == 0.0 { 1.0 } else { base.powf(t) };
    Ok(ts
        .iter()
        .map(|&t| {
            let term_signal = (pow(decay[inputs.k - 1], t) + inputs.delta * pow(decay[n - 1], t)) * x0_norm;
            let term_noise = decay
                .iter()
                .zip(&proj)
                .map(|(&d, &c)| (pow(d, t) - 1.0).powi(2) * c * c)
                .sum::<f64>()
                .sqrt();
            BoundTerms {
                term_signal,
                term_width,
                term_noise,
                total: term_signal + term_width + term_noise,
            }
        })
        .collect())
}

pub fn error_bound(inputs: &BoundInputs, t: f64) -> Result<BoundTerms> {
    Ok(error_bound_curve(inputs, &[t])?[0])
}

/// `log10` of the width `(σ_1²/σ_N²)^26 ξ^-8 N` required by the bound.
pub fn width_condition_log10(sigma_1: f64, sigma_n: f64, xi: f64, n: usize) -> Result<f64> {
    if !(sigma_n > 0.0) || sigma_1 < sigma_n {
        return Err(Error::InvalidArgument(format!(
            "width condition needs sigma_1 >= sigma_N > 0, got {sigma_1}, {sigma_n}"
        )));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok(52.0 * (sigma_1 / sigma_n).log10() - 8.0 * xi.log10() + (n as f64).log10())
}
