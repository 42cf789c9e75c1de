//! Untrained generator networks: the graph convolutional generator (GCG)
//! and the graph upsampling decoder (GDec).
//!
//! Both kinds share one layer recursion `Y_ℓ = relu(M_ℓ Y_{ℓ-1} Θ_ℓ)` with a
//! fixed operator `M_ℓ`: the graph filter `H` for GCG, the upsampler `U_ℓ`
//! for GDec. Deep models drop the ReLU on the last layer, which maps to a
//! single output feature. The two-layer simplified kinds apply one ReLU
//! layer to the identity input and read out with a fixed `±1/√F` vector.

mod checkpoint;
mod fit;

pub use checkpoint::{operator_hash, Checkpoint};
pub use fit::{fit, EpochRecord, FitConfig, FitTrajectory, Optimizer};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcg,
    Gdec,
    /// `relu(HΘ) b`
    Gcg2,
    /// `relu(UΘ) b`
    Gdec2,
}

impl ModelKind {
    pub fn is_simplified(self) -> bool {
        matches!(self, ModelKind::Gcg2 | ModelKind::Gdec2)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcg => "gcg",
            ModelKind::Gdec => "gdec",
            ModelKind::Gcg2 => "gcg2",
            ModelKind::Gdec2 => "gdec2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Unit-variance weights.
    #[default]
    StandardNormal,
    /// Variance `2 / fan_in`.
    HeScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    kind: ModelKind,
    widths: Vec<usize>,
    operators: Vec<Array2<f64>>,
    input: Array2<f64>,
    weights: Vec<Array2<f64>>,
    readout: Option<Array1<f64>>,
    seed: u64,
}

/// Intermediate values kept by the forward pass for the backward pass.
struct Tape {
    /// `M_ℓ Y_{ℓ-1}` per layer.
    mixed: Vec<Array2<f64>>,
    /// `M_ℓ Y_{ℓ-1} Θ_ℓ` per layer.
    pre: Vec<Array2<f64>>,
    output: Array1<f64>,
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

fn step(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `F/2` entries `+1/√F` followed by `F/2` entries `-1/√F`.
pub fn readout_vector(f: usize) -> Result<Array1<f64>> {
    if f == 0 || !f.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "simplified models need an even positive width, got {f}"
        )));
    }
    let s = 1.0 / (f as f64).sqrt();
    Ok(Array1::from_shape_fn(f, |i| if i < f / 2 { s } else { -s }))
}

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| std * rng.sample::<f64, _>(StandardNormal))
}

/// Builds a model with random weights.
///
/// `operators` holds `M_1..M_L` with `M_ℓ` of shape `N_ℓ × N_{ℓ-1}`.
/// `widths` is `[F_0, …, F_L]`; deep kinds require `F_L = 1`. Simplified
/// kinds take a single operator and `widths = [N_0, F]`, with the identity as
/// input so that each column of `Θ` is one hidden unit.
pub fn init_model(
    kind: ModelKind,
    operators: Vec<Array2<f64>>,
    widths: &[usize],
    init: InitMode,
    seed: u64,
) -> Result<GeneratorModel> {
    if operators.is_empty() {
        return Err(Error::InvalidArgument("at least one operator is required".into()));
    }
    if widths.len() != operators.len() + 1 || widths.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "{} operators need {} positive widths, got {widths:?}",
            operators.len(),
            operators.len() + 1
        )));
    }
    for (l, pair) in operators.windows(2).enumerate() {
        if pair[1].ncols() != pair[0].nrows() {
            return Err(Error::DimensionMismatch(format!(
                "operator {} has {} columns but operator {} has {} rows",
                l + 1,
                pair[1].ncols(),
                l,
                pair[0].nrows()
            )));
        }
    }
    match kind {
        ModelKind::Gcg | ModelKind::Gcg2 => {
            if operators.iter().any(|m| m.nrows() != m.ncols() || m.dim() != operators[0].dim()) {
                return Err(Error::DimensionMismatch(
                    "GCG layers share one square filter".into(),
                ));
            }
        }
        ModelKind::Gdec | ModelKind::Gdec2 => {}
    }
    let n0 = operators[0].ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, readout) = if kind.is_simplified() {
        if operators.len() != 1 || widths[0] != n0 {
            return Err(Error::InvalidArgument(format!(
                "simplified models take one operator and widths [{n0}, F]"
            )));
        }
        (Array2::eye(n0), Some(readout_vector(widths[1])?))
    } else {
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(format!(
                "deep models end with one output feature, got {widths:?}"
            )));
        }
        (gaussian(&mut rng, n0, widths[0], 1.0), None)
    };
    let weights = widths
        .windows(2)
        .map(|w| {
            let std = match init {
                InitMode::StandardNormal => 1.0,
                InitMode::HeScaled => (2.0 / w[0] as f64).sqrt(),
            };
            gaussian(&mut rng, w[0], w[1], std)
        })
        .collect();
    Ok(GeneratorModel {
        kind,
        widths: widths.to_vec(),
        operators,
        input,
        weights,
        readout,
        seed,
    })
}

impl GeneratorModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn operators(&self) -> &[Array2<f64>] {
        &self.operators
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.input
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn readout(&self) -> Option<&Array1<f64>> {
        self.readout.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_outputs(&self) -> usize {
        self.operators.last().unwrap().nrows()
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Replaces the weights, keeping operators and input.
    pub fn set_weights(&mut self, weights: Vec<Array2<f64>>) -> Result<()> {
        if weights.len() != self.weights.len()
            || weights.iter().zip(&self.weights).any(|(a, b)| a.dim() != b.dim())
        {
            return Err(Error::DimensionMismatch("weight shapes do not match the model".into()));
        }
        self.weights = weights;
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    fn run(&self) -> Tape {
        let layers = self.weights.len();
        let mut mixed = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut y = self.input.clone();
        for (l, (m, theta)) in self.operators.iter().zip(&self.weights).enumerate() {
            let my = m.dot(&y);
            let p = my.dot(theta);
            if l + 1 < layers || self.readout.is_some() {
                y = relu(&p);
            }
            mixed.push(my);
            pre.push(p);
        }
        let output = match &self.readout {
            Some(b) => y.dot(b),
            None => pre.last().unwrap().column(0).to_owned(),
        };
        Tape { mixed, pre, output }
    }

    pub fn forward(&self) -> GraphSignal {
        self.run().output
    }

    /// Signs of every pre-activation that passes through a ReLU.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let tape = self.run();
        let relu_layers = if self.readout.is_some() {
            tape.pre.len()
        } else {
            tape.pre.len() - 1
        };
        tape.pre[..relu_layers]
            .iter()
            .flat_map(|p| p.iter().map(|&v| v > 0.0))
            .collect()
    }

    /// Reverse pass seeded with `d loss / d output`.
    fn backward(&self, tape: &Tape, seed: &Array1<f64>) -> Vec<Array2<f64>> {
        let layers = self.weights.len();
        let mut grads = vec![Array2::zeros((0, 0)); layers];
        let col = seed.view().insert_axis(Axis(1));
        let mut g = match &self.readout {
            Some(b) => {
                let mut g = col.dot(&b.view().insert_axis(Axis(0)));
                g.zip_mut_with(&tape.pre[layers - 1], |gv, &p| *gv *= step(p));
                g
            }
            None => col.to_owned(),
        };
        for l in (0..layers).rev() {
            grads[l] = tape.mixed[l].t().dot(&g);
            if l > 0 {
                let mut gy = self.operators[l].t().dot(&g.dot(&self.weights[l].t()));
                gy.zip_mut_with(&tape.pre[l - 1], |gv, &p| *gv *= step(p));
                g = gy;
            }
        }
        grads
    }

    /// `½‖x - f‖²` and its gradient with respect to every weight matrix.
    pub fn loss_and_gradient(&self, x: &GraphSignal) -> Result<(f64, Vec<Array2<f64>>, GraphSignal)> {
        if x.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch(format!(
                "target has {} entries, model outputs {}",
                x.len(),
                self.n_outputs()
            )));
        }
        let tape = self.run();
        let residual = &tape.output - x;
        let loss = 0.5 * residual.dot(&residual);
        let grads = self.backward(&tape, &residual);
        Ok((loss, grads, tape.output))
    }

    /// Jacobian of the output with respect to all weights, one row per
    /// output coordinate, weights flattened layer by layer in row-major order.
    pub fn jacobian(&self) -> Array2<f64> {
        let tape = self.run();
        let n = self.n_outputs();
        let mut jac = Array2::zeros((n, self.n_parameters()));
        let mut unit = Array1::zeros(n);
        for i in 0..n {
            unit[i] = 1.0;
            let grads = self.backward(&tape, &unit);
            let mut row = jac.row_mut(i);
            for (dst, src) in row.iter_mut().zip(grads.iter().flat_map(|g| g.iter())) {
                *dst = *src;
            }
            unit[i] = 0.0;
        }
        jac
    }
}

/// Deep GCG with `layers` applications of `h`, hidden width `width` and
/// `input_width` input features.
pub fn gcg(
    h: &Array2<f64>,
    layers: usize,
    input_width: usize,
    width: usize,
    init: InitMode,
    seed: u64,
) -> Result<GeneratorModel> {
    if layers == 0 {
        return Err(Error::InvalidArgument("GCG needs at least one layer".into()));
    }
    let mut widths = vec![input_width];
    widths.extend(std::iter::repeat_n(width, layers - 1));
    widths.push(1);
    init_model(ModelKind::Gcg, vec![h.clone(); layers], &widths, init, seed)
}

/// Deep GDec over the given upsamplers with constant hidden width.
pub fn gdec(
    upsamplers: &[Array2<f64>],
    input_width: usize,
    width: usize,
    init: InitMode,
    seed: u64,
) -> Result<GeneratorModel> {
    if upsamplers.is_empty() {
        return Err(Error::InvalidArgument("GDec needs at least one upsampler".into()));
    }
    let mut widths = vec![input_width];
    widths.extend(std::iter::repeat_n(width, upsamplers.len() - 1));
    widths.push(1);
    init_model(ModelKind::Gdec, upsamplers.to_vec(), &widths, init, seed)
}

/// `relu(MΘ) b` with `F = width` hidden units.
pub fn two_layer(kind: ModelKind, m: &Array2<f64>, width: usize, init: InitMode, seed: u64) -> Result<GeneratorModel> {
    if !kind.is_simplified() {
        return Err(Error::InvalidArgument(format!("{kind:?} is not a two-layer kind")));
    }
    init_model(kind, vec![m.clone()], &[m.ncols(), width], init, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsening::build_hierarchy;
    use crate::generators::{sample_sbm, SbmModel};
    use crate::graph::{graph_filter, normalize_adjacency, Graph};
    use ndarray::array;

    fn path_filter(n: usize) -> Array2<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        graph_filter(&normalize_adjacency(&g).unwrap(), &[0.2, 0.5, 0.3]).unwrap()
    }

    /// Independent per-layer evaluation.
    fn oracle_forward(model: &GeneratorModel) -> Array1<f64> {
        let mut y = model.input().clone();
        let l = model.weights().len();
        for (i, (m, w)) in model.operators().iter().zip(model.weights()).enumerate() {
            let mut z = Array2::<f64>::zeros((m.nrows(), w.ncols()));
            for r in 0..m.nrows() {
                for c in 0..w.ncols() {
                    let mut acc = 0.0;
                    for k in 0..m.ncols() {
                        for j in 0..w.nrows() {
                            acc += m[[r, k]] * y[[k, j]] * w[[j, c]];
                        }
                    }
                    z[[r, c]] = if i + 1 < l || model.readout().is_some() {
                        acc.max(0.0)
                    } else {
                        acc
                    };
                }
            }
            y = z;
        }
        match model.readout() {
            Some(b) => y.dot(b),
            None => y.column(0).to_owned(),
        }
    }

    #[test]
    fn reinit_is_bitwise_identical() {
        let h = path_filter(8);
        let a = gcg(&h, 3, 4, 6, InitMode::StandardNormal, 11).unwrap();
        let b = gcg(&h, 3, 4, 6, InitMode::StandardNormal, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gcg(&h, 3, 4, 6, InitMode::StandardNormal, 12).unwrap());
    }

    #[test]
    fn readout_balanced() {
        let b = readout_vector(6).unwrap();
        assert!(b.sum().abs() < 1e-15);
        assert_eq!(b.iter().filter(|&&v| v > 0.0).count(), 3);
        assert!(readout_vector(5).is_err());
    }

    #[test]
    fn standard_normal_weight_variance() {
        let h = Array2::<f64>::eye(1000);
        let m = two_layer(ModelKind::Gcg2, &h, 1000, InitMode::StandardNormal, 3).unwrap();
        let w = &m.weights()[0];
        let mean = w.mean().unwrap();
        let var = w.mapv(|v| (v - mean).powi(2)).mean().unwrap();
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn he_scaling() {
        let h = path_filter(4);
        let m = init_model(ModelKind::Gcg, vec![h.clone(), h], &[400, 400, 1], InitMode::HeScaled, 0).unwrap();
        let w = &m.weights()[0];
        let var = w.mapv(|v| v * v).mean().unwrap();
        assert!((var - 2.0 / 400.0).abs() < 0.02 * 2.0 / 400.0 * 5.0);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let h = path_filter(6);
        for mut m in [
            gcg(&h, 3, 2, 4, InitMode::StandardNormal, 0).unwrap(),
            two_layer(ModelKind::Gcg2, &h, 4, InitMode::StandardNormal, 0).unwrap(),
        ] {
            let zeros = m.weights().iter().map(|w| Array2::zeros(w.dim())).collect();
            m.set_weights(zeros).unwrap();
            assert!(m.forward().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn simplified_identity_filter() {
        let mut m = two_layer(ModelKind::Gcg2, &Array2::eye(3), 2, InitMode::StandardNormal, 0).unwrap();
        let theta = array![[1.0, -2.0], [-0.5, 0.25], [3.0, 4.0]];
        m.set_weights(vec![theta.clone()]).unwrap();
        let expected: Array1<f64> = theta
            .rows()
            .into_iter()
            .map(|r| (r[0].max(0.0) - r[1].max(0.0)) / 2f64.sqrt())
            .collect();
        let out = m.forward();
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn deep_gcg_matches_oracle() {
        let h = path_filter(16);
        let m = gcg(&h, 3, 5, 7, InitMode::StandardNormal, 4).unwrap();
        let out = m.forward();
        let oracle = oracle_forward(&m);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn deep_gdec_matches_oracle() {
        let model = SbmModel::balanced(64, 4, 0.5, 0.02).unwrap();
        let g = sample_sbm(&model, 2).unwrap();
        let hier = build_hierarchy(&g, &[4, 16, 64], 0.5).unwrap();
        let mut ops = hier.upsamplers.clone();
        ops.insert(0, Array2::eye(4));
        let m = gdec(&ops, 3, 6, InitMode::StandardNormal, 9).unwrap();
        assert_eq!(m.n_outputs(), 64);
        let out = m.forward();
        let oracle = oracle_forward(&m);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gdec_parent_copy() {
        let p = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut m = init_model(ModelKind::Gdec, vec![p], &[2, 1], InitMode::StandardNormal, 0).unwrap();
        m.set_weights(vec![array![[1.0], [1.0]]]).unwrap();
        let z = m.input().clone();
        let out = m.forward();
        let parent: Vec<f64> = z.rows().into_iter().map(|r| r.sum()).collect();
        assert_eq!(out.to_vec(), vec![parent[0], parent[0], parent[1]]);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let h = path_filter(10);
        let m = gcg(&h, 3, 4, 5, InitMode::StandardNormal, 1).unwrap();
        let x = m.forward();
        let (loss, grads, _) = m.loss_and_gradient(&x).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn positive_homogeneity() {
        let h = path_filter(9);
        let m = two_layer(ModelKind::Gcg2, &h, 8, InitMode::StandardNormal, 5).unwrap();
        let mut scaled = m.clone();
        scaled.set_weights(vec![&m.weights()[0] * 2.5]).unwrap();
        for (a, b) in scaled.forward().iter().zip(m.forward().iter()) {
            assert!((a - 2.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_rows_are_output_gradients() {
        let h = path_filter(6);
        let m = gcg(&h, 2, 3, 4, InitMode::StandardNormal, 8).unwrap();
        let jac = m.jacobian();
        assert_eq!(jac.dim(), (6, m.n_parameters()));
        // loss gradient = Jᵀ r
        let x = Array1::from_shape_fn(6, |i| i as f64);
        let (_, grads, out) = m.loss_and_gradient(&x).unwrap();
        let r = &out - &x;
        let flat: Vec<f64> = grads.iter().flat_map(|g| g.iter().copied()).collect();
        let jr = jac.t().dot(&r);
        for (a, b) in flat.iter().zip(&jr) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn invalid_chains_rejected() {
        let h = path_filter(5);
        assert!(init_model(ModelKind::Gcg, vec![h.clone()], &[2, 3], InitMode::StandardNormal, 0).is_err());
        assert!(init_model(ModelKind::Gcg, vec![h.clone()], &[2], InitMode::StandardNormal, 0).is_err());
        assert!(two_layer(ModelKind::Gcg2, &h, 3, InitMode::StandardNormal, 0).is_err());
        let a = Array2::<f64>::zeros((4, 2));
        let b = Array2::<f64>::zeros((8, 3));
        assert!(init_model(ModelKind::Gdec, vec![a, b], &[1, 2, 1], InitMode::StandardNormal, 0).is_err());
    }
}
