//! Full-batch fitting of a generator to a single observation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::GeneratorModel;
use crate::error::{Error, Result};
use crate::graph::GraphSignal;
use crate::signals::nmse;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    PlainGd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub epochs: usize,
    pub step: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrajectory {
    /// One record per epoch `0..=T`.
    pub records: Vec<EpochRecord>,
    pub weights: Vec<Array2<f64>>,
    pub estimate: GraphSignal,
}

impl FitTrajectory {
    pub fn nmse_curve(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.nmse).collect()
    }
}

struct Adam {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    fn new(weights: &[Array2<f64>]) -> Self {
        let zeros = || weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, weights: &mut [Array2<f64>], grads: &[Array2<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((w, g), m), v) in weights.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
        }
    }
}

/// Runs `cfg.epochs` gradient steps on `½‖x - f‖²`, starting from the
/// model's current weights. The model is left at the final weights.
///
/// When `reference` is given, every record also carries the NMSE of the
/// current output against it.
pub fn fit(
    model: &mut GeneratorModel,
    x: &GraphSignal,
    cfg: &FitConfig,
    reference: Option<&GraphSignal>,
) -> Result<FitTrajectory> {
    cfg.validate()?;
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(Adam::new(model.weights())),
        Optimizer::PlainGd => None,
    };
    let mut records = Vec::with_capacity(cfg.epochs + 1);
    let mut estimate = GraphSignal::zeros(0);
    for epoch in 0..=cfg.epochs {
        let (loss, grads, out) = model.loss_and_gradient(x)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let score = reference.map(|r| nmse(r, &out)).transpose()?;
        records.push(EpochRecord {
            epoch,
            loss,
            nmse: score,
        });
        if epoch == cfg.epochs {
            estimate = out;
            break;
        }
        match &mut adam {
            Some(adam) => adam.step(model.weights_mut(), &grads, cfg.step),
            None => {
                for (w, g) in model.weights_mut().iter_mut().zip(&grads) {
                    w.scaled_add(-cfg.step, g);
                }
            }
        }
    }
    Ok(FitTrajectory {
        records,
        weights: model.weights().to_vec(),
        estimate,
    })
}
