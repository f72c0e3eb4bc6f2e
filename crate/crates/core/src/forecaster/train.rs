use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{loss_and_grad, AdaptiveLossConfig, WeightAdaptation};
use super::model::{fit_normalization, TrainedForecaster};
use super::network::{Activation, Mlp, Trace};
use super::windows::TrainingSample;
use crate::error::{Error, Result};

/// Hidden layer widths and activation; input and output widths come from
/// the samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Optimizer {
    /// `theta <- theta - lr * grad`.
    Sgd,
    /// Adam with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Validation("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

struct Prepared {
    input: Vec<f64>,
    label: Vec<f64>,
    mask: Vec<bool>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch training on the batch-mean adaptive loss.
///
/// Inputs and labels are normalized per series before training and the
/// normalization is stored in the returned model. Initialization and batch
/// order are drawn from one ChaCha8 stream seeded with `train_cfg.seed`, so
/// identical inputs give identical parameters.
pub fn train(
    samples: &[TrainingSample],
    arch: &Architecture,
    loss_cfg: &AdaptiveLossConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainedForecaster> {
    loss_cfg.validate()?;
    train_cfg.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Validation("no training samples".into()))?;
    let (m, h) = (first.input.len(), first.label.len());
    if m == 0 || h == 0 {
        return Err(Error::Validation("samples need non-empty input and label".into()));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.input.len() != m || s.label.len() != h || s.rare_mask.len() != h)
    {
        return Err(Error::DimensionMismatch(format!(
            "sample at label_start {} has shape ({}, {}), expected ({m}, {h})",
            s.label_start,
            s.input.len(),
            s.label.len()
        )));
    }
    if arch.hidden.iter().any(|&w| w == 0) {
        return Err(Error::Validation("hidden layers need positive width".into()));
    }

    let normalization = fit_normalization(samples);
    let prepared: Vec<Prepared> = samples
        .iter()
        .map(|s| {
            let n = normalization[s.series];
            Prepared {
                input: s.input.iter().map(|&v| n.apply(v)).collect(),
                label: s.label.iter().map(|&v| n.apply(v)).collect(),
                mask: s.rare_mask.clone(),
            }
        })
        .collect();

    let mut layer_sizes = vec![m];
    layer_sizes.extend(&arch.hidden);
    layer_sizes.push(h);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut net = Mlp::init(&layer_sizes, arch.activation, &mut rng)?;

    let n_params = net.params().len();
    let mut grad = vec![0.0; n_params];
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut trace = Trace::default();
    let mut out_grad = vec![0.0; h];
    let mut scratch = Vec::new();
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rare_weights = vec![loss_cfg.w1; prepared.len()];
    let mut history = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        if let WeightAdaptation::ResidualInverse { floor } = loss_cfg.adaptation {
            if epoch > 0 {
                adapt_rare_weights(&net, &prepared, loss_cfg.w1, floor, &mut rare_weights);
            }
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &prepared[i];
                net.forward_trace(&s.input, &mut trace);
                epoch_loss += loss_and_grad(
                    trace.output(),
                    &s.label,
                    &s.mask,
                    rare_weights[i],
                    loss_cfg.w2,
                    loss_cfg.distance,
                    scale,
                    &mut out_grad,
                );
                net.backward(&trace, &out_grad, &mut grad, &mut scratch);
            }
            if !epoch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged { epoch: epoch + 1 });
            }
            match train_cfg.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                        *p -= train_cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam => adam.step(net.params_mut(), &grad, train_cfg.learning_rate),
            }
            if net.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::TrainingDiverged { epoch: epoch + 1 });
            }
        }
        history.push(epoch_loss / prepared.len() as f64);
    }

    let mut model = TrainedForecaster::from_parts(net, normalization)?;
    model.loss_history = history;
    Ok(model)
}

fn adapt_rare_weights(net: &Mlp, prepared: &[Prepared], w1: f64, floor: f64, weights: &mut [f64]) {
    let mut raw = Vec::new();
    for (i, s) in prepared.iter().enumerate() {
        let rare: Vec<usize> = (0..s.mask.len()).filter(|&k| s.mask[k]).collect();
        if rare.is_empty() {
            continue;
        }
        let pred = net.forward(&s.input);
        let resid = rare.iter().map(|&k| (pred[k] - s.label[k]).abs()).sum::<f64>() / rare.len() as f64;
        raw.push((i, 1.0 / (floor + resid)));
    }
    if raw.is_empty() {
        return;
    }
    let mean = raw.iter().map(|(_, w)| w).sum::<f64>() / raw.len() as f64;
    for (i, w) in raw {
        weights[i] = w1 * w / mean;
    }
}
