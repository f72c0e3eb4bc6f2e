use crate::error::{Error, Result};

/// Per-step distance between label and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Absolute,
    Squared,
}

impl Distance {
    pub fn eval(self, label: f64, pred: f64) -> f64 {
        let r = pred - label;
        match self {
            Distance::Absolute => r.abs(),
            Distance::Squared => r * r,
        }
    }

    /// Derivative with respect to `pred`. The absolute distance uses 0 at
    /// the kink.
    pub fn grad(self, label: f64, pred: f64) -> f64 {
        let r = pred - label;
        match self {
            Distance::Absolute => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Distance::Squared => 2.0 * r,
        }
    }
}

/// How the rare-window weight evolves during training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightAdaptation {
    /// `w1` and `w2` stay constant.
    #[default]
    Fixed,
    /// Before each epoch after the first, sample `i` gets a rare weight
    /// proportional to `1 / (floor + r_i)`, where `r_i` is its current mean
    /// absolute residual on rare steps. Weights are rescaled so their mean
    /// over samples with rare steps equals `w1`.
    ResidualInverse { floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveLossConfig {
    /// Weight on steps inside event windows.
    pub w1: f64,
    /// Weight on all other steps.
    pub w2: f64,
    pub distance: Distance,
    pub adaptation: WeightAdaptation,
}

impl Default for AdaptiveLossConfig {
    fn default() -> Self {
        Self {
            w1: 0.1,
            w2: 1.0,
            distance: Distance::Absolute,
            adaptation: WeightAdaptation::Fixed,
        }
    }
}

impl AdaptiveLossConfig {
    pub fn new(w1: f64, w2: f64, distance: Distance, adaptation: WeightAdaptation) -> Result<Self> {
        let cfg = Self {
            w1,
            w2,
            distance,
            adaptation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || !self.w1.is_finite() || !self.w2.is_finite() {
            return Err(Error::Validation(format!(
                "loss weights must be finite and non-negative, got w1={}, w2={}",
                self.w1, self.w2
            )));
        }
        if self.w1 + self.w2 <= 0.0 {
            return Err(Error::Validation("w1 + w2 must be positive".into()));
        }
        if let WeightAdaptation::ResidualInverse { floor } = self.adaptation {
            if !(floor > 0.0) || !floor.is_finite() {
                return Err(Error::Validation(format!("adaptation floor must be positive, got {floor}")));
            }
        }
        Ok(())
    }
}

/// `w1 * sum_{rare} eta + w2 * sum_{non-rare} eta` for one sample.
///
/// Returns the loss and the unweighted per-step distances. Averaging over a
/// batch is left to the caller.
pub fn adaptive_loss(
    pred: &[f64],
    label: &[f64],
    mask: &[bool],
    cfg: &AdaptiveLossConfig,
) -> Result<(f64, Vec<f64>)> {
    if pred.len() != label.len() || mask.len() != label.len() {
        return Err(Error::DimensionMismatch(format!(
            "pred {}, label {}, mask {}",
            pred.len(),
            label.len(),
            mask.len()
        )));
    }
    cfg.validate()?;
    let per_step: Vec<f64> = label
        .iter()
        .zip(pred)
        .map(|(&y, &p)| cfg.distance.eval(y, p))
        .collect();
    Ok((weighted_sum(&per_step, mask, cfg.w1, cfg.w2), per_step))
}

pub(crate) fn weighted_sum(per_step: &[f64], mask: &[bool], w1: f64, w2: f64) -> f64 {
    let (mut rare, mut other) = (0.0, 0.0);
    for (&e, &m) in per_step.iter().zip(mask) {
        if m {
            rare += e;
        } else {
            other += e;
        }
    }
    w1 * rare + w2 * other
}

/// Loss of one sample and its gradient with respect to `pred`, scaled by
/// `scale`, written into `grad`.
pub(crate) fn loss_and_grad(
    pred: &[f64],
    label: &[f64],
    mask: &[bool],
    w1: f64,
    w2: f64,
    distance: Distance,
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let (mut rare, mut other) = (0.0, 0.0);
    for k in 0..pred.len() {
        let e = distance.eval(label[k], pred[k]);
        let w = if mask[k] {
            rare += e;
            w1
        } else {
            other += e;
            w2
        };
        grad[k] = scale * w * distance.grad(label[k], pred[k]);
    }
    w1 * rare + w2 * other
}
