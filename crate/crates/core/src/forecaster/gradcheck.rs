use super::loss::{loss_and_grad, AdaptiveLossConfig, Distance};
use super::model::TrainedForecaster;
use super::network::{Activation, Mlp, Trace};
use super::windows::TrainingSample;

/// Below this magnitude the absolute error is reported instead of the
/// relative one.
const ABS_FALLBACK: f64 = 1e-8;

/// Branch pattern of every piecewise-linear choice made in a forward pass:
/// the sign of each ReLU pre-activation and, for the absolute distance, of
/// each residual.
fn branch_pattern(net: &Mlp, trace: &Trace, label: &[f64], distance: Distance) -> Vec<i8> {
    let mut out = Vec::new();
    if net.activation() == Activation::Relu {
        for pre in &trace.pre[..trace.pre.len() - 1] {
            out.extend(pre.iter().map(|&z| sign(z)));
        }
    }
    if distance == Distance::Absolute {
        out.extend(trace.output().iter().zip(label).map(|(p, y)| sign(p - y)));
    }
    out
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn loss_at(net: &Mlp, input: &[f64], sample: &TrainingSample, label: &[f64], cfg: &AdaptiveLossConfig, trace: &mut Trace) -> f64 {
    net.forward_trace(input, trace);
    let mut g = vec![0.0; label.len()];
    loss_and_grad(trace.output(), label, &sample.rare_mask, cfg.w1, cfg.w2, cfg.distance, 1.0, &mut g)
}

/// Largest discrepancy between the backpropagated gradient of the adaptive
/// loss and central finite differences over all parameters.
///
/// Parameters whose `+-epsilon` perturbation changes a ReLU or absolute-value
/// branch are skipped, since the loss is not differentiable across them.
pub fn gradient_check(
    model: &TrainedForecaster,
    sample: &TrainingSample,
    loss_cfg: &AdaptiveLossConfig,
    epsilon: f64,
) -> f64 {
    let norm = model
        .normalization()
        .get(sample.series)
        .copied()
        .unwrap_or(super::Normalization::IDENTITY);
    let input: Vec<f64> = sample.input.iter().map(|&v| norm.apply(v)).collect();
    let label: Vec<f64> = sample.label.iter().map(|&v| norm.apply(v)).collect();

    let mut net = model.network().clone();
    let mut trace = Trace::default();
    net.forward_trace(&input, &mut trace);
    let base_pattern = branch_pattern(&net, &trace, &label, loss_cfg.distance);
    let mut out_grad = vec![0.0; label.len()];
    loss_and_grad(
        trace.output(),
        &label,
        &sample.rare_mask,
        loss_cfg.w1,
        loss_cfg.w2,
        loss_cfg.distance,
        1.0,
        &mut out_grad,
    );
    let mut analytic = vec![0.0; net.params().len()];
    let mut scratch = Vec::new();
    net.backward(&trace, &out_grad, &mut analytic, &mut scratch);

    let mut worst: f64 = 0.0;
    for j in 0..analytic.len() {
        let orig = net.params()[j];
        net.params_mut()[j] = orig + epsilon;
        let up = loss_at(&net, &input, sample, &label, loss_cfg, &mut trace);
        let up_pattern = branch_pattern(&net, &trace, &label, loss_cfg.distance);
        net.params_mut()[j] = orig - epsilon;
        let down = loss_at(&net, &input, sample, &label, loss_cfg, &mut trace);
        let down_pattern = branch_pattern(&net, &trace, &label, loss_cfg.distance);
        net.params_mut()[j] = orig;
        if up_pattern != base_pattern || down_pattern != base_pattern {
            continue;
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let diff = (analytic[j] - numeric).abs();
        let magnitude = analytic[j].abs().max(numeric.abs());
        let err = if magnitude < ABS_FALLBACK { diff } else { diff / magnitude };
        worst = worst.max(err);
    }
    worst
}
