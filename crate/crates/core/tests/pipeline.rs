use rarefx::forecaster::{
    build_rolling_windows, extract_effect, insample_forecast, train, Activation, AdaptiveLossConfig, Aggregation,
    Architecture, Distance, RollingWindowConfig, TrainConfig, WeightAdaptation,
};
use rarefx::impact::evaluate_mape;
use rarefx::panel::{EventCalendar, EventWindow};

const PERIOD: f64 = 20.0;

fn sinusoid(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| 10.0 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / PERIOD).sin())
        .collect()
}

fn arch() -> Architecture {
    Architecture {
        hidden: vec![64],
        activation: Activation::Relu,
    }
}

#[test]
fn learns_a_sinusoid_out_of_sample() {
    let full = sinusoid(330);
    let train_part = &full[..300];
    let cfg = RollingWindowConfig::new(40, 10, 1).unwrap();
    let samples = build_rolling_windows(train_part, &cfg, &EventCalendar::default()).unwrap();
    let tc = TrainConfig {
        epochs: 2000,
        batch_size: 32,
        learning_rate: 1e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train(&samples, &arch(), &AdaptiveLossConfig::default(), &tc).unwrap();
    let pred = model.predict(0, &full[260..300]).unwrap();
    let mape = evaluate_mape(&pred, &full[300..310]).unwrap();
    assert!(mape < 5.0, "MAPE {mape}%");
}

#[test]
fn recovers_a_spike_ignored_by_the_loss() {
    let mut series = sinusoid(400);
    let window = EventWindow::new(299, 1).unwrap();
    series[300] += 3.0;
    let calendar = EventCalendar::new(vec![("spike".to_string(), vec![window])]).unwrap();
    let cfg = RollingWindowConfig::new(40, 10, 1).unwrap();
    let samples = build_rolling_windows(&series, &cfg, &calendar).unwrap();
    let loss = AdaptiveLossConfig::new(0.0, 1.0, Distance::Absolute, WeightAdaptation::Fixed).unwrap();
    let tc = TrainConfig {
        epochs: 300,
        batch_size: 32,
        learning_rate: 1e-3,
        seed: 6,
        ..TrainConfig::default()
    };
    let model = train(&samples, &arch(), &loss, &tc).unwrap();
    let syn = insample_forecast(&model, 0, &series, &cfg, Aggregation::Median).unwrap();
    let est = extract_effect(&syn, &series, &window).unwrap();
    assert!((2.4..=3.6).contains(&est.delta_hat[0]), "{:?}", est.delta_hat);
}
