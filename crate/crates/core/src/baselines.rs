//! Comparison baselines for the synthetic control.
//!
//! * Direct forecast (DF): train only on data up to the last pre-event index
//!   and forecast the window out of sample.
//! * Seasonal decomposition (SD): iterated classical decomposition with one
//!   seasonal component per period. The longest period is taken to carry
//!   the recurring event.

use std::collections::BTreeMap;

use ndarray::s;

use crate::ar::{fit_ar1_ols, forecast_counterfactual};
use crate::error::{Error, Result};
use crate::forecaster::{
    build_panel_windows, train, AdaptiveLossConfig, Architecture, RollingWindowConfig,
    SyntheticControlSeries, TrainConfig, WeightAdaptation,
};
use crate::panel::{EventCalendar, EventWindow, PanelSeries, TimeIndex};

/// The panel restricted to indices `0..=t0`.
fn truncate(panel: &PanelSeries, t0: usize) -> Result<PanelSeries> {
    let values = panel.values().slice(s![.., ..=t0]).to_owned();
    let index = match panel.time_index() {
        TimeIndex::Integer(v) => TimeIndex::Integer(v[..=t0].to_vec()),
        TimeIndex::Dates(v) => TimeIndex::Dates(v[..=t0].to_vec()),
    };
    PanelSeries::with_ids(values, index, panel.series_ids().to_vec())
}

/// Out-of-sample forecast of every series over `window` from a network
/// trained on indices `0..=t0` only. All steps get equal weight.
pub fn direct_forecast(
    panel: &PanelSeries,
    window: &EventWindow,
    fw_config: &RollingWindowConfig,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    loss_cfg: &AdaptiveLossConfig,
) -> Result<Vec<SyntheticControlSeries>> {
    window.check_fits(panel.last_index())?;
    if window.d() > fw_config.horizon {
        return Err(Error::Horizon {
            d: window.d(),
            horizon: fw_config.horizon,
        });
    }
    let t0 = window.t0();
    if t0 < fw_config.lookback + fw_config.horizon {
        return Err(Error::Validation(format!(
            "direct forecast needs t0 >= lookback + horizon = {}, got {t0}",
            fw_config.lookback + fw_config.horizon
        )));
    }
    let history = truncate(panel, t0)?;
    let samples = build_panel_windows(&history, fw_config, &EventCalendar::default())?;
    let uniform = AdaptiveLossConfig {
        w1: 1.0,
        w2: 1.0,
        adaptation: WeightAdaptation::Fixed,
        ..*loss_cfg
    };
    let model = train(&samples, arch, &uniform, train_cfg)?;
    (0..history.n_series())
        .map(|i| {
            let row = history.values().row(i);
            let input: Vec<f64> = row.slice(s![t0 + 1 - fw_config.lookback..=t0]).to_vec();
            let pred = model.predict(i, &input)?;
            Ok(SyntheticControlSeries::from_points(
                window.indices().zip(pred.into_iter().take(window.d())),
            ))
        })
        .collect()
}

/// Direct forecast with the AR(1) recursion in place of the network.
pub fn direct_forecast_ar1(panel: &PanelSeries, window: &EventWindow) -> Result<Vec<SyntheticControlSeries>> {
    window.check_fits(panel.last_index())?;
    let history = truncate(panel, window.t0())?;
    let fit = fit_ar1_ols(&history, window.t0())?;
    // The recursion only reads the anchor at t0, so the full panel is safe here.
    let cf = forecast_counterfactual(&fit, panel, window)?;
    Ok(cf
        .values
        .rows()
        .into_iter()
        .map(|row| SyntheticControlSeries::from_points(window.indices().zip(row.iter().copied())))
        .collect())
}

/// Additive decomposition `series = trend + sum(seasonals) + remainder`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub trend: Vec<f64>,
    pub seasonal_components: BTreeMap<usize, Vec<f64>>,
    pub remainder: Vec<f64>,
}

/// SD baseline on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalBaseline {
    pub decomposition: DecompositionResult,
    /// Trend plus every seasonal except the longest period.
    pub control: SyntheticControlSeries,
    /// Trend plus all seasonals, the SD estimate of the series itself.
    pub total: SyntheticControlSeries,
}

impl SeasonalBaseline {
    /// The longest-period seasonal on the window, the SD effect estimate.
    pub fn event_effect(&self, window: &EventWindow) -> Result<Vec<f64>> {
        let total = self.total.on_window(window)?;
        let control = self.control.on_window(window)?;
        Ok(total.iter().zip(&control).map(|(t, c)| t - c).collect())
    }
}

/// Centered moving average over one period. Even periods use the `2 x p`
/// filter. Near the edges the window shrinks symmetrically to what fits.
pub fn centered_moving_average(x: &[f64], period: usize) -> Vec<f64> {
    let n = x.len();
    let half = period / 2;
    let window_sum = |lo: usize, hi: usize| -> f64 { x[lo..=hi].iter().sum::<f64>() };
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            if h < half {
                return window_sum(i - h, i + h) / (2 * h + 1) as f64;
            }
            if period % 2 == 1 {
                window_sum(i - h, i + h) / period as f64
            } else {
                let inner = window_sum(i - h + 1, i + h - 1);
                (inner + 0.5 * (x[i - h] + x[i + h])) / period as f64
            }
        })
        .collect()
}

/// Iterated classical decomposition over `periods` in ascending order.
pub fn decompose(series: &[f64], periods: &[usize]) -> Result<DecompositionResult> {
    let mut sorted = periods.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != periods.len() {
        return Err(Error::Validation(format!("periods must be non-empty and distinct, got {periods:?}")));
    }
    if sorted[0] < 2 {
        return Err(Error::Validation("every period must be >= 2".into()));
    }
    let max_p = *sorted.last().unwrap();
    if series.len() < 2 * max_p {
        return Err(Error::Validation(format!(
            "series of length {} shorter than twice the longest period {max_p}",
            series.len()
        )));
    }
    let n = series.len();
    let mut x = series.to_vec();
    let mut seasonal_components = BTreeMap::new();
    for &p in &sorted {
        let trend = centered_moving_average(&x, p);
        let mut sums = vec![0.0; p];
        let mut counts = vec![0usize; p];
        // Phase means use only steps with a full moving-average window.
        for i in p / 2..n - p / 2 {
            sums[i % p] += x[i] - trend[i];
            counts[i % p] += 1;
        }
        let mut phase: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        let centre = phase.iter().sum::<f64>() / p as f64;
        phase.iter_mut().for_each(|v| *v -= centre);
        let seasonal: Vec<f64> = (0..n).map(|i| phase[i % p]).collect();
        for (xi, si) in x.iter_mut().zip(&seasonal) {
            *xi -= si;
        }
        seasonal_components.insert(p, seasonal);
    }
    let trend = centered_moving_average(&x, max_p);
    let remainder = (0..n)
        .map(|i| series[i] - trend[i] - seasonal_components.values().map(|s| s[i]).sum::<f64>())
        .collect();
    Ok(DecompositionResult {
        trend,
        seasonal_components,
        remainder,
    })
}

/// SD baseline: decomposes the series and evaluates control and total on
/// the window.
pub fn seasonal_decompose(series: &[f64], periods: &[usize], window: &EventWindow) -> Result<SeasonalBaseline> {
    window.check_fits(series.len().saturating_sub(1))?;
    let decomposition = decompose(series, periods)?;
    let longest = *decomposition.seasonal_components.keys().last().unwrap();
    let mut control = Vec::with_capacity(window.d());
    let mut total = Vec::with_capacity(window.d());
    for t in window.indices() {
        let mut c = decomposition.trend[t];
        for (&p, s) in &decomposition.seasonal_components {
            if p != longest {
                c += s[t];
            }
        }
        control.push((t, c));
        total.push((t, c + decomposition.seasonal_components[&longest][t]));
    }
    Ok(SeasonalBaseline {
        decomposition,
        control: SyntheticControlSeries::from_points(control),
        total: SyntheticControlSeries::from_points(total),
    })
}

/// Out-of-sample SD forecast of the window from data up to `t0` only.
///
/// Seasonal phases repeat from the pre-event decomposition. The level is
/// the last trend value computed from a full moving-average window.
pub fn seasonal_forecast(series: &[f64], periods: &[usize], window: &EventWindow) -> Result<SyntheticControlSeries> {
    window.check_fits(series.len().saturating_sub(1))?;
    let history = &series[..=window.t0()];
    let d = decompose(history, periods)?;
    let longest = *d.seasonal_components.keys().last().unwrap();
    let level = d.trend[history.len() - 1 - longest / 2];
    Ok(SyntheticControlSeries::from_points(window.indices().map(|t| {
        let seasonal: f64 = d.seasonal_components.iter().map(|(&p, s)| s[t % p]).sum();
        (t, level + seasonal)
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::Activation;
    use crate::panel::{simulate_ar1_panel, ARProcessSpec, InitialMode};
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn rms(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn moving_average_shapes() {
        let x: Vec<f64> = (0..10).map(|v| v as f64).collect();
        assert_eq!(centered_moving_average(&x, 3), x);
        let ma4 = centered_moving_average(&x, 4);
        assert_eq!(ma4[0], 0.0);
        assert_eq!(ma4[1], 1.0);
        assert_eq!(ma4[5], 5.0);
    }

    #[test]
    fn single_harmonic_recovered() {
        let n = 700;
        let wave: Vec<f64> = (0..n).map(|t| (2.0 * PI * t as f64 / 7.0).sin()).collect();
        let d = decompose(&wave, &[7]).unwrap();
        let s7 = &d.seasonal_components[&7];
        let inner = 7..n - 7;
        let amp = rms(&wave[inner.clone()], &vec![0.0; inner.len()]);
        assert!(rms(&s7[inner.clone()], &wave[inner]) < 0.02 * amp);
    }

    #[test]
    fn constant_series() {
        let x = vec![3.5; 50];
        let d = decompose(&x, &[5, 7]).unwrap();
        assert!(d.trend.iter().all(|v| (v - 3.5).abs() < 1e-12));
        for s in d.seasonal_components.values() {
            assert!(s.iter().all(|v| v.abs() < 1e-12));
        }
        assert!(d.remainder.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn annual_spike_goes_to_longest_period() {
        let years = 4;
        let n = 365 * years;
        let mut x = vec![100.0; n];
        for y in 0..years {
            for k in 0..5 {
                x[y * 365 + 200 + k] += 10.0;
            }
        }
        let w = EventWindow::new(365 * 2 + 199, 5).unwrap();
        let sd = seasonal_decompose(&x, &[7, 365], &w).unwrap();
        let annual = &sd.decomposition.seasonal_components[&365];
        for t in w.indices() {
            assert!((annual[t] - 10.0).abs() < 1.0, "{}", annual[t]);
        }
        for c in sd.control.on_window(&w).unwrap() {
            assert!((c - 100.0).abs() < 15.0);
        }
        let effect = sd.event_effect(&w).unwrap();
        assert!(effect.iter().all(|e| (e - 10.0).abs() < 1.0));
    }

    #[test]
    fn additivity_and_zero_sum() {
        let x: Vec<f64> = (0..400)
            .map(|t| 0.05 * t as f64 + (t as f64 * 0.9).sin() * 3.0 + ((t * 7919) % 13) as f64)
            .collect();
        let d = decompose(&x, &[7, 30]).unwrap();
        for i in 0..x.len() {
            let rebuilt = d.trend[i] + d.seasonal_components.values().map(|s| s[i]).sum::<f64>() + d.remainder[i];
            assert!((rebuilt - x[i]).abs() <= 1e-9 * x[i].abs().max(1.0));
        }
        for (&p, s) in &d.seasonal_components {
            for start in [0, 13, 100] {
                assert!(s[start..start + p].iter().sum::<f64>().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decomposition_validation() {
        let x = vec![1.0; 20];
        assert!(decompose(&x, &[7, 7]).is_err());
        assert!(decompose(&x, &[1]).is_err());
        assert!(decompose(&x, &[11]).is_err());
        assert!(decompose(&x, &[]).is_err());
    }

    fn one_row(v: Vec<f64>) -> PanelSeries {
        let n = v.len();
        PanelSeries::new(Array2::from_shape_vec((1, n), v).unwrap(), TimeIndex::range(n)).unwrap()
    }

    #[test]
    fn ar1_direct_forecast_equals_recursion() {
        let spec = ARProcessSpec::new(0.8, 0.0, InitialMode::Fixed(3.0)).unwrap();
        let p = simulate_ar1_panel(&spec, 2, 30, 0).unwrap();
        let w = EventWindow::new(20, 4).unwrap();
        let df = direct_forecast_ar1(&p, &w).unwrap();
        let cf = forecast_counterfactual(&crate::ar::ARModelFit::known(0.8, 0.0), &p, &w).unwrap();
        for (i, syn) in df.iter().enumerate() {
            for (k, v) in syn.on_window(&w).unwrap().iter().enumerate() {
                assert!((v - cf.values[[i, k]]).abs() < 1e-12);
            }
        }
    }

    fn small_net() -> (RollingWindowConfig, Architecture, TrainConfig) {
        (
            RollingWindowConfig::new(14, 7, 1).unwrap(),
            Architecture {
                hidden: vec![16],
                activation: Activation::Relu,
            },
            TrainConfig {
                epochs: 150,
                batch_size: 16,
                learning_rate: 3e-3,
                ..TrainConfig::default()
            },
        )
    }

    #[test]
    fn direct_forecast_of_constant() {
        let (fw, arch, tc) = small_net();
        let p = one_row(vec![42.0; 120]);
        let w = EventWindow::new(100, 5).unwrap();
        let df = direct_forecast(&p, &w, &fw, &arch, &tc, &AdaptiveLossConfig::default()).unwrap();
        for v in df[0].on_window(&w).unwrap() {
            assert!((v - 42.0).abs() < 0.42, "{v}");
        }
    }

    #[test]
    fn direct_forecast_tracks_peak() {
        let (fw, arch, tc) = small_net();
        let series: Vec<f64> = (0..200).map(|t| 50.0 + 10.0 * (2.0 * PI * t as f64 / 28.0).sin()).collect();
        // t = 175 is a crest (175 mod 28 = 7)
        let w = EventWindow::new(173, 5).unwrap();
        let df = direct_forecast(&one_row(series.clone()), &w, &fw, &arch, &tc, &AdaptiveLossConfig::default())
            .unwrap();
        let pred = df[0].on_window(&w).unwrap();
        let truth: Vec<f64> = w.indices().map(|t| series[t]).collect();
        let mean_only = series[..=173].iter().sum::<f64>() / 174.0;
        for (p, y) in pred.iter().zip(&truth) {
            assert!((p - y).abs() < 0.1 * y, "{p} vs {y}");
        }
        assert!(truth.iter().any(|y| (mean_only - y).abs() >= 0.1 * y));
    }

    #[test]
    fn direct_forecast_ignores_future() {
        let (fw, arch, mut tc) = small_net();
        tc.epochs = 20;
        let base: Vec<f64> = (0..120).map(|t| (t as f64 * 0.3).sin()).collect();
        let mut poisoned = base.clone();
        for v in poisoned.iter_mut().skip(101) {
            *v = 1e9;
        }
        let w = EventWindow::new(100, 5).unwrap();
        let a = direct_forecast(&one_row(base), &w, &fw, &arch, &tc, &AdaptiveLossConfig::default()).unwrap();
        let b = direct_forecast(&one_row(poisoned), &w, &fw, &arch, &tc, &AdaptiveLossConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_forecast_errors() {
        let (fw, arch, tc) = small_net();
        let p = one_row(vec![1.0; 100]);
        let deep = EventWindow::new(80, 8).unwrap();
        assert!(matches!(
            direct_forecast(&p, &deep, &fw, &arch, &tc, &AdaptiveLossConfig::default()),
            Err(Error::Horizon { d: 8, horizon: 7 })
        ));
        let early = EventWindow::new(10, 3).unwrap();
        assert!(direct_forecast(&p, &early, &fw, &arch, &tc, &AdaptiveLossConfig::default()).is_err());
    }

    #[test]
    fn seasonal_forecast_repeats_pattern() {
        let x: Vec<f64> = (0..200).map(|t| 10.0 + [0.0, 1.0, -2.0, 3.0, -2.0][t % 5]).collect();
        let w = EventWindow::new(150, 10).unwrap();
        let mut poisoned = x.clone();
        poisoned[151..].iter_mut().for_each(|v| *v = -1e6);
        let f = seasonal_forecast(&poisoned, &[5], &w).unwrap();
        for (t, v) in f.values() {
            assert!((v - x[*t]).abs() < 1e-9, "{t}: {v}");
        }
    }
}
