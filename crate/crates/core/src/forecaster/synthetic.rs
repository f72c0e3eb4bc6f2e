use std::collections::BTreeMap;

use super::model::TrainedForecaster;
use super::windows::RollingWindowConfig;
use crate::ar::TreatmentEffectEstimate;
use crate::error::{Error, Result};
use crate::panel::{EventWindow, PanelSeries};
use crate::stats::{mean, median};

/// How overlapping horizon predictions for one index are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// Estimated untreated trajectory `Y_hat_t(0)` on the indices it covers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticControlSeries {
    values: BTreeMap<usize, f64>,
    overlap_counts: BTreeMap<usize, usize>,
}

impl SyntheticControlSeries {
    /// One prediction per index, e.g. from an out-of-sample forecast.
    pub fn from_points(points: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let values: BTreeMap<usize, f64> = points.into_iter().collect();
        let overlap_counts = values.keys().map(|&t| (t, 1)).collect();
        Self {
            values,
            overlap_counts,
        }
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.values.get(&t).copied()
    }

    pub fn overlap_count(&self, t: usize) -> usize {
        self.overlap_counts.get(&t).copied().unwrap_or(0)
    }

    /// Covered indices in ascending order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.keys().copied()
    }

    pub fn values(&self) -> &BTreeMap<usize, f64> {
        &self.values
    }

    pub fn overlap_counts(&self) -> &BTreeMap<usize, usize> {
        &self.overlap_counts
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Combines per-index prediction lists.
    pub fn aggregate(predictions: BTreeMap<usize, Vec<f64>>, how: Aggregation) -> Self {
        let mut values = BTreeMap::new();
        let mut overlap_counts = BTreeMap::new();
        for (t, preds) in predictions {
            if preds.is_empty() {
                continue;
            }
            let v = match how {
                Aggregation::Mean => mean(&preds),
                Aggregation::Median => median(&preds),
            };
            values.insert(t, v);
            overlap_counts.insert(t, preds.len());
        }
        Self {
            values,
            overlap_counts,
        }
    }

    /// Values on a window, or the indices it fails to cover.
    pub fn on_window(&self, window: &EventWindow) -> Result<Vec<f64>> {
        let missing: Vec<usize> = window.indices().filter(|t| !self.values.contains_key(t)).collect();
        if !missing.is_empty() {
            return Err(Error::Coverage { missing });
        }
        Ok(window.indices().map(|t| self.values[&t]).collect())
    }
}

/// Re-forecasts every rolling window of `series` and combines overlapping
/// predictions. The first `lookback` indices are never covered.
pub fn insample_forecast(
    model: &TrainedForecaster,
    series_idx: usize,
    series: &[f64],
    config: &RollingWindowConfig,
    aggregation: Aggregation,
) -> Result<SyntheticControlSeries> {
    if config.lookback != model.lookback() || config.horizon != model.horizon() {
        return Err(Error::ModelMismatch(format!(
            "windows ({}, {}) but model maps {} -> {}",
            config.lookback,
            config.horizon,
            model.lookback(),
            model.horizon()
        )));
    }
    config.check_len(series.len())?;
    let mut preds: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in 0..config.window_count(series.len()) {
        let start = i * config.stride;
        let label_start = start + config.lookback;
        let out = model.predict(series_idx, &series[start..label_start])?;
        for (k, v) in out.into_iter().enumerate() {
            preds.entry(label_start + k).or_default().push(v);
        }
    }
    Ok(SyntheticControlSeries::aggregate(preds, aggregation))
}

/// `delta_hat[k] = Y[t0+1+k] - Y_hat[t0+1+k]` for one series.
pub fn extract_effect(
    synthetic: &SyntheticControlSeries,
    series: &[f64],
    window: &EventWindow,
) -> Result<TreatmentEffectEstimate> {
    window.check_fits(series.len().saturating_sub(1))?;
    let control = synthetic.on_window(window)?;
    let delta_hat = window
        .indices()
        .zip(control)
        .map(|(t, c)| series[t] - c)
        .collect();
    Ok(TreatmentEffectEstimate {
        window: *window,
        delta_hat,
        n_series: 1,
        covariance: None,
        variance_mode: None,
    })
}

/// Cross-series mean of [`extract_effect`], one synthetic control per row.
pub fn extract_panel_effect(
    synthetics: &[SyntheticControlSeries],
    panel: &PanelSeries,
    window: &EventWindow,
) -> Result<TreatmentEffectEstimate> {
    if synthetics.len() != panel.n_series() {
        return Err(Error::DimensionMismatch(format!(
            "{} synthetic controls for {} series",
            synthetics.len(),
            panel.n_series()
        )));
    }
    let mut sum = vec![0.0; window.d()];
    for (i, syn) in synthetics.iter().enumerate() {
        let est = extract_effect(syn, &panel.series(i), window)?;
        for (s, v) in sum.iter_mut().zip(est.delta_hat) {
            *s += v;
        }
    }
    let n = panel.n_series() as f64;
    Ok(TreatmentEffectEstimate {
        window: *window,
        delta_hat: sum.into_iter().map(|s| s / n).collect(),
        n_series: panel.n_series(),
        covariance: None,
        variance_mode: None,
    })
}
