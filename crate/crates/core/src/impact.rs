//! Scale-free event impact.
//!
//! An extracted effect is divided by a pre-event scale of the same year. The
//! ratios of past years are averaged per step and multiplied by the scale of
//! a new year to predict its effect.

use std::collections::BTreeMap;

use chrono::Datelike;

use crate::ar::TreatmentEffectEstimate;
use crate::error::{Error, Result};
use crate::panel::{EffectVector, EventCalendar, EventWindow, TimeIndex};
use crate::stats::{mean, median};

/// Offsets before `t0` of the default pre-event scale window, inclusive.
const PRE_EVENT_FAR: usize = 36;
const PRE_EVENT_NEAR: usize = 7;

/// How the per-year scale `r` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// Mean over `t0-36 ..= t0-7`, a 30-step block that ends a week before
    /// the event.
    #[default]
    PreEventMonth,
    /// Mean over the calendar month containing the first event day.
    CalendarMonth,
}

impl ScaleMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pre-event-month" => Some(Self::PreEventMonth),
            "calendar-month" => Some(Self::CalendarMonth),
            _ => None,
        }
    }
}

/// How ratios from several years are combined per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioAggregation {
    #[default]
    Mean,
    Median,
}

/// Ratio and scale observed for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRatio {
    pub ratio: Vec<f64>,
    pub scale: f64,
}

/// Per-year impact ratios of one recurring event.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRatioModel {
    pub event_name: String,
    pub per_year: BTreeMap<i32, YearRatio>,
    pub aggregation: RatioAggregation,
}

impl ImpactRatioModel {
    pub fn new(event_name: impl Into<String>, aggregation: RatioAggregation) -> Self {
        Self {
            event_name: event_name.into(),
            per_year: BTreeMap::new(),
            aggregation,
        }
    }

    /// Records the effect of one year divided by its scale.
    pub fn add_year(&mut self, year: i32, estimate: &TreatmentEffectEstimate, scale: f64) -> Result<()> {
        let ratio = impact_ratio(estimate, scale)?;
        if let Some(first) = self.per_year.values().next() {
            if first.ratio.len() != ratio.len() {
                return Err(Error::DimensionMismatch(format!(
                    "year {year} has {} steps, earlier years have {}",
                    ratio.len(),
                    first.ratio.len()
                )));
            }
        }
        self.per_year.insert(year, YearRatio { ratio, scale });
        Ok(())
    }

    /// Step-wise average of the stored ratios.
    pub fn averaged_ratio(&self) -> Result<Vec<f64>> {
        let first = self
            .per_year
            .values()
            .next()
            .ok_or_else(|| Error::Validation(format!("no years recorded for event {}", self.event_name)))?;
        Ok((0..first.ratio.len())
            .map(|k| {
                let col: Vec<f64> = self.per_year.values().map(|y| y.ratio[k]).collect();
                match self.aggregation {
                    RatioAggregation::Mean => mean(&col),
                    RatioAggregation::Median => median(&col),
                }
            })
            .collect())
    }
}

/// `delta_hat / scale`, elementwise.
pub fn impact_ratio(estimate: &TreatmentEffectEstimate, scale: f64) -> Result<Vec<f64>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Scale(format!("scale must be positive and finite, got {scale}")));
    }
    Ok(estimate.delta_hat.iter().map(|d| d / scale).collect())
}

/// Averaged ratio times the scale of the target year.
pub fn predict_effect(model: &ImpactRatioModel, target_scale: f64) -> Result<EffectVector> {
    if !(target_scale.is_finite() && target_scale > 0.0) {
        return Err(Error::Scale(format!("scale must be positive and finite, got {target_scale}")));
    }
    let ratio = model.averaged_ratio()?;
    EffectVector::new(ratio.into_iter().map(|r| r * target_scale).collect())
}

/// Mean of `series` over the scale block of `window`, skipping the window
/// itself and every index covered by `calendar`.
pub fn year_scale(
    series: &[f64],
    time_index: &TimeIndex,
    window: &EventWindow,
    mode: ScaleMode,
    calendar: &EventCalendar,
) -> Result<f64> {
    if series.len() != time_index.len() {
        return Err(Error::DimensionMismatch(format!(
            "series of length {} with an index of length {}",
            series.len(),
            time_index.len()
        )));
    }
    window.check_fits(series.len().saturating_sub(1))?;
    let excluded = |t: usize| window.contains(t) || calendar.contains(t);
    let picked: Vec<f64> = match mode {
        ScaleMode::PreEventMonth => {
            let t0 = window.t0();
            let lo = t0.saturating_sub(PRE_EVENT_FAR);
            let hi = match t0.checked_sub(PRE_EVENT_NEAR) {
                Some(hi) => hi,
                None => return Err(Error::Scale(format!("t0 = {t0} leaves no pre-event block"))),
            };
            (lo..=hi).filter(|&t| !excluded(t)).map(|t| series[t]).collect()
        }
        ScaleMode::CalendarMonth => {
            let dates = time_index
                .dates()
                .ok_or_else(|| Error::Validation("calendar-month scale needs a date index".into()))?;
            let first = dates[window.first()];
            dates
                .iter()
                .enumerate()
                .filter(|(t, d)| d.year() == first.year() && d.month() == first.month() && !excluded(*t))
                .map(|(t, _)| series[t])
                .collect()
        }
    };
    if picked.is_empty() {
        return Err(Error::Scale("no usable indices in the scale block".into()));
    }
    let r = mean(&picked);
    if !(r > 0.0) {
        return Err(Error::Scale(format!("scale must be positive, got {r}")));
    }
    Ok(r)
}

/// Mean absolute percentage error in percent.
pub fn evaluate_mape(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Validation("empty MAPE input".into()));
    }
    if let Some(index) = observed.iter().position(|&y| y == 0.0) {
        return Err(Error::ZeroObserved { index });
    }
    let total: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, y)| ((p - y) / y).abs())
        .sum();
    Ok(100.0 * total / observed.len() as f64)
}
