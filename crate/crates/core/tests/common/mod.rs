//! Shared synthetic holiday panel and the end-to-end comparison run on it.

#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rarefx::baselines::{direct_forecast, seasonal_forecast};
use rarefx::forecaster::{
    build_panel_windows, extract_effect, insample_forecast, train, Activation, AdaptiveLossConfig,
    Aggregation, Architecture, Distance, RollingWindowConfig, TrainConfig, WeightAdaptation,
};
use rarefx::impact::{evaluate_mape, predict_effect, year_scale, ImpactRatioModel, RatioAggregation, ScaleMode};
use rarefx::io::{DateCalendar, DatedOccurrence};
use rarefx::panel::{EventCalendar, EventWindow, PanelSeries, TimeIndex};

pub const YEARS: [i32; 4] = [2011, 2012, 2013, 2014];
pub const EVENT: &str = "thanksgiving";
pub const EVENT_DAYS: usize = 5;
/// Effect per event day as a fraction of the series level.
pub const EFFECT_SHAPE: [f64; EVENT_DAYS] = [0.45, 0.8, 0.6, 0.3, 0.15];
const WEEKLY: [f64; 7] = [-0.04, -0.06, -0.02, 0.0, 0.05, 0.12, -0.05];

pub struct HolidayData {
    pub panel: PanelSeries,
    pub dated: DateCalendar,
    pub calendar: EventCalendar,
    /// One window per year, in year order.
    pub windows: Vec<EventWindow>,
    /// True effect per series and year, `[series][year][k]`.
    pub effects: Vec<Vec<Vec<f64>>>,
}

/// Fourth Thursday of November and the four days after it.
pub fn thanksgiving(year: i32) -> DatedOccurrence {
    let start = NaiveDate::from_weekday_of_month_opt(year, 11, Weekday::Thu, 4).unwrap();
    DatedOccurrence {
        start,
        end: start + Duration::days(EVENT_DAYS as i64 - 1),
    }
}

/// Six daily series over four years: linear trend, weekly pattern, AR(1)
/// noise with `phi = 0.5`, and an additive event effect proportional to the
/// local level.
pub fn holiday_panel(seed: u64) -> HolidayData {
    let start = NaiveDate::from_ymd_opt(YEARS[0], 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(YEARS[3], 12, 31).unwrap();
    let len = (end - start).num_days() as usize + 1;
    let index = TimeIndex::daily(start, len);
    let dates = index.dates().unwrap().to_vec();

    let dated = DateCalendar::new(YEARS.iter().map(|&y| (EVENT.to_string(), thanksgiving(y))).collect()).unwrap();
    let calendar = dated.bind(&index).unwrap();
    let windows = calendar.event(EVENT).unwrap().occurrences.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut values = Array2::<f64>::zeros((n, len));
    let mut effects = Vec::with_capacity(n);
    for i in 0..n {
        let base = 100.0 * (1.0 + 0.35 * i as f64);
        let growth = 0.06 + 0.03 * (i % 3) as f64;
        let weekly_amp = 1.0 + 0.2 * (i % 2) as f64;
        let level = |t: usize| base * (1.0 + growth * t as f64 / 365.0);
        let sigma = 0.02 * base;
        let mut noise = 0.0;
        for t in 0..len {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise = 0.5 * noise + sigma * z;
            let dow = dates[t].weekday().num_days_from_monday() as usize;
            values[[i, t]] = level(t) * (1.0 + weekly_amp * WEEKLY[dow]) + noise;
        }
        let mut per_year = Vec::with_capacity(windows.len());
        for w in &windows {
            let effect: Vec<f64> = EFFECT_SHAPE.iter().map(|r| r * level(w.t0())).collect();
            for (k, t) in w.indices().enumerate() {
                values[[i, t]] += effect[k];
            }
            per_year.push(effect);
        }
        effects.push(per_year);
    }
    let ids = (0..n).map(|i| format!("dept{i}")).collect();
    HolidayData {
        panel: PanelSeries::with_ids(values, index, ids).unwrap(),
        dated,
        calendar,
        windows,
        effects,
    }
}

pub struct PipelineSettings {
    pub windows: RollingWindowConfig,
    pub arch: Architecture,
    pub train: TrainConfig,
    pub loss: AdaptiveLossConfig,
    pub df_train: TrainConfig,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            windows: RollingWindowConfig::new(90, 30, 1).unwrap(),
            arch: Architecture {
                hidden: vec![64],
                activation: Activation::Relu,
            },
            train: TrainConfig {
                epochs: 40,
                batch_size: 64,
                learning_rate: 1e-3,
                seed: 11,
                ..TrainConfig::default()
            },
            loss: AdaptiveLossConfig::new(0.1, 1.0, Distance::Absolute, WeightAdaptation::Fixed).unwrap(),
            df_train: TrainConfig {
                epochs: 40,
                batch_size: 64,
                learning_rate: 1e-3,
                seed: 12,
                ..TrainConfig::default()
            },
        }
    }
}

pub struct PipelineOutcome {
    /// Mean absolute error of the extracted effects over every series, year
    /// and day, divided by the mean absolute true effect.
    pub relative_mae: f64,
    /// Window MAPE on the last year, averaged over series.
    pub mape_ours: f64,
    pub mape_df: f64,
    pub mape_sd: f64,
}

/// Extraction on all years, impact prediction for the last year from the
/// earlier ones, and the DF and SD baselines on the same last-year window.
pub fn run_pipeline(data: &HolidayData, s: &PipelineSettings) -> PipelineOutcome {
    let panel = &data.panel;
    let samples = build_panel_windows(panel, &s.windows, &data.calendar).unwrap();
    let model = train(&samples, &s.arch, &s.loss, &s.train).unwrap();

    let mut abs_err = 0.0;
    let mut abs_true = 0.0;
    let target = *data.windows.last().unwrap();
    let (mut ours, mut sd) = (0.0, 0.0);
    for i in 0..panel.n_series() {
        let series = panel.series(i);
        let syn = insample_forecast(&model, i, &series, &s.windows, Aggregation::Mean).unwrap();
        let mut ratios = ImpactRatioModel::new(EVENT, RatioAggregation::Mean);
        for (y, w) in data.windows.iter().enumerate() {
            let est = extract_effect(&syn, &series, w).unwrap();
            for (e, t) in est.delta_hat.iter().zip(&data.effects[i][y]) {
                abs_err += (e - t).abs();
                abs_true += t.abs();
            }
            if w != &target {
                let scale = year_scale(&series, panel.time_index(), w, ScaleMode::PreEventMonth, &data.calendar).unwrap();
                ratios.add_year(YEARS[y], &est, scale).unwrap();
            }
        }
        let target_scale =
            year_scale(&series, panel.time_index(), &target, ScaleMode::PreEventMonth, &data.calendar).unwrap();
        let effect = predict_effect(&ratios, target_scale).unwrap();
        let control = syn.on_window(&target).unwrap();
        let predicted: Vec<f64> = control.iter().zip(effect.as_slice()).map(|(c, e)| c + e).collect();
        let observed: Vec<f64> = target.indices().map(|t| series[t]).collect();
        ours += evaluate_mape(&predicted, &observed).unwrap();

        let sd_pred = seasonal_forecast(&series, &[7, 365], &target).unwrap().on_window(&target).unwrap();
        sd += evaluate_mape(&sd_pred, &observed).unwrap();
    }

    let df = direct_forecast(panel, &target, &s.windows, &s.arch, &s.df_train, &s.loss).unwrap();
    let mut df_mape = 0.0;
    for (i, f) in df.iter().enumerate() {
        let observed: Vec<f64> = target.indices().map(|t| panel.values()[[i, t]]).collect();
        df_mape += evaluate_mape(&f.on_window(&target).unwrap(), &observed).unwrap();
    }
    let n = panel.n_series() as f64;
    PipelineOutcome {
        relative_mae: abs_err / abs_true,
        mape_ours: ours / n,
        mape_df: df_mape / n,
        mape_sd: sd / n,
    }
}
