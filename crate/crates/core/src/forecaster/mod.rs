//! Rare-event impact extraction with a feedforward forecaster.
//!
//! 1. Cut every series into rolling `(lookback, horizon)` windows and mark
//!    which label steps fall inside event windows ([`build_rolling_windows`]).
//! 2. Train a small network with a loss that weights rare steps by `w1` and
//!    all other steps by `w2` ([`adaptive_loss`], [`train`]). A small `w1`
//!    keeps the network from fitting the event, so its signal stays in the
//!    residuals.
//! 3. Re-forecast every window in sample and average the overlapping
//!    predictions into a synthetic control ([`insample_forecast`]).
//! 4. The effect is observed minus synthetic control on the event window
//!    ([`extract_effect`]), averaged over series for a panel.

mod gradcheck;
mod loss;
mod model;
mod network;
mod synthetic;
mod train;
mod windows;

pub use gradcheck::gradient_check;
pub use loss::{adaptive_loss, AdaptiveLossConfig, Distance, WeightAdaptation};
pub use model::{Normalization, TrainedForecaster};
pub use network::{parameter_count, Activation, Mlp};
pub use synthetic::{
    extract_effect, extract_panel_effect, insample_forecast, Aggregation, SyntheticControlSeries,
};
pub use train::{train, Architecture, Optimizer, TrainConfig};
pub use windows::{build_panel_windows, build_rolling_windows, RollingWindowConfig, TrainingSample};

use crate::error::Result;
use crate::panel::{EventCalendar, PanelSeries};

/// Trains one model across all series of a panel and returns it with the
/// in-sample synthetic control of every series.
pub fn fit_panel(
    panel: &PanelSeries,
    calendar: &EventCalendar,
    windows: &RollingWindowConfig,
    arch: &Architecture,
    loss_cfg: &AdaptiveLossConfig,
    train_cfg: &TrainConfig,
) -> Result<(TrainedForecaster, Vec<SyntheticControlSeries>)> {
    let samples = build_panel_windows(panel, windows, calendar)?;
    let model = train(&samples, arch, loss_cfg, train_cfg)?;
    let synthetic = (0..panel.n_series())
        .map(|i| insample_forecast(&model, i, &panel.series(i), windows, Aggregation::Mean))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, synthetic))
}
