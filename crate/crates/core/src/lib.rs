//! Treatment effects of recurring rare events (holidays) in panel time series
//! where the untreated outcome is never observed during the event.
//!
//! Two estimation routes share one data model:
//!
//! * [`ar`]: the AR(1) estimator with closed-form uncertainty, validated by
//!   the [`montecarlo`] harness.
//! * [`forecaster`]: a feedforward forecaster trained with a loss that
//!   down-weights event windows; its in-sample forecasts act as the synthetic
//!   control. [`baselines`] provides the direct-forecast and seasonal
//!   decomposition comparisons, and [`impact`] turns per-year effects into a
//!   prediction for a new year.
//!
//! [`io`] and [`cli`] handle files, reports and the command line.

pub mod ar;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod forecaster;
pub mod impact;
pub mod io;
pub mod montecarlo;
pub mod panel;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
