//! AR(1) treatment-effect estimator.
//!
//! The coefficient is fitted by pooled OLS on every consecutive pre-event pair
//! `(Y_{i,t-1}, Y_{i,t})`, `t = 1..=t0`. Counterfactuals inside the window are
//! the recursive forecast `Y_hat_{t0+k} = phi_hat^k * Y_{t0}`, and the effect at
//! each step is the cross-sectional mean of observed minus counterfactual.
//!
//! Two covariance modes are offered for `delta_hat`:
//!
//! * [`VarianceMode::FiniteHorizon`]: `sigma^2 (1 - phi^{2k}) / ((1 - phi^2) N)`
//!   at step `k = 1..=d`, the exact variance of the forecast-error recursion.
//! * [`VarianceMode::AsymptoticDiagonal`]: `sigma^2 / ((1 - phi^2) N)` at every
//!   step, the limit of the above.
//!
//! Off-diagonal entries are zero in both modes. The forecast errors at two
//! window steps share innovations, so the true covariance is
//! `sigma^2 phi^{|k-l|} (1 - phi^{2 min(k,l)}) / (1 - phi^2)`; the Monte Carlo
//! harness measures this against the diagonal form.

use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::panel::{EventWindow, PanelSeries};

/// Pooled OLS fit of an AR(1) coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ARModelFit {
    pub phi_hat: f64,
    /// Mean squared residual over the fitted pairs, no d.o.f. correction.
    pub sigma2_hat: f64,
    /// Number of `(Y_{t-1}, Y_t)` pairs pooled across series.
    pub n_pairs: usize,
}

impl ARModelFit {
    /// A fit with known parameters, e.g. the true process in oracle mode.
    pub fn known(phi: f64, sigma2: f64) -> Self {
        Self {
            phi_hat: phi,
            sigma2_hat: sigma2,
            n_pairs: 1,
        }
    }
}

/// Forecast `Y_hat_{i,t}(0)` for each series over a window, `N x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualPanel {
    pub window: EventWindow,
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    AsymptoticDiagonal,
    #[default]
    FiniteHorizon,
}

/// Per-step effect estimates over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentEffectEstimate {
    pub window: EventWindow,
    pub delta_hat: Vec<f64>,
    pub n_series: usize,
    /// Covariance of `delta_hat` itself (already divided by `N`).
    pub covariance: Option<Array2<f64>>,
    pub variance_mode: Option<VarianceMode>,
}

impl TreatmentEffectEstimate {
    /// Attaches a covariance matrix computed by [`effect_covariance`].
    pub fn with_covariance(mut self, covariance: Array2<f64>, mode: VarianceMode) -> Self {
        self.covariance = Some(covariance);
        self.variance_mode = Some(mode);
        self
    }
}

/// Pooled OLS estimate of `phi` from pre-event pairs `t = 1..=t0`.
pub fn fit_ar1_ols(panel: &PanelSeries, t0: usize) -> Result<ARModelFit> {
    if t0 < 1 || t0 > panel.last_index() {
        return Err(Error::Bounds(format!(
            "t0 = {t0} outside 1..={}",
            panel.last_index()
        )));
    }
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for row in panel.values().rows() {
        let pre = row.slice(ndarray::s![..=t0]);
        for w in pre.windows(2) {
            sxy += w[0] * w[1];
            sxx += w[0] * w[0];
        }
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let phi_hat = sxy / sxx;
    let mut ssr = 0.0;
    for row in panel.values().rows() {
        let pre = row.slice(ndarray::s![..=t0]);
        for w in pre.windows(2) {
            let r = w[1] - phi_hat * w[0];
            ssr += r * r;
        }
    }
    let n_pairs = panel.n_series() * t0;
    Ok(ARModelFit {
        phi_hat,
        sigma2_hat: ssr / n_pairs as f64,
        n_pairs,
    })
}

/// Recursive forecast anchored at the observed `Y_{i,t0}`.
pub fn forecast_counterfactual(
    fit: &ARModelFit,
    panel: &PanelSeries,
    window: &EventWindow,
) -> Result<CounterfactualPanel> {
    window.check_fits(panel.last_index())?;
    let d = window.d();
    let mut values = Array2::<f64>::zeros((panel.n_series(), d));
    for (i, row) in panel.values().rows().into_iter().enumerate() {
        let mut y = row[window.t0()];
        for k in 0..d {
            y *= fit.phi_hat;
            values[[i, k]] = y;
        }
    }
    Ok(CounterfactualPanel {
        window: *window,
        values,
    })
}

/// `delta_hat[k] = mean_i (Y_{i,t0+1+k} - Y_hat_{i,t0+1+k})`.
pub fn estimate_effect(
    panel: &PanelSeries,
    cf: &CounterfactualPanel,
    window: &EventWindow,
) -> Result<TreatmentEffectEstimate> {
    if cf.window != *window {
        return Err(Error::DimensionMismatch(
            "counterfactual was forecast for a different window".into(),
        ));
    }
    if cf.values.dim() != (panel.n_series(), window.d()) {
        return Err(Error::DimensionMismatch(format!(
            "counterfactual is {:?}, expected ({}, {})",
            cf.values.dim(),
            panel.n_series(),
            window.d()
        )));
    }
    window.check_fits(panel.last_index())?;
    let n = panel.n_series() as f64;
    let delta_hat = (0..window.d())
        .map(|k| {
            let t = window.first() + k;
            let diff: f64 = panel
                .values()
                .column(t)
                .iter()
                .zip(cf.values.column(k).iter())
                .map(|(y, c)| y - c)
                .sum();
            diff / n
        })
        .collect();
    Ok(TreatmentEffectEstimate {
        window: *window,
        delta_hat,
        n_series: panel.n_series(),
        covariance: None,
        variance_mode: None,
    })
}

/// `sigma^2 * sum_{j<steps} phi^{2j}`, the forecast-error variance after
/// `steps` recursive steps.
pub fn finite_horizon_variance(phi: f64, sigma2: f64, steps: usize) -> f64 {
    let phi2 = phi * phi;
    if phi2 < 1.0 {
        sigma2 * (1.0 - phi2.powi(steps as i32)) / (1.0 - phi2)
    } else {
        sigma2 * (0..steps).map(|j| phi2.powi(j as i32)).sum::<f64>()
    }
}

/// Diagonal covariance of `delta_hat` for a window of size `d`.
pub fn effect_covariance(
    fit: &ARModelFit,
    window: &EventWindow,
    n_series: usize,
    mode: VarianceMode,
) -> Result<Array2<f64>> {
    if n_series < 1 {
        return Err(Error::Validation("n_series must be >= 1".into()));
    }
    let phi = fit.phi_hat;
    let n = n_series as f64;
    let d = window.d();
    let mut cov = Array2::<f64>::zeros((d, d));
    match mode {
        VarianceMode::AsymptoticDiagonal => {
            if phi.abs() >= 1.0 {
                return Err(Error::NonstationaryFit(phi.abs()));
            }
            let v = fit.sigma2_hat / ((1.0 - phi * phi) * n);
            cov.diag_mut().fill(v);
        }
        VarianceMode::FiniteHorizon => {
            for k in 0..d {
                cov[[k, k]] = finite_horizon_variance(phi, fit.sigma2_hat, k + 1) / n;
            }
        }
    }
    Ok(cov)
}

/// Two-sided standard-normal quantile `z_{(1+level)/2}`.
pub fn normal_quantile_two_sided(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let std = Normal::standard();
    Ok(std.inverse_cdf(0.5 + level / 2.0))
}

/// Gaussian intervals `delta_hat[k] +- z * sqrt(cov[k][k])`.
pub fn confidence_intervals(
    estimate: &TreatmentEffectEstimate,
    covariance: &Array2<f64>,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    let z = normal_quantile_two_sided(level)?;
    let d = estimate.delta_hat.len();
    if covariance.dim() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {:?} for {d} effects",
            covariance.dim()
        )));
    }
    estimate
        .delta_hat
        .iter()
        .enumerate()
        .map(|(k, &dh)| {
            let v = covariance[[k, k]];
            if !(v >= 0.0) {
                return Err(Error::Validation(format!("negative variance {v} at step {k}")));
            }
            let half = z * v.sqrt();
            Ok((dh - half, dh + half))
        })
        .collect()
}

/// Fit, forecast and estimate in one call, with finite-horizon or
/// asymptotic covariance attached.
pub fn estimate_ar1_effect(
    panel: &PanelSeries,
    window: &EventWindow,
    mode: VarianceMode,
) -> Result<(ARModelFit, TreatmentEffectEstimate)> {
    window.check_fits(panel.last_index())?;
    let fit = fit_ar1_ols(panel, window.t0())?;
    let cf = forecast_counterfactual(&fit, panel, window)?;
    let est = estimate_effect(panel, &cf, window)?;
    let cov = effect_covariance(&fit, window, panel.n_series(), mode)?;
    Ok((fit, est.with_covariance(cov, mode)))
}
