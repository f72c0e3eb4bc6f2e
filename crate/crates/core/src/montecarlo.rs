//! Replication harness for the AR(1) estimator.
//!
//! Each replication simulates a fresh panel, injects the configured effect,
//! runs the estimator and records `sqrt(N) (delta_hat - delta)`. Replications
//! run on the current rayon pool; results are gathered in replication order
//! and reduced sequentially, so a report does not depend on the thread count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::ar::{
    confidence_intervals, effect_covariance, estimate_effect, finite_horizon_variance, fit_ar1_ols,
    forecast_counterfactual, VarianceMode,
};
use crate::error::{Error, Result};
use crate::panel::{
    inject_treatment, simulate_ar1_panel, stationary_variance, ARProcessSpec, EffectVector,
    EventWindow,
};
use crate::seed::mix;

/// How `delta_hat` is standardized for the skewness and kurtosis checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// Divide by the true finite-horizon sd.
    #[default]
    Oracle,
    /// Divide by each replication's own estimated sd.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub spec: ARProcessSpec,
    pub n_series: usize,
    /// Event window; its `t0` is the last pre-event index of every panel.
    pub window: EventWindow,
    pub delta: EffectVector,
    pub replications: usize,
    pub master_seed: u64,
    pub ci_level: f64,
    pub ci_variance: VarianceMode,
    pub standardization: Standardization,
}

impl MCConfig {
    pub fn new(
        spec: ARProcessSpec,
        n_series: usize,
        window: EventWindow,
        delta: EffectVector,
        replications: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            spec,
            n_series,
            window,
            delta,
            replications,
            master_seed,
            ci_level: 0.95,
            ci_variance: VarianceMode::FiniteHorizon,
            standardization: Standardization::Oracle,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Validation("replications must be >= 1".into()));
        }
        if self.n_series < 1 {
            return Err(Error::Validation("n_series must be >= 1".into()));
        }
        if self.delta.len() != self.window.d() {
            return Err(Error::Validation(format!(
                "delta has {} entries for a window of {}",
                self.delta.len(),
                self.window.d()
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidLevel(self.ci_level));
        }
        Ok(())
    }
}

/// Summary statistics of one window step across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    /// Mean of `sqrt(N) (delta_hat_k - delta_k)`.
    pub mean_bias_scaled: f64,
    /// Sample sd of the same quantity.
    pub sd_scaled: f64,
    /// Sample variance of `sqrt(N) (delta_hat_k - delta_k)`.
    pub empirical_var_scaled: f64,
    pub theoretical_var_finite: f64,
    pub theoretical_var_asymptotic: f64,
    pub ci_coverage: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Check of the claim that the limiting covariance of `delta_hat` is diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAudit {
    pub max_abs_offdiag_empirical: f64,
    pub max_abs_offdiag_oracle: f64,
    /// Largest `|cov| / se(cov)` over off-diagonal entries.
    pub max_z: f64,
    /// True when some off-diagonal covariance differs from zero by more
    /// than three standard errors.
    pub rejects_diagonal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub replications: usize,
    pub n_series: usize,
    pub ci_level: f64,
    pub ci_variance: VarianceMode,
    pub per_component: Vec<ComponentStats>,
    pub cross_cov_scaled: Array2<f64>,
    pub cross_cov_oracle: Array2<f64>,
    pub diagonal_audit: DiagonalAudit,
    pub phi_hat_mean: f64,
    pub phi_hat_sd: f64,
    /// Standardized errors per component, in replication order.
    pub standardized: Vec<Vec<f64>>,
}

struct Replication {
    scaled_err: Vec<f64>,
    est_z: Vec<f64>,
    covered: Vec<bool>,
    phi_hat: f64,
}

fn run_one(cfg: &MCConfig, r: usize) -> Result<Replication> {
    let w = &cfg.window;
    let panel = simulate_ar1_panel(&cfg.spec, cfg.n_series, w.last(), mix(cfg.master_seed, r as u64))?;
    let treated = inject_treatment(&panel, w, &cfg.delta)?;
    let fit = fit_ar1_ols(&treated, w.t0())?;
    let cf = forecast_counterfactual(&fit, &treated, w)?;
    let est = estimate_effect(&treated, &cf, w)?;
    let cov = effect_covariance(&fit, w, cfg.n_series, cfg.ci_variance)?;
    let ci = confidence_intervals(&est, &cov, cfg.ci_level)?;
    let sqrt_n = (cfg.n_series as f64).sqrt();
    let delta = cfg.delta.as_slice();
    let d = w.d();
    let mut scaled_err = Vec::with_capacity(d);
    let mut est_z = Vec::with_capacity(d);
    let mut covered = Vec::with_capacity(d);
    for k in 0..d {
        let err = est.delta_hat[k] - delta[k];
        scaled_err.push(sqrt_n * err);
        est_z.push(err / cov[[k, k]].sqrt());
        covered.push(ci[k].0 <= delta[k] && delta[k] <= ci[k].1);
    }
    Ok(Replication {
        scaled_err,
        est_z,
        covered,
        phi_hat: fit.phi_hat,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample covariance; 0 for a single observation.
fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// Sample skewness and excess kurtosis from central moments.
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let c = x - m;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// `Cov(sqrt(N) e_k, sqrt(N) e_l)` implied by the forecast-error recursion,
/// for 0-based steps `k, l`:
/// `sigma^2 phi^{|k-l|} (1 - phi^{2 (min(k,l)+1)}) / (1 - phi^2)`.
pub fn ma_cross_covariance(phi: f64, sigma2: f64, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(k, l)| {
        let lag = k.abs_diff(l) as i32;
        phi.powi(lag) * finite_horizon_variance(phi, sigma2, k.min(l) + 1)
    })
}

/// Runs all replications and aggregates them in replication order.
pub fn run_replications(cfg: &MCConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            run_one(cfg, r).map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let d = cfg.window.d();
    let phi = cfg.spec.phi();
    let sigma2 = cfg.spec.sigma() * cfg.spec.sigma();
    let asymptotic = stationary_variance(&cfg.spec);
    let r_count = reps.len() as f64;

    let columns: Vec<Vec<f64>> = (0..d)
        .map(|k| reps.iter().map(|r| r.scaled_err[k]).collect())
        .collect();

    let mut per_component = Vec::with_capacity(d);
    let mut standardized = Vec::with_capacity(d);
    for k in 0..d {
        let col = &columns[k];
        let var = sample_cov(col, col);
        let finite = finite_horizon_variance(phi, sigma2, k + 1);
        let z: Vec<f64> = match cfg.standardization {
            Standardization::Oracle => col.iter().map(|e| e / finite.sqrt()).collect(),
            Standardization::Estimated => reps.iter().map(|r| r.est_z[k]).collect(),
        };
        let (skewness, excess_kurtosis) = skew_kurtosis(&z);
        let covered = reps.iter().filter(|r| r.covered[k]).count() as f64;
        per_component.push(ComponentStats {
            mean_bias_scaled: mean(col),
            sd_scaled: var.sqrt(),
            empirical_var_scaled: var,
            theoretical_var_finite: finite,
            theoretical_var_asymptotic: asymptotic,
            ci_coverage: covered / r_count,
            skewness,
            excess_kurtosis,
        });
        standardized.push(z);
    }

    let cross_cov_scaled =
        Array2::from_shape_fn((d, d), |(k, l)| sample_cov(&columns[k], &columns[l]));
    let cross_cov_oracle = ma_cross_covariance(phi, sigma2, d);
    let diagonal_audit = audit_diagonal(&cross_cov_scaled, &cross_cov_oracle, reps.len());

    let phis: Vec<f64> = reps.iter().map(|r| r.phi_hat).collect();
    Ok(MonteCarloReport {
        replications: reps.len(),
        n_series: cfg.n_series,
        ci_level: cfg.ci_level,
        ci_variance: cfg.ci_variance,
        per_component,
        cross_cov_scaled,
        cross_cov_oracle,
        diagonal_audit,
        phi_hat_mean: mean(&phis),
        phi_hat_sd: sample_cov(&phis, &phis).sqrt(),
        standardized,
    })
}

fn audit_diagonal(emp: &Array2<f64>, oracle: &Array2<f64>, reps: usize) -> DiagonalAudit {
    let d = emp.nrows();
    let mut audit = DiagonalAudit {
        max_abs_offdiag_empirical: 0.0,
        max_abs_offdiag_oracle: 0.0,
        max_z: 0.0,
        rejects_diagonal: false,
    };
    for k in 0..d {
        for l in (k + 1)..d {
            let c = emp[[k, l]];
            // Normal-theory standard error of a sample covariance.
            let se = ((emp[[k, k]] * emp[[l, l]] + c * c) / reps as f64).sqrt();
            let z = if se > 0.0 { c.abs() / se } else { 0.0 };
            audit.max_abs_offdiag_empirical = audit.max_abs_offdiag_empirical.max(c.abs());
            audit.max_abs_offdiag_oracle = audit.max_abs_offdiag_oracle.max(oracle[[k, l]].abs());
            audit.max_z = audit.max_z.max(z);
        }
    }
    audit.rejects_diagonal = audit.max_z > 3.0;
    audit
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityThresholds {
    pub bias_sigmas: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub coverage_tolerance: f64,
}

impl Default for NormalityThresholds {
    fn default() -> Self {
        Self {
            bias_sigmas: 3.0,
            skewness: 0.15,
            excess_kurtosis: 0.3,
            coverage_tolerance: 0.015,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentFlags {
    pub bias_ok: bool,
    pub skewness_ok: bool,
    pub kurtosis_ok: bool,
    pub coverage_ok: bool,
}

impl ComponentFlags {
    pub fn all(&self) -> bool {
        self.bias_ok && self.skewness_ok && self.kurtosis_ok && self.coverage_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityDiagnostics {
    pub components: Vec<ComponentFlags>,
}

impl NormalityDiagnostics {
    pub fn all_pass(&self) -> bool {
        self.components.iter().all(ComponentFlags::all)
    }
}

/// Flags bias, shape and coverage departures from the Gaussian limit.
pub fn check_normality(
    report: &MonteCarloReport,
    thresholds: &NormalityThresholds,
) -> Result<NormalityDiagnostics> {
    const MIN_REPS: usize = 500;
    if report.replications < MIN_REPS {
        return Err(Error::InsufficientData {
            needed: MIN_REPS,
            got: report.replications,
        });
    }
    let root_r = (report.replications as f64).sqrt();
    let components = report
        .per_component
        .iter()
        .map(|c| ComponentFlags {
            bias_ok: c.mean_bias_scaled.abs() < thresholds.bias_sigmas * c.sd_scaled / root_r,
            skewness_ok: c.skewness.abs() < thresholds.skewness,
            kurtosis_ok: c.excess_kurtosis.abs() < thresholds.excess_kurtosis,
            coverage_ok: (c.ci_coverage - report.ci_level).abs() <= thresholds.coverage_tolerance,
        })
        .collect();
    Ok(NormalityDiagnostics { components })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n_series: usize,
    pub phi_hat_mean: f64,
    pub phi_hat_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRatio {
    pub n_small: usize,
    pub n_large: usize,
    /// `sd(n_small) / sd(n_large)`; `None` when the larger-N sd is zero.
    pub sd_ratio: Option<f64>,
    /// `sqrt(n_large / n_small)` under the root-N rate.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub ratios: Vec<RateRatio>,
}

/// Empirical sd of `phi_hat` at each panel width in `n_grid`, and the ratio
/// between consecutive widths.
pub fn rate_check_phi(
    spec: &ARProcessSpec,
    t0: usize,
    n_grid: &[usize],
    reps: usize,
    master_seed: u64,
) -> Result<RateReport> {
    if n_grid.len() < 2 {
        return Err(Error::Validation("rate check needs at least two panel widths".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 50) {
        return Err(Error::Validation(format!("panel width {n} below minimum 50")));
    }
    if reps < 2 {
        return Err(Error::InsufficientData { needed: 2, got: reps });
    }
    if t0 < 1 {
        return Err(Error::Validation("t0 must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let grid_seed = mix(master_seed, n as u64);
        let phis: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let panel = simulate_ar1_panel(spec, n, t0, mix(grid_seed, r as u64))?;
                fit_ar1_ols(&panel, t0).map(|f| f.phi_hat)
            })
            .collect::<Result<_>>()?;
        rows.push(RateRow {
            n_series: n,
            phi_hat_mean: mean(&phis),
            phi_hat_sd: sample_cov(&phis, &phis).sqrt(),
        });
    }
    let ratios = rows
        .windows(2)
        .map(|w| RateRatio {
            n_small: w[0].n_series,
            n_large: w[1].n_series,
            sd_ratio: (w[1].phi_hat_sd > 0.0).then(|| w[0].phi_hat_sd / w[1].phi_hat_sd),
            expected: (w[1].n_series as f64 / w[0].n_series as f64).sqrt(),
        })
        .collect();
    Ok(RateReport { rows, ratios })
}
