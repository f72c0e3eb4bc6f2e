use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{create, histogram_svg, parse_error, parse_f64, read_records};
use crate::ar::{ARModelFit, TreatmentEffectEstimate};
use crate::error::{Error, Result};
use crate::forecaster::SyntheticControlSeries;
use crate::impact::{ImpactRatioModel, RatioAggregation, YearRatio};
use crate::montecarlo::{MonteCarloReport, RateReport};
use crate::panel::PanelSeries;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn finish(mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// `k,delta_hat,lower,upper`, with `k` counted from 1. Bounds are left
/// empty when no intervals are given.
pub fn write_effect_csv(path: &Path, estimate: &TreatmentEffectEstimate, intervals: Option<&[(f64, f64)]>) -> Result<()> {
    if let Some(ci) = intervals {
        if ci.len() != estimate.delta_hat.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} intervals for {} effects",
                ci.len(),
                estimate.delta_hat.len()
            )));
        }
    }
    let mut w = writer(path)?;
    w.write_record(["k", "delta_hat", "lower", "upper"])?;
    for (k, d) in estimate.delta_hat.iter().enumerate() {
        let (lo, hi) = intervals.map_or((String::new(), String::new()), |ci| (num(ci[k].0), num(ci[k].1)));
        w.write_record([(k + 1).to_string(), num(*d), lo, hi])?;
    }
    finish(w)
}

pub fn write_fit_csv(path: &Path, fit: &ARModelFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["phi_hat", "sigma2_hat", "n_pairs"])?;
    w.write_record([num(fit.phi_hat), num(fit.sigma2_hat), fit.n_pairs.to_string()])?;
    finish(w)
}

/// Writes `mc_report.csv` (one row per window step), `mc_cross_cov.csv`
/// (empirical against MA-oracle covariance of the scaled errors),
/// `mc_audit.csv` (diagonal-covariance audit) and `mc_report.svg`.
pub fn write_mc_report(report: &MonteCarloReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report_path = out_dir.join("mc_report.csv");
    let mut w = writer(&report_path)?;
    w.write_record([
        "k",
        "mean_bias_scaled",
        "sd_scaled",
        "empirical_var_scaled",
        "theoretical_var_finite",
        "theoretical_var_asymptotic",
        "ci_coverage",
        "skewness",
        "excess_kurtosis",
    ])?;
    for (k, c) in report.per_component.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            num(c.mean_bias_scaled),
            num(c.sd_scaled),
            num(c.empirical_var_scaled),
            num(c.theoretical_var_finite),
            num(c.theoretical_var_asymptotic),
            num(c.ci_coverage),
            num(c.skewness),
            num(c.excess_kurtosis),
        ])?;
    }
    finish(w)?;

    let cov_path = out_dir.join("mc_cross_cov.csv");
    let mut w = writer(&cov_path)?;
    w.write_record(["k", "l", "empirical", "ma_oracle", "diagonal_claim"])?;
    let d = report.per_component.len();
    for k in 0..d {
        for l in 0..d {
            let claim = if k == l { report.cross_cov_oracle[[k, l]] } else { 0.0 };
            w.write_record([
                (k + 1).to_string(),
                (l + 1).to_string(),
                num(report.cross_cov_scaled[[k, l]]),
                num(report.cross_cov_oracle[[k, l]]),
                num(claim),
            ])?;
        }
    }
    finish(w)?;

    let audit_path = out_dir.join("mc_audit.csv");
    let a = &report.diagonal_audit;
    let mut w = writer(&audit_path)?;
    w.write_record([
        "replications",
        "n_series",
        "ci_level",
        "phi_hat_mean",
        "phi_hat_sd",
        "max_abs_offdiag_empirical",
        "max_abs_offdiag_oracle",
        "max_z",
        "rejects_diagonal",
    ])?;
    w.write_record([
        report.replications.to_string(),
        report.n_series.to_string(),
        num(report.ci_level),
        num(report.phi_hat_mean),
        num(report.phi_hat_sd),
        num(a.max_abs_offdiag_empirical),
        num(a.max_abs_offdiag_oracle),
        num(a.max_z),
        a.rejects_diagonal.to_string(),
    ])?;
    finish(w)?;

    let svg_path = out_dir.join("mc_report.svg");
    let labels: Vec<String> = (1..=d).map(|k| format!("k = {k}")).collect();
    std::fs::write(
        &svg_path,
        histogram_svg("Standardized effect errors", &labels, &report.standardized, 40),
    )?;
    Ok(vec![report_path, cov_path, audit_path, svg_path])
}

/// `n_series,phi_hat_mean,phi_hat_sd,sd_ratio_to_next,expected_ratio`; the
/// ratio columns compare each width with the next one and are empty on the
/// last row.
pub fn write_rate_report(report: &RateReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n_series", "phi_hat_mean", "phi_hat_sd", "sd_ratio_to_next", "expected_ratio"])?;
    for (i, row) in report.rows.iter().enumerate() {
        let (ratio, expected) = match report.ratios.get(i) {
            Some(r) => (r.sd_ratio.map(num).unwrap_or_default(), num(r.expected)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            row.n_series.to_string(),
            num(row.phi_hat_mean),
            num(row.phi_hat_sd),
            ratio,
            expected,
        ])?;
    }
    finish(w)
}

/// `series_id,t,date,synthetic,overlap_count` over each series' support.
pub fn write_synthetic_csv(path: &Path, panel: &PanelSeries, synthetics: &[SyntheticControlSeries]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["series_id", "t", "date", "synthetic", "overlap_count"])?;
    for (id, syn) in panel.series_ids().iter().zip(synthetics) {
        for (&t, &v) in syn.values() {
            w.write_record([
                id.clone(),
                t.to_string(),
                panel.time_index().label(t),
                num(v),
                syn.overlap_count(t).to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "loss"])?;
    for (e, l) in history.iter().enumerate() {
        w.write_record([(e + 1).to_string(), num(*l)])?;
    }
    finish(w)
}

/// One row of the forecast-error table.
#[derive(Debug, Clone, PartialEq)]
pub struct MapeRow {
    pub department: String,
    pub event: String,
    pub sd: f64,
    pub df: f64,
    pub ours: f64,
}

/// `department,event,SD,DF,ours`, MAPE in percent.
pub fn write_mape_table(path: &Path, rows: &[MapeRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["department", "event", "SD", "DF", "ours"])?;
    for r in rows {
        w.write_record([r.department.clone(), r.event.clone(), num(r.sd), num(r.df), num(r.ours)])?;
    }
    finish(w)
}

/// `event,year,k,ratio,scale`, one row per year and step.
pub fn write_ratio_model(path: &Path, model: &ImpactRatioModel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["event", "year", "k", "ratio", "scale"])?;
    for (year, yr) in &model.per_year {
        for (k, r) in yr.ratio.iter().enumerate() {
            w.write_record([model.event_name.clone(), year.to_string(), (k + 1).to_string(), num(*r), num(yr.scale)])?;
        }
    }
    finish(w)
}

pub fn read_ratio_model(path: &Path, aggregation: RatioAggregation) -> Result<ImpactRatioModel> {
    let records = read_records(path, &["event", "year", "k", "ratio", "scale"])?;
    let mut name: Option<String> = None;
    let mut per_year: BTreeMap<i32, YearRatio> = BTreeMap::new();
    for (line, rec) in &records {
        match &name {
            None => name = Some(rec[0].to_string()),
            Some(n) if n != &rec[0] => return Err(parse_error(path, *line, "a ratio file holds a single event")),
            _ => {}
        }
        let year: i32 = rec[1].parse().map_err(|_| parse_error(path, *line, "bad year"))?;
        let k: usize = rec[2].parse().map_err(|_| parse_error(path, *line, "bad step"))?;
        let ratio = parse_f64(path, *line, &rec[3], "ratio")?;
        let scale = parse_f64(path, *line, &rec[4], "scale")?;
        let entry = per_year.entry(year).or_insert(YearRatio { ratio: Vec::new(), scale });
        if k != entry.ratio.len() + 1 || entry.scale != scale {
            return Err(parse_error(path, *line, "steps must run 1, 2, ... with one scale per year"));
        }
        entry.ratio.push(ratio);
    }
    let event_name = name.ok_or_else(|| Error::Validation(format!("{}: empty ratio file", path.display())))?;
    let mut model = ImpactRatioModel::new(event_name, aggregation);
    model.per_year = per_year;
    if model.per_year.values().any(|y| y.ratio.len() != model.per_year.values().next().unwrap().ratio.len()) {
        return Err(Error::DimensionMismatch("years have different window sizes".into()));
    }
    Ok(model)
}

/// A method's prediction of the observed series on one window step.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecastRow {
    pub series_id: String,
    pub k: usize,
    pub date: String,
    pub predicted: f64,
    pub observed: f64,
}

/// `series_id,k,date,predicted,observed`.
pub fn write_window_forecast(path: &Path, rows: &[WindowForecastRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["series_id", "k", "date", "predicted", "observed"])?;
    for r in rows {
        w.write_record([r.series_id.clone(), r.k.to_string(), r.date.clone(), num(r.predicted), num(r.observed)])?;
    }
    finish(w)
}

pub fn read_window_forecast(path: &Path) -> Result<Vec<WindowForecastRow>> {
    read_records(path, &["series_id", "k", "date", "predicted", "observed"])?
        .into_iter()
        .map(|(line, rec)| {
            Ok(WindowForecastRow {
                series_id: rec[0].to_string(),
                k: rec[1].parse().map_err(|_| parse_error(path, line, "bad step"))?,
                date: rec[2].to_string(),
                predicted: parse_f64(path, line, &rec[3], "predicted")?,
                observed: parse_f64(path, line, &rec[4], "observed")?,
            })
        })
        .collect()
}
