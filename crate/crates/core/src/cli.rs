//! Command-line front end. Every command validates its flags, runs one
//! pipeline step, writes its artifacts into `--out` and prints a one-line
//! summary.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 1 for
//! failures during computation.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ar::{
    confidence_intervals, estimate_ar1_effect, fit_ar1_ols, TreatmentEffectEstimate, VarianceMode,
};
use crate::baselines::{direct_forecast, direct_forecast_ar1, seasonal_decompose, seasonal_forecast};
use crate::error::{Error, Result};
use crate::forecaster::{
    build_panel_windows, extract_effect, extract_panel_effect, insample_forecast, train, Activation,
    AdaptiveLossConfig, Aggregation, Architecture, Distance, Optimizer, RollingWindowConfig,
    SyntheticControlSeries, TrainConfig, TrainedForecaster, WeightAdaptation,
};
use crate::impact::{evaluate_mape, predict_effect, year_scale, ImpactRatioModel, RatioAggregation, ScaleMode};
use crate::io::{
    line_plot_svg, load_calendar, load_panel_csv, read_window_forecast, write_effect_csv, write_fit_csv,
    write_loss_history, write_mape_table, write_mc_report, write_panel_csv, write_rate_report, write_ratio_model,
    write_synthetic_csv, write_window_forecast, DateCalendar, MapeRow, WindowForecastRow,
};
use crate::montecarlo::{rate_check_phi, run_replications, MCConfig, Standardization};
use crate::panel::{
    inject_treatment, simulate_ar1_panel, ARProcessSpec, EffectVector, EventCalendar, EventWindow,
    InitialMode, PanelSeries, TimeIndex,
};

#[derive(Parser, Debug)]
#[command(name = "rarefx", version, about = "Treatment effects of recurring rare events in panel time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an AR(1) panel, optionally with an injected effect.
    Simulate(SimulateArgs),
    /// Fit the pooled AR(1) coefficient on pre-event data.
    FitAr(FitArArgs),
    /// AR(1) effect estimate with confidence intervals.
    Estimate(EstimateArgs),
    /// Monte Carlo check of bias, variance, coverage and cross-covariance.
    McValidate(McArgs),
    /// Monte Carlo check of the convergence rate of the AR(1) coefficient.
    RateCheck(RateArgs),
    /// Train the forecaster with the adaptive loss.
    Train(TrainArgs),
    /// Synthetic control and effect from a trained forecaster.
    Extract(ExtractArgs),
    /// Direct-forecast baseline trained on pre-event data only.
    BaselineDf(DfArgs),
    /// Seasonal-decomposition baseline.
    BaselineSd(SdArgs),
    /// Year-normalized impact ratios and next-year prediction.
    Impact(ImpactArgs),
    /// MAPE table from window forecasts of the three methods.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct WindowArgs {
    /// Last pre-event time index.
    #[arg(long)]
    t0: Option<usize>,
    /// Window size in steps.
    #[arg(long)]
    d: Option<usize>,
    /// Event calendar `event,start_date,end_date`.
    #[arg(long)]
    calendar: Option<PathBuf>,
    /// Event name in the calendar.
    #[arg(long)]
    event: Option<String>,
    /// Year of the occurrence to use.
    #[arg(long)]
    year: Option<i32>,
}

impl WindowArgs {
    fn validate(&self) -> Result<()> {
        let by_index = self.t0.is_some() || self.d.is_some();
        let by_calendar = self.event.is_some() || self.year.is_some();
        match (by_index, by_calendar) {
            (true, true) => Err(Error::Validation("give either --t0/--d or --calendar/--event/--year".into())),
            (false, false) => Err(Error::Validation("an event window is required: --t0/--d or --calendar/--event/--year".into())),
            (true, false) if self.t0.is_none() || self.d.is_none() => {
                Err(Error::Validation("--t0 and --d go together".into()))
            }
            (false, true) if self.calendar.is_none() || self.event.is_none() || self.year.is_none() => {
                Err(Error::Validation("--calendar, --event and --year go together".into()))
            }
            _ => Ok(()),
        }
    }

    fn calendar(&self) -> Result<Option<DateCalendar>> {
        self.calendar.as_deref().map(load_calendar).transpose()
    }

    fn resolve(&self, panel: &PanelSeries) -> Result<EventWindow> {
        let w = match (self.t0, self.d) {
            (Some(t0), Some(d)) => EventWindow::new(t0, d)?,
            _ => {
                let cal = self.calendar()?.expect("validated");
                cal.occurrence(self.event.as_deref().expect("validated"), self.year.expect("validated"))?
                    .bind(panel.time_index())?
            }
        };
        w.check_fits(panel.last_index())?;
        Ok(w)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VarianceArg {
    Finite,
    Asymptotic,
}

impl From<VarianceArg> for VarianceMode {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Finite => VarianceMode::FiniteHorizon,
            VarianceArg::Asymptotic => VarianceMode::AsymptoticDiagonal,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long)]
    sigma: f64,
    /// Number of series.
    #[arg(long)]
    n: usize,
    /// Last time index; each series has `horizon + 1` values.
    #[arg(long)]
    horizon: usize,
    /// Fixed initial value; the stationary distribution is used when absent.
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<f64>,
    /// Label steps with consecutive dates from this day instead of integers.
    #[arg(long)]
    start_date: Option<NaiveDate>,
    /// Inject an effect after this index.
    #[arg(long, requires = "delta")]
    t0: Option<usize>,
    /// Effect per window step, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "t0")]
    delta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct FitArArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    t0: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = VarianceArg::Finite)]
    variance: VarianceArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StandardizationArg {
    Oracle,
    Estimated,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t0: usize,
    #[arg(long)]
    d: usize,
    /// True effect per step, comma separated; zeros when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value_t = VarianceArg::Finite)]
    variance: VarianceArg,
    #[arg(long, value_enum, default_value_t = StandardizationArg::Oracle)]
    standardization: StandardizationArg,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct RateArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    t0: usize,
    /// Panel widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "250,1000")]
    n_grid: Vec<usize>,
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ActivationArg {
    Relu,
    Tanh,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args, Debug)]
struct NetArgs {
    #[arg(long, default_value_t = 90)]
    lookback: usize,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    activation: ActivationArg,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl NetArgs {
    fn configs(&self) -> Result<(RollingWindowConfig, Architecture, TrainConfig)> {
        let windows = RollingWindowConfig::new(self.lookback, self.horizon, self.stride)?;
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Validation("hidden layer widths must be positive".into()));
        }
        let arch = Architecture {
            hidden: self.hidden.clone(),
            activation: match self.activation {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            },
        };
        let tc = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            seed: self.seed,
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::Adam,
                OptimizerArg::Sgd => Optimizer::Sgd,
            },
        };
        tc.validate()?;
        Ok((windows, arch, tc))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DistanceArg {
    Absolute,
    Squared,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AdaptArg {
    Fixed,
    ResidualInverse,
}

#[derive(Args, Debug)]
struct LossArgs {
    /// Weight on steps inside event windows.
    #[arg(long, default_value_t = 0.1)]
    w1: f64,
    /// Weight on all other steps.
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    #[arg(long, value_enum, default_value_t = DistanceArg::Absolute)]
    distance: DistanceArg,
    #[arg(long, value_enum, default_value_t = AdaptArg::Fixed)]
    adapt: AdaptArg,
    /// Residual floor for residual-inverse adaptation.
    #[arg(long, default_value_t = 1e-3)]
    floor: f64,
}

impl LossArgs {
    fn config(&self) -> Result<AdaptiveLossConfig> {
        let distance = match self.distance {
            DistanceArg::Absolute => Distance::Absolute,
            DistanceArg::Squared => Distance::Squared,
        };
        let adaptation = match self.adapt {
            AdaptArg::Fixed => WeightAdaptation::Fixed,
            AdaptArg::ResidualInverse => WeightAdaptation::ResidualInverse { floor: self.floor },
        };
        AdaptiveLossConfig::new(self.w1, self.w2, distance, adaptation)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    panel: PathBuf,
    /// Calendar whose events mark the rare steps.
    #[arg(long)]
    calendar: Option<PathBuf>,
    /// Rare window by index, for panels without dates.
    #[arg(long, requires = "d")]
    t0: Option<usize>,
    #[arg(long, requires = "t0")]
    d: Option<usize>,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    loss: LossArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AggregationArg {
    Mean,
    Median,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Median => Aggregation::Median,
        }
    }
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    panel: PathBuf,
    /// Model written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    aggregation: AggregationArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct DfArgs {
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Use the AR(1) recursion instead of the network.
    #[arg(long)]
    ar: bool,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = DistanceArg::Absolute)]
    distance: DistanceArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct SdArgs {
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Seasonal periods, comma separated; the longest carries the event.
    #[arg(long, value_delimiter = ',', default_value = "7,365")]
    periods: Vec<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScaleArg {
    PreEventMonth,
    CalendarMonth,
}

#[derive(Args, Debug)]
struct ImpactArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    calendar: PathBuf,
    #[arg(long)]
    event: String,
    /// Year to predict; earlier occurrences provide the ratios.
    #[arg(long)]
    target_year: i32,
    /// Model written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Series to analyse; required when the panel has more than one.
    #[arg(long)]
    series: Option<String>,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::PreEventMonth)]
    scale_mode: ScaleArg,
    /// How ratios of past years are combined.
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    ratio_aggregation: AggregationArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Window forecast from `impact`.
    #[arg(long)]
    ours: PathBuf,
    /// Window forecast from `baseline-df`.
    #[arg(long)]
    df: PathBuf,
    /// Window forecast from `baseline-sd`.
    #[arg(long)]
    sd: PathBuf,
    /// Event label for the table.
    #[arg(long)]
    event: String,
    #[command(flatten)]
    out: OutArg,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    2
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::FitAr(a) => fit_ar(a),
        Command::Estimate(a) => estimate(a),
        Command::McValidate(a) => mc_validate(a),
        Command::RateCheck(a) => rate_check(a),
        Command::Train(a) => train_cmd(a),
        Command::Extract(a) => extract(a),
        Command::BaselineDf(a) => baseline_df(a),
        Command::BaselineSd(a) => baseline_sd(a),
        Command::Impact(a) => impact(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn out_dir(out: &OutArg) -> Result<&Path> {
    fs::create_dir_all(&out.out).map_err(|source| Error::File {
        path: out.out.clone(),
        source,
    })?;
    Ok(&out.out)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Validation("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn simulate(a: SimulateArgs) -> Result<String> {
    let initial = a.y0.map_or(InitialMode::StationaryDraw, InitialMode::Fixed);
    let spec = ARProcessSpec::new(a.phi, a.sigma, initial)?;
    let injection = match (a.t0, &a.delta) {
        (Some(t0), Some(delta)) => Some((EventWindow::new(t0, delta.len())?, EffectVector::new(delta.clone())?)),
        _ => None,
    };
    let dir = out_dir(&a.out)?;
    let mut panel = simulate_ar1_panel(&spec, a.n, a.horizon, a.seed)?;
    let width = (a.n - 1).to_string().len();
    let ids = (0..a.n).map(|i| format!("s{i:0width$}")).collect();
    let index = match a.start_date {
        Some(d) => TimeIndex::daily(d, a.horizon + 1),
        None => TimeIndex::range(a.horizon + 1),
    };
    panel = PanelSeries::with_ids(panel.values().clone(), index, ids)?;
    if let Some((w, delta)) = &injection {
        panel = inject_treatment(&panel, w, delta)?;
    }
    let path = dir.join("panel.csv");
    write_panel_csv(&panel, &path)?;
    Ok(format!(
        "simulate: {} series x {} steps -> {}",
        panel.n_series(),
        panel.n_times(),
        path.display()
    ))
}

fn fit_ar(a: FitArArgs) -> Result<String> {
    let panel = load_panel_csv(&a.panel)?;
    let fit = fit_ar1_ols(&panel, a.t0)?;
    let dir = out_dir(&a.out)?;
    write_fit_csv(&dir.join("fit.csv"), &fit)?;
    Ok(format!(
        "fit-ar: phi_hat = {:.6}, sigma2_hat = {:.6} from {} pairs",
        fit.phi_hat, fit.sigma2_hat, fit.n_pairs
    ))
}

fn estimate(a: EstimateArgs) -> Result<String> {
    a.window.validate()?;
    crate::ar::normal_quantile_two_sided(a.level)?;
    let panel = load_panel_csv(&a.panel)?;
    let window = a.window.resolve(&panel)?;
    let (fit, est) = estimate_ar1_effect(&panel, &window, a.variance.into())?;
    let ci = confidence_intervals(&est, est.covariance.as_ref().expect("attached"), a.level)?;
    let dir = out_dir(&a.out)?;
    write_fit_csv(&dir.join("fit.csv"), &fit)?;
    write_effect_csv(&dir.join("effect.csv"), &est, Some(&ci))?;
    Ok(format!(
        "estimate: phi_hat = {:.6}, delta_hat = {}",
        fit.phi_hat,
        fmt_list(&est.delta_hat)
    ))
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn mc_validate(a: McArgs) -> Result<String> {
    let spec = ARProcessSpec::new(a.phi, a.sigma, InitialMode::StationaryDraw)?;
    let window = EventWindow::new(a.t0, a.d)?;
    let delta = match &a.delta {
        Some(v) => EffectVector::new(v.clone())?,
        None => EffectVector::zeros(a.d),
    };
    let mut cfg = MCConfig::new(spec, a.n, window, delta, a.reps, a.seed)?;
    cfg.ci_level = a.level;
    cfg.ci_variance = a.variance.into();
    cfg.standardization = match a.standardization {
        StandardizationArg::Oracle => Standardization::Oracle,
        StandardizationArg::Estimated => Standardization::Estimated,
    };
    cfg.validate()?;
    let dir = out_dir(&a.out)?;
    let report = with_threads(a.threads, || run_replications(&cfg))?;
    write_mc_report(&report, dir)?;
    let coverage: Vec<f64> = report.per_component.iter().map(|c| c.ci_coverage).collect();
    let verdict = if report.diagonal_audit.rejects_diagonal {
        "off-diagonal covariance detected; diagonal claim rejected"
    } else {
        "no significant off-diagonal covariance"
    };
    Ok(format!(
        "mc-validate: {} replications, coverage {}, {verdict}",
        report.replications,
        fmt_list(&coverage)
    ))
}

fn rate_check(a: RateArgs) -> Result<String> {
    let spec = ARProcessSpec::new(a.phi, a.sigma, InitialMode::StationaryDraw)?;
    let dir = out_dir(&a.out)?;
    let report = with_threads(a.threads, || rate_check_phi(&spec, a.t0, &a.n_grid, a.reps, a.seed))?;
    write_rate_report(&report, &dir.join("rate_report.csv"))?;
    let ratios: Vec<String> = report
        .ratios
        .iter()
        .map(|r| match r.sd_ratio {
            Some(x) => format!("{}/{}: {x:.3} (expected {:.3})", r.n_small, r.n_large, r.expected),
            None => format!("{}/{}: undefined", r.n_small, r.n_large),
        })
        .collect();
    Ok(format!("rate-check: sd ratios {}", ratios.join(", ")))
}

fn rare_calendar(panel: &PanelSeries, calendar: Option<&Path>, t0: Option<usize>, d: Option<usize>) -> Result<EventCalendar> {
    let mut events = match calendar {
        Some(p) => load_calendar(p)?.bind(panel.time_index())?.events().to_vec(),
        None => Vec::new(),
    };
    if let (Some(t0), Some(d)) = (t0, d) {
        let w = EventWindow::new(t0, d)?;
        w.check_fits(panel.last_index())?;
        events.push(crate::panel::Event {
            name: "window".into(),
            occurrences: vec![w],
        });
    }
    EventCalendar::new(events.into_iter().map(|e| (e.name, e.occurrences)).collect())
}

fn train_cmd(a: TrainArgs) -> Result<String> {
    let (windows, arch, tc) = a.net.configs()?;
    let loss = a.loss.config()?;
    let panel = load_panel_csv(&a.panel)?;
    let calendar = rare_calendar(&panel, a.calendar.as_deref(), a.t0, a.d)?;
    let samples = build_panel_windows(&panel, &windows, &calendar)?;
    let dir = out_dir(&a.out)?;
    let model = train(&samples, &arch, &loss, &tc)?;
    let mut f = std::io::BufWriter::new(crate::io::create(&dir.join("model.txt"))?);
    model.save(&mut f)?;
    f.flush()?;
    write_loss_history(&dir.join("loss_history.csv"), model.loss_history())?;
    Ok(format!(
        "train: {} samples, final loss {:.6}",
        samples.len(),
        model.loss_history().last().copied().unwrap_or(f64::NAN)
    ))
}

fn load_model(path: &Path) -> Result<TrainedForecaster> {
    TrainedForecaster::load(BufReader::new(crate::io::open(path)?))
}

fn synthetic_controls(
    model: &TrainedForecaster,
    panel: &PanelSeries,
    stride: usize,
    aggregation: Aggregation,
) -> Result<(RollingWindowConfig, Vec<SyntheticControlSeries>)> {
    let windows = RollingWindowConfig::new(model.lookback(), model.horizon(), stride)?;
    let syn = (0..panel.n_series())
        .map(|i| insample_forecast(model, i, &panel.series(i), &windows, aggregation))
        .collect::<Result<Vec<_>>>()?;
    Ok((windows, syn))
}

fn extract(a: ExtractArgs) -> Result<String> {
    a.window.validate()?;
    let panel = load_panel_csv(&a.panel)?;
    let window = a.window.resolve(&panel)?;
    let model = load_model(&a.model)?;
    let (_, syn) = synthetic_controls(&model, &panel, a.stride, a.aggregation.into())?;
    let est = extract_panel_effect(&syn, &panel, &window)?;
    let dir = out_dir(&a.out)?;
    write_synthetic_csv(&dir.join("synthetic.csv"), &panel, &syn)?;
    write_effect_csv(&dir.join("effect.csv"), &est, None)?;
    for (i, s) in syn.iter().enumerate() {
        let title = format!("{} around {}", panel.series_ids()[i], panel.time_index().label(window.first()));
        fs::write(dir.join(format!("plot_{i}.svg")), line_plot_svg(&title, &panel.series(i), s, &window))?;
    }
    Ok(format!("extract: delta_hat = {}", fmt_list(&est.delta_hat)))
}

fn window_rows(panel: &PanelSeries, window: &EventWindow, predictions: &[SyntheticControlSeries]) -> Result<Vec<WindowForecastRow>> {
    let mut rows = Vec::new();
    for (i, p) in predictions.iter().enumerate() {
        let values = p.on_window(window)?;
        for (k, (t, v)) in window.indices().zip(values).enumerate() {
            rows.push(WindowForecastRow {
                series_id: panel.series_ids()[i].clone(),
                k: k + 1,
                date: panel.time_index().label(t),
                predicted: v,
                observed: panel.values()[[i, t]],
            });
        }
    }
    Ok(rows)
}

fn effect_against(panel: &PanelSeries, window: &EventWindow, control: &[SyntheticControlSeries]) -> Result<TreatmentEffectEstimate> {
    extract_panel_effect(control, panel, window)
}

fn baseline_df(a: DfArgs) -> Result<String> {
    a.window.validate()?;
    let (windows, arch, tc) = a.net.configs()?;
    let loss = AdaptiveLossConfig {
        distance: match a.distance {
            DistanceArg::Absolute => Distance::Absolute,
            DistanceArg::Squared => Distance::Squared,
        },
        ..AdaptiveLossConfig::default()
    };
    let panel = load_panel_csv(&a.panel)?;
    let window = a.window.resolve(&panel)?;
    let forecasts = if a.ar {
        direct_forecast_ar1(&panel, &window)?
    } else {
        direct_forecast(&panel, &window, &windows, &arch, &tc, &loss)?
    };
    let rows = window_rows(&panel, &window, &forecasts)?;
    let est = effect_against(&panel, &window, &forecasts)?;
    let dir = out_dir(&a.out)?;
    write_window_forecast(&dir.join("window_forecast.csv"), &rows)?;
    write_effect_csv(&dir.join("effect.csv"), &est, None)?;
    Ok(format!("baseline-df: {} forecasts over {} steps", forecasts.len(), window.d()))
}

fn baseline_sd(a: SdArgs) -> Result<String> {
    a.window.validate()?;
    let panel = load_panel_csv(&a.panel)?;
    let window = a.window.resolve(&panel)?;
    let mut forecasts = Vec::with_capacity(panel.n_series());
    let mut effects = vec![0.0; window.d()];
    for i in 0..panel.n_series() {
        let series = panel.series(i);
        forecasts.push(seasonal_forecast(&series, &a.periods, &window)?);
        let sd = seasonal_decompose(&series, &a.periods, &window)?;
        for (e, v) in effects.iter_mut().zip(sd.event_effect(&window)?) {
            *e += v / panel.n_series() as f64;
        }
    }
    let rows = window_rows(&panel, &window, &forecasts)?;
    let est = TreatmentEffectEstimate {
        window,
        delta_hat: effects,
        n_series: panel.n_series(),
        covariance: None,
        variance_mode: None,
    };
    let dir = out_dir(&a.out)?;
    write_window_forecast(&dir.join("window_forecast.csv"), &rows)?;
    write_effect_csv(&dir.join("effect.csv"), &est, None)?;
    Ok(format!("baseline-sd: periods {:?}, seasonal effect {}", a.periods, fmt_list(&est.delta_hat)))
}

fn impact(a: ImpactArgs) -> Result<String> {
    let calendar = load_calendar(&a.calendar)?;
    let panel = load_panel_csv(&a.panel)?;
    let series_idx = match &a.series {
        Some(id) => panel
            .series_ids()
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::Validation(format!("series '{id}' not in panel")))?,
        None if panel.n_series() == 1 => 0,
        None => return Err(Error::Validation("panel has several series; pick one with --series".into())),
    };
    let occurrences = calendar
        .occurrences(&a.event)
        .ok_or_else(|| Error::Validation(format!("unknown event '{}'", a.event)))?;
    let target = calendar.occurrence(&a.event, a.target_year)?.bind(panel.time_index())?;
    let bound = calendar.bind(panel.time_index())?;
    let mode = match a.scale_mode {
        ScaleArg::PreEventMonth => ScaleMode::PreEventMonth,
        ScaleArg::CalendarMonth => ScaleMode::CalendarMonth,
    };
    let ratio_agg = match a.ratio_aggregation {
        AggregationArg::Mean => RatioAggregation::Mean,
        AggregationArg::Median => RatioAggregation::Median,
    };

    let model = load_model(&a.model)?;
    let windows = RollingWindowConfig::new(model.lookback(), model.horizon(), a.stride)?;
    let series = panel.series(series_idx);
    let syn = insample_forecast(&model, series_idx, &series, &windows, a.aggregation.into())?;

    let mut ratios = ImpactRatioModel::new(a.event.clone(), ratio_agg);
    for occ in occurrences.iter().filter(|o| o.year() < a.target_year) {
        let Ok(w) = occ.bind(panel.time_index()) else { continue };
        if w.d() != target.d() {
            return Err(Error::Validation(format!(
                "occurrence in {} lasts {} days, target lasts {}",
                occ.year(),
                w.d(),
                target.d()
            )));
        }
        let est = extract_effect(&syn, &series, &w)?;
        let scale = year_scale(&series, panel.time_index(), &w, mode, &bound)?;
        ratios.add_year(occ.year(), &est, scale)?;
    }
    if ratios.per_year.is_empty() {
        return Err(Error::Validation(format!("no occurrence of '{}' before {}", a.event, a.target_year)));
    }
    let target_scale = year_scale(&series, panel.time_index(), &target, mode, &bound)?;
    let effect = predict_effect(&ratios, target_scale)?;
    let control = syn.on_window(&target)?;
    let predicted: Vec<(usize, f64)> = target
        .indices()
        .zip(control.iter().zip(effect.as_slice()))
        .map(|(t, (c, e))| (t, c + e))
        .collect();
    let total = SyntheticControlSeries::from_points(predicted);
    let sub = PanelSeries::with_ids(
        panel.values().select(ndarray::Axis(0), &[series_idx]),
        panel.time_index().clone(),
        vec![panel.series_ids()[series_idx].clone()],
    )?;
    let rows = window_rows(&sub, &target, std::slice::from_ref(&total))?;
    let observed: Vec<f64> = rows.iter().map(|r| r.observed).collect();
    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let mape = evaluate_mape(&predicted, &observed)?;

    let dir = out_dir(&a.out)?;
    write_ratio_model(&dir.join("ratio_model.csv"), &ratios)?;
    write_window_forecast(&dir.join("window_forecast.csv"), &rows)?;
    let title = format!("{} {} {}", panel.series_ids()[series_idx], a.event, a.target_year);
    fs::write(dir.join("impact.svg"), line_plot_svg(&title, &series, &syn, &target))?;
    Ok(format!(
        "impact: {} training years, predicted effect {}, MAPE {mape:.2}%",
        ratios.per_year.len(),
        fmt_list(effect.as_slice())
    ))
}

fn evaluate(a: EvaluateArgs) -> Result<String> {
    let ours = read_window_forecast(&a.ours)?;
    let df = read_window_forecast(&a.df)?;
    let sd = read_window_forecast(&a.sd)?;
    let mut ids: Vec<String> = ours.iter().map(|r| r.series_id.clone()).collect();
    ids.dedup();
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let pick = |rows: &[WindowForecastRow], path: &Path| -> Result<Vec<WindowForecastRow>> {
            let mut out: Vec<WindowForecastRow> = rows.iter().filter(|r| r.series_id == id).cloned().collect();
            out.sort_by_key(|r| r.k);
            if out.is_empty() {
                return Err(Error::Validation(format!("{} has no rows for series '{id}'", path.display())));
            }
            Ok(out)
        };
        let o = pick(&ours, &a.ours)?;
        let observed: Vec<f64> = o.iter().map(|r| r.observed).collect();
        let mape = |rows: Vec<WindowForecastRow>, path: &Path| -> Result<f64> {
            let same = rows.len() == o.len()
                && rows.iter().zip(&o).all(|(r, s)| r.k == s.k && r.date == s.date && r.observed == s.observed);
            if !same {
                return Err(Error::Validation(format!(
                    "{} covers a different window for series '{id}' than {}",
                    path.display(),
                    a.ours.display()
                )));
            }
            let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
            evaluate_mape(&predicted, &observed)
        };
        let ours_mape = mape(o.clone(), &a.ours)?;
        let df_mape = mape(pick(&df, &a.df)?, &a.df)?;
        let sd_mape = mape(pick(&sd, &a.sd)?, &a.sd)?;
        rows.push(MapeRow {
            department: id.clone(),
            event: a.event.clone(),
            sd: sd_mape,
            df: df_mape,
            ours: ours_mape,
        });
    }
    let dir = out_dir(&a.out)?;
    write_mape_table(&dir.join("mape.csv"), &rows)?;
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: SD {:.2} DF {:.2} ours {:.2}", r.department, r.sd, r.df, r.ours))
        .collect();
    Ok(format!("evaluate: {}", parts.join("; ")))
}
