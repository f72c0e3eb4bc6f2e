//! Panel time series, rare-event windows and the synthetic AR(1) generator.
//!
//! A panel holds `N` series observed on a shared index `t = 0..=T`. Event
//! windows are the contiguous index sets `{t0+1, ..., t0+d}`; observations at
//! `0..=t0` are pre-event.
//!
//! Simulation draws from [`ChaCha8Rng`] seeded with [`SeedableRng::seed_from_u64`]
//! and converts to Gaussians with the ziggurat sampler of
//! [`rand_distr::StandardNormal`]. Given the same crate versions the output is
//! bit-identical across platforms.

use chrono::NaiveDate;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// How `Y_0` is drawn for each simulated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialMode {
    /// Every series starts at the given value.
    Fixed(f64),
    /// `Y_0 ~ Normal(0, sigma^2 / (1 - phi^2))`, the stationary law.
    StationaryDraw,
}

impl Default for InitialMode {
    fn default() -> Self {
        InitialMode::StationaryDraw
    }
}

/// Parameters of a zero-mean Gaussian AR(1) process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ARProcessSpec {
    phi: f64,
    sigma: f64,
    initial: InitialMode,
}

impl ARProcessSpec {
    /// Validates `|phi| < 1` and `sigma >= 0`.
    ///
    /// `sigma = 0` is accepted: it yields the deterministic recursion
    /// `Y_t = phi * Y_{t-1}`, which the exactness checks rely on.
    pub fn new(phi: f64, sigma: f64, initial: InitialMode) -> Result<Self> {
        if !phi.is_finite() || phi.abs() >= 1.0 {
            return Err(Error::Validation(format!(
                "autoregressive coefficient must satisfy |phi| < 1, got {phi}"
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Validation(format!(
                "innovation sd must be finite and non-negative, got {sigma}"
            )));
        }
        if let InitialMode::Fixed(v) = initial {
            if !v.is_finite() {
                return Err(Error::Validation(format!("initial value {v} is not finite")));
            }
        }
        Ok(Self { phi, sigma, initial })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial(&self) -> InitialMode {
        self.initial
    }
}

/// Labels for the time axis of a panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeIndex {
    Integer(Vec<i64>),
    Dates(Vec<NaiveDate>),
}

impl TimeIndex {
    /// `0, 1, ..., len-1`.
    pub fn range(len: usize) -> Self {
        TimeIndex::Integer((0..len as i64).collect())
    }

    /// `len` consecutive days starting at `start`.
    pub fn daily(start: NaiveDate, len: usize) -> Self {
        TimeIndex::Dates(start.iter_days().take(len).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            TimeIndex::Integer(v) => v.len(),
            TimeIndex::Dates(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        match self {
            TimeIndex::Dates(d) => Some(d),
            TimeIndex::Integer(_) => None,
        }
    }

    /// Position of `date` on a date index.
    pub fn position_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates()?.binary_search(&date).ok()
    }

    /// Human-readable label for position `t`.
    pub fn label(&self, t: usize) -> String {
        match self {
            TimeIndex::Integer(v) => v[t].to_string(),
            TimeIndex::Dates(v) => v[t].format("%Y-%m-%d").to_string(),
        }
    }

    fn strictly_increasing(&self) -> bool {
        match self {
            TimeIndex::Integer(v) => v.windows(2).all(|w| w[0] < w[1]),
            TimeIndex::Dates(v) => v.windows(2).all(|w| w[0] < w[1]),
        }
    }
}

/// `N` series observed on a shared time index `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    values: Array2<f64>,
    time_index: TimeIndex,
    series_ids: Vec<String>,
}

impl PanelSeries {
    /// Builds a panel with series ids `"0", "1", ...`.
    pub fn new(values: Array2<f64>, time_index: TimeIndex) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::with_ids(values, time_index, ids)
    }

    pub fn with_ids(
        values: Array2<f64>,
        time_index: TimeIndex,
        series_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, cols) = values.dim();
        if n < 1 || cols < 2 {
            return Err(Error::Validation(format!(
                "panel needs at least 1 series and 2 time points, got {n}x{cols}"
            )));
        }
        if time_index.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "time index has {} labels for {cols} columns",
                time_index.len()
            )));
        }
        if series_ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} series ids for {n} rows",
                series_ids.len()
            )));
        }
        if !time_index.strictly_increasing() {
            return Err(Error::Validation("time index must be strictly increasing".into()));
        }
        if let Some((pos, v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {v} at series {}, time {}",
                pos.0, pos.1
            )));
        }
        Ok(Self {
            values,
            time_index,
            series_ids,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn time_index(&self) -> &TimeIndex {
        &self.time_index
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    /// Number of columns, `T + 1`.
    pub fn n_times(&self) -> usize {
        self.values.ncols()
    }

    /// Last time index `T`.
    pub fn last_index(&self) -> usize {
        self.n_times() - 1
    }

    /// Row `i` as an owned vector.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    /// Cross-sectional mean at every time index.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_series() as f64;
        self.values
            .columns()
            .into_iter()
            .map(|c| c.sum() / n)
            .collect()
    }
}

/// The rare-event window `{t0+1, ..., t0+d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventWindow {
    t0: usize,
    d: usize,
}

impl EventWindow {
    pub fn new(t0: usize, d: usize) -> Result<Self> {
        if t0 < 1 {
            return Err(Error::Validation("window needs t0 >= 1".into()));
        }
        if d < 1 {
            return Err(Error::Validation("window size d must be >= 1".into()));
        }
        Ok(Self { t0, d })
    }

    /// Last pre-event index.
    pub fn t0(&self) -> usize {
        self.t0
    }

    /// Window size.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn first(&self) -> usize {
        self.t0 + 1
    }

    pub fn last(&self) -> usize {
        self.t0 + self.d
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first()..=self.last()
    }

    pub fn contains(&self, t: usize) -> bool {
        t > self.t0 && t <= self.t0 + self.d
    }

    /// Errors unless `t0 + d <= last_index`.
    pub fn check_fits(&self, last_index: usize) -> Result<()> {
        if self.last() > last_index {
            return Err(Error::Bounds(format!(
                "window {}..={} exceeds last time index {last_index}",
                self.first(),
                self.last()
            )));
        }
        Ok(())
    }

    fn overlaps(&self, other: &EventWindow) -> bool {
        self.first() <= other.last() && other.first() <= self.last()
    }
}

/// All occurrences of one recurring event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub name: String,
    pub occurrences: Vec<EventWindow>,
}

/// Named recurring events, each with non-overlapping occurrences sorted by `t0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventCalendar {
    events: Vec<Event>,
}

impl EventCalendar {
    /// Sorts each event's occurrences and rejects overlaps within an event.
    pub fn new(events: Vec<(String, Vec<EventWindow>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(events.len());
        for (name, mut occ) in events {
            occ.sort();
            if let Some(w) = occ.windows(2).find(|w| w[0].overlaps(&w[1])) {
                return Err(Error::Overlap {
                    event: name,
                    first: w[0].first().to_string(),
                    second: w[1].first().to_string(),
                });
            }
            out.push(Event {
                name,
                occurrences: occ,
            });
        }
        Ok(Self { events: out })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, name: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.name == name)
    }

    /// True when `t` lies in any occurrence of any event.
    pub fn contains(&self, t: usize) -> bool {
        self.events
            .iter()
            .any(|e| e.occurrences.iter().any(|w| w.contains(t)))
    }

    pub fn windows(&self) -> impl Iterator<Item = &EventWindow> {
        self.events.iter().flat_map(|e| e.occurrences.iter())
    }
}

/// Per-step additive treatment effects over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectVector {
    delta: Vec<f64>,
}

impl EffectVector {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.is_empty() {
            return Err(Error::Validation("effect vector is empty".into()));
        }
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("effect vector has non-finite entries".into()));
        }
        Ok(Self { delta })
    }

    pub fn zeros(d: usize) -> Self {
        Self { delta: vec![0.0; d] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.delta
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// Simulates `n_series` independent AR(1) paths over `t = 0..=horizon`.
///
/// Series are generated one after another from a single stream, so the
/// result is a pure function of `(spec, n_series, horizon, seed)`.
pub fn simulate_ar1_panel(
    spec: &ARProcessSpec,
    n_series: usize,
    horizon: usize,
    seed: u64,
) -> Result<PanelSeries> {
    if n_series < 1 || horizon < 1 {
        return Err(Error::Validation(format!(
            "need n_series >= 1 and horizon >= 1, got {n_series} and {horizon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::<f64>::zeros((n_series, horizon + 1));
    fill_ar1(spec, &mut values, &mut rng);
    PanelSeries::new(values, TimeIndex::range(horizon + 1))
}

/// Fills every row of `values` with an AR(1) path drawn from `rng`.
pub(crate) fn fill_ar1<R: Rng + ?Sized>(spec: &ARProcessSpec, values: &mut Array2<f64>, rng: &mut R) {
    let stationary_sd = stationary_variance(spec).sqrt();
    for mut row in values.rows_mut() {
        let mut y = match spec.initial {
            InitialMode::Fixed(v) => v,
            InitialMode::StationaryDraw => {
                let z: f64 = rng.sample(StandardNormal);
                stationary_sd * z
            }
        };
        row[0] = y;
        for cell in row.iter_mut().skip(1) {
            let z: f64 = rng.sample(StandardNormal);
            y = spec.phi * y + spec.sigma * z;
            *cell = y;
        }
    }
}

fn check_treatment(panel: &PanelSeries, window: &EventWindow, delta: &EffectVector) -> Result<()> {
    window.check_fits(panel.last_index())?;
    if delta.len() != window.d() {
        return Err(Error::Validation(format!(
            "effect vector has {} entries for a window of {}",
            delta.len(),
            window.d()
        )));
    }
    Ok(())
}

/// Adds `delta[k]` to every series at `t0 + 1 + k`.
pub fn inject_treatment(
    panel: &PanelSeries,
    window: &EventWindow,
    delta: &EffectVector,
) -> Result<PanelSeries> {
    check_treatment(panel, window, delta)?;
    let mut out = panel.clone();
    for (k, &dk) in delta.as_slice().iter().enumerate() {
        out.values.column_mut(window.first() + k).mapv_inplace(|v| v + dk);
    }
    Ok(out)
}

/// Subtracts `delta[k]` from every series at `t0 + 1 + k`; inverse of
/// [`inject_treatment`] whenever the sums are exactly representable.
pub fn remove_treatment(
    panel: &PanelSeries,
    window: &EventWindow,
    delta: &EffectVector,
) -> Result<PanelSeries> {
    check_treatment(panel, window, delta)?;
    let mut out = panel.clone();
    for (k, &dk) in delta.as_slice().iter().enumerate() {
        out.values.column_mut(window.first() + k).mapv_inplace(|v| v - dk);
    }
    Ok(out)
}

/// `sigma^2 / (1 - phi^2)`.
pub fn stationary_variance(spec: &ARProcessSpec) -> f64 {
    spec.sigma * spec.sigma / (1.0 - spec.phi * spec.phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(phi: f64, sigma: f64, init: InitialMode) -> ARProcessSpec {
        ARProcessSpec::new(phi, sigma, init).unwrap()
    }

    #[test]
    fn noiseless_recursion() {
        let p = simulate_ar1_panel(&spec(0.5, 0.0, InitialMode::Fixed(4.0)), 1, 3, 1).unwrap();
        assert_eq!(p.series(0), vec![4.0, 2.0, 1.0, 0.5]);
    }

    #[test]
    fn stationary_draw_variance() {
        let s = spec(0.6, 1.0, InitialMode::StationaryDraw);
        let p = simulate_ar1_panel(&s, 20_000, 1, 11).unwrap();
        let col = p.values().column(0);
        let mean = col.mean().unwrap();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        assert!((var / 1.5625 - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn same_seed_same_panel() {
        let s = spec(0.3, 2.0, InitialMode::StationaryDraw);
        let a = simulate_ar1_panel(&s, 5, 40, 99).unwrap();
        let b = simulate_ar1_panel(&s, 5, 40, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_ar1_panel(&s, 5, 40, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spec_validation() {
        assert!(ARProcessSpec::new(1.0, 1.0, InitialMode::StationaryDraw).is_err());
        assert!(ARProcessSpec::new(-1.2, 1.0, InitialMode::StationaryDraw).is_err());
        assert!(ARProcessSpec::new(0.2, -1.0, InitialMode::StationaryDraw).is_err());
        assert!(ARProcessSpec::new(f64::NAN, 1.0, InitialMode::StationaryDraw).is_err());
        let s = spec(0.2, 1.0, InitialMode::StationaryDraw);
        assert!(simulate_ar1_panel(&s, 0, 10, 1).is_err());
        assert!(simulate_ar1_panel(&s, 1, 0, 1).is_err());
    }

    #[test]
    fn stationary_variance_examples() {
        assert_eq!(stationary_variance(&spec(0.0, 1.0, InitialMode::StationaryDraw)), 1.0);
        assert_eq!(
            stationary_variance(&spec(0.5, 0.75f64.sqrt(), InitialMode::StationaryDraw)),
            0.75f64.sqrt().powi(2) / 0.75
        );
        assert!((stationary_variance(&spec(0.5, 0.75f64.sqrt(), InitialMode::StationaryDraw)) - 1.0).abs() < 1e-15);
        assert!((stationary_variance(&spec(0.6, 1.0, InitialMode::StationaryDraw)) - 1.5625).abs() < 1e-15);
    }

    #[test]
    fn inject_into_zeros() {
        let p = PanelSeries::new(Array2::zeros((2, 5)), TimeIndex::range(5)).unwrap();
        let w = EventWindow::new(2, 2).unwrap();
        let out = inject_treatment(&p, &w, &EffectVector::new(vec![1.0, -1.0]).unwrap()).unwrap();
        for i in 0..2 {
            assert_eq!(out.series(i), vec![0.0, 0.0, 0.0, 1.0, -1.0]);
        }
        assert_eq!(p.values().sum(), 0.0);
        let same = inject_treatment(&p, &w, &EffectVector::zeros(2)).unwrap();
        assert_eq!(same, p);
        assert_eq!(remove_treatment(&out, &w, &EffectVector::new(vec![1.0, -1.0]).unwrap()).unwrap(), p);
    }

    #[test]
    fn inject_errors() {
        let p = PanelSeries::new(Array2::zeros((1, 5)), TimeIndex::range(5)).unwrap();
        let w = EventWindow::new(3, 2).unwrap();
        assert!(matches!(
            inject_treatment(&p, &w, &EffectVector::zeros(2)),
            Err(Error::Bounds(_))
        ));
        let w = EventWindow::new(1, 2).unwrap();
        assert!(matches!(
            inject_treatment(&p, &w, &EffectVector::zeros(3)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn calendar_sorts_and_rejects_overlap() {
        let w = |t0| EventWindow::new(t0, 3).unwrap();
        let cal = EventCalendar::new(vec![("x".into(), vec![w(20), w(5)])]).unwrap();
        assert_eq!(cal.events()[0].occurrences, vec![w(5), w(20)]);
        assert!(cal.contains(6) && cal.contains(8) && !cal.contains(9) && !cal.contains(5));
        assert!(matches!(
            EventCalendar::new(vec![("x".into(), vec![w(5), w(7)])]),
            Err(Error::Overlap { .. })
        ));
    }

    #[test]
    fn panel_rejects_bad_input() {
        let mut v = Array2::zeros((1, 3));
        v[[0, 1]] = f64::NAN;
        assert!(PanelSeries::new(v, TimeIndex::range(3)).is_err());
        assert!(PanelSeries::new(Array2::zeros((1, 3)), TimeIndex::Integer(vec![0, 2, 1])).is_err());
        assert!(PanelSeries::new(Array2::zeros((1, 3)), TimeIndex::range(4)).is_err());
    }
}
