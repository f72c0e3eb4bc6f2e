use crate::error::{Error, Result};
use crate::panel::{EventCalendar, PanelSeries};

/// Lookback `M`, horizon `H` and stride `s` of the rolling windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollingWindowConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl Default for RollingWindowConfig {
    fn default() -> Self {
        Self {
            lookback: 90,
            horizon: 30,
            stride: 1,
        }
    }
}

impl RollingWindowConfig {
    pub fn new(lookback: usize, horizon: usize, stride: usize) -> Result<Self> {
        if lookback < 1 || horizon < 1 || stride < 1 {
            return Err(Error::Validation(format!(
                "lookback, horizon and stride must be >= 1, got {lookback}, {horizon}, {stride}"
            )));
        }
        Ok(Self {
            lookback,
            horizon,
            stride,
        })
    }

    /// Number of windows over a series of `len` points; 0 if it is too short.
    pub fn window_count(&self, len: usize) -> usize {
        let span = self.lookback + self.horizon;
        if len < span {
            0
        } else {
            (len - span) / self.stride + 1
        }
    }

    /// First label index of window `i`.
    pub fn label_start(&self, i: usize) -> usize {
        i * self.stride + self.lookback
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len < self.lookback + self.horizon {
            return Err(Error::Validation(format!(
                "series of length {len} shorter than lookback + horizon = {}",
                self.lookback + self.horizon
            )));
        }
        Ok(())
    }
}

/// One `(input, label)` pair cut from a series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Row of the panel the sample was cut from.
    pub series: usize,
    pub input: Vec<f64>,
    pub label: Vec<f64>,
    /// Absolute time index of `label[0]`.
    pub label_start: usize,
    /// `rare_mask[k]` is true when `label_start + k` lies in an event window.
    pub rare_mask: Vec<bool>,
}

impl TrainingSample {
    pub fn has_rare(&self) -> bool {
        self.rare_mask.iter().any(|&m| m)
    }
}

/// Cuts window `i` as input `[i*s, i*s+M)` and label `[i*s+M, i*s+M+H)`.
pub fn build_rolling_windows(
    series: &[f64],
    config: &RollingWindowConfig,
    calendar: &EventCalendar,
) -> Result<Vec<TrainingSample>> {
    build_series_windows(0, series, config, calendar)
}

pub(crate) fn build_series_windows(
    series_idx: usize,
    series: &[f64],
    config: &RollingWindowConfig,
    calendar: &EventCalendar,
) -> Result<Vec<TrainingSample>> {
    config.check_len(series.len())?;
    let (m, h) = (config.lookback, config.horizon);
    Ok((0..config.window_count(series.len()))
        .map(|i| {
            let start = i * config.stride;
            let label_start = start + m;
            TrainingSample {
                series: series_idx,
                input: series[start..label_start].to_vec(),
                label: series[label_start..label_start + h].to_vec(),
                label_start,
                rare_mask: (label_start..label_start + h).map(|t| calendar.contains(t)).collect(),
            }
        })
        .collect())
}

/// Windows from every row of a panel, tagged with their row index.
pub fn build_panel_windows(
    panel: &PanelSeries,
    config: &RollingWindowConfig,
    calendar: &EventCalendar,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for i in 0..panel.n_series() {
        out.extend(build_series_windows(i, &panel.series(i), config, calendar)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::EventWindow;

    fn series(n: usize) -> Vec<f64> {
        (0..n).map(|v| v as f64).collect()
    }

    #[test]
    fn window_arithmetic() {
        let cfg = RollingWindowConfig::new(4, 2, 1).unwrap();
        let s = build_rolling_windows(&series(10), &cfg, &EventCalendar::default()).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].input, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s[0].label, vec![4.0, 5.0]);
        assert_eq!(s[4].label, vec![8.0, 9.0]);
    }

    #[test]
    fn stride_consuming_series_gives_one_window() {
        let cfg = RollingWindowConfig::new(4, 2, 10 - 4 - 2 + 1).unwrap();
        let s = build_rolling_windows(&series(10), &cfg, &EventCalendar::default()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn rare_mask_from_calendar() {
        let cal = EventCalendar::new(vec![("e".into(), vec![EventWindow::new(3, 2).unwrap()])]).unwrap();
        let cfg = RollingWindowConfig::new(4, 2, 1).unwrap();
        let s = build_rolling_windows(&series(10), &cfg, &cal).unwrap();
        assert_eq!(s[0].rare_mask, vec![true, true]);
        assert_eq!(s[2].label_start, 6);
        assert_eq!(s[2].rare_mask, vec![false, false]);
        assert_eq!(s[1].rare_mask, vec![true, false]);
    }

    #[test]
    fn too_short() {
        let cfg = RollingWindowConfig::new(4, 2, 1).unwrap();
        assert!(build_rolling_windows(&series(5), &cfg, &EventCalendar::default()).is_err());
        assert!(RollingWindowConfig::new(0, 1, 1).is_err());
    }
}
