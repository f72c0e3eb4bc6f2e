//! File formats: long-format panel CSV, event calendars, report CSVs and
//! SVG plots.

mod calendar;
mod report;
mod svg;

pub use calendar::{load_calendar, DateCalendar, DatedOccurrence};
pub use report::{
    read_ratio_model, read_window_forecast, write_effect_csv, write_fit_csv, write_loss_history,
    write_mape_table, write_mc_report, write_rate_report, write_ratio_model, write_synthetic_csv,
    write_window_forecast, MapeRow, WindowForecastRow,
};
pub use svg::{histogram_svg, line_plot_svg};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::panel::{PanelSeries, TimeIndex};

pub(crate) const DATE_FORMAT: &str = "%Y-%m-%d";

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a CSV whose header must equal `expected`, yielding each record with
/// its 1-based line number.
pub(crate) fn read_records(path: &Path, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header = reader.headers().map_err(|e| parse_error(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            return Err(parse_error(path, line, format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub(crate) fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(path, line, format!("{what} `{field}` is not a finite number"))),
    }
}

pub(crate) fn parse_date(path: &Path, line: u64, field: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field, DATE_FORMAT)
        .map_err(|_| parse_error(path, line, format!("date `{field}` is not YYYY-MM-DD")))
}

/// Time key of one record: either an ISO date or a bare integer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Date(NaiveDate),
    Step(i64),
}

impl Key {
    fn parse(path: &Path, line: u64, field: &str) -> Result<Self> {
        if let Ok(d) = NaiveDate::parse_from_str(field, DATE_FORMAT) {
            return Ok(Key::Date(d));
        }
        field
            .parse::<i64>()
            .map(Key::Step)
            .map_err(|_| parse_error(path, line, format!("date `{field}` is neither YYYY-MM-DD nor an integer step")))
    }

    fn succ(self) -> Self {
        match self {
            Key::Date(d) => Key::Date(d.succ_opt().expect("date overflow")),
            Key::Step(s) => Key::Step(s + 1),
        }
    }

    fn label(self) -> String {
        match self {
            Key::Date(d) => d.format(DATE_FORMAT).to_string(),
            Key::Step(s) => s.to_string(),
        }
    }
}

/// Loads a long-format `series_id,date,value` file into a panel with one row
/// per series, sorted by id. Rows may come in any order. Every series must
/// cover the same gap-free daily range. Integer steps are accepted in place
/// of dates for simulated data.
pub fn load_panel_csv(path: &Path) -> Result<PanelSeries> {
    let records = read_records(path, &["series_id", "date", "value"])?;
    if records.is_empty() {
        return Err(Error::Validation(format!("{}: no data rows", path.display())));
    }
    let mut by_series: BTreeMap<String, BTreeMap<Key, f64>> = BTreeMap::new();
    let mut dated = None;
    for (line, rec) in &records {
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_error(path, *line, "empty series_id"));
        }
        let key = Key::parse(path, *line, &rec[1])?;
        let is_date = matches!(key, Key::Date(_));
        if *dated.get_or_insert(is_date) != is_date {
            return Err(parse_error(path, *line, "mixes dates and integer steps"));
        }
        let value = parse_f64(path, *line, &rec[2], "value")?;
        if by_series.entry(id.clone()).or_default().insert(key, value).is_some() {
            return Err(parse_error(path, *line, format!("duplicate entry for series '{id}' at {}", key.label())));
        }
    }

    let bounds: BTreeSet<(Key, Key)> = by_series
        .values()
        .map(|m| (*m.keys().next().unwrap(), *m.keys().next_back().unwrap()))
        .collect();
    if bounds.len() > 1 {
        let desc: Vec<String> = by_series
            .iter()
            .map(|(id, m)| {
                format!(
                    "{id}: {}..{}",
                    m.keys().next().unwrap().label(),
                    m.keys().next_back().unwrap().label()
                )
            })
            .collect();
        return Err(Error::Range(desc.join(", ")));
    }
    let (first, last) = *bounds.iter().next().unwrap();
    let mut keys = vec![first];
    while *keys.last().unwrap() < last {
        let next = keys.last().unwrap().succ();
        keys.push(next);
    }

    let n = by_series.len();
    let t = keys.len();
    let mut values = Array2::<f64>::zeros((n, t));
    for (i, (id, m)) in by_series.iter().enumerate() {
        for (j, key) in keys.iter().enumerate() {
            match m.get(key) {
                Some(&v) => values[[i, j]] = v,
                None => {
                    return Err(Error::Gap {
                        series_id: id.clone(),
                        date: key.label(),
                    })
                }
            }
        }
    }
    let index = match first {
        Key::Date(_) => TimeIndex::Dates(
            keys.iter()
                .map(|k| match k {
                    Key::Date(d) => *d,
                    Key::Step(_) => unreachable!(),
                })
                .collect(),
        ),
        Key::Step(_) => TimeIndex::Integer(
            keys.iter()
                .map(|k| match k {
                    Key::Step(s) => *s,
                    Key::Date(_) => unreachable!(),
                })
                .collect(),
        ),
    };
    PanelSeries::with_ids(values, index, by_series.into_keys().collect())
}

/// Writes a panel in the long format read by [`load_panel_csv`]. Values use
/// the shortest representation that parses back to the same float.
pub fn write_panel_csv(panel: &PanelSeries, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(create(path)?);
    writeln!(w, "series_id,date,value")?;
    for (i, id) in panel.series_ids().iter().enumerate() {
        for (t, v) in panel.values().row(i).iter().enumerate() {
            writeln!(w, "{id},{},{v}", panel.time_index().label(t))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn pivots_unsorted_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "series_id,date,value\nb,2020-01-02,5\na,2020-01-03,3\na,2020-01-01,1\nb,2020-01-01,4\na,2020-01-02,2\nb,2020-01-03,6\n",
        );
        let panel = load_panel_csv(&p).unwrap();
        assert_eq!(panel.series_ids(), &["a".to_string(), "b".to_string()]);
        assert_eq!(panel.series(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(panel.series(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(panel.time_index().label(0), "2020-01-01");
    }

    #[test]
    fn gap_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "p.csv",
            "series_id,date,value\na,2020-01-01,1\na,2020-01-02,1\na,2020-01-03,1\nb,2020-01-01,1\nb,2020-01-03,1\n",
        );
        match load_panel_csv(&p) {
            Err(Error::Gap { series_id, date }) => {
                assert_eq!(series_id, "b");
                assert_eq!(date, "2020-01-02");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_and_range_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "series_id,date,value\na,2020-01-01,1\na,2020-01-02,x\n");
        assert!(matches!(load_panel_csv(&p), Err(Error::Parse { line: 3, .. })));
        let p = write(
            &dir,
            "q.csv",
            "series_id,date,value\na,2020-01-01,1\na,2020-01-02,1\nb,2020-01-02,1\nb,2020-01-03,1\n",
        );
        assert!(matches!(load_panel_csv(&p), Err(Error::Range(_))));
        let p = write(&dir, "r.csv", "id,date,value\na,2020-01-01,1\n");
        assert!(matches!(load_panel_csv(&p), Err(Error::Parse { line: 1, .. })));
        let missing = dir.path().join("missing.csv");
        let err = load_panel_csv(&missing).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("missing.csv"));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let values = Array2::from_shape_vec((2, 3), vec![0.1, -2.5e-17, 3.0, 1e300, 7.25, -0.0]).unwrap();
        let start = NaiveDate::from_ymd_opt(2019, 12, 30).unwrap();
        let panel = PanelSeries::with_ids(values, TimeIndex::daily(start, 3), vec!["x".into(), "y".into()]).unwrap();
        let p = dir.path().join("rt.csv");
        write_panel_csv(&panel, &p).unwrap();
        assert_eq!(load_panel_csv(&p).unwrap(), panel);

        let ints = PanelSeries::new(Array2::from_elem((1, 4), 2.0), TimeIndex::range(4)).unwrap();
        write_panel_csv(&ints, &p).unwrap();
        let back = load_panel_csv(&p).unwrap();
        assert_eq!(back.values(), ints.values());
        assert_eq!(back.time_index(), ints.time_index());
    }
}
