use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use super::{parse_date, parse_error, read_records, DATE_FORMAT};
use crate::error::{Error, Result};
use crate::panel::{EventCalendar, EventWindow, TimeIndex};

/// One occurrence of an event in calendar dates, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DatedOccurrence {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DatedOccurrence {
    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn year(&self) -> i32 {
        self.start.year()
    }

    /// Window on `index`: `t0` is the step before `start`.
    pub fn bind(&self, index: &TimeIndex) -> Result<EventWindow> {
        let missing = |d: NaiveDate| Error::Range(format!("event date {} not in the panel's date range", d.format(DATE_FORMAT)));
        let first = index.position_of(self.start).ok_or_else(|| missing(self.start))?;
        index.position_of(self.end).ok_or_else(|| missing(self.end))?;
        if first == 0 {
            return Err(Error::Range(format!(
                "event starting {} has no pre-event step in the panel",
                self.start.format(DATE_FORMAT)
            )));
        }
        EventWindow::new(first - 1, self.days())
    }
}

/// Events keyed by name, each with sorted, non-overlapping occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DateCalendar {
    events: BTreeMap<String, Vec<DatedOccurrence>>,
}

impl DateCalendar {
    pub fn new(rows: Vec<(String, DatedOccurrence)>) -> Result<Self> {
        let mut events: BTreeMap<String, Vec<DatedOccurrence>> = BTreeMap::new();
        for (name, occ) in rows {
            if occ.end < occ.start {
                return Err(Error::Validation(format!(
                    "event '{name}' ends {} before it starts {}",
                    occ.end.format(DATE_FORMAT),
                    occ.start.format(DATE_FORMAT)
                )));
            }
            events.entry(name).or_default().push(occ);
        }
        for (name, occ) in events.iter_mut() {
            occ.sort();
            if let Some(w) = occ.windows(2).find(|w| w[1].start <= w[0].end) {
                return Err(Error::Overlap {
                    event: name.clone(),
                    first: w[0].start.format(DATE_FORMAT).to_string(),
                    second: w[1].start.format(DATE_FORMAT).to_string(),
                });
            }
        }
        Ok(Self { events })
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.events.keys().map(String::as_str)
    }

    pub fn occurrences(&self, event: &str) -> Option<&[DatedOccurrence]> {
        self.events.get(event).map(Vec::as_slice)
    }

    /// The occurrence of `event` starting in `year`.
    pub fn occurrence(&self, event: &str, year: i32) -> Result<DatedOccurrence> {
        self.occurrences(event)
            .ok_or_else(|| Error::Validation(format!("unknown event '{event}'")))?
            .iter()
            .find(|o| o.year() == year)
            .copied()
            .ok_or_else(|| Error::Validation(format!("event '{event}' has no occurrence in {year}")))
    }

    /// Resolves every occurrence against a panel's dates. Occurrences that
    /// fall outside the index are dropped.
    pub fn bind(&self, index: &TimeIndex) -> Result<EventCalendar> {
        if index.dates().is_none() {
            return Err(Error::Validation("a dated calendar needs a panel with a date index".into()));
        }
        let events = self
            .events
            .iter()
            .map(|(name, occ)| {
                let windows = occ.iter().filter_map(|o| o.bind(index).ok()).collect();
                (name.clone(), windows)
            })
            .collect();
        EventCalendar::new(events)
    }
}

/// Reads an `event,start_date,end_date` file.
pub fn load_calendar(path: &Path) -> Result<DateCalendar> {
    let records = read_records(path, &["event", "start_date", "end_date"])?;
    let mut rows = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        if rec[0].is_empty() {
            return Err(parse_error(path, *line, "empty event name"));
        }
        let start = parse_date(path, *line, &rec[1])?;
        let end = parse_date(path, *line, &rec[2])?;
        rows.push((rec[0].to_string(), DatedOccurrence { start, end }));
    }
    DateCalendar::new(rows)
}
