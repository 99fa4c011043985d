//! Loading arrival timestamps and selecting one weekday over `m` weeks.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chrono::Weekday;

/// Column name expected in the input CSV.
pub const TIMESTAMP_COLUMN: &str = "timestamp";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const SECONDS_PER_DAY: u32 = 86_400;

/// Parses a weekday from `mon`, `Tue`, `wednesday`, ...
pub fn parse_weekday(s: &str) -> Result<Weekday> {
    s.trim()
        .parse::<Weekday>()
        .map_err(|_| Error::InvalidArgument(format!("unknown weekday {s:?}")))
}

/// Arrival times of one weekday over `m` weeks, in hours of the day.
///
/// Each week is sorted, lies in `[0, 24)` and contains no repeated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalDataset {
    weekday: Weekday,
    weeks: Vec<Vec<f64>>,
}

/// Per-week and pooled arrival counts in one interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalCounts {
    pub per_week: Vec<usize>,
    pub total: usize,
}

impl ArrivalDataset {
    /// Builds a dataset from per-week arrival times (hours). Each week is
    /// sorted; out-of-range, non-finite or repeated times are rejected.
    pub fn new(weekday: Weekday, mut weeks: Vec<Vec<f64>>) -> Result<Self> {
        for (r, week) in weeks.iter_mut().enumerate() {
            if let Some(bad) = week.iter().find(|t| !(0.0..24.0).contains(*t)) {
                return Err(Error::Dataset(format!(
                    "week {}: time {bad} outside [0, 24)",
                    r + 1
                )));
            }
            week.sort_by(f64::total_cmp);
            if let Some(pair) = week.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Dataset(format!(
                    "week {}: repeated arrival time {}",
                    r + 1,
                    pair[0]
                )));
            }
        }
        Ok(Self { weekday, weeks })
    }

    /// An all-empty dataset with `m` weeks.
    pub fn empty(weekday: Weekday, m: usize) -> Self {
        Self {
            weekday,
            weeks: vec![Vec::new(); m],
        }
    }

    pub fn weekday(&self) -> Weekday {
        self.weekday
    }

    pub fn with_weekday(mut self, weekday: Weekday) -> Self {
        self.weekday = weekday;
        self
    }

    /// Number of weeks `m`.
    pub fn weeks(&self) -> usize {
        self.weeks.len()
    }

    pub fn week(&self, r: usize) -> &[f64] {
        &self.weeks[r]
    }

    pub fn iter_weeks(&self) -> impl Iterator<Item = &[f64]> {
        self.weeks.iter().map(Vec::as_slice)
    }

    pub fn total_arrivals(&self) -> usize {
        self.weeks.iter().map(Vec::len).sum()
    }

    /// Counts arrivals in `[a, b)` per week and pooled over weeks.
    pub fn count_in_interval(&self, a: f64, b: f64) -> Result<IntervalCounts> {
        check_interval(a, b)?;
        Ok(self.counts_unchecked(a, b))
    }

    pub(crate) fn counts_unchecked(&self, a: f64, b: f64) -> IntervalCounts {
        let per_week: Vec<usize> = self
            .weeks
            .iter()
            .map(|w| {
                let (lo, hi) = span(w, a, b);
                hi - lo
            })
            .collect();
        let total = per_week.iter().sum();
        IntervalCounts { per_week, total }
    }

    /// Arrival times in `[a, b)` pooled over all weeks, sorted.
    pub fn pooled_times(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        check_interval(a, b)?;
        Ok(self.pooled_unchecked(a, b))
    }

    pub(crate) fn pooled_unchecked(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .weeks
            .iter()
            .flat_map(|w| {
                let (lo, hi) = span(w, a, b);
                w[lo..hi].iter().copied()
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

fn span(week: &[f64], a: f64, b: f64) -> (usize, usize) {
    (week.partition_point(|&t| t < a), week.partition_point(|&t| t < b))
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a >= 0.0 && a < b && b <= 24.0 {
        Ok(())
    } else {
        Err(Error::Interval { a, b })
    }
}

/// Convenience wrapper around [`ArrivalDataset::count_in_interval`].
pub fn count_in_interval(ds: &ArrivalDataset, a: f64, b: f64) -> Result<IntervalCounts> {
    ds.count_in_interval(a, b)
}

/// Loads arrivals from a CSV file with a `timestamp` column and keeps the
/// first `m` calendar occurrences of `weekday`.
pub fn load_arrivals(path: impl AsRef<Path>, weekday: Weekday, m: usize) -> Result<ArrivalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_arrivals(file, weekday, m)
}

/// Same as [`load_arrivals`] over any reader.
pub fn read_arrivals<R: Read>(reader: R, weekday: Weekday, m: usize) -> Result<ArrivalDataset> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of weeks must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == TIMESTAMP_COLUMN)
        .ok_or_else(|| Error::Header {
            found: headers.iter().collect::<Vec<_>>().join(","),
        })?;

    // seconds since midnight per date; 86400 marks a 24:00:00 record
    let mut by_date: BTreeMap<NaiveDate, Vec<u32>> = BTreeMap::new();
    let mut first_date: Option<NaiveDate> = None;
    let mut last_date: Option<NaiveDate> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(col).unwrap_or_default();
        let (date, secs) = parse_timestamp(raw).ok_or_else(|| Error::Timestamp {
            line,
            value: raw.to_owned(),
        })?;
        first_date = Some(first_date.map_or(date, |d| d.min(date)));
        last_date = Some(last_date.map_or(date, |d| d.max(date)));
        by_date.entry(date).or_default().push(secs);
    }

    let not_enough = |found| Error::InsufficientWeeks {
        weekday: weekday.to_string(),
        requested: m,
        found,
    };
    let (Some(first_date), Some(last_date)) = (first_date, last_date) else {
        return Err(not_enough(0));
    };
    let offset = (7 + weekday.num_days_from_monday() - first_date.weekday().num_days_from_monday()) % 7;
    let first = first_date + Days::new(u64::from(offset));
    let dates: Vec<NaiveDate> = (0..m as u64)
        .map(|r| first + Days::new(7 * r))
        .take_while(|d| *d <= last_date)
        .collect();
    if dates.len() < m {
        return Err(not_enough(dates.len()));
    }

    let mut duplicates = Vec::new();
    let mut weeks = Vec::with_capacity(m);
    for date in dates {
        let mut secs = by_date.remove(&date).unwrap_or_default();
        secs.sort_unstable();
        for pair in secs.windows(2).filter(|w| w[0] == w[1]) {
            let instant = format_instant(date, pair[0]);
            if duplicates.last() != Some(&instant) {
                duplicates.push(instant);
            }
        }
        weeks.push(secs.into_iter().map(seconds_to_hours).collect());
    }
    if !duplicates.is_empty() {
        return Err(Error::DuplicateTimestamps { instants: duplicates });
    }
    ArrivalDataset::new(weekday, weeks)
}

/// Parses `YYYY-MM-DDThh:mm:ss` into a date and seconds since midnight.
/// `24:00:00` is accepted and returned as 86400 seconds of the same date.
pub fn parse_timestamp(raw: &str) -> Option<(NaiveDate, u32)> {
    let raw = raw.trim();
    if let Some(date) = raw.strip_suffix("T24:00:00") {
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
        return Some((date, SECONDS_PER_DAY));
    }
    let dt = NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT).ok()?;
    // leap seconds surface as nanosecond overflow
    if dt.nanosecond() != 0 {
        return None;
    }
    Some((dt.date(), dt.num_seconds_from_midnight()))
}

/// Seconds since midnight to fractional hours; midnight at the end of the day
/// maps to the largest value below 24.
pub fn seconds_to_hours(secs: u32) -> f64 {
    if secs >= SECONDS_PER_DAY {
        24.0_f64.next_down()
    } else {
        f64::from(secs) / 3600.0
    }
}

/// Writes the dataset in the input CSV format, week `r` on
/// `first_date + 7r` days. Times are truncated to whole seconds; arrivals
/// falling into an occupied second move to the next free one.
pub fn write_arrivals<W: std::io::Write>(ds: &ArrivalDataset, first_date: NaiveDate, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([TIMESTAMP_COLUMN])?;
    for (r, week) in ds.iter_weeks().enumerate() {
        let date = first_date + Days::new(7 * r as u64);
        let mut prev: Option<u32> = None;
        for &t in week {
            let mut secs = ((t * 3600.0).floor() as u32).min(SECONDS_PER_DAY - 1);
            if let Some(p) = prev {
                secs = secs.max(p + 1);
            }
            if secs >= SECONDS_PER_DAY {
                return Err(Error::Dataset(format!(
                    "week {}: too many arrivals at the end of the day to give each its own second",
                    r + 1
                )));
            }
            wtr.write_record([format_instant(date, secs)])?;
            prev = Some(secs);
        }
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

fn format_instant(date: NaiveDate, secs: u32) -> String {
    format!(
        "{}T{:02}:{:02}:{:02}",
        date.format("%Y-%m-%d"),
        secs / 3600,
        secs / 60 % 60,
        secs % 60
    )
}
