//! Calendar axes in the proleptic Gregorian calendar, UTC.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Hourly,
    Daily,
    Monthly,
    Annual,
}

impl Frequency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frequency::Hourly => "hourly",
            Frequency::Daily => "daily",
            Frequency::Monthly => "monthly",
            Frequency::Annual => "annual",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hourly" => Ok(Frequency::Hourly),
            "daily" => Ok(Frequency::Daily),
            "monthly" => Ok(Frequency::Monthly),
            "annual" | "yearly" => Ok(Frequency::Annual),
            other => Err(Error::Validation(format!("unknown frequency `{other}`"))),
        }
    }
}

/// One step of a time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Period {
    Hour(NaiveDateTime),
    Day(NaiveDate),
    Month { year: i32, month: u32 },
    Year(i32),
}

impl Period {
    pub fn month(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Validation(format!("month {month} outside 1..=12")));
        }
        Ok(Period::Month { year, month })
    }

    pub fn day(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(Period::Day)
            .ok_or_else(|| Error::Validation(format!("invalid date {year}-{month}-{day}")))
    }

    pub fn hour(year: i32, month: u32, day: u32, hour: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, 0, 0))
            .map(Period::Hour)
            .ok_or_else(|| Error::Validation(format!("invalid hour {year}-{month}-{day}T{hour}")))
    }

    pub fn frequency(&self) -> Frequency {
        match self {
            Period::Hour(_) => Frequency::Hourly,
            Period::Day(_) => Frequency::Daily,
            Period::Month { .. } => Frequency::Monthly,
            Period::Year(_) => Frequency::Annual,
        }
    }

    pub fn year(&self) -> i32 {
        match *self {
            Period::Hour(t) => t.year(),
            Period::Day(d) => d.year(),
            Period::Month { year, .. } => year,
            Period::Year(y) => y,
        }
    }

    /// First instant of the period.
    pub fn start(&self) -> NaiveDateTime {
        let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0).expect("midnight exists");
        match *self {
            Period::Hour(t) => t,
            Period::Day(d) => midnight(d),
            Period::Month { year, month } => {
                midnight(NaiveDate::from_ymd_opt(year, month, 1).expect("valid month"))
            }
            Period::Year(y) => midnight(NaiveDate::from_ymd_opt(y, 1, 1).expect("valid year")),
        }
    }

    pub fn next(&self) -> Period {
        match *self {
            Period::Hour(t) => Period::Hour(t + Duration::hours(1)),
            Period::Day(d) => Period::Day(d.succ_opt().expect("date in range")),
            Period::Month { year, month } if month == 12 => Period::Month {
                year: year + 1,
                month: 1,
            },
            Period::Month { year, month } => Period::Month {
                year,
                month: month + 1,
            },
            Period::Year(y) => Period::Year(y + 1),
        }
    }

    /// The period of frequency `target` containing this one.
    pub fn truncate(&self, target: Frequency) -> Result<Period> {
        if target < self.frequency() {
            return Err(Error::Frequency(format!(
                "cannot refine {} period to {}",
                self.frequency(),
                target
            )));
        }
        let t = self.start();
        Ok(match target {
            Frequency::Hourly => Period::Hour(t.date().and_hms_opt(t.hour(), 0, 0).expect("hour")),
            Frequency::Daily => Period::Day(t.date()),
            Frequency::Monthly => Period::Month {
                year: t.year(),
                month: t.month(),
            },
            Frequency::Annual => Period::Year(t.year()),
        })
    }

    /// Number of `child` steps in this period.
    pub fn count_of(&self, child: Frequency) -> usize {
        let days = |p: &Period| -> i64 { (p.next().start() - p.start()).num_days() };
        match (self.frequency(), child) {
            (a, b) if a == b => 1,
            (Frequency::Daily, Frequency::Hourly) => 24,
            (Frequency::Monthly, Frequency::Daily) | (Frequency::Annual, Frequency::Daily) => {
                days(self) as usize
            }
            (Frequency::Monthly, Frequency::Hourly) | (Frequency::Annual, Frequency::Hourly) => {
                24 * days(self) as usize
            }
            (Frequency::Annual, Frequency::Monthly) => 12,
            _ => 0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Period::Hour(t) => t.format("%Y-%m-%dT%H").to_string(),
            Period::Day(d) => d.format("%Y-%m-%d").to_string(),
            Period::Month { year, month } => format!("{year:04}-{month:02}"),
            Period::Year(y) => format!("{y:04}"),
        }
    }

    /// Parse a label produced by [`Period::label`] at a known frequency.
    pub fn parse(label: &str, frequency: Frequency) -> Result<Period> {
        let bad = || Error::Validation(format!("`{label}` is not a {frequency} period label"));
        match frequency {
            Frequency::Hourly => NaiveDateTime::parse_from_str(&format!("{label}:00"), "%Y-%m-%dT%H:%M")
                .map(Period::Hour)
                .map_err(|_| bad()),
            Frequency::Daily => NaiveDate::parse_from_str(label, "%Y-%m-%d")
                .map(Period::Day)
                .map_err(|_| bad()),
            Frequency::Monthly => {
                let (y, m) = label.split_once('-').ok_or_else(bad)?;
                let year = y.parse().map_err(|_| bad())?;
                let month = m.parse().map_err(|_| bad())?;
                Period::month(year, month).map_err(|_| bad())
            }
            Frequency::Annual => label.parse().map(Period::Year).map_err(|_| bad()),
        }
    }

    /// Infer the frequency from a label's shape and parse it.
    pub fn parse_any(label: &str) -> Result<Period> {
        let freq = match label.len() {
            13 => Frequency::Hourly,
            10 => Frequency::Daily,
            7 => Frequency::Monthly,
            _ => Frequency::Annual,
        };
        Period::parse(label, freq)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn is_leap_year(year: i32) -> bool {
    NaiveDate::from_ymd_opt(year, 2, 29).is_some()
}

pub fn days_in_year(year: i32) -> usize {
    Period::Year(year).count_of(Frequency::Daily)
}

/// A contiguous, strictly increasing sequence of periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeAxis {
    frequency: Frequency,
    start: Period,
    len: usize,
}

impl TimeAxis {
    pub fn new(start: Period, len: usize) -> Self {
        Self {
            frequency: start.frequency(),
            start,
            len,
        }
    }

    /// Every step of `frequency` from the start of `from` to the end of `to` (inclusive years).
    pub fn years(frequency: Frequency, from: i32, to: i32) -> Result<Self> {
        if to < from {
            return Err(Error::Validation(format!("empty year range {from}..={to}")));
        }
        let start = match frequency {
            Frequency::Annual => Period::Year(from),
            Frequency::Monthly => Period::Month { year: from, month: 1 },
            Frequency::Daily => Period::day(from, 1, 1)?,
            Frequency::Hourly => Period::hour(from, 1, 1, 0)?,
        };
        let len = (from..=to).map(|y| Period::Year(y).count_of(frequency)).sum();
        Ok(Self::new(start, len))
    }

    /// Build an axis from explicit periods, checking contiguity.
    pub fn from_periods(periods: &[Period]) -> Result<Self> {
        let Some(&first) = periods.first() else {
            return Err(Error::Validation("time axis needs at least one period".into()));
        };
        let mut expected = first;
        for &p in periods {
            if p != expected {
                return Err(Error::Validation(format!(
                    "time axis is not contiguous: expected {expected}, found {p}"
                )));
            }
            expected = p.next();
        }
        Ok(Self::new(first, periods.len()))
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn periods(&self) -> impl Iterator<Item = Period> + '_ {
        std::iter::successors(Some(self.start), |p| Some(p.next())).take(self.len)
    }

    pub fn period(&self, i: usize) -> Option<Period> {
        if i >= self.len {
            return None;
        }
        Some(match (self.start, self.frequency) {
            (Period::Hour(t), _) => Period::Hour(t + Duration::hours(i as i64)),
            (Period::Day(d), _) => Period::Day(d + Duration::days(i as i64)),
            (Period::Month { year, month }, _) => {
                let m0 = year as i64 * 12 + (month as i64 - 1) + i as i64;
                Period::Month {
                    year: m0.div_euclid(12) as i32,
                    month: m0.rem_euclid(12) as u32 + 1,
                }
            }
            (Period::Year(y), _) => Period::Year(y + i as i32),
        })
    }

    pub fn labels(&self) -> Vec<String> {
        self.periods().map(|p| p.label()).collect()
    }

    pub fn position(&self, period: &Period) -> Option<usize> {
        self.periods().position(|p| p == *period)
    }

    pub fn first_year(&self) -> Option<i32> {
        (self.len > 0).then(|| self.start.year())
    }

    pub fn last_year(&self) -> Option<i32> {
        self.len.checked_sub(1).and_then(|i| self.period(i)).map(|p| p.year())
    }

    /// Indices of the steps falling in years `from..=to`.
    pub fn year_range(&self, from: i32, to: i32) -> std::ops::Range<usize> {
        let mut start = None;
        let mut end = 0;
        for (i, p) in self.periods().enumerate() {
            let y = p.year();
            if y >= from && y <= to {
                start.get_or_insert(i);
                end = i + 1;
            }
        }
        match start {
            Some(s) => s..end,
            None => 0..0,
        }
    }

    /// Sub-axis for the index range `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeAxis {
        let start = self.period(range.start).unwrap_or(self.start);
        TimeAxis::new(start, range.len())
    }

    /// Partition the axis into complete windows of frequency `target`.
    ///
    /// Fails when a window at either end is incomplete.
    pub fn windows(&self, target: Frequency) -> Result<(TimeAxis, Vec<std::ops::Range<usize>>)> {
        if target <= self.frequency {
            return Err(Error::Frequency(format!(
                "cannot aggregate {} data to {}",
                self.frequency, target
            )));
        }
        let mut windows = Vec::new();
        let mut parents = Vec::new();
        let mut begin = 0;
        let mut current: Option<Period> = None;
        for (i, p) in self.periods().enumerate() {
            let parent = p.truncate(target)?;
            if current != Some(parent) {
                if let Some(prev) = current {
                    windows.push(begin..i);
                    parents.push(prev);
                }
                current = Some(parent);
                begin = i;
            }
        }
        if let Some(prev) = current {
            windows.push(begin..self.len);
            parents.push(prev);
        }
        for (parent, w) in parents.iter().zip(&windows) {
            let need = parent.count_of(self.frequency);
            if w.len() != need {
                return Err(Error::Coverage(format!(
                    "{parent} has {} of {need} {} steps",
                    w.len(),
                    self.frequency
                )));
            }
        }
        let axis = match parents.first() {
            Some(&first) => TimeAxis::new(first, parents.len()),
            None => TimeAxis::new(self.start.truncate(target)?, 0),
        };
        Ok((axis, windows))
    }
}
