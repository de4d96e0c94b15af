//! Threshold statistics over unit-level daily series.
//!
//! Thresholds apply to the aggregated unit series (aggregate first,
//! threshold second). Exceedance is strict: a day equal to the threshold
//! is neither above nor below it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::{Measure, UnitTable};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::time::{Frequency, TimeAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Count days beyond a fixed value.
    Absolute,
    /// Count days beyond a per-unit percentile of the baseline record.
    Relative,
    /// Sum the residuals beyond a fixed value.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

impl Direction {
    #[inline]
    fn exceeds(&self, x: f64, threshold: f64) -> bool {
        match self {
            Direction::Above => x > threshold,
            Direction::Below => x < threshold,
        }
    }

    #[inline]
    fn residual(&self, x: f64, threshold: f64) -> f64 {
        match self {
            Direction::Above => (x - threshold).max(0.0),
            Direction::Below => (threshold - x).max(0.0),
        }
    }
}

macro_rules! lowercase_enum_str {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Validation(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

lowercase_enum_str!(ThresholdMode { Absolute => "absolute", Relative => "relative", Cumulative => "cumulative" });
lowercase_enum_str!(Direction { Above => "above", Below => "below" });

/// Reporting period of threshold statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatPeriod {
    Monthly,
    Annual,
}

lowercase_enum_str!(StatPeriod { Monthly => "monthly", Annual => "annual" });

impl StatPeriod {
    pub fn frequency(&self) -> Frequency {
        match self {
            StatPeriod::Monthly => Frequency::Monthly,
            StatPeriod::Annual => Frequency::Annual,
        }
    }
}

/// A threshold query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub mode: ThresholdMode,
    pub direction: Direction,
    /// Threshold in variable units (absolute, cumulative) or percentile in
    /// (0, 100) (relative).
    pub value: f64,
    /// Inclusive baseline years for the relative distribution; defaults to
    /// the whole record.
    #[serde(default)]
    pub baseline: Option<(i32, i32)>,
    pub period: StatPeriod,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.value.is_finite() {
            return Err(Error::Validation("threshold value must be finite".into()));
        }
        if self.mode == ThresholdMode::Relative && !(self.value > 0.0 && self.value < 100.0) {
            return Err(Error::Validation(format!(
                "percentile must lie strictly between 0 and 100, got {}",
                self.value
            )));
        }
        if let Some((from, to)) = self.baseline {
            if to < from {
                return Err(Error::Validation(format!(
                    "baseline {from}..={to} is empty"
                )));
            }
        }
        Ok(())
    }

    pub fn measure(&self) -> Measure {
        match self.mode {
            ThresholdMode::Cumulative => Measure::CumulativeExceedance,
            _ => Measure::ExceedanceCount,
        }
    }
}

/// Percentile `p` of the non-missing history, interpolating linearly between
/// closest ranks: with sorted values `v`, `h = (n − 1)·p/100` and the result is
/// `v[⌊h⌋] + (h − ⌊h⌋)(v[⌊h⌋+1] − v[⌊h⌋])`.
///
/// Returns `Ok(None)` when fewer than two values are present.
pub fn relative_threshold(history: &[Option<f64>], p: f64) -> Result<Option<f64>> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::Validation(format!(
            "percentile must lie strictly between 0 and 100, got {p}"
        )));
    }
    let mut v: Vec<f64> = history.iter().flatten().copied().collect();
    if v.len() < 2 {
        return Ok(None);
    }
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= v.len() {
        return Ok(Some(v[lo]));
    }
    Ok(Some(v[lo] + frac * (v[lo + 1] - v[lo])))
}

fn period_windows(
    axis: &TimeAxis,
    period: StatPeriod,
) -> Result<(TimeAxis, Vec<std::ops::Range<usize>>)> {
    if axis.frequency() != Frequency::Daily {
        return Err(Error::Frequency(format!(
            "threshold statistics need daily input, got {}",
            axis.frequency()
        )));
    }
    axis.windows(period.frequency())
}

/// Per-period number of non-missing days strictly beyond `threshold`.
/// A period with no data is missing.
pub fn exceedance_count(
    axis: &TimeAxis,
    series: &[Option<f64>],
    threshold: f64,
    direction: Direction,
    period: StatPeriod,
) -> Result<(TimeAxis, Vec<Option<f64>>)> {
    let (out_axis, windows) = period_windows(axis, period)?;
    let counts = windows
        .iter()
        .map(|w| {
            let days = &series[w.clone()];
            if days.iter().all(Option::is_none) {
                return None;
            }
            let n = days
                .iter()
                .flatten()
                .filter(|&&x| direction.exceeds(x, threshold))
                .count();
            Some(n as f64)
        })
        .collect();
    Ok((out_axis, counts))
}

/// Per-period sum of residuals beyond `threshold` over non-missing days.
pub fn cumulative_exceedance(
    axis: &TimeAxis,
    series: &[Option<f64>],
    threshold: f64,
    direction: Direction,
    period: StatPeriod,
) -> Result<(TimeAxis, Vec<Option<f64>>)> {
    let (out_axis, windows) = period_windows(axis, period)?;
    let sums = windows
        .iter()
        .map(|w| {
            let days = &series[w.clone()];
            if days.iter().all(Option::is_none) {
                return None;
            }
            let total: CompensatedSum = days
                .iter()
                .flatten()
                .map(|&x| direction.residual(x, threshold))
                .collect();
            Some(total.value())
        })
        .collect();
    Ok((out_axis, sums))
}

/// Apply a threshold query to every unit of a daily table.
pub fn apply_threshold(table: &UnitTable, spec: &ThresholdSpec) -> Result<UnitTable> {
    spec.validate()?;
    let (out_axis, _) = period_windows(&table.time, spec.period)?;
    let baseline = match spec.baseline {
        Some((from, to)) => {
            let range = table.time.year_range(from, to);
            if range.is_empty() {
                return Err(Error::Validation(format!(
                    "baseline {from}..={to} does not overlap the record"
                )));
            }
            range
        }
        None => 0..table.time.len(),
    };

    let stat = |row: &[Option<f64>]| -> Result<Vec<Option<f64>>> {
        let threshold = match spec.mode {
            ThresholdMode::Relative => relative_threshold(&row[baseline.clone()], spec.value)?,
            _ => Some(spec.value),
        };
        let Some(threshold) = threshold else {
            return Ok(vec![None; out_axis.len()]);
        };
        let (_, values) = match spec.mode {
            ThresholdMode::Cumulative => {
                cumulative_exceedance(&table.time, row, threshold, spec.direction, spec.period)?
            }
            _ => exceedance_count(&table.time, row, threshold, spec.direction, spec.period)?,
        };
        Ok(values)
    };

    let mut rows = std::collections::BTreeMap::new();
    for (unit, row) in table.rows() {
        rows.insert(unit.to_string(), stat(row)?);
    }
    Ok(UnitTable::new(table.level, out_axis, table.variable, table.scheme, rows)?
        .with_measure(spec.measure()))
}
