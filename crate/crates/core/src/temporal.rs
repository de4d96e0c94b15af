//! Reductions along the time axis.
//!
//! | variable         | hour → day | day → month | → year  |
//! |------------------|------------|-------------|---------|
//! | temperature_avg  | mean       | mean        | mean    |
//! | temperature_min  | min        | min         | mean    |
//! | temperature_max  | max        | max         | mean    |
//! | precipitation    | sum        | sum         | sum     |
//! | wind_gust        | max        | max         | mean    |
//! | spei             | n/a        | n/a         | refused |
//!
//! Hourly windows skip missing hours (a fully missing day is missing).
//! Monthly and annual windows are strict: any missing constituent makes
//! the whole period missing. Annual means over monthly input weight each
//! month equally; over daily input each day counts once.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::{ClimateField, UnitTable};
use crate::error::{Error, Result};
use crate::numeric::{bounded_mean, sum};
use crate::time::{Frequency, TimeAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    TemperatureAvg,
    TemperatureMin,
    TemperatureMax,
    Precipitation,
    WindGust,
    Spei,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduce {
    Mean,
    Min,
    Max,
    Sum,
}

/// How missing constituents affect a reduced window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Reduce over the present values; missing only if all are missing.
    Skip,
    /// Any missing constituent makes the result missing.
    Strict,
}

impl Reduce {
    pub fn apply(&self, values: &[Option<f64>], policy: MissingPolicy) -> Option<f64> {
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        if present.is_empty() || (policy == MissingPolicy::Strict && present.len() != values.len()) {
            return None;
        }
        Some(match self {
            Reduce::Mean => bounded_mean(&present)?,
            Reduce::Sum => sum(present),
            Reduce::Min => present.iter().copied().fold(f64::INFINITY, f64::min),
            Reduce::Max => present.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

impl VariableKind {
    pub const ALL: [VariableKind; 6] = [
        VariableKind::TemperatureAvg,
        VariableKind::TemperatureMin,
        VariableKind::TemperatureMax,
        VariableKind::Precipitation,
        VariableKind::WindGust,
        VariableKind::Spei,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VariableKind::TemperatureAvg => "temperature_avg",
            VariableKind::TemperatureMin => "temperature_min",
            VariableKind::TemperatureMax => "temperature_max",
            VariableKind::Precipitation => "precipitation",
            VariableKind::WindGust => "wind_gust",
            VariableKind::Spei => "spei",
        }
    }

    /// Canonical units.
    pub fn units(&self) -> &'static str {
        match self {
            VariableKind::TemperatureAvg
            | VariableKind::TemperatureMin
            | VariableKind::TemperatureMax => "degC",
            VariableKind::Precipitation => "mm",
            VariableKind::WindGust => "m/s",
            VariableKind::Spei => "1",
        }
    }

    /// Reduction from finer steps to a day, and from days to a month.
    pub fn daily_reduce(&self) -> Option<Reduce> {
        match self {
            VariableKind::TemperatureAvg => Some(Reduce::Mean),
            VariableKind::TemperatureMin => Some(Reduce::Min),
            VariableKind::TemperatureMax | VariableKind::WindGust => Some(Reduce::Max),
            VariableKind::Precipitation => Some(Reduce::Sum),
            VariableKind::Spei => None,
        }
    }

    /// Reduction to a year; `None` means annual values are not defined.
    pub fn annual_reduce(&self) -> Option<Reduce> {
        match self {
            VariableKind::Precipitation => Some(Reduce::Sum),
            VariableKind::Spei => None,
            _ => Some(Reduce::Mean),
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariableKind::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown variable `{s}`")))
    }
}

/// Anything with a time axis that can be coarsened.
pub trait TimeSeries: Sized {
    fn variable(&self) -> VariableKind;
    fn time(&self) -> &TimeAxis;
    fn regroup(
        &self,
        axis: TimeAxis,
        windows: &[Range<usize>],
        reduce: Reduce,
        policy: MissingPolicy,
    ) -> Self;
}

fn reduce_windows(
    series: &[Option<f64>],
    windows: &[Range<usize>],
    reduce: Reduce,
    policy: MissingPolicy,
) -> Vec<Option<f64>> {
    windows
        .iter()
        .map(|w| reduce.apply(&series[w.clone()], policy))
        .collect()
}

impl TimeSeries for ClimateField {
    fn variable(&self) -> VariableKind {
        self.variable
    }

    fn time(&self) -> &TimeAxis {
        &self.time
    }

    fn regroup(
        &self,
        axis: TimeAxis,
        windows: &[Range<usize>],
        reduce: Reduce,
        policy: MissingPolicy,
    ) -> Self {
        let n = self.grid.n_cells();
        let mut window_buf = Vec::new();
        let planes = windows
            .iter()
            .map(|w| {
                (0..n)
                    .map(|cell| {
                        window_buf.clear();
                        window_buf.extend(
                            self.planes[w.clone()]
                                .iter()
                                .map(|p| crate::grid::present(p[cell])),
                        );
                        reduce.apply(&window_buf, policy).unwrap_or(f64::NAN)
                    })
                    .collect()
            })
            .collect();
        ClimateField {
            variable: self.variable,
            source: self.source,
            grid: self.grid,
            time: axis,
            planes,
        }
    }
}

impl TimeSeries for UnitTable {
    fn variable(&self) -> VariableKind {
        self.variable
    }

    fn time(&self) -> &TimeAxis {
        &self.time
    }

    fn regroup(
        &self,
        axis: TimeAxis,
        windows: &[Range<usize>],
        reduce: Reduce,
        policy: MissingPolicy,
    ) -> Self {
        self.map_rows(axis, |row| reduce_windows(row, windows, reduce, policy))
    }
}

fn expect_frequency(axis: &TimeAxis, freq: Frequency, op: &str) -> Result<()> {
    if axis.frequency() != freq {
        return Err(Error::Frequency(format!(
            "{op} needs {freq} input, got {}",
            axis.frequency()
        )));
    }
    Ok(())
}

/// Hourly → daily, skipping missing hours.
pub fn hourly_to_daily<S: TimeSeries>(series: &S) -> Result<S> {
    expect_frequency(series.time(), Frequency::Hourly, "hourly_to_daily")?;
    let reduce = series.variable().daily_reduce().ok_or_else(|| {
        Error::UnsupportedAggregation(format!("{} has no daily reduction", series.variable()))
    })?;
    let (axis, windows) = series.time().windows(Frequency::Daily)?;
    Ok(series.regroup(axis, &windows, reduce, MissingPolicy::Skip))
}

/// Daily → monthly over complete months; any missing day makes the month missing.
pub fn daily_to_monthly<S: TimeSeries>(series: &S) -> Result<S> {
    expect_frequency(series.time(), Frequency::Daily, "daily_to_monthly")?;
    let reduce = series.variable().daily_reduce().ok_or_else(|| {
        Error::UnsupportedAggregation(format!("{} has no monthly reduction", series.variable()))
    })?;
    let (axis, windows) = series.time().windows(Frequency::Monthly)?;
    Ok(series.regroup(axis, &windows, reduce, MissingPolicy::Strict))
}

/// Daily or monthly → annual over complete calendar years.
pub fn to_annual<S: TimeSeries>(series: &S) -> Result<S> {
    let variable = series.variable();
    let reduce = variable.annual_reduce().ok_or_else(|| {
        Error::UnsupportedAggregation(format!("{variable} is only available monthly"))
    })?;
    match series.time().frequency() {
        Frequency::Daily | Frequency::Monthly => {}
        other => {
            return Err(Error::Frequency(format!(
                "to_annual needs daily or monthly input, got {other}"
            )))
        }
    }
    let (axis, windows) = series.time().windows(Frequency::Annual)?;
    Ok(series.regroup(axis, &windows, reduce, MissingPolicy::Strict))
}

/// Bring `series` to `target` frequency through the supported chain.
pub fn resample<S: TimeSeries + Clone>(series: &S, target: Frequency) -> Result<S> {
    let from = series.time().frequency();
    if from == target {
        return Ok(series.clone());
    }
    if target < from {
        return Err(Error::Frequency(format!("cannot refine {from} data to {target}")));
    }
    match (from, target) {
        (Frequency::Hourly, _) => resample(&hourly_to_daily(series)?, target),
        (Frequency::Daily, Frequency::Monthly) => daily_to_monthly(series),
        (_, Frequency::Annual) => to_annual(series),
        _ => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Source;
    use crate::boundaries::AdminLevel;
    use crate::grid::GridSpec;
    use crate::time::Period;
    use crate::weights::WeightScheme;
    use std::collections::BTreeMap;

    fn table(var: VariableKind, start: Period, row: Vec<Option<f64>>) -> UnitTable {
        let axis = TimeAxis::new(start, row.len());
        UnitTable::new(
            AdminLevel::Gadm0,
            axis,
            var,
            WeightScheme::unweighted(),
            BTreeMap::from([("A".to_string(), row)]),
        )
        .unwrap()
    }

    fn field(var: VariableKind, start: Period, values: Vec<f64>) -> ClimateField {
        let grid = GridSpec::new(0.0, 0.0, 1.0, 1, 1).unwrap();
        let axis = TimeAxis::new(start, values.len());
        ClimateField::new(var, Source::Synthetic, grid, axis, values.into_iter().map(|v| vec![v]).collect()).unwrap()
    }

    fn day0() -> Period {
        Period::hour(2001, 7, 1, 0).unwrap()
    }

    #[test]
    fn variable_semantics() {
        use VariableKind::*;
        assert_eq!(Precipitation.daily_reduce(), Some(Reduce::Sum));
        assert_eq!(Precipitation.annual_reduce(), Some(Reduce::Sum));
        assert_eq!(TemperatureMin.daily_reduce(), Some(Reduce::Min));
        assert_eq!(TemperatureMax.annual_reduce(), Some(Reduce::Mean));
        assert_eq!(WindGust.daily_reduce(), Some(Reduce::Max));
        assert_eq!(Spei.annual_reduce(), None);
    }

    #[test]
    fn hourly_precip_sums() {
        let f = field(VariableKind::Precipitation, day0(), vec![1.0; 24]);
        let d = hourly_to_daily(&f).unwrap();
        assert_eq!(d.planes, vec![vec![24.0]]);
        assert_eq!(d.time.start(), Period::day(2001, 7, 1).unwrap());
    }

    #[test]
    fn hourly_temperature_stats() {
        let hours: Vec<f64> = (10..34).map(f64::from).collect();
        for (kind, expected) in [
            (VariableKind::TemperatureMin, 10.0),
            (VariableKind::TemperatureMax, 33.0),
            (VariableKind::TemperatureAvg, 21.5),
        ] {
            let d = hourly_to_daily(&field(kind, day0(), hours.clone())).unwrap();
            assert_eq!(d.planes[0][0], expected, "{kind}");
        }
    }

    #[test]
    fn hourly_missing_day_and_partial_day() {
        let mut hours = vec![f64::NAN; 48];
        hours[30] = 4.0;
        let d = hourly_to_daily(&field(VariableKind::Precipitation, day0(), hours)).unwrap();
        assert!(d.planes[0][0].is_nan());
        assert_eq!(d.planes[1][0], 4.0);
    }

    #[test]
    fn hourly_rejects_other_frequencies() {
        let f = field(VariableKind::Precipitation, Period::day(2001, 1, 1).unwrap(), vec![1.0; 31]);
        assert!(matches!(hourly_to_daily(&f), Err(Error::Frequency(_))));
    }

    #[test]
    fn monthly_reductions() {
        let jan = Period::day(2001, 1, 1).unwrap();
        let t = table(VariableKind::Precipitation, jan, vec![Some(2.0); 31]);
        assert_eq!(daily_to_monthly(&t).unwrap().row("A").unwrap(), &[Some(62.0)]);

        let june = Period::day(2001, 6, 1).unwrap();
        let gusts: Vec<Option<f64>> = (0..30).map(|d| Some(if d == 17 { 17.0 } else { 5.0 })).collect();
        let t = table(VariableKind::WindGust, june, gusts);
        assert_eq!(daily_to_monthly(&t).unwrap().row("A").unwrap(), &[Some(17.0)]);

        let mut temps = vec![Some(0.0); 31];
        temps[30] = Some(31.0);
        let t = table(VariableKind::TemperatureAvg, jan, temps);
        assert_eq!(daily_to_monthly(&t).unwrap().row("A").unwrap(), &[Some(1.0)]);
    }

    #[test]
    fn partial_month_is_a_coverage_error() {
        let t = table(VariableKind::Precipitation, Period::day(2001, 1, 1).unwrap(), vec![Some(1.0); 30]);
        assert!(matches!(daily_to_monthly(&t), Err(Error::Coverage(_))));
    }

    #[test]
    fn annual_from_monthly() {
        let jan = Period::month(2001, 1).unwrap();
        let t = table(VariableKind::Precipitation, jan, vec![Some(100.0); 12]);
        assert_eq!(to_annual(&t).unwrap().row("A").unwrap(), &[Some(1200.0)]);
        let temps = (1..=12).map(|m| Some(m as f64)).collect();
        let t = table(VariableKind::TemperatureAvg, jan, temps);
        assert_eq!(to_annual(&t).unwrap().row("A").unwrap(), &[Some(6.5)]);
    }

    #[test]
    fn annual_from_daily_constant() {
        let t = table(
            VariableKind::TemperatureAvg,
            Period::day(2000, 1, 1).unwrap(),
            vec![Some(20.0); 366],
        );
        assert_eq!(to_annual(&t).unwrap().row("A").unwrap(), &[Some(20.0)]);
    }

    #[test]
    fn annual_is_strict_about_missing_months() {
        let mut row = vec![Some(1.0); 24];
        row[5] = None;
        let t = table(VariableKind::Precipitation, Period::month(2001, 1).unwrap(), row);
        assert_eq!(to_annual(&t).unwrap().row("A").unwrap(), &[None, Some(12.0)]);
    }

    #[test]
    fn spei_annual_is_refused() {
        let t = table(VariableKind::Spei, Period::month(2001, 1).unwrap(), vec![Some(0.1); 12]);
        assert!(matches!(to_annual(&t), Err(Error::UnsupportedAggregation(_))));
    }

    #[test]
    fn resample_chains_hourly_to_annual() {
        let hours = 24 * 365;
        let f = field(VariableKind::Precipitation, Period::hour(2001, 1, 1, 0).unwrap(), vec![0.5; hours]);
        let y = resample(&f, Frequency::Annual).unwrap();
        assert_eq!(y.time.start(), Period::Year(2001));
        assert!((y.planes[0][0] - 0.5 * hours as f64).abs() < 1e-9);
    }
}
