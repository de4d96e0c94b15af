//! Spatial weighted aggregation of gridded climate values to units.
//!
//! For unit `i` at time `t`:
//!
//! ```text
//!            Σ_j a_j f_ij w_j x_jt
//! y_it  =  ---------------------
//!              Σ_j a_j f_ij w_j
//! ```
//!
//! over the cells `j` intersecting the unit, where `a_j` is the relative
//! cell area (set to 1 for cropland and concurrent weights), `f_ij` the
//! covered fraction, `w_j` the weight and `x_jt` the climate value.
//!
//! A cell whose value or weight is missing is dropped from both sums. A unit
//! with no positive weight mass left is reported as NA rather than imputed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{AdminLevel, CoverageMatrix};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::numeric::CompensatedSum;
use crate::temporal::VariableKind;
use crate::time::{Frequency, TimeAxis};
use crate::weights::{concurrent_base_year, WeightKind, WeightLayer, WeightScheme};

/// Upstream gridded climate product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    CruTs,
    Csic,
    Era5,
    Udel,
    Synthetic,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::CruTs,
        Source::Csic,
        Source::Era5,
        Source::Udel,
        Source::Synthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Source::CruTs => "cru_ts",
            Source::Csic => "csic",
            Source::Era5 => "era5",
            Source::Udel => "udel",
            Source::Synthetic => "synthetic",
        }
    }

    /// Variables the product provides.
    pub fn variables(&self) -> &'static [VariableKind] {
        use VariableKind::*;
        match self {
            Source::CruTs | Source::Udel => &[TemperatureAvg, Precipitation],
            Source::Csic => &[Spei],
            Source::Era5 => &[
                TemperatureAvg,
                TemperatureMin,
                TemperatureMax,
                Precipitation,
                WindGust,
            ],
            Source::Synthetic => &VariableKind::ALL,
        }
    }

    pub fn supports(&self, variable: VariableKind) -> bool {
        self.variables().contains(&variable)
    }

    /// Inclusive coverage years; `None` means unrestricted.
    pub fn coverage(&self) -> Option<(i32, i32)> {
        match self {
            Source::CruTs => Some((1901, 2022)),
            Source::Csic => Some((1901, 2020)),
            Source::Era5 => Some((1940, 2023)),
            Source::Udel => Some((1900, 2017)),
            Source::Synthetic => None,
        }
    }

    /// Finest frequency the product is distributed at.
    pub fn native_frequency(&self) -> Frequency {
        match self {
            Source::Era5 | Source::Synthetic => Frequency::Daily,
            _ => Frequency::Monthly,
        }
    }

    /// Native resolution in degrees.
    pub fn resolution(&self) -> Option<f64> {
        match self {
            Source::Era5 => Some(0.25),
            Source::Synthetic => None,
            _ => Some(0.5),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "cru" | "cru_ts" | "cruts" => Ok(Source::CruTs),
            other => Source::ALL
                .into_iter()
                .find(|src| src.as_str() == other)
                .ok_or_else(|| Error::Validation(format!("unknown source `{s}`"))),
        }
    }
}

/// Time-stacked gridded values of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateField {
    pub variable: VariableKind,
    pub source: Source,
    pub grid: GridSpec,
    pub time: TimeAxis,
    /// One row-major plane per time step, `NaN` for missing cells.
    pub planes: Vec<Vec<f64>>,
}

impl ClimateField {
    pub fn new(
        variable: VariableKind,
        source: Source,
        grid: GridSpec,
        time: TimeAxis,
        planes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !source.supports(variable) {
            return Err(Error::Validation(format!(
                "{source} does not provide {variable}"
            )));
        }
        if planes.len() != time.len() {
            return Err(Error::Shape(format!(
                "{} planes for a {}-step time axis",
                planes.len(),
                time.len()
            )));
        }
        if let Some(bad) = planes.iter().position(|p| p.len() != grid.n_cells()) {
            return Err(Error::Shape(format!(
                "plane {bad} has {} cells, grid needs {}",
                planes[bad].len(),
                grid.n_cells()
            )));
        }
        Ok(Self {
            variable,
            source,
            grid,
            time,
            planes,
        })
    }

    /// Steps falling in years `from..=to`.
    pub fn select_years(&self, from: i32, to: i32) -> ClimateField {
        let range = self.time.year_range(from, to);
        ClimateField {
            variable: self.variable,
            source: self.source,
            grid: self.grid,
            time: self.time.slice(range.clone()),
            planes: self.planes[range].to_vec(),
        }
    }
}

/// What the values of a [`UnitTable`] measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// The climate variable itself.
    #[default]
    Value,
    /// Number of days beyond a threshold.
    ExceedanceCount,
    /// Sum of residuals beyond a threshold.
    CumulativeExceedance,
}

/// Per-unit, per-period values with explicit NA (`None`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    pub level: AdminLevel,
    pub time: TimeAxis,
    pub variable: VariableKind,
    pub scheme: WeightScheme,
    pub measure: Measure,
    values: BTreeMap<String, Vec<Option<f64>>>,
}

impl UnitTable {
    pub fn new(
        level: AdminLevel,
        time: TimeAxis,
        variable: VariableKind,
        scheme: WeightScheme,
        values: BTreeMap<String, Vec<Option<f64>>>,
    ) -> Result<Self> {
        if let Some((unit, row)) = values.iter().find(|(_, row)| row.len() != time.len()) {
            return Err(Error::Shape(format!(
                "unit {unit} has {} values for {} periods",
                row.len(),
                time.len()
            )));
        }
        Ok(Self {
            level,
            time,
            variable,
            scheme,
            measure: Measure::Value,
            values,
        })
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn row(&self, unit: &str) -> Option<&[Option<f64>]> {
        self.values.get(unit).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[Option<f64>])> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn unit_ids(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn n_units(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() || self.time.is_empty()
    }

    /// Value of `unit` at period index `t`; outer `None` if out of range.
    pub fn get(&self, unit: &str, t: usize) -> Option<Option<f64>> {
        self.values.get(unit).and_then(|r| r.get(t).copied())
    }

    /// All `(unit, period label, value)` triples in export order.
    pub fn triples(&self) -> Vec<(String, String, Option<f64>)> {
        let labels = self.time.labels();
        self.values
            .iter()
            .flat_map(|(unit, row)| {
                labels
                    .iter()
                    .zip(row)
                    .map(move |(l, v)| (unit.clone(), l.clone(), *v))
            })
            .collect()
    }

    /// Periods whose year falls in `from..=to`.
    pub fn select_years(&self, from: i32, to: i32) -> UnitTable {
        let range = self.time.year_range(from, to);
        UnitTable {
            level: self.level,
            time: self.time.slice(range.clone()),
            variable: self.variable,
            scheme: self.scheme,
            measure: self.measure,
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), v[range.clone()].to_vec()))
                .collect(),
        }
    }

    pub(crate) fn map_rows(
        &self,
        time: TimeAxis,
        f: impl Fn(&[Option<f64>]) -> Vec<Option<f64>> + Sync,
    ) -> UnitTable {
        let values = self
            .values
            .par_iter()
            .map(|(k, row)| (k.clone(), f(row)))
            .collect();
        UnitTable {
            level: self.level,
            time,
            variable: self.variable,
            scheme: self.scheme,
            measure: self.measure,
            values,
        }
    }
}

fn check_frame(what: &str, spec: &GridSpec, coverage: &CoverageMatrix) -> Result<()> {
    if !spec.same_frame(&coverage.grid) {
        return Err(Error::Alignment(format!(
            "{what} grid {spec:?} does not match the coverage grid {:?}",
            coverage.grid
        )));
    }
    Ok(())
}

/// Aggregate one value plane to every unit of `coverage`.
pub fn weighted_aggregate(
    plane: &[f64],
    coverage: &CoverageMatrix,
    weights: &WeightLayer,
) -> Result<BTreeMap<String, Option<f64>>> {
    check_frame("weight", weights.spec(), coverage)?;
    if plane.len() != coverage.grid.n_cells() {
        return Err(Error::Alignment(format!(
            "value plane has {} cells, coverage grid has {}",
            plane.len(),
            coverage.grid.n_cells()
        )));
    }
    let areas = AreaTable::new(&coverage.grid, weights.use_area());
    Ok(coverage
        .iter()
        .map(|(unit, cells)| (unit.to_string(), unit_value(plane, cells, weights, &areas)))
        .collect())
}

struct AreaTable {
    rows: Option<Vec<f64>>,
    n_cols: usize,
}

impl AreaTable {
    fn new(grid: &GridSpec, use_area: bool) -> Self {
        Self {
            rows: use_area.then(|| grid.row_areas()),
            n_cols: grid.n_cols,
        }
    }

    #[inline]
    fn area(&self, cell: usize) -> f64 {
        match &self.rows {
            Some(rows) => rows[cell / self.n_cols],
            None => 1.0,
        }
    }
}

fn unit_value(
    plane: &[f64],
    cells: &[(usize, f64)],
    weights: &WeightLayer,
    areas: &AreaTable,
) -> Option<f64> {
    let mut numerator = CompensatedSum::new();
    let mut denominator = CompensatedSum::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(cell, fraction) in cells {
        let x = plane[cell];
        let Some(w) = weights.weight(cell) else {
            continue;
        };
        if x.is_nan() {
            continue;
        }
        let mass = areas.area(cell) * fraction * w;
        if mass > 0.0 {
            numerator.add(mass * x);
            denominator.add(mass);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let den = denominator.value();
    if den > 0.0 {
        Some((numerator.value() / den).clamp(lo, hi))
    } else {
        None
    }
}

/// Weights for a whole series: one fixed layer, or one layer per decade.
#[derive(Debug, Clone)]
pub enum WeightSet {
    Fixed(WeightLayer),
    Concurrent(BTreeMap<i32, WeightLayer>),
}

impl WeightSet {
    pub fn scheme(&self) -> WeightScheme {
        match self {
            WeightSet::Fixed(layer) => layer.scheme,
            WeightSet::Concurrent(_) => WeightScheme::concurrent(),
        }
    }

    pub fn use_area(&self) -> bool {
        self.scheme().kind.uses_area()
    }

    /// Layer applying to observation year `year`.
    pub fn layer_for(&self, year: i32) -> Result<&WeightLayer> {
        match self {
            WeightSet::Fixed(layer) => Ok(layer),
            WeightSet::Concurrent(layers) => {
                let decade = concurrent_base_year(year)?;
                layers.get(&decade).ok_or_else(|| {
                    Error::Configuration(format!(
                        "no concurrent weight layer for decade {decade} (needed by {year})"
                    ))
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let WeightSet::Concurrent(layers) = self {
            for (decade, layer) in layers {
                if layer.scheme.kind != WeightKind::Concurrent {
                    return Err(Error::Configuration(format!(
                        "layer for decade {decade} is {}, not concurrent",
                        layer.scheme.kind
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Aggregate every time step of `field` to the units of `coverage`.
pub fn aggregate_series(
    field: &ClimateField,
    coverage: &CoverageMatrix,
    weights: &WeightSet,
) -> Result<UnitTable> {
    weights.validate()?;
    check_frame("climate", &field.grid, coverage)?;

    let layers: Vec<&WeightLayer> = field
        .time
        .periods()
        .map(|p| weights.layer_for(p.year()))
        .collect::<Result<_>>()?;
    for layer in &layers {
        check_frame("weight", layer.spec(), coverage)?;
    }

    let areas = AreaTable::new(&coverage.grid, weights.use_area());
    let units: Vec<(&str, &[(usize, f64)])> = coverage.iter().collect();

    let rows: Vec<Vec<Option<f64>>> = units
        .par_iter()
        .map(|(_, cells)| {
            field
                .planes
                .iter()
                .zip(&layers)
                .map(|(plane, layer)| unit_value(plane, cells, layer, &areas))
                .collect()
        })
        .collect();

    let values = units
        .iter()
        .map(|(u, _)| u.to_string())
        .zip(rows)
        .collect();
    UnitTable::new(
        coverage.level,
        field.time.clone(),
        field.variable,
        weights.scheme(),
        values,
    )
}
