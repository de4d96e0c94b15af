//! Weighted aggregation of gridded climate data to administrative units.
//!
//! The pipeline runs in five steps:
//!
//! 1. [`boundaries::build_coverage`] intersects unit polygons with grid cells.
//! 2. [`weights`] turns socio-economic rasters into per-cell weights on the
//!    climate grid.
//! 3. [`aggregate::aggregate_series`] forms the weighted unit averages.
//! 4. [`temporal::resample`] moves series between hourly, daily, monthly and
//!    annual steps.
//! 5. [`extremes::apply_threshold`] turns daily series into threshold counts
//!    or cumulative exceedances.
//!
//! [`io`] reads NetCDF and GeoJSON inputs and writes tables as CSV, JSON or
//! Parquet in wide or long layout.

pub mod aggregate;
pub mod boundaries;
pub mod error;
pub mod extremes;
pub mod grid;
pub mod io;
pub mod numeric;
pub mod temporal;
pub mod time;
pub mod weights;

pub use aggregate::{aggregate_series, ClimateField, Measure, Source, UnitTable, WeightSet};
pub use boundaries::{build_coverage, AdminLevel, AdminUnit, CoverageMatrix, MultiPolygon, Polygon, Ring};
pub use error::{Error, Result};
pub use extremes::{apply_threshold, Direction, StatPeriod, ThresholdMode, ThresholdSpec};
pub use grid::{Grid, GridSpec, Rect};
pub use temporal::{resample, VariableKind};
pub use time::{Frequency, Period, TimeAxis};
pub use weights::{WeightKind, WeightLayer, WeightScheme};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/weighting.md")]
    mod weighting {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/temporal.md")]
    mod temporal {}
    #[doc = include_str!("../../../book/src/extremes.md")]
    mod extremes {}
    #[doc = include_str!("../../../book/src/export.md")]
    mod export {}
}
