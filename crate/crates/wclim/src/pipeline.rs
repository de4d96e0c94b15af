//! Runs a planned query: read, coverage, weights, aggregate, temporal,
//! extremes.

use std::collections::BTreeMap;

use wclim_core::aggregate::{aggregate_series, WeightSet};
use wclim_core::boundaries::CoverageMatrix;
use wclim_core::extremes::apply_threshold;
use wclim_core::io::{read_climate, read_raster, CoverageCache};
use wclim_core::temporal::{hourly_to_daily, resample};
use wclim_core::time::Frequency;
use wclim_core::weights::{
    concurrent_weight, cropland_weight, nightlight_weight, population_weight, unweighted_layer,
    WeightKind,
};
use wclim_core::{AdminLevel, ClimateField, GridSpec, UnitTable};

use crate::catalog::{Catalog, Plan};
use crate::error::ApiError;

/// Climate input of a plan, at daily or coarser frequency, restricted to
/// the plan's years.
pub fn load_climate(catalog: &Catalog, plan: &Plan) -> Result<ClimateField, ApiError> {
    let q = &plan.query;
    let mut field = read_climate(catalog.path(&plan.climate.path), q.variable, q.source)?;
    if field.time.frequency() == Frequency::Hourly {
        field = hourly_to_daily(&field)?;
    }
    Ok(field.select_years(plan.years.0, plan.years.1))
}

/// Coverage of the plan's boundaries on `grid`, through the on-disk cache.
pub fn load_coverage(catalog: &Catalog, level: AdminLevel, grid: &GridSpec) -> Result<(CoverageMatrix, bool), ApiError> {
    let boundaries = catalog.boundaries(level).ok_or_else(|| {
        ApiError::new(
            crate::error::ErrorCode::DataUnavailable,
            format!("no {level} boundaries in the data directory"),
        )
    })?;
    let cache = CoverageCache::new(catalog.cache_dir());
    Ok(cache.load_or_build(&catalog.path(&boundaries.path), level, grid)?)
}

/// Weight layers of the plan, resampled onto `target`.
pub fn load_weights(catalog: &Catalog, plan: &Plan, target: &GridSpec) -> Result<WeightSet, ApiError> {
    let read = |path: &str| read_raster(catalog.path(path), None);
    match plan.query.scheme.kind {
        WeightKind::Unweighted => Ok(WeightSet::Fixed(unweighted_layer(target))),
        WeightKind::Concurrent => {
            let mut layers = BTreeMap::new();
            for w in &plan.weights {
                layers.insert(w.year, concurrent_weight(&read(&w.path)?, target, w.year)?);
            }
            Ok(WeightSet::Concurrent(layers))
        }
        kind => {
            let w = plan.weights.first().ok_or_else(|| {
                ApiError::internal(format!("plan for {kind} weights lists no layer"))
            })?;
            let raw = read(&w.path)?;
            let layer = match kind {
                WeightKind::Population => population_weight(&raw, target, w.year)?,
                WeightKind::Nightlight => nightlight_weight(&raw, target, w.year)?,
                _ => cropland_weight(&raw, target, w.year)?,
            };
            Ok(WeightSet::Fixed(layer))
        }
    }
}

/// Everything after the inputs are loaded.
pub fn compute(plan: &Plan, field: &ClimateField, coverage: &CoverageMatrix, weights: &WeightSet) -> Result<UnitTable, ApiError> {
    let q = &plan.query;
    let table = aggregate_series(field, coverage, weights)?;
    let table = match &q.threshold {
        Some(spec) => apply_threshold(&table, spec)?,
        None => resample(&table, q.frequency)?,
    };
    Ok(table.select_years(q.from, q.to))
}

/// Run `plan` end to end.
pub fn run(catalog: &Catalog, plan: &Plan) -> Result<UnitTable, ApiError> {
    let field = load_climate(catalog, plan)?;
    let (coverage, cached) = load_coverage(catalog, plan.query.level, &field.grid)?;
    tracing::debug!(id = %plan.id, cached, units = coverage.len(), "coverage ready");
    let weights = load_weights(catalog, plan, &field.grid)?;
    compute(plan, &field, &coverage, &weights)
}
