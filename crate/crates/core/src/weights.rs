//! Socio-economic weighting schemes.
//!
//! Five schemes are supported: population (density × cell area),
//! night-time lights (DN, noise-thresholded, block-averaged), cropland
//! (km², block-averaged), unweighted (pure area weighting), and
//! concurrent (population count of the decade start).
//!
//! Cropland and concurrent layers already measure a mass per cell, so the
//! aggregation drops the cell-area factor for them; every other scheme
//! keeps it. [`WeightLayer::use_area`] reports which convention applies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{align_to, block_aggregate, Grid, GridSpec};

/// Base years available for fixed-year schemes.
pub const BASE_YEARS: [i32; 4] = [2000, 2005, 2010, 2015];

/// DN values strictly below this are treated as noise and zeroed.
pub const NIGHTLIGHT_NOISE_FLOOR: f64 = 30.0;

/// Largest valid night-light digital number.
pub const NIGHTLIGHT_MAX_DN: f64 = 63.0;

/// Earliest year a concurrent layer exists for.
pub const CONCURRENT_FIRST_YEAR: i32 = 1900;

/// Last year the latest (2020) concurrent layer is used for.
pub const CONCURRENT_LAST_YEAR: i32 = 2029;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Unweighted,
    Population,
    Nightlight,
    Cropland,
    Concurrent,
}

impl WeightKind {
    pub const ALL: [WeightKind; 5] = [
        WeightKind::Unweighted,
        WeightKind::Population,
        WeightKind::Nightlight,
        WeightKind::Cropland,
        WeightKind::Concurrent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            WeightKind::Unweighted => "unweighted",
            WeightKind::Population => "population",
            WeightKind::Nightlight => "nightlight",
            WeightKind::Cropland => "cropland",
            WeightKind::Concurrent => "concurrent",
        }
    }

    /// Whether the aggregation multiplies by the cell area `a_j`.
    pub fn uses_area(&self) -> bool {
        !matches!(self, WeightKind::Cropland | WeightKind::Concurrent)
    }

    pub fn needs_base_year(&self) -> bool {
        matches!(
            self,
            WeightKind::Population | WeightKind::Nightlight | WeightKind::Cropland
        )
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown weight scheme `{s}`")))
    }
}

/// A weighting scheme and its base year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: WeightKind,
    /// Fixed base year for population/nightlight/cropland, `None` for
    /// unweighted. For concurrent schemes this is ignored at query level
    /// and records the decade on individual layers.
    pub base_year: Option<i32>,
}

impl WeightScheme {
    pub fn new(kind: WeightKind, base_year: Option<i32>) -> Result<Self> {
        match (kind, base_year) {
            (WeightKind::Unweighted, Some(y)) => Err(Error::Validation(format!(
                "unweighted scheme takes no base year (got {y})"
            ))),
            (k, None) if k.needs_base_year() => Err(Error::Validation(format!(
                "{k} weighting requires a base year in {BASE_YEARS:?}"
            ))),
            (k, Some(y)) if k.needs_base_year() && !BASE_YEARS.contains(&y) => {
                Err(Error::Validation(format!(
                    "base year {y} not available for {k}; choose one of {BASE_YEARS:?}"
                )))
            }
            (WeightKind::Concurrent, _) => Ok(Self {
                kind,
                base_year: None,
            }),
            _ => Ok(Self { kind, base_year }),
        }
    }

    pub fn unweighted() -> Self {
        Self {
            kind: WeightKind::Unweighted,
            base_year: None,
        }
    }

    pub fn concurrent() -> Self {
        Self {
            kind: WeightKind::Concurrent,
            base_year: None,
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.base_year {
            Some(y) => write!(f, "{}_{}", self.kind, y),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// A grid of nonnegative weights `w_j` for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLayer {
    pub scheme: WeightScheme,
    pub grid: Grid,
}

impl WeightLayer {
    /// Wrap a weight grid, rejecting negative weights. Missing cells stay missing.
    pub fn new(scheme: WeightScheme, grid: Grid) -> Result<Self> {
        ensure_nonnegative(&grid, scheme.kind.as_str())?;
        Ok(Self { scheme, grid })
    }

    pub fn use_area(&self) -> bool {
        self.scheme.kind.uses_area()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    /// Weight of cell `j`, `None` when missing.
    #[inline]
    pub fn weight(&self, cell: usize) -> Option<f64> {
        crate::grid::present(self.grid.values()[cell])
    }

    /// The same layer resampled onto `target`.
    pub fn aligned_to(&self, target: &GridSpec) -> Result<WeightLayer> {
        if self.grid.spec.same_frame(target) {
            return Ok(self.clone());
        }
        Ok(Self {
            scheme: self.scheme,
            grid: align_to(&self.grid, target)?,
        })
    }

    /// Every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<WeightLayer> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Validation(format!(
                "weight scale factor must be positive, got {factor}"
            )));
        }
        Ok(Self {
            scheme: self.scheme,
            grid: self.grid.map(|w| w * factor),
        })
    }
}

fn ensure_nonnegative(grid: &Grid, what: &str) -> Result<()> {
    if let Some((lo, _)) = grid.min_max() {
        if lo < 0.0 {
            return Err(Error::Validation(format!(
                "{what} grid contains a negative value ({lo})"
            )));
        }
    }
    Ok(())
}

fn block_factor(fine: &GridSpec, target: &GridSpec) -> Result<usize> {
    let ratio = target.resolution / fine.resolution;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-6 {
        return Err(Error::Alignment(format!(
            "target resolution {} is not a whole multiple of source resolution {}",
            target.resolution, fine.resolution
        )));
    }
    Ok(factor as usize)
}

/// Population weights: density (persons/km²) times relative cell area.
pub fn population_weight(density: &Grid, target: &GridSpec, base_year: i32) -> Result<WeightLayer> {
    let scheme = WeightScheme::new(WeightKind::Population, Some(base_year))?;
    ensure_nonnegative(density, "population density")?;
    let areas = density.spec.row_areas();
    let n_cols = density.spec.n_cols;
    let values = density
        .values()
        .iter()
        .enumerate()
        .map(|(j, &d)| d * areas[j / n_cols])
        .collect();
    let weights = Grid::new(density.spec, values, "persons (relative area units)")?;
    WeightLayer::new(scheme, weights)?.aligned_to(target)
}

/// Night-light weights: zero DN below the noise floor, then block-average
/// onto the target resolution.
pub fn nightlight_weight(dn_fine: &Grid, target: &GridSpec, base_year: i32) -> Result<WeightLayer> {
    let scheme = WeightScheme::new(WeightKind::Nightlight, Some(base_year))?;
    if let Some((lo, hi)) = dn_fine.min_max() {
        if lo < 0.0 || hi > NIGHTLIGHT_MAX_DN {
            return Err(Error::Validation(format!(
                "night-light DN must lie in [0, {NIGHTLIGHT_MAX_DN}], found [{lo}, {hi}]"
            )));
        }
    }
    let factor = block_factor(&dn_fine.spec, target)?;
    let corrected = dn_fine.map(|dn| if dn < NIGHTLIGHT_NOISE_FLOOR { 0.0 } else { dn });
    let coarse = block_aggregate(&corrected, factor)?;
    WeightLayer::new(scheme, coarse)?.aligned_to(target)
}

/// Cropland weights: block-averaged cropland area, no thresholding.
pub fn cropland_weight(cropland_fine: &Grid, target: &GridSpec, base_year: i32) -> Result<WeightLayer> {
    let scheme = WeightScheme::new(WeightKind::Cropland, Some(base_year))?;
    ensure_nonnegative(cropland_fine, "cropland")?;
    let factor = block_factor(&cropland_fine.spec, target)?;
    let coarse = block_aggregate(cropland_fine, factor)?;
    WeightLayer::new(scheme, coarse)?.aligned_to(target)
}

/// Population-count layer for the decade starting at `decade`.
pub fn concurrent_weight(counts: &Grid, target: &GridSpec, decade: i32) -> Result<WeightLayer> {
    if decade % 10 != 0 || concurrent_base_year(decade)? != decade {
        return Err(Error::Validation(format!(
            "concurrent layers are keyed by decade start, got {decade}"
        )));
    }
    ensure_nonnegative(counts, "population count")?;
    let scheme = WeightScheme {
        kind: WeightKind::Concurrent,
        base_year: Some(decade),
    };
    let layer = WeightLayer::new(scheme, counts.clone())?;
    if layer.grid.spec.resolution < target.resolution {
        let factor = block_factor(&counts.spec, target)?;
        let coarse = block_aggregate(counts, factor)?;
        return WeightLayer::new(scheme, coarse)?.aligned_to(target);
    }
    layer.aligned_to(target)
}

/// Base year of the concurrent scheme: the start of the decade containing `year`.
pub fn concurrent_base_year(year: i32) -> Result<i32> {
    if year < CONCURRENT_FIRST_YEAR {
        return Err(Error::UnsupportedPeriod(format!(
            "concurrent weights start in {CONCURRENT_FIRST_YEAR}, requested {year}"
        )));
    }
    if year > CONCURRENT_LAST_YEAR {
        return Err(Error::UnsupportedPeriod(format!(
            "concurrent weights end in {CONCURRENT_LAST_YEAR}, requested {year}"
        )));
    }
    Ok(year.div_euclid(10) * 10)
}

/// Dataset providing the concurrent population counts of a decade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcurrentSource {
    /// Historical decadal counts, 1900–2010.
    Hyde,
    /// Gridded population counts, 2020.
    Gpw,
}

pub fn concurrent_source(decade: i32) -> ConcurrentSource {
    if decade <= 2010 {
        ConcurrentSource::Hyde
    } else {
        ConcurrentSource::Gpw
    }
}

/// Constant-one layer: the aggregation reduces to an area-weighted mean.
pub fn unweighted_layer(spec: &GridSpec) -> WeightLayer {
    WeightLayer {
        scheme: WeightScheme::unweighted(),
        grid: Grid::filled(*spec, 1.0, "1"),
    }
}
