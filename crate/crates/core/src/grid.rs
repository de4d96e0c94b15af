//! Regular latitude/longitude grids.
//!
//! Cells are indexed row-major from the northwest corner: row 0 is the
//! northernmost row and column 0 the westernmost column, so cell
//! `j = row * n_cols + col`. Missing values are stored as `NaN`; no finite
//! value is ever treated as missing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bounded_mean;

/// Tolerance, in degrees or in cells, for comparing grid geometry.
const GEOMETRY_EPS: f64 = 1e-9;

/// Axis-aligned lon/lat rectangle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl Rect {
    pub fn new(west: f64, south: f64, east: f64, north: f64) -> Self {
        Self {
            west,
            south,
            east,
            north,
        }
    }

    pub fn width(&self) -> f64 {
        self.east - self.west
    }

    pub fn height(&self) -> f64 {
        self.north - self.south
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.west < other.east
            && other.west < self.east
            && self.south < other.north
            && other.south < self.north
    }

    pub fn translate(&self, dlon: f64, dlat: f64) -> Self {
        Self::new(
            self.west + dlon,
            self.south + dlat,
            self.east + dlon,
            self.north + dlat,
        )
    }
}

/// Geometry of a regular grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Latitude of the center of row 0 (the northernmost row).
    pub lat_origin: f64,
    /// Longitude of the center of column 0 (the westernmost column).
    pub lon_origin: f64,
    /// Cell size in degrees, identical along both axes.
    pub resolution: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

/// Offset between two grid frames sharing a resolution, in cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameOffset {
    /// Cell centers coincide; `rows`/`cols` shift target indices into source indices.
    Integer { rows: i64, cols: i64 },
    /// Target centers sit on the midpoints of 2×2 source-center quadruples.
    /// Target row `r` lies between source rows `r + rows` and `r + rows + 1`.
    Half { rows: i64, cols: i64 },
}

impl GridSpec {
    pub fn new(
        lat_origin: f64,
        lon_origin: f64,
        resolution: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Domain(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Shape(format!(
                "grid needs at least one row and column, got {n_rows}x{n_cols}"
            )));
        }
        let spec = Self {
            lat_origin,
            lon_origin,
            resolution,
            n_rows,
            n_cols,
        };
        let north = spec.lat_center(0);
        let south = spec.lat_center(n_rows - 1);
        if !(north.is_finite() && north <= 90.0 + GEOMETRY_EPS && south >= -90.0 - GEOMETRY_EPS) {
            return Err(Error::Domain(format!(
                "row centers span [{south}, {north}], outside [-90, 90]"
            )));
        }
        let west = spec.lon_center(0);
        let east = spec.lon_center(n_cols - 1);
        if !(west.is_finite() && west >= -180.0 - GEOMETRY_EPS && east < 180.0 - GEOMETRY_EPS) {
            return Err(Error::Domain(format!(
                "column centers span [{west}, {east}], outside [-180, 180)"
            )));
        }
        Ok(spec)
    }

    /// Global grid whose cell edges fall on the ±90°/±180° frame
    /// (the usual socio-economic raster layout).
    pub fn global(resolution: f64) -> Result<Self> {
        let n_rows = (180.0 / resolution).round() as usize;
        let n_cols = (360.0 / resolution).round() as usize;
        Self::new(
            90.0 - resolution / 2.0,
            -180.0 + resolution / 2.0,
            resolution,
            n_rows,
            n_cols,
        )
    }

    /// Global grid whose cell centers fall on the ±90°/−180° frame, with
    /// both polar rows included (721×1440 at 0.25°).
    pub fn global_centered(resolution: f64) -> Result<Self> {
        let n_rows = (180.0 / resolution).round() as usize + 1;
        let n_cols = (360.0 / resolution).round() as usize;
        Self::new(90.0, -180.0, resolution, n_rows, n_cols)
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn lat_center(&self, row: usize) -> f64 {
        self.lat_origin - row as f64 * self.resolution
    }

    pub fn lon_center(&self, col: usize) -> f64 {
        self.lon_origin + col as f64 * self.resolution
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn row_col(&self, cell: usize) -> (usize, usize) {
        (cell / self.n_cols, cell % self.n_cols)
    }

    pub fn cell_rect(&self, row: usize, col: usize) -> Rect {
        let half = self.resolution / 2.0;
        let lat = self.lat_center(row);
        let lon = self.lon_center(col);
        Rect::new(lon - half, lat - half, lon + half, lat + half)
    }

    /// Outer bounds of the whole grid.
    pub fn extent(&self) -> Rect {
        let half = self.resolution / 2.0;
        Rect::new(
            self.lon_center(0) - half,
            self.lat_center(self.n_rows - 1) - half,
            self.lon_center(self.n_cols - 1) + half,
            self.lat_center(0) + half,
        )
    }

    /// Whether the columns wrap around the full 360° of longitude.
    pub fn wraps_longitude(&self) -> bool {
        (self.n_cols as f64 * self.resolution - 360.0).abs() < GEOMETRY_EPS
    }

    /// Relative area `a_j` of every row, north to south.
    pub fn row_areas(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| cell_area(self.lat_center(r).clamp(-90.0, 90.0), self.resolution))
            .collect::<Result<_>>()
            .expect("grid rows lie within [-90, 90]")
    }

    /// Ranges of rows and columns whose cells intersect `rect`.
    pub fn cells_intersecting(
        &self,
        rect: &Rect,
    ) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let extent = self.extent();
        if !extent.intersects(rect) {
            return None;
        }
        let res = self.resolution;
        let top = extent.north;
        let left = extent.west;
        let row_lo = ((top - rect.north) / res).floor().max(0.0) as usize;
        let row_hi = (((top - rect.south) / res).ceil() as usize).min(self.n_rows);
        let col_lo = ((rect.west - left) / res).floor().max(0.0) as usize;
        let col_hi = (((rect.east - left) / res).ceil() as usize).min(self.n_cols);
        if row_lo >= row_hi || col_lo >= col_hi {
            return None;
        }
        Some((row_lo..row_hi, col_lo..col_hi))
    }

    fn same_resolution(&self, other: &GridSpec) -> bool {
        (self.resolution - other.resolution).abs() <= GEOMETRY_EPS * self.resolution.max(1.0)
    }

    /// Offset of `target` relative to `self`, when the two frames are alignable.
    pub fn offset_to(&self, target: &GridSpec) -> Result<FrameOffset> {
        if !self.same_resolution(target) {
            return Err(Error::Alignment(format!(
                "resolutions differ: {} vs {}",
                self.resolution, target.resolution
            )));
        }
        // Position of target row 0 / col 0 in source index space.
        let rows = (self.lat_origin - target.lat_origin) / self.resolution;
        let cols = (target.lon_origin - self.lon_origin) / self.resolution;
        let classify = |v: f64| -> Option<(bool, i64)> {
            let twice = 2.0 * v;
            if (twice - twice.round()).abs() > 1e-6 {
                return None;
            }
            let twice = twice.round() as i64;
            Some((twice.rem_euclid(2) == 0, twice.div_euclid(2)))
        };
        match (classify(rows), classify(cols)) {
            (Some((true, r)), Some((true, c))) => Ok(FrameOffset::Integer { rows: r, cols: c }),
            (Some((false, r)), Some((false, c))) => Ok(FrameOffset::Half { rows: r, cols: c }),
            _ => Err(Error::Alignment(format!(
                "origin offset ({rows}, {cols}) cells is neither whole nor half in both axes"
            ))),
        }
    }

    pub fn is_alignable(&self, other: &GridSpec) -> bool {
        self.offset_to(other).is_ok()
    }

    /// Approximate frame equality (same geometry up to floating tolerance).
    pub fn same_frame(&self, other: &GridSpec) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && matches!(
                self.offset_to(other),
                Ok(FrameOffset::Integer { rows: 0, cols: 0 })
            )
    }
}

/// A grid of values with `NaN` as the missing marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    values: Vec<f64>,
    pub units: String,
}

impl Grid {
    pub fn new(spec: GridSpec, values: Vec<f64>, units: impl Into<String>) -> Result<Self> {
        if values.len() != spec.n_cells() {
            return Err(Error::Shape(format!(
                "value plane has {} cells, grid {}x{} needs {}",
                values.len(),
                spec.n_rows,
                spec.n_cols,
                spec.n_cells()
            )));
        }
        Ok(Self {
            spec,
            values,
            units: units.into(),
        })
    }

    pub fn filled(spec: GridSpec, value: f64, units: impl Into<String>) -> Self {
        Self {
            spec,
            values: vec![value; spec.n_cells()],
            units: units.into(),
        }
    }

    pub fn from_fn(
        spec: GridSpec,
        units: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(spec.n_cells());
        for r in 0..spec.n_rows {
            for c in 0..spec.n_cols {
                values.push(f(r, c));
            }
        }
        Self {
            spec,
            values,
            units: units.into(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `(row, col)`, `None` when missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        present(self.values[self.spec.index(row, col)])
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_none()
    }

    /// Smallest and largest non-missing values.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .copied()
            .filter_map(present)
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            spec: self.spec,
            values: self
                .values
                .iter()
                .map(|&v| if v.is_nan() { v } else { f(v) })
                .collect(),
            units: self.units.clone(),
        }
    }
}

#[inline]
pub(crate) fn present(v: f64) -> Option<f64> {
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

/// Relative area of a cell centered at `lat_center`: `resolution² · cos(lat)`.
pub fn cell_area(lat_center: f64, resolution: f64) -> Result<f64> {
    if !(-90.0..=90.0).contains(&lat_center) {
        return Err(Error::Domain(format!(
            "latitude {lat_center} outside [-90, 90]"
        )));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Domain(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    // cos(±90°) evaluates to ~6e-17; keep the clamp for rounding at the poles.
    Ok((resolution * resolution * lat_center.to_radians().cos()).max(0.0))
}

/// Coarsen `fine` by averaging `factor × factor` blocks, starting from the
/// upper-left cell. Missing cells are skipped; an all-missing block is missing.
pub fn block_aggregate(fine: &Grid, factor: usize) -> Result<Grid> {
    if factor == 0 {
        return Err(Error::Shape("block factor must be at least 1".into()));
    }
    let spec = fine.spec;
    if spec.n_rows % factor != 0 || spec.n_cols % factor != 0 {
        return Err(Error::Shape(format!(
            "grid {}x{} is not divisible by block factor {factor}",
            spec.n_rows, spec.n_cols
        )));
    }
    if factor == 1 {
        return Ok(fine.clone());
    }
    let coarse_res = spec.resolution * factor as f64;
    let top = spec.lat_origin + spec.resolution / 2.0;
    let left = spec.lon_origin - spec.resolution / 2.0;
    let coarse = GridSpec::new(
        top - coarse_res / 2.0,
        left + coarse_res / 2.0,
        coarse_res,
        spec.n_rows / factor,
        spec.n_cols / factor,
    )?;

    let mut block = Vec::with_capacity(factor * factor);
    let mut out = Vec::with_capacity(coarse.n_cells());
    for br in 0..coarse.n_rows {
        for bc in 0..coarse.n_cols {
            block.clear();
            for r in br * factor..(br + 1) * factor {
                let row = &fine.values[spec.index(r, bc * factor)..spec.index(r, (bc + 1) * factor - 1) + 1];
                block.extend(row.iter().copied().filter(|v| !v.is_nan()));
            }
            out.push(bounded_mean(&block).unwrap_or(f64::NAN));
        }
    }
    Grid::new(coarse, out, fine.units.clone())
}

/// Resample `source` onto a frame shifted by half a cell in both axes.
///
/// Each target cell is the mean of the (up to) four source cells whose
/// centers surround it, which equals bilinear interpolation at the
/// midpoint. Source cells that are missing or fall outside the source
/// frame are skipped; global sources wrap in longitude.
pub fn align_half_offset(source: &Grid, target: &GridSpec) -> Result<Grid> {
    let (row_off, col_off) = match source.spec.offset_to(target)? {
        FrameOffset::Half { rows, cols } => (rows, cols),
        FrameOffset::Integer { .. } => {
            return Err(Error::Alignment(
                "target centers coincide with source centers; not a half-cell offset".into(),
            ))
        }
    };
    let src = &source.spec;
    let wrap = src.wraps_longitude();
    let n_rows = src.n_rows as i64;
    let n_cols = src.n_cols as i64;
    let mut quad = Vec::with_capacity(4);
    let values = (0..target.n_rows)
        .flat_map(|r| (0..target.n_cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            quad.clear();
            let r0 = r as i64 + row_off;
            let c0 = c as i64 + col_off;
            for sr in [r0, r0 + 1] {
                if sr < 0 || sr >= n_rows {
                    continue;
                }
                for sc in [c0, c0 + 1] {
                    let sc = if wrap {
                        sc.rem_euclid(n_cols)
                    } else if sc < 0 || sc >= n_cols {
                        continue;
                    } else {
                        sc
                    };
                    let v = source.values[src.index(sr as usize, sc as usize)];
                    if !v.is_nan() {
                        quad.push(v);
                    }
                }
            }
            bounded_mean(&quad).unwrap_or(f64::NAN)
        })
        .collect();
    Grid::new(*target, values, source.units.clone())
}

/// Bring `source` onto `target`: copy (with cropping/padding) when centers
/// coincide, half-offset averaging otherwise.
pub fn align_to(source: &Grid, target: &GridSpec) -> Result<Grid> {
    match source.spec.offset_to(target)? {
        FrameOffset::Half { .. } => align_half_offset(source, target),
        FrameOffset::Integer { rows, cols } => {
            let src = &source.spec;
            let wrap = src.wraps_longitude();
            Ok(Grid::from_fn(*target, source.units.clone(), |r, c| {
                let sr = r as i64 + rows;
                let mut sc = c as i64 + cols;
                if wrap {
                    sc = sc.rem_euclid(src.n_cols as i64);
                }
                if sr < 0 || sr >= src.n_rows as i64 || sc < 0 || sc >= src.n_cols as i64 {
                    f64::NAN
                } else {
                    source.values[src.index(sr as usize, sc as usize)]
                }
            }))
        }
    }
}
