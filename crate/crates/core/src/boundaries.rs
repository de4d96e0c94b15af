//! Administrative polygons and their fractional coverage of grid cells.
//!
//! Geometry lives in planar lon/lat degree space. Each ring is clipped to
//! a cell rectangle with successive half-plane clipping and measured with
//! the shoelace formula; holes subtract. Clipping a concave ring against a
//! rectangle may leave zero-width slivers along the rectangle edges, which
//! carry no area and so do not disturb the result.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Rect};

/// Fractions below this are treated as numerical noise and dropped.
pub const MIN_FRACTION: f64 = 1e-12;

pub type Point = [f64; 2];

/// Administrative level of a boundary set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdminLevel {
    Gadm0,
    Gadm1,
}

impl AdminLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdminLevel::Gadm0 => "gadm0",
            AdminLevel::Gadm1 => "gadm1",
        }
    }

    /// GeoJSON property carrying the unit id at this level.
    pub fn id_property(&self) -> &'static str {
        match self {
            AdminLevel::Gadm0 => "GID_0",
            AdminLevel::Gadm1 => "GID_1",
        }
    }

    pub fn name_property(&self) -> &'static str {
        match self {
            AdminLevel::Gadm0 => "COUNTRY",
            AdminLevel::Gadm1 => "NAME_1",
        }
    }
}

impl fmt::Display for AdminLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AdminLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gadm0" | "0" => Ok(AdminLevel::Gadm0),
            "gadm1" | "1" => Ok(AdminLevel::Gadm1),
            other => Err(Error::Validation(format!("unknown admin level `{other}`"))),
        }
    }
}

/// A ring stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring(pub Vec<Point>);

impl Ring {
    /// Build a ring from a closed coordinate list (first == last).
    pub fn from_closed(mut coords: Vec<Point>) -> Result<Self> {
        if coords.len() < 4 {
            return Err(Error::InvalidGeometry(format!(
                "ring has {} positions, a closed ring needs at least 4",
                coords.len()
            )));
        }
        if coords.first() != coords.last() {
            return Err(Error::InvalidGeometry("ring is not closed".into()));
        }
        coords.pop();
        Ok(Ring(coords))
    }

    /// Closed coordinate list, as written to GeoJSON.
    pub fn to_closed(&self) -> Vec<Point> {
        let mut out = self.0.clone();
        if let Some(&first) = self.0.first() {
            out.push(first);
        }
        out
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.0)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bbox(&self) -> Rect {
        bbox_of(&self.0)
    }

    pub fn reversed(&self) -> Ring {
        let mut pts = self.0.clone();
        pts.reverse();
        Ring(pts)
    }

    pub fn translated(&self, dlon: f64, dlat: f64) -> Ring {
        Ring(self.0.iter().map(|p| [p[0] + dlon, p[1] + dlat]).collect())
    }

    /// Even-odd point-in-ring test.
    pub fn contains(&self, p: Point) -> bool {
        point_in_ring(&self.0, p)
    }

    fn validate(&self) -> Result<()> {
        let pts = &self.0;
        if pts.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "ring has {} distinct vertices",
                pts.len()
            )));
        }
        for p in pts {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidGeometry("non-finite coordinate".into()));
            }
            if !(-180.0..=180.0).contains(&p[0]) || !(-90.0..=90.0).contains(&p[1]) {
                return Err(Error::InvalidGeometry(format!(
                    "vertex ({}, {}) outside lon [-180, 180] / lat [-90, 90]",
                    p[0], p[1]
                )));
            }
        }
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            if (a[0] - b[0]).abs() > 180.0 {
                return Err(Error::InvalidGeometry(format!(
                    "edge ({}, {}) -> ({}, {}) crosses the antimeridian; split it at ±180°",
                    a[0], a[1], b[0], b[1]
                )));
            }
        }
        if !ring_is_simple(pts) {
            return Err(Error::InvalidGeometry("ring self-intersects".into()));
        }
        Ok(())
    }
}

/// One polygon: an outer ring and optional holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Self { exterior, holes }
    }

    /// Axis-aligned rectangle as a polygon.
    pub fn rect(r: Rect) -> Self {
        Self::new(
            Ring(vec![
                [r.west, r.south],
                [r.east, r.south],
                [r.east, r.north],
                [r.west, r.north],
            ]),
            Vec::new(),
        )
    }

    pub fn area(&self) -> f64 {
        self.exterior.area() - self.holes.iter().map(Ring::area).sum::<f64>()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

/// Multi-polygon geometry of an administrative unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolygon(pub Vec<Polygon>);

impl MultiPolygon {
    pub fn polygons(&self) -> &[Polygon] {
        &self.0
    }

    /// Planar area in degrees².
    pub fn area(&self) -> f64 {
        self.0.iter().map(Polygon::area).sum()
    }

    pub fn bbox(&self) -> Option<Rect> {
        self.0
            .iter()
            .map(|p| p.exterior.bbox())
            .reduce(|a, b| Rect::new(a.west.min(b.west), a.south.min(b.south), a.east.max(b.east), a.north.max(b.north)))
    }

    pub fn translated(&self, dlon: f64, dlat: f64) -> MultiPolygon {
        MultiPolygon(
            self.0
                .iter()
                .map(|p| {
                    Polygon::new(
                        p.exterior.translated(dlon, dlat),
                        p.holes.iter().map(|h| h.translated(dlon, dlat)).collect(),
                    )
                })
                .collect(),
        )
    }

    /// Check the structural invariants: simple closed rings in range,
    /// holes inside their outer ring, no antimeridian crossing.
    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::EmptyGeometry("multi-polygon has no polygons".into()));
        }
        for poly in &self.0 {
            poly.exterior.validate()?;
            for hole in &poly.holes {
                hole.validate()?;
                let inside = hole
                    .points()
                    .iter()
                    .all(|&p| poly.exterior.contains(p) || on_ring_boundary(poly.exterior.points(), p));
                if !inside {
                    return Err(Error::InvalidGeometry(
                        "interior ring lies outside its outer ring".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An administrative unit (country or first-level subdivision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminUnit {
    pub unit_id: String,
    pub level: AdminLevel,
    pub name: String,
    pub geometry: MultiPolygon,
}

impl AdminUnit {
    pub fn new(
        unit_id: impl Into<String>,
        level: AdminLevel,
        name: impl Into<String>,
        geometry: MultiPolygon,
    ) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            unit_id: unit_id.into(),
            level,
            name: name.into(),
            geometry,
        })
    }
}

/// Sparse unit → {(cell, fraction)} mapping on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    pub level: AdminLevel,
    pub grid: GridSpec,
    entries: BTreeMap<String, Vec<(usize, f64)>>,
}

impl CoverageMatrix {
    /// Assemble a matrix from precomputed entries, checking fractions and cell indices.
    pub fn from_entries(
        level: AdminLevel,
        grid: GridSpec,
        entries: BTreeMap<String, Vec<(usize, f64)>>,
    ) -> Result<Self> {
        let mut entries = entries;
        for (unit, cells) in entries.iter_mut() {
            for &(cell, f) in cells.iter() {
                if cell >= grid.n_cells() {
                    return Err(Error::Shape(format!(
                        "unit {unit}: cell {cell} outside a {}-cell grid",
                        grid.n_cells()
                    )));
                }
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Validation(format!(
                        "unit {unit}: fraction {f} outside (0, 1]"
                    )));
                }
            }
            cells.sort_by_key(|&(cell, _)| cell);
        }
        Ok(Self {
            level,
            grid,
            entries,
        })
    }

    /// Cells intersecting `unit` with their fractions, ordered by cell index.
    pub fn cells(&self, unit: &str) -> Option<&[(usize, f64)]> {
        self.entries.get(unit).map(Vec::as_slice)
    }

    /// Unit ids in ascending order.
    pub fn unit_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(usize, f64)])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_entries(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// Fraction of `cell` covered by `geometry`, in `[0, 1]`.
pub fn polygon_cell_fraction(geometry: &MultiPolygon, cell: &Rect) -> Result<f64> {
    if !(geometry.area() > 0.0) {
        return Err(Error::EmptyGeometry("geometry has zero area".into()));
    }
    if !(cell.area() > 0.0) {
        return Err(Error::Domain("cell rectangle has zero area".into()));
    }
    Ok((intersection_area(geometry, cell) / cell.area()).clamp(0.0, 1.0))
}

fn intersection_area(geometry: &MultiPolygon, cell: &Rect) -> f64 {
    let mut area = 0.0;
    for poly in geometry.polygons() {
        if !poly.exterior.bbox().intersects(cell) {
            continue;
        }
        area += shoelace(&clip_to_rect(poly.exterior.points(), cell)).abs();
        for hole in &poly.holes {
            if hole.bbox().intersects(cell) {
                area -= shoelace(&clip_to_rect(hole.points(), cell)).abs();
            }
        }
    }
    area
}

/// Compute the coverage of every unit over `grid`.
///
/// Each unit only visits cells inside its bounding box; rings are first cut
/// to each row band, then to each cell of the band.
pub fn build_coverage(
    level: AdminLevel,
    units: &[AdminUnit],
    grid: &GridSpec,
) -> Result<CoverageMatrix> {
    let mut seen = HashSet::new();
    for unit in units {
        if unit.level != level {
            return Err(Error::Validation(format!(
                "unit {} is {}, coverage requested for {}",
                unit.unit_id, unit.level, level
            )));
        }
        if !seen.insert(unit.unit_id.as_str()) {
            return Err(Error::KeyCollision(unit.unit_id.clone()));
        }
    }

    let computed: Vec<(String, Vec<(usize, f64)>)> = units
        .par_iter()
        .map(|unit| {
            if !(unit.geometry.area() > 0.0) {
                return Err(Error::EmptyGeometry(format!(
                    "unit {} has zero area",
                    unit.unit_id
                )));
            }
            Ok((unit.unit_id.clone(), unit_coverage(&unit.geometry, grid)))
        })
        .collect::<Result<_>>()?;

    CoverageMatrix::from_entries(level, *grid, computed.into_iter().collect())
}

fn unit_coverage(geometry: &MultiPolygon, grid: &GridSpec) -> Vec<(usize, f64)> {
    let Some(bbox) = geometry.bbox() else {
        return Vec::new();
    };
    let Some((rows, cols)) = grid.cells_intersecting(&bbox) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut band_rings: Vec<(Vec<Point>, f64)> = Vec::new();
    for row in rows {
        let band = {
            let r = grid.cell_rect(row, cols.start);
            let e = grid.cell_rect(row, cols.end - 1);
            Rect::new(r.west, r.south, e.east, r.north)
        };
        band_rings.clear();
        for poly in geometry.polygons() {
            for (k, ring) in poly.rings().enumerate() {
                if !ring.bbox().intersects(&band) {
                    continue;
                }
                let clipped = clip_to_rect(ring.points(), &band);
                if clipped.len() >= 3 {
                    band_rings.push((clipped, if k == 0 { 1.0 } else { -1.0 }));
                }
            }
        }
        if band_rings.is_empty() {
            continue;
        }
        for col in cols.clone() {
            let cell = grid.cell_rect(row, col);
            let area: f64 = band_rings
                .iter()
                .filter(|(ring, _)| bbox_of(ring).intersects(&cell))
                .map(|(ring, sign)| sign * shoelace(&clip_to_rect(ring, &cell)).abs())
                .sum();
            let fraction = (area / cell.area()).clamp(0.0, 1.0);
            if fraction >= MIN_FRACTION {
                out.push((grid.index(row, col), fraction));
            }
        }
    }
    out
}

/// Signed shoelace area of an open ring (counter-clockwise positive).
pub fn shoelace(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    // Shift to the first vertex to limit cancellation on small cells far from the origin.
    let [ox, oy] = pts[0];
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        twice += (a[0] - ox) * (b[1] - oy) - (b[0] - ox) * (a[1] - oy);
    }
    twice / 2.0
}

/// Sutherland–Hodgman clip of a ring against an axis-aligned rectangle.
pub fn clip_to_rect(ring: &[Point], rect: &Rect) -> Vec<Point> {
    let mut out = ring.to_vec();
    out = clip_half_plane(&out, |p| p[0] >= rect.west, |a, b| cross_x(a, b, rect.west));
    out = clip_half_plane(&out, |p| p[0] <= rect.east, |a, b| cross_x(a, b, rect.east));
    out = clip_half_plane(&out, |p| p[1] >= rect.south, |a, b| cross_y(a, b, rect.south));
    out = clip_half_plane(&out, |p| p[1] <= rect.north, |a, b| cross_y(a, b, rect.north));
    out
}

fn clip_half_plane(
    ring: &[Point],
    inside: impl Fn(&Point) -> bool,
    intersect: impl Fn(&Point, &Point) -> Point,
) -> Vec<Point> {
    let n = ring.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n + 4);
    let mut prev = ring[n - 1];
    let mut prev_in = inside(&prev);
    for &cur in ring {
        let cur_in = inside(&cur);
        if cur_in {
            if !prev_in {
                out.push(intersect(&prev, &cur));
            }
            out.push(cur);
        } else if prev_in {
            out.push(intersect(&prev, &cur));
        }
        prev = cur;
        prev_in = cur_in;
    }
    out
}

fn cross_x(a: &Point, b: &Point, x: f64) -> Point {
    let t = (x - a[0]) / (b[0] - a[0]);
    [x, a[1] + t * (b[1] - a[1])]
}

fn cross_y(a: &Point, b: &Point, y: f64) -> Point {
    let t = (y - a[1]) / (b[1] - a[1]);
    [a[0] + t * (b[0] - a[0]), y]
}

fn bbox_of(pts: &[Point]) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        r.west = r.west.min(p[0]);
        r.east = r.east.max(p[0]);
        r.south = r.south.min(p[1]);
        r.north = r.north.max(p[1]);
    }
    r
}

fn point_in_ring(pts: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = pts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn on_ring_boundary(pts: &[Point], p: Point) -> bool {
    let n = pts.len();
    (0..n).any(|i| on_segment(pts[i], pts[(i + 1) % n], p))
}

fn orientation(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    orientation(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(q1, q2, p1) || on_segment(q1, q2, p2) || on_segment(p1, p2, q1) || on_segment(p1, p2, q2)
}

/// Whether the ring has no intersections between non-adjacent edges.
/// Sweeps edges sorted by their western end.
fn ring_is_simple(pts: &[Point]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let mut edges: Vec<(usize, f64, f64)> = (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            (i, a[0].min(b[0]), a[0].max(b[0]))
        })
        .collect();
    edges.sort_by(|x, y| x.1.total_cmp(&y.1));
    for (k, &(i, _, max_x)) in edges.iter().enumerate() {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for &(j, min_x, _) in &edges[k + 1..] {
            if min_x > max_x {
                break;
            }
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                // Adjacent edges may only share their common vertex; a
                // folded-back spike makes them overlap.
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                let shared = if (i + 1) % n == j { b } else { a };
                let far_i = if shared == a { b } else { a };
                let far_j = if shared == c { d } else { c };
                if on_segment(shared, far_i, far_j) || on_segment(shared, far_j, far_i) {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
