//! A small data directory: ERA5-like daily temperature and precipitation on
//! an 8×8 window at 0.25°, CSIC-like monthly SPEI at 0.5°, every weight
//! scheme for base year 2015 (concurrent for 2000), and two boundary levels.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use wclim::{router, AppState, ServiceConfig};
use wclim_core::io::{write_climate, write_raster, WriteOptions};
use wclim_core::temporal::VariableKind;
use wclim_core::time::{Frequency, TimeAxis};
use wclim_core::{ClimateField, Grid, GridSpec, Source};

pub const FIRST_YEAR: i32 = 2000;
pub const LAST_YEAR: i32 = 2001;

/// Climate frame: centers on multiples of 0.25°.
pub fn era5_grid() -> GridSpec {
    GridSpec::new(10.0, 20.0, 0.25, 8, 8).unwrap()
}

pub fn csic_grid() -> GridSpec {
    GridSpec::new(9.75, 20.25, 0.5, 4, 4).unwrap()
}

/// Socio-economic frame: cell edges on multiples of 0.25°.
pub fn socio_grid() -> GridSpec {
    GridSpec::new(10.125, 19.875, 0.25, 10, 10).unwrap()
}

/// Twice as fine as the socio-economic frame, same outer edges.
pub fn fine_grid() -> GridSpec {
    GridSpec::new(10.1875, 19.8125, 0.125, 20, 20).unwrap()
}

pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
}

fn rect(w: f64, s: f64, e: f64, n: f64) -> Value {
    json!([[[w, s], [e, s], [e, n], [w, n], [w, s]]])
}

/// Concave L-shaped unit.
fn ell() -> Value {
    json!([[[20.9, 8.0], [21.85, 8.0], [21.85, 9.0], [21.4, 9.0], [21.4, 10.0], [20.9, 10.0], [20.9, 8.0]]])
}

fn feature(props: Value, coords: Value) -> Value {
    json!({ "type": "Feature", "properties": props, "geometry": { "type": "Polygon", "coordinates": coords } })
}

fn write_json(path: &Path, value: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

fn daily_field(variable: VariableKind, rng: &mut ChaCha8Rng) -> ClimateField {
    let grid = era5_grid();
    let time = TimeAxis::years(Frequency::Daily, FIRST_YEAR, LAST_YEAR).unwrap();
    let planes = (0..time.len())
        .map(|t| {
            let season = (t as f64 / 365.25 * std::f64::consts::TAU).sin();
            (0..grid.n_cells())
                .map(|j| {
                    let (r, c) = grid.row_col(j);
                    // Last column is sea: no data.
                    if c == grid.n_cols - 1 || rng.gen_bool(0.01) {
                        return f64::NAN;
                    }
                    match variable {
                        VariableKind::Precipitation => {
                            if rng.gen_bool(0.6) {
                                0.0
                            } else {
                                rng.gen_range(0.1..40.0)
                            }
                        }
                        _ => 24.0 + 8.0 * season - 0.8 * r as f64 + rng.gen_range(-4.0..4.0),
                    }
                })
                .collect()
        })
        .collect();
    ClimateField::new(variable, Source::Era5, grid, time, planes).unwrap()
}

fn spei_field(rng: &mut ChaCha8Rng) -> ClimateField {
    let grid = csic_grid();
    let time = TimeAxis::years(Frequency::Monthly, FIRST_YEAR, LAST_YEAR).unwrap();
    let planes = (0..time.len())
        .map(|_| (0..grid.n_cells()).map(|_| rng.gen_range(-2.5..2.5)).collect())
        .collect();
    ClimateField::new(VariableKind::Spei, Source::Csic, grid, time, planes).unwrap()
}

impl Fixture {
    pub fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Fixture::write(&root);
        Fixture { _dir: dir, root }
    }

    pub fn write(root: &Path) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for sub in ["climate/era5", "climate/csic", "weights", "boundaries"] {
            std::fs::create_dir_all(root.join(sub)).unwrap();
        }
        // ERA5 stores latitude north-first and longitude 0..360; both are
        // fine here because the window does not wrap.
        write_climate(
            root.join("climate/era5/temperature_avg_daily.nc"),
            &daily_field(VariableKind::TemperatureAvg, &mut rng),
            WriteOptions::default(),
        )
        .unwrap();
        write_climate(
            root.join("climate/era5/precipitation_daily.nc"),
            &daily_field(VariableKind::Precipitation, &mut rng),
            WriteOptions { lat_ascending: true, ..Default::default() },
        )
        .unwrap();
        write_climate(root.join("climate/csic/spei_monthly.nc"), &spei_field(&mut rng), WriteOptions::default()).unwrap();

        let fine = fine_grid();
        let socio = socio_grid();
        let dn = Grid::from_fn(fine, "DN", |_, _| f64::from(rng.gen_range(0u8..=63)));
        let crop = Grid::from_fn(fine, "km2", |r, _| if r < 4 { 0.0 } else { rng.gen_range(0.0..12.0) });
        let density = Grid::from_fn(socio, "persons/km2", |_, _| rng.gen_range(0.0..800.0));
        let counts = Grid::from_fn(socio, "persons", |_, _| rng.gen_range(0.0..5e4));
        write_raster(root.join("weights/nightlight_2015.nc"), "dn", &dn, WriteOptions::default()).unwrap();
        write_raster(root.join("weights/cropland_2015.nc"), "cropland", &crop, WriteOptions::default()).unwrap();
        write_raster(root.join("weights/population_2015.nc"), "density", &density, WriteOptions::default()).unwrap();
        write_raster(root.join("weights/concurrent_2000.nc"), "population", &counts, WriteOptions::default()).unwrap();

        let gadm0 = json!({
            "type": "FeatureCollection",
            "features": [
                feature(json!({ "GID_0": "AAA", "COUNTRY": "Aland" }), rect(19.9, 7.9, 20.9, 10.1)),
                feature(json!({ "GID_0": "BBB", "COUNTRY": "Beland" }), ell()),
                feature(json!({ "GID_0": "ZZZ", "COUNTRY": "Farland" }), rect(50.0, 50.0, 51.0, 51.0)),
            ]
        });
        let gadm1 = json!({
            "type": "FeatureCollection",
            "features": [
                feature(json!({ "GID_0": "AAA", "GID_1": "AAA.1_1", "NAME_1": "North" }), rect(19.9, 9.0, 20.9, 10.1)),
                feature(json!({ "GID_0": "AAA", "GID_1": "AAA.2_1", "NAME_1": "South" }), rect(19.9, 7.9, 20.9, 9.0)),
                feature(json!({ "GID_0": "BBB", "GID_1": "BBB.1_1", "NAME_1": "Bend" }), ell()),
                feature(json!({ "GID_0": "ZZZ", "GID_1": "ZZZ.1_1", "NAME_1": "Far" }), rect(50.0, 50.0, 51.0, 51.0)),
            ]
        });
        write_json(&root.join("boundaries/gadm0.geojson"), &gadm0);
        write_json(&root.join("boundaries/gadm1.geojson"), &gadm1);
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn state(&self) -> Arc<AppState> {
        Arc::new(AppState::open(&self.root, ServiceConfig::default()))
    }
}

pub async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, Option<String>) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => request
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = router(state.clone()).oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes, content_type)
}

pub async fn call_json(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes, _) = call(state, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

/// Error code of an error response.
pub fn code(body: &Value) -> &str {
    body["error"]["code"].as_str().unwrap_or("")
}
