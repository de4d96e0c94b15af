//! File formats: NetCDF climate rasters, GeoJSON boundaries, tabular exports
//! and the coverage cache.

pub mod cache;
pub mod geojson;
pub mod netcdf;
pub mod table;

pub use cache::CoverageCache;
pub use geojson::{read_boundaries, units_to_geojson};
pub use netcdf::{probe_climate, read_climate, read_raster, write_climate, write_raster, WriteOptions};
pub use table::{export_table, read_table, render_table, write_atomic, TableFormat, TableLayout, TableMeta};
