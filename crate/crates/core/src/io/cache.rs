//! On-disk cache of coverage matrices.
//!
//! Each matrix is stored as a Parquet file with columns
//! `unit_id, cell_index, fraction`, named by a SHA-256 of the boundary file
//! bytes, the level and the grid geometry. Units that touch no cell are kept
//! as a single row with null cell and fraction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arrow_array::{Array, ArrayRef, Float64Array, RecordBatch, StringArray, UInt64Array};
use arrow_schema::{DataType, Field, Schema};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use sha2::{Digest, Sha256};

use crate::boundaries::{build_coverage, AdminLevel, CoverageMatrix};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::geojson::parse_boundaries;
use crate::io::table::write_atomic;

/// Cache key for a boundary file's bytes at `level` on `grid`.
pub fn coverage_key(boundaries: &[u8], level: AdminLevel, grid: &GridSpec) -> String {
    let mut h = Sha256::new();
    h.update(b"coverage/v1\0");
    h.update(Sha256::digest(boundaries));
    h.update(level.as_str().as_bytes());
    for x in [grid.lat_origin, grid.lon_origin, grid.resolution] {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update((grid.n_rows as u64).to_le_bytes());
    h.update((grid.n_cols as u64).to_le_bytes());
    hex::encode(h.finalize())
}

/// Serialize a matrix to Parquet bytes.
pub fn coverage_to_parquet(cov: &CoverageMatrix) -> Result<Vec<u8>> {
    let mut units = Vec::new();
    let mut cells = Vec::new();
    let mut fractions = Vec::new();
    for (unit, entries) in cov.iter() {
        if entries.is_empty() {
            units.push(unit);
            cells.push(None);
            fractions.push(None);
        }
        for &(cell, f) in entries {
            units.push(unit);
            cells.push(Some(cell as u64));
            fractions.push(Some(f));
        }
    }
    let schema = Arc::new(Schema::new(vec![
        Field::new("unit_id", DataType::Utf8, false),
        Field::new("cell_index", DataType::UInt64, true),
        Field::new("fraction", DataType::Float64, true),
    ]));
    let columns: Vec<ArrayRef> = vec![
        Arc::new(StringArray::from_iter_values(units)),
        Arc::new(UInt64Array::from(cells)),
        Arc::new(Float64Array::from(fractions)),
    ];
    let batch = RecordBatch::try_new(schema.clone(), columns)?;
    let mut buf = Vec::new();
    let mut writer = ArrowWriter::try_new(&mut buf, schema, None)?;
    writer.write(&batch)?;
    writer.close()?;
    Ok(buf)
}

/// Parse bytes from [`coverage_to_parquet`].
pub fn coverage_from_parquet(bytes: &[u8], level: AdminLevel, grid: GridSpec) -> Result<CoverageMatrix> {
    let reader = ParquetRecordBatchReaderBuilder::try_new(bytes::Bytes::copy_from_slice(bytes))?.build()?;
    let mut entries: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    let bad = |name: &str| Error::Format(format!("coverage cache lacks column `{name}`"));
    for batch in reader {
        let batch = batch?;
        let units = batch
            .column_by_name("unit_id")
            .and_then(|c| c.as_any().downcast_ref::<StringArray>())
            .ok_or_else(|| bad("unit_id"))?;
        let cells = batch
            .column_by_name("cell_index")
            .and_then(|c| c.as_any().downcast_ref::<UInt64Array>())
            .ok_or_else(|| bad("cell_index"))?;
        let fractions = batch
            .column_by_name("fraction")
            .and_then(|c| c.as_any().downcast_ref::<Float64Array>())
            .ok_or_else(|| bad("fraction"))?;
        for i in 0..batch.num_rows() {
            let row = entries.entry(units.value(i).to_string()).or_default();
            if !cells.is_null(i) && !fractions.is_null(i) {
                row.push((cells.value(i) as usize, fractions.value(i)));
            }
        }
    }
    CoverageMatrix::from_entries(level, grid, entries)
}

/// Directory of cached coverage matrices.
#[derive(Debug, Clone)]
pub struct CoverageCache {
    dir: PathBuf,
}

impl CoverageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("coverage-{key}.parquet"))
    }

    /// Load the matrix for `boundaries` at `level` on `grid`, computing and
    /// storing it on a miss. Returns the matrix and whether it was cached.
    pub fn load_or_build(
        &self,
        boundaries: &Path,
        level: AdminLevel,
        grid: &GridSpec,
    ) -> Result<(CoverageMatrix, bool)> {
        let bytes = std::fs::read(boundaries)?;
        let key = coverage_key(&bytes, level, grid);
        let path = self.path_for(&key);
        if let Ok(cached) = std::fs::read(&path) {
            if let Ok(cov) = coverage_from_parquet(&cached, level, *grid) {
                return Ok((cov, true));
            }
        }
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::Format(format!("boundary file is not UTF-8: {e}")))?;
        let units = parse_boundaries(&text, level)?;
        let cov = build_coverage(level, &units, grid)?;
        std::fs::create_dir_all(&self.dir)?;
        write_atomic(&path, &coverage_to_parquet(&cov)?)?;
        Ok((cov, false))
    }
}
