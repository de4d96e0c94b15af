//! Data-directory index.
//!
//! Expected layout:
//!
//! ```text
//! <root>/climate/<source>/<variable>_<frequency>.nc
//! <root>/weights/<scheme>_<year>.nc       population, nightlight, cropland
//! <root>/weights/concurrent_<decade>.nc
//! <root>/boundaries/gadm0.geojson
//! <root>/boundaries/gadm1.geojson
//! <root>/cache/                           coverage matrices
//! <root>/index.json                       optional, written by `wclim index`
//! ```
//!
//! Without `index.json` the directory is scanned on open.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wclim_core::extremes::ThresholdMode;
use wclim_core::io::{probe_climate, write_atomic, TableFormat, TableLayout};
use wclim_core::temporal::VariableKind;
use wclim_core::time::Frequency;
use wclim_core::weights::{concurrent_base_year, WeightKind, BASE_YEARS};
use wclim_core::{AdminLevel, GridSpec, Source};

use crate::error::{ApiError, ErrorCode};
use crate::query::{result_id, Query};

pub const INDEX_FILE: &str = "index.json";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateFile {
    pub path: String,
    pub source: Source,
    pub variable: VariableKind,
    pub frequency: Frequency,
    pub years: (i32, i32),
    pub grid: GridSpec,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightFile {
    pub path: String,
    pub kind: WeightKind,
    /// Base year, or decade start for concurrent layers.
    pub year: i32,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFile {
    pub path: String,
    pub level: AdminLevel,
    pub sha256: String,
}

/// A file the scan could not use, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Index {
    pub version: u32,
    pub climate: Vec<ClimateFile>,
    pub weights: Vec<WeightFile>,
    pub boundaries: Vec<BoundaryFile>,
    #[serde(default)]
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    root: PathBuf,
    index: Index,
}

/// Files and years one query reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub query: Query,
    pub climate: ClimateFile,
    pub boundaries: BoundaryFile,
    pub weights: Vec<WeightFile>,
    /// Inclusive years read from the climate file.
    pub years: (i32, i32),
    pub id: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut h = Sha256::new();
    std::io::copy(&mut file, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn sorted_entries(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.sort();
    Ok(out)
}

fn io_err(path: &Path, err: std::io::Error) -> ApiError {
    ApiError::internal(format!("{}: {err}", path.display()))
}

impl Catalog {
    /// Load `index.json` if present, otherwise scan `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Catalog, ApiError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(ApiError::new(
                ErrorCode::NotIndexed,
                format!("data directory {} does not exist", root.display()),
            ));
        }
        let index_path = root.join(INDEX_FILE);
        if index_path.exists() {
            let text = fs::read(&index_path).map_err(|e| io_err(&index_path, e))?;
            let index: Index = serde_json::from_slice(&text).map_err(|e| {
                ApiError::new(ErrorCode::IndexCorrupt, format!("{}: {e}", index_path.display()))
            })?;
            if index.version != INDEX_VERSION {
                return Err(ApiError::new(
                    ErrorCode::IndexCorrupt,
                    format!("index version {} is not {INDEX_VERSION}", index.version),
                ));
            }
            return Ok(Catalog { root, index });
        }
        Catalog::scan(root)
    }

    /// Build the index by reading every file header under `root`.
    pub fn scan(root: impl Into<PathBuf>) -> Result<Catalog, ApiError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(ApiError::new(
                ErrorCode::NotIndexed,
                format!("data directory {} does not exist", root.display()),
            ));
        }
        let mut index = Index {
            version: INDEX_VERSION,
            climate: Vec::new(),
            weights: Vec::new(),
            boundaries: Vec::new(),
            skipped: Vec::new(),
        };
        let rel = |p: &Path| {
            p.strip_prefix(&root)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/")
        };

        let climate_dir = root.join("climate");
        if climate_dir.is_dir() {
            for source_dir in sorted_entries(&climate_dir).map_err(|e| io_err(&climate_dir, e))? {
                if !source_dir.is_dir() {
                    continue;
                }
                for path in sorted_entries(&source_dir).map_err(|e| io_err(&source_dir, e))? {
                    if path.extension().and_then(|e| e.to_str()) != Some("nc") {
                        continue;
                    }
                    match scan_climate(&source_dir, &path) {
                        Ok((source, variable, frequency, years, grid)) => {
                            let sha256 = sha256_file(&path).map_err(|e| io_err(&path, e))?;
                            index.climate.push(ClimateFile {
                                path: rel(&path),
                                source,
                                variable,
                                frequency,
                                years,
                                grid,
                                sha256,
                            });
                        }
                        Err(reason) => {
                            tracing::warn!(path = %path.display(), %reason, "skipping climate file");
                            index.skipped.push(Skipped { path: rel(&path), reason });
                        }
                    }
                }
            }
        }

        let weights_dir = root.join("weights");
        if weights_dir.is_dir() {
            for path in sorted_entries(&weights_dir).map_err(|e| io_err(&weights_dir, e))? {
                if path.extension().and_then(|e| e.to_str()) != Some("nc") {
                    continue;
                }
                match parse_weight_name(&path) {
                    Ok((kind, year)) => {
                        let sha256 = sha256_file(&path).map_err(|e| io_err(&path, e))?;
                        index.weights.push(WeightFile {
                            path: rel(&path),
                            kind,
                            year,
                            sha256,
                        });
                    }
                    Err(reason) => index.skipped.push(Skipped { path: rel(&path), reason }),
                }
            }
        }

        let boundaries_dir = root.join("boundaries");
        if boundaries_dir.is_dir() {
            for path in sorted_entries(&boundaries_dir).map_err(|e| io_err(&boundaries_dir, e))? {
                if path.extension().and_then(|e| e.to_str()) != Some("geojson") {
                    continue;
                }
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
                match stem.parse::<AdminLevel>() {
                    Ok(level) => {
                        let sha256 = sha256_file(&path).map_err(|e| io_err(&path, e))?;
                        index.boundaries.push(BoundaryFile {
                            path: rel(&path),
                            level,
                            sha256,
                        });
                    }
                    Err(e) => index.skipped.push(Skipped {
                        path: rel(&path),
                        reason: e.to_string(),
                    }),
                }
            }
        }
        Ok(Catalog { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    /// Persist the index so later opens skip the scan.
    pub fn write_index(&self) -> Result<PathBuf, ApiError> {
        let path = self.root.join(INDEX_FILE);
        let mut bytes = serde_json::to_vec_pretty(&self.index).map_err(ApiError::internal)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    pub fn boundaries(&self, level: AdminLevel) -> Option<&BoundaryFile> {
        self.index.boundaries.iter().find(|b| b.level == level)
    }

    /// Catalog document served at `GET /api/v1/catalog`.
    pub fn document(&self) -> Value {
        let mut by_source: BTreeMap<Source, BTreeMap<VariableKind, Vec<&ClimateFile>>> = BTreeMap::new();
        for f in &self.index.climate {
            by_source
                .entry(f.source)
                .or_default()
                .entry(f.variable)
                .or_default()
                .push(f);
        }
        let sources: Vec<Value> = by_source
            .iter()
            .map(|(source, vars)| {
                let variables: Vec<Value> = vars
                    .iter()
                    .map(|(variable, files)| {
                        let finest = files.iter().map(|f| f.frequency).min().expect("non-empty");
                        let frequencies: Vec<&str> = [Frequency::Daily, Frequency::Monthly, Frequency::Annual]
                            .into_iter()
                            .filter(|&f| f >= finest)
                            .filter(|&f| !(*variable == VariableKind::Spei && f == Frequency::Annual))
                            .map(|f| f.as_str())
                            .collect();
                        let first = files.iter().map(|f| f.years.0).min().expect("non-empty");
                        let last = files.iter().map(|f| f.years.1).max().expect("non-empty");
                        json!({
                            "variable": variable.as_str(),
                            "units": variable.units(),
                            "frequencies": frequencies,
                            "years": [first, last],
                            "thresholds": *source == Source::Era5 && finest <= Frequency::Daily,
                            "files": files.iter().map(|f| json!({
                                "frequency": f.frequency.as_str(),
                                "years": [f.years.0, f.years.1],
                            })).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                let first = vars.values().flatten().map(|f| f.years.0).min();
                let last = vars.values().flatten().map(|f| f.years.1).max();
                json!({
                    "source": source.as_str(),
                    "years": [first, last],
                    "variables": variables,
                })
            })
            .collect();

        let mut weights = Vec::new();
        if !self.index.climate.is_empty() {
            weights.push(json!({ "scheme": "unweighted", "base_years": [] }));
        }
        for kind in [WeightKind::Population, WeightKind::Nightlight, WeightKind::Cropland] {
            let years: BTreeSet<i32> = self
                .index
                .weights
                .iter()
                .filter(|w| w.kind == kind)
                .map(|w| w.year)
                .collect();
            if !years.is_empty() {
                weights.push(json!({ "scheme": kind.as_str(), "base_years": years }));
            }
        }
        let decades: BTreeSet<i32> = self
            .index
            .weights
            .iter()
            .filter(|w| w.kind == WeightKind::Concurrent)
            .map(|w| w.year)
            .collect();
        if !decades.is_empty() {
            weights.push(json!({ "scheme": "concurrent", "base_years": [], "decades": decades }));
        }

        let threshold_modes: Vec<&str> = [ThresholdMode::Absolute, ThresholdMode::Relative, ThresholdMode::Cumulative]
            .iter()
            .map(|m| m.as_str())
            .collect();
        let levels: BTreeSet<&str> = self.index.boundaries.iter().map(|b| b.level.as_str()).collect();
        json!({
            "sources": sources,
            "weights": weights,
            "levels": levels,
            "layouts": TableLayout::ALL.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
            "formats": TableFormat::ALL.iter().map(|f| f.as_str()).collect::<Vec<_>>(),
            "threshold_modes": threshold_modes,
            "skipped": self.index.skipped,
        })
    }

    /// Choose the files a validated query reads and derive its result id.
    pub fn plan(&self, query: &Query) -> Result<Plan, ApiError> {
        let files: Vec<&ClimateFile> = self
            .index
            .climate
            .iter()
            .filter(|f| f.source == query.source && f.variable == query.variable)
            .collect();
        if files.is_empty() {
            return Err(ApiError::new(
                ErrorCode::DataUnavailable,
                format!("no {} file for {} in the data directory", query.variable, query.source),
            ));
        }
        // Thresholds count days, so they need a daily (or hourly) input.
        let finest_needed = if query.threshold.is_some() {
            Frequency::Daily
        } else {
            query.frequency
        };
        let mut usable: Vec<&ClimateFile> = files
            .iter()
            .copied()
            .filter(|f| f.frequency <= finest_needed)
            .collect();
        if usable.is_empty() {
            let have: BTreeSet<&str> = files.iter().map(|f| f.frequency.as_str()).collect();
            return Err(if query.threshold.is_some() {
                ApiError::new(
                    ErrorCode::ThresholdRequiresEra5Daily,
                    format!("thresholds need daily {} data; available: {have:?}", query.variable),
                )
            } else {
                ApiError::new(
                    ErrorCode::FrequencyUnavailable,
                    format!(
                        "{} {} cannot be produced from the available frequencies {have:?}",
                        query.frequency, query.variable
                    ),
                )
            });
        }
        // Coarsest usable input first: less to read and aggregate.
        usable.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.path.cmp(&b.path)));
        let chosen = usable.iter().find_map(|f| {
            let years = query.input_years(f.years);
            (f.years.0 <= years.0 && years.1 <= f.years.1).then_some((*f, years))
        });
        let Some((climate, years)) = chosen else {
            let spans: Vec<String> = usable
                .iter()
                .map(|f| format!("{} {}-{}", f.frequency, f.years.0, f.years.1))
                .collect();
            let wanted = query.input_years(usable[0].years);
            return Err(ApiError::new(
                ErrorCode::TimeRangeOutsideCoverage,
                format!(
                    "years {}-{} are not covered by the {} {} files ({})",
                    wanted.0,
                    wanted.1,
                    query.source,
                    query.variable,
                    spans.join(", ")
                ),
            ));
        };

        let boundaries = self.boundaries(query.level).ok_or_else(|| {
            ApiError::new(
                ErrorCode::DataUnavailable,
                format!("no {} boundaries in the data directory", query.level),
            )
        })?;

        let weight_file = |kind: WeightKind, year: i32| {
            self.index
                .weights
                .iter()
                .find(|w| w.kind == kind && w.year == year)
                .cloned()
                .ok_or_else(|| {
                    ApiError::new(
                        ErrorCode::DataUnavailable,
                        format!("no {kind} weight layer for {year} in the data directory"),
                    )
                })
        };
        let weights = match query.scheme.kind {
            WeightKind::Unweighted => Vec::new(),
            WeightKind::Concurrent => {
                let decade = |y: i32| {
                    concurrent_base_year(y)
                        .map_err(|e| ApiError::new(ErrorCode::TimeRangeOutsideCoverage, e.to_string()))
                };
                let (first, last) = (decade(years.0)?, decade(years.1)?);
                (first..=last)
                    .step_by(10)
                    .map(|d| weight_file(WeightKind::Concurrent, d))
                    .collect::<Result<_, _>>()?
            }
            kind => {
                let year = query.scheme.base_year.expect("validated fixed-year scheme");
                vec![weight_file(kind, year)?]
            }
        };

        let mut fingerprints = BTreeMap::new();
        fingerprints.insert("climate".to_string(), climate.sha256.clone());
        fingerprints.insert("boundaries".to_string(), boundaries.sha256.clone());
        for w in &weights {
            fingerprints.insert(format!("weights/{}_{}", w.kind, w.year), w.sha256.clone());
        }
        let id = result_id(query, &fingerprints);
        Ok(Plan {
            query: query.clone(),
            climate: climate.clone(),
            boundaries: boundaries.clone(),
            weights,
            years,
            id,
        })
    }
}

type ClimateHeader = (Source, VariableKind, Frequency, (i32, i32), GridSpec);

fn scan_climate(source_dir: &Path, path: &Path) -> Result<ClimateHeader, String> {
    let source: Source = source_dir
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .parse()
        .map_err(|e: wclim_core::Error| e.to_string())?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let (var_name, freq_name) = stem
        .rsplit_once('_')
        .ok_or_else(|| format!("file name `{stem}` is not <variable>_<frequency>"))?;
    let variable: VariableKind = var_name.parse().map_err(|e: wclim_core::Error| e.to_string())?;
    let named: Frequency = freq_name.parse().map_err(|e: wclim_core::Error| e.to_string())?;
    if !source.supports(variable) {
        return Err(format!("{source} does not provide {variable}"));
    }
    let (grid, time) = probe_climate(path, variable, source).map_err(|e| e.to_string())?;
    if time.frequency() != named {
        return Err(format!(
            "file name says {named} but the time axis is {}",
            time.frequency()
        ));
    }
    let (Some(first), Some(last)) = (time.first_year(), time.last_year()) else {
        return Err("empty time axis".into());
    };
    Ok((source, variable, named, (first, last), grid))
}

fn parse_weight_name(path: &Path) -> Result<(WeightKind, i32), String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let (kind, year) = stem
        .rsplit_once('_')
        .ok_or_else(|| format!("file name `{stem}` is not <scheme>_<year>"))?;
    let kind: WeightKind = kind.parse().map_err(|e: wclim_core::Error| e.to_string())?;
    let year: i32 = year
        .parse()
        .map_err(|_| format!("`{year}` is not a year"))?;
    match kind {
        WeightKind::Unweighted => Err("unweighted needs no layer".into()),
        WeightKind::Concurrent => match concurrent_base_year(year) {
            Ok(d) if d == year => Ok((kind, year)),
            _ => Err(format!("concurrent layers are named by decade start, got {year}")),
        },
        _ if BASE_YEARS.contains(&year) => Ok((kind, year)),
        _ => Err(format!("{year} is not one of the base years {BASE_YEARS:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_names() {
        assert_eq!(
            parse_weight_name(Path::new("weights/nightlight_2015.nc")).unwrap(),
            (WeightKind::Nightlight, 2015)
        );
        assert_eq!(
            parse_weight_name(Path::new("concurrent_1900.nc")).unwrap(),
            (WeightKind::Concurrent, 1900)
        );
        assert!(parse_weight_name(Path::new("concurrent_1907.nc")).is_err());
        assert!(parse_weight_name(Path::new("population_2012.nc")).is_err());
        assert!(parse_weight_name(Path::new("unweighted_2015.nc")).is_err());
    }

    #[test]
    fn missing_directory_is_not_indexed() {
        let err = Catalog::open("/nonexistent/wclim-data").unwrap_err();
        assert_eq!(err.code, ErrorCode::NotIndexed);
    }

    #[test]
    fn empty_directory_has_no_sources() {
        let dir = tempfile::tempdir().unwrap();
        let cat = Catalog::open(dir.path()).unwrap();
        assert_eq!(cat.document()["sources"], json!([]));
    }

    #[test]
    fn corrupt_index() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(INDEX_FILE), b"{\"version\": 1, \"climate\": [").unwrap();
        assert_eq!(Catalog::open(dir.path()).unwrap_err().code, ErrorCode::IndexCorrupt);
        fs::write(dir.path().join(INDEX_FILE), b"{\"version\": 9, \"climate\": [], \"weights\": [], \"boundaries\": []}").unwrap();
        assert_eq!(Catalog::open(dir.path()).unwrap_err().code, ErrorCode::IndexCorrupt);
    }
}
