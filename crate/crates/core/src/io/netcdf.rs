//! NetCDF-3 (classic and 64-bit offset) climate and raster files.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use netcdf3::{DataSet, DataType, DataVector, FileReader, FileWriter, Version};

use crate::aggregate::{ClimateField, Source};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::temporal::VariableKind;
use crate::time::{Frequency, Period, TimeAxis};

const LAT_NAMES: [&str; 2] = ["lat", "latitude"];
const LON_NAMES: [&str; 2] = ["lon", "longitude"];
const TIME_NAMES: [&str; 2] = ["time", "valid_time"];
const UNIFORM_TOL: f64 = 1e-6;

/// Fill value written by [`write_climate`] and [`write_raster`].
pub const WRITE_FILL: f64 = -9999.0;

fn variable_aliases(kind: VariableKind) -> &'static [&'static str] {
    match kind {
        VariableKind::TemperatureAvg => &["temperature_avg", "t2m", "tas", "tmp", "air"],
        VariableKind::TemperatureMin => &["temperature_min", "mn2t", "tasmin", "tmn"],
        VariableKind::TemperatureMax => &["temperature_max", "mx2t", "tasmax", "tmx"],
        VariableKind::Precipitation => &["precipitation", "tp", "pr", "pre", "precip"],
        VariableKind::WindGust => &["wind_gust", "fg10", "i10fg", "gust"],
        VariableKind::Spei => &["spei"],
    }
}

struct Ctx<'a> {
    path: &'a Path,
    variable: String,
}

impl Ctx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Ingestion {
            path: self.path.to_path_buf(),
            variable: self.variable.clone(),
            message: message.into(),
        }
    }
}

fn to_f64(data: DataVector) -> Vec<f64> {
    match data {
        DataVector::I8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::U8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I16(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F64(v) => v,
    }
}

fn numeric_attr(ds: &DataSet, var: &str, attr: &str) -> Option<f64> {
    let a = ds.get_var_attr(var, attr)?;
    match a.data_type() {
        DataType::I8 => a.get_i8().and_then(|v| v.first()).map(|&x| f64::from(x)),
        DataType::U8 => a.get_u8().and_then(|v| v.first()).map(|&x| f64::from(x)),
        DataType::I16 => a.get_i16().and_then(|v| v.first()).map(|&x| f64::from(x)),
        DataType::I32 => a.get_i32().and_then(|v| v.first()).map(|&x| f64::from(x)),
        DataType::F32 => a.get_f32().and_then(|v| v.first()).map(|&x| f64::from(x)),
        DataType::F64 => a.get_f64().and_then(|v| v.first()).copied(),
    }
}

fn find_name<'a>(ds: &DataSet, names: &[&'a str]) -> Option<&'a str> {
    names.iter().copied().find(|n| ds.has_var(n))
}

/// Affine map from canonical units: `canonical = raw * scale + offset`.
fn unit_conversion(kind: VariableKind, units: Option<&str>) -> Option<(f64, f64)> {
    let u = units.map(|u| u.trim().to_ascii_lowercase());
    let u = u.as_deref();
    match kind {
        VariableKind::TemperatureAvg | VariableKind::TemperatureMin | VariableKind::TemperatureMax => {
            match u? {
                "k" | "kelvin" | "degk" | "deg_k" => Some((1.0, -273.15)),
                "c" | "°c" | "degc" | "deg_c" | "celsius" | "degrees_celsius" | "degrees celsius" => {
                    Some((1.0, 0.0))
                }
                _ => None,
            }
        }
        VariableKind::Precipitation => match u? {
            "mm" | "mm/day" | "mm/month" | "mm/year" | "kg m-2" | "kg m**-2" | "kg/m2"
            | "kg/m^2" => Some((1.0, 0.0)),
            "cm" => Some((10.0, 0.0)),
            "m" => Some((1000.0, 0.0)),
            _ => None,
        },
        VariableKind::WindGust => match u? {
            "m/s" | "m s-1" | "m s**-1" | "m.s-1" | "m s^-1" => Some((1.0, 0.0)),
            "km/h" | "km h-1" => Some((1.0 / 3.6, 0.0)),
            "knots" | "knot" | "kt" | "kts" => Some((1852.0 / 3600.0, 0.0)),
            _ => None,
        },
        VariableKind::Spei => match u {
            None | Some("" | "1" | "-" | "dimensionless" | "z-score" | "z_score") => Some((1.0, 0.0)),
            _ => None,
        },
    }
}

/// Normalized horizontal frame plus the permutation from file to grid order.
struct Frame {
    spec: GridSpec,
    flip_rows: bool,
    /// `col_map[c]` is the file column stored at grid column `c`.
    col_map: Vec<usize>,
}

fn uniform_step(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
    if step == 0.0 || !step.is_finite() {
        return None;
    }
    values
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= UNIFORM_TOL)
        .then_some(step)
}

fn frame(ctx: &Ctx<'_>, lat: &[f64], lon: &[f64], fallback_res: Option<f64>) -> Result<Frame> {
    let lat_step = match lat.len() {
        1 => None,
        _ => Some(uniform_step(lat).ok_or_else(|| ctx.err("latitude spacing is not uniform"))?),
    };

    // Longitudes: wrap into [-180, 180) then order west to east.
    let wrapped: Vec<f64> = lon
        .iter()
        .map(|&x| if x >= 180.0 - UNIFORM_TOL { x - 360.0 } else { x })
        .collect();
    let mut col_map: Vec<usize> = (0..lon.len()).collect();
    col_map.sort_by(|&a, &b| wrapped[a].total_cmp(&wrapped[b]));
    let sorted: Vec<f64> = col_map.iter().map(|&c| wrapped[c]).collect();
    let lon_step = match sorted.len() {
        1 => None,
        _ => Some(uniform_step(&sorted).ok_or_else(|| ctx.err("longitude spacing is not uniform"))?),
    };

    let res = match (lat_step, lon_step) {
        (Some(a), Some(b)) => {
            if (a.abs() - b).abs() > UNIFORM_TOL {
                return Err(ctx.err(format!(
                    "latitude step {} differs from longitude step {b}",
                    a.abs()
                )));
            }
            b
        }
        (Some(a), None) | (None, Some(a)) => a.abs(),
        (None, None) => fallback_res.ok_or_else(|| ctx.err("cannot infer resolution from one cell"))?,
    };
    let flip_rows = lat_step.is_some_and(|s| s > 0.0);
    let north = if flip_rows { lat[lat.len() - 1] } else { lat[0] };
    let spec = GridSpec::new(north, sorted[0], res, lat.len(), lon.len())
        .map_err(|e| ctx.err(e.to_string()))?;
    Ok(Frame {
        spec,
        flip_rows,
        col_map,
    })
}

impl Frame {
    fn reorder(&self, plane: &[f64]) -> Vec<f64> {
        let (n_rows, n_cols) = (self.spec.n_rows, self.spec.n_cols);
        let mut out = Vec::with_capacity(n_rows * n_cols);
        for r in 0..n_rows {
            let src_r = if self.flip_rows { n_rows - 1 - r } else { r };
            let row = &plane[src_r * n_cols..(src_r + 1) * n_cols];
            out.extend(self.col_map.iter().map(|&c| row[c]));
        }
        out
    }
}

fn parse_time_units(ctx: &Ctx<'_>, units: &str) -> Result<(f64, NaiveDateTime)> {
    let lower = units.trim().to_ascii_lowercase();
    let (unit, rest) = lower
        .split_once(" since ")
        .ok_or_else(|| ctx.err(format!("time units `{units}` are not `<unit> since <date>`")))?;
    let seconds = match unit.trim() {
        "seconds" | "second" | "secs" | "s" => 1.0,
        "minutes" | "minute" | "mins" => 60.0,
        "hours" | "hour" | "hrs" | "h" => 3600.0,
        "days" | "day" | "d" => 86400.0,
        other => return Err(ctx.err(format!("unsupported time unit `{other}`"))),
    };
    let rest = rest.trim().trim_end_matches('z').trim_end_matches(" utc").trim();
    let epoch = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dt%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d %H"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(rest, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(rest, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
        .ok_or_else(|| ctx.err(format!("cannot parse time origin `{rest}`")))?;
    Ok((seconds, epoch))
}

fn frequency_attr(value: &str) -> Option<Frequency> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1hr" | "hour" | "hourly" | "1h" => Some(Frequency::Hourly),
        "day" | "daily" | "1d" => Some(Frequency::Daily),
        "mon" | "month" | "monthly" => Some(Frequency::Monthly),
        "yr" | "year" | "annual" | "yearly" => Some(Frequency::Annual),
        _ => None,
    }
}

fn infer_frequency(times: &[NaiveDateTime]) -> Option<Frequency> {
    if times.len() < 2 {
        return None;
    }
    let diffs: Vec<Duration> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|d| *d == Duration::hours(1)) {
        return Some(Frequency::Hourly);
    }
    if diffs.iter().all(|d| *d == Duration::days(1)) {
        return Some(Frequency::Daily);
    }
    for freq in [Frequency::Monthly, Frequency::Annual] {
        let periods: Vec<Period> = times
            .iter()
            .map(|t| Period::Day(t.date()).truncate(freq).expect("day truncates upward"))
            .collect();
        if periods.windows(2).all(|w| w[1] == w[0].next()) {
            return Some(freq);
        }
    }
    None
}

fn period_at(t: NaiveDateTime, freq: Frequency) -> Period {
    let hour = t.date().and_hms_opt(t.hour(), 0, 0).expect("hour of a valid time");
    Period::Hour(hour).truncate(freq).expect("hour truncates to any frequency")
}

fn read_time_axis(
    ctx: &Ctx<'_>,
    reader: &mut FileReader,
    time_name: &str,
    fallback: Frequency,
) -> Result<TimeAxis> {
    let ds = reader.data_set();
    let units = ds
        .get_var_attr_as_string(time_name, "units")
        .ok_or_else(|| ctx.err("time variable has no units attribute"))?;
    if let Some(cal) = ds.get_var_attr_as_string(time_name, "calendar") {
        let cal = cal.trim().to_ascii_lowercase();
        if !matches!(cal.as_str(), "standard" | "gregorian" | "proleptic_gregorian") {
            return Err(ctx.err(format!("unsupported calendar `{cal}`")));
        }
    }
    let declared = ds
        .get_var_attr_as_string(time_name, "frequency")
        .or_else(|| ds.get_global_attr_as_string("frequency"))
        .and_then(|f| frequency_attr(&f));
    let (seconds, epoch) = parse_time_units(ctx, &units)?;
    let raw = to_f64(
        reader
            .read_var(time_name)
            .map_err(|e| ctx.err(format!("reading time: {e}")))?,
    );
    let times = raw
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(ctx.err("non-finite time coordinate"));
            }
            let ms = (v * seconds * 1000.0).round() as i64;
            Ok(epoch + Duration::milliseconds(ms))
        })
        .collect::<Result<Vec<_>>>()?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ctx.err("time coordinate is not strictly increasing"));
    }
    let freq = declared
        .or_else(|| infer_frequency(&times))
        .unwrap_or(fallback);
    let periods: Vec<Period> = times.iter().map(|&t| period_at(t, freq)).collect();
    TimeAxis::from_periods(&periods).map_err(|e| ctx.err(e.to_string()))
}

fn open(path: &Path, ctx: &Ctx<'_>) -> Result<FileReader> {
    FileReader::open(path).map_err(|e| ctx.err(format!("cannot open NetCDF file: {e}")))
}

fn coordinates(ctx: &Ctx<'_>, reader: &mut FileReader) -> Result<(String, String, Vec<f64>, Vec<f64>)> {
    let ds = reader.data_set();
    let lat_name = find_name(ds, &LAT_NAMES).ok_or_else(|| ctx.err("no lat/latitude variable"))?;
    let lon_name = find_name(ds, &LON_NAMES).ok_or_else(|| ctx.err("no lon/longitude variable"))?;
    let lat = to_f64(reader.read_var(lat_name).map_err(|e| ctx.err(format!("reading {lat_name}: {e}")))?);
    let lon = to_f64(reader.read_var(lon_name).map_err(|e| ctx.err(format!("reading {lon_name}: {e}")))?);
    if lat.is_empty() || lon.is_empty() {
        return Err(ctx.err("empty coordinate variable"));
    }
    Ok((lat_name.to_string(), lon_name.to_string(), lat, lon))
}

/// Missing markers and packing of one data variable.
struct Decoding {
    fills: Vec<f64>,
    scale: f64,
    offset: f64,
}

impl Decoding {
    fn read(ctx: &Ctx<'_>, ds: &DataSet, var: &str) -> Result<Self> {
        let fills: Vec<f64> = ["_FillValue", "missing_value"]
            .iter()
            .filter_map(|a| numeric_attr(ds, var, a))
            .collect();
        if fills.is_empty() {
            return Err(ctx.err("variable declares neither _FillValue nor missing_value"));
        }
        Ok(Self {
            fills,
            scale: numeric_attr(ds, var, "scale_factor").unwrap_or(1.0),
            offset: numeric_attr(ds, var, "add_offset").unwrap_or(0.0),
        })
    }

    fn decode(&self, raw: f64) -> f64 {
        if raw.is_nan() || self.fills.contains(&raw) {
            f64::NAN
        } else {
            raw * self.scale + self.offset
        }
    }
}

/// Everything about a climate variable except its values.
struct ClimateHeader<'a> {
    ctx: Ctx<'a>,
    reader: FileReader,
    var_name: String,
    frame: Frame,
    time: TimeAxis,
    decoding: Decoding,
    units: (f64, f64),
}

fn read_header<'a>(path: &'a Path, variable: VariableKind, source: Source) -> Result<ClimateHeader<'a>> {
    let mut ctx = Ctx {
        path,
        variable: variable.as_str().to_string(),
    };
    let mut reader = open(path, &ctx)?;
    let var_name = {
        let ds = reader.data_set();
        find_name(ds, variable_aliases(variable))
            .ok_or_else(|| ctx.err(format!("no variable named any of {:?}", variable_aliases(variable))))?
            .to_string()
    };
    ctx.variable = var_name.clone();

    let (lat_name, lon_name, lat, lon) = coordinates(&ctx, &mut reader)?;
    let ds = reader.data_set();
    let time_name = find_name(ds, &TIME_NAMES).ok_or_else(|| ctx.err("no time variable"))?;
    let dims = ds.get_var(&var_name).map(|v| v.dim_names()).unwrap_or_default();
    let lat_dim = ds.get_var(&lat_name).and_then(|v| v.dim_names().first().cloned());
    let lon_dim = ds.get_var(&lon_name).and_then(|v| v.dim_names().first().cloned());
    let time_dim = ds.get_var(time_name).and_then(|v| v.dim_names().first().cloned());
    let expected = [time_dim, lat_dim, lon_dim];
    if dims.len() != 3 || dims.iter().zip(&expected).any(|(d, e)| Some(d) != e.as_ref()) {
        return Err(ctx.err(format!("expected dimensions (time, lat, lon), found {dims:?}")));
    }
    let units = ds.get_var_attr_as_string(&var_name, "units");
    let units = unit_conversion(variable, units.as_deref())
        .ok_or_else(|| ctx.err(format!("unknown units {:?} for {variable}", units.unwrap_or_default())))?;
    let decoding = Decoding::read(&ctx, ds, &var_name)?;

    let frame = frame(&ctx, &lat, &lon, source.resolution())?;
    let time = read_time_axis(&ctx, &mut reader, time_name, source.native_frequency())?;
    Ok(ClimateHeader {
        ctx,
        reader,
        var_name,
        frame,
        time,
        decoding,
        units,
    })
}

/// Grid and time axis of a climate file, without reading its values.
pub fn probe_climate(path: impl AsRef<Path>, variable: VariableKind, source: Source) -> Result<(GridSpec, TimeAxis)> {
    let header = read_header(path.as_ref(), variable, source)?;
    Ok((header.frame.spec, header.time))
}

/// Read one climate variable into a [`ClimateField`] on a north-first,
/// west-first grid in canonical units.
pub fn read_climate(path: impl AsRef<Path>, variable: VariableKind, source: Source) -> Result<ClimateField> {
    let ClimateHeader {
        ctx,
        mut reader,
        var_name,
        frame,
        time,
        decoding,
        units: (u_scale, u_offset),
    } = read_header(path.as_ref(), variable, source)?;
    let raw = to_f64(
        reader
            .read_var(&var_name)
            .map_err(|e| ctx.err(format!("reading data: {e}")))?,
    );
    let n_cells = frame.spec.n_cells();
    if raw.len() != n_cells * time.len() {
        return Err(ctx.err(format!(
            "data has {} values, expected {}",
            raw.len(),
            n_cells * time.len()
        )));
    }
    let planes = raw
        .chunks(n_cells)
        .map(|plane| {
            let decoded: Vec<f64> = plane
                .iter()
                .map(|&x| decoding.decode(x) * u_scale + u_offset)
                .collect();
            frame.reorder(&decoded)
        })
        .collect();
    ClimateField::new(variable, source, frame.spec, time, planes).map_err(|e| ctx.err(e.to_string()))
}

/// Read a 2-D raster (e.g. a weight layer). With `variable = None` the single
/// non-coordinate 2-D variable is used.
pub fn read_raster(path: impl AsRef<Path>, variable: Option<&str>) -> Result<Grid> {
    let path = path.as_ref();
    let mut ctx = Ctx {
        path,
        variable: variable.unwrap_or("?").to_string(),
    };
    let mut reader = open(path, &ctx)?;
    let (lat_name, lon_name, lat, lon) = coordinates(&ctx, &mut reader)?;
    let ds = reader.data_set();
    let var_name = match variable {
        Some(v) if ds.has_var(v) => v.to_string(),
        Some(v) => return Err(ctx.err(format!("no variable `{v}`"))),
        None => {
            let candidates: Vec<String> = ds
                .get_vars()
                .into_iter()
                .filter(|v| v.num_dims() == 2 && v.name() != lat_name && v.name() != lon_name)
                .map(|v| v.name().to_string())
                .collect();
            match candidates.as_slice() {
                [one] => one.clone(),
                _ => return Err(ctx.err(format!("ambiguous raster variables {candidates:?}"))),
            }
        }
    };
    ctx.variable = var_name.clone();
    let units = ds.get_var_attr_as_string(&var_name, "units").unwrap_or_default();
    let decoding = Decoding::read(&ctx, ds, &var_name)?;
    let frame = frame(&ctx, &lat, &lon, None)?;
    let raw = to_f64(
        reader
            .read_var(&var_name)
            .map_err(|e| ctx.err(format!("reading data: {e}")))?,
    );
    if raw.len() != frame.spec.n_cells() {
        return Err(ctx.err(format!(
            "raster has {} values, grid needs {}",
            raw.len(),
            frame.spec.n_cells()
        )));
    }
    let decoded: Vec<f64> = raw.iter().map(|&x| decoding.decode(x)).collect();
    Grid::new(frame.spec, frame.reorder(&decoded), units).map_err(|e| ctx.err(e.to_string()))
}

/// Layout choices for written files.
#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Store latitude south-first.
    pub lat_ascending: bool,
    /// Store longitude in 0..360 (only for grids spanning the globe).
    pub lon_from_zero: bool,
}

fn write_err(path: &Path, variable: &str, e: impl std::fmt::Debug) -> Error {
    Error::Ingestion {
        path: PathBuf::from(path),
        variable: variable.to_string(),
        message: format!("write failed: {e:?}"),
    }
}

fn file_order(spec: &GridSpec, opts: WriteOptions) -> Result<(Vec<f64>, Vec<usize>, Vec<f64>, Vec<usize>)> {
    let mut rows: Vec<usize> = (0..spec.n_rows).collect();
    if opts.lat_ascending {
        rows.reverse();
    }
    let lat: Vec<f64> = rows.iter().map(|&r| spec.lat_center(r)).collect();
    let mut cols: Vec<usize> = (0..spec.n_cols).collect();
    let mut lon: Vec<f64> = cols.iter().map(|&c| spec.lon_center(c)).collect();
    if opts.lon_from_zero {
        if !spec.wraps_longitude() {
            return Err(Error::Validation("0..360 longitudes need a global grid".into()));
        }
        let shifted: Vec<f64> = lon.iter().map(|&x| if x < 0.0 { x + 360.0 } else { x }).collect();
        cols.sort_by(|&a, &b| shifted[a].total_cmp(&shifted[b]));
        lon = cols.iter().map(|&c| shifted[c]).collect();
    }
    Ok((lat, rows, lon, cols))
}

fn file_plane(values: &[f64], n_cols: usize, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    rows.iter()
        .flat_map(|&r| cols.iter().map(move |&c| values[r * n_cols + c]))
        .map(|x| if x.is_nan() { WRITE_FILL } else { x })
        .collect()
}

fn time_encoding(freq: Frequency) -> (&'static str, f64) {
    match freq {
        Frequency::Hourly => ("hours since 1900-01-01 00:00:00", 3600.0),
        _ => ("days since 1900-01-01 00:00:00", 86400.0),
    }
}

/// Write a field as a CF-style NetCDF-3 file named by the variable.
pub fn write_climate(path: impl AsRef<Path>, field: &ClimateField, opts: WriteOptions) -> Result<()> {
    let path = path.as_ref();
    let name = field.variable.as_str();
    let spec = &field.grid;
    let (lat, rows, lon, cols) = file_order(spec, opts)?;
    let (time_units, seconds) = time_encoding(field.time.frequency());
    let epoch = NaiveDate::from_ymd_opt(1900, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch");
    let time: Vec<f64> = field
        .time
        .periods()
        .map(|p| (p.start() - epoch).num_seconds() as f64 / seconds)
        .collect();

    let mut ds = DataSet::new();
    ds.add_fixed_dim("time", field.time.len()).map_err(|e| write_err(path, name, e))?;
    ds.add_fixed_dim("lat", spec.n_rows).map_err(|e| write_err(path, name, e))?;
    ds.add_fixed_dim("lon", spec.n_cols).map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64("time", &["time"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string("time", "units", time_units).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string("time", "calendar", "standard").map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string("time", "frequency", field.time.frequency().as_str()).map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64("lat", &["lat"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string("lat", "units", "degrees_north").map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64("lon", &["lon"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string("lon", "units", "degrees_east").map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64(name, &["time", "lat", "lon"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string(name, "units", field.variable.units()).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_f64(name, "_FillValue", vec![WRITE_FILL]).map_err(|e| write_err(path, name, e))?;
    ds.add_global_attr_string("source", field.source.as_str()).map_err(|e| write_err(path, name, e))?;

    let data: Vec<f64> = field
        .planes
        .iter()
        .flat_map(|p| file_plane(p, spec.n_cols, &rows, &cols))
        .collect();
    let mut writer = FileWriter::open(path).map_err(|e| write_err(path, name, e))?;
    writer.set_def(&ds, Version::Classic, 0).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64("time", &time).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64("lat", &lat).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64("lon", &lon).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64(name, &data).map_err(|e| write_err(path, name, e))?;
    writer.close().map_err(|e| write_err(path, name, e))
}

/// Write a 2-D grid under variable `name`.
pub fn write_raster(path: impl AsRef<Path>, name: &str, grid: &Grid, opts: WriteOptions) -> Result<()> {
    let path = path.as_ref();
    let spec = &grid.spec;
    let (lat, rows, lon, cols) = file_order(spec, opts)?;
    let mut ds = DataSet::new();
    ds.add_fixed_dim("lat", spec.n_rows).map_err(|e| write_err(path, name, e))?;
    ds.add_fixed_dim("lon", spec.n_cols).map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64("lat", &["lat"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64("lon", &["lon"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_f64(name, &["lat", "lon"]).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_string(name, "units", &grid.units).map_err(|e| write_err(path, name, e))?;
    ds.add_var_attr_f64(name, "_FillValue", vec![WRITE_FILL]).map_err(|e| write_err(path, name, e))?;
    let data = file_plane(grid.values(), spec.n_cols, &rows, &cols);
    let mut writer = FileWriter::open(path).map_err(|e| write_err(path, name, e))?;
    writer.set_def(&ds, Version::Classic, 0).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64("lat", &lat).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64("lon", &lon).map_err(|e| write_err(path, name, e))?;
    writer.write_var_f64(name, &data).map_err(|e| write_err(path, name, e))?;
    writer.close().map_err(|e| write_err(path, name, e))
}
