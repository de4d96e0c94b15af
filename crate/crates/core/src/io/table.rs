//! Wide and long serializations of [`UnitTable`] as CSV, JSON and Parquet.
//!
//! Rows are ordered by unit id then period; columns are `unit_id` followed
//! by period labels (wide) or `unit_id, period, value` (long).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use arrow_array::{Array, ArrayRef, Float64Array, RecordBatch, StringArray};
use arrow_schema::{DataType, Field, Schema};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::aggregate::{Measure, UnitTable};
use crate::boundaries::AdminLevel;
use crate::error::{Error, Result};
use crate::temporal::VariableKind;
use crate::time::{Period, TimeAxis};
use crate::weights::WeightScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableLayout {
    /// One row per unit, one column per period.
    Wide,
    /// One row per (unit, period).
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Parquet,
}

impl TableLayout {
    pub const ALL: [TableLayout; 2] = [TableLayout::Wide, TableLayout::Long];

    pub fn as_str(&self) -> &'static str {
        match self {
            TableLayout::Wide => "wide",
            TableLayout::Long => "long",
        }
    }
}

impl TableFormat {
    pub const ALL: [TableFormat; 3] = [TableFormat::Csv, TableFormat::Json, TableFormat::Parquet];

    pub fn as_str(&self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
            TableFormat::Parquet => "parquet",
        }
    }

    pub fn content_type(&self) -> &'static str {
        match self {
            TableFormat::Csv => "text/csv; charset=utf-8",
            TableFormat::Json => "application/json",
            TableFormat::Parquet => "application/vnd.apache.parquet",
        }
    }
}

impl fmt::Display for TableLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wide" => Ok(TableLayout::Wide),
            "long" => Ok(TableLayout::Long),
            other => Err(Error::Validation(format!("unknown layout `{other}`"))),
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "parquet" | "pq" => Ok(TableFormat::Parquet),
            other => Err(Error::Validation(format!("unknown format `{other}`"))),
        }
    }
}

/// Table attributes not carried by the serialized rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableMeta {
    pub level: AdminLevel,
    pub variable: VariableKind,
    pub scheme: WeightScheme,
    pub measure: Measure,
}

impl TableMeta {
    pub fn of(table: &UnitTable) -> Self {
        Self {
            level: table.level,
            variable: table.variable,
            scheme: table.scheme,
            measure: table.measure,
        }
    }
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn json_number(v: Option<f64>) -> Value {
    v.and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn render_csv(table: &UnitTable, layout: TableLayout) -> Result<Vec<u8>> {
    let labels = table.time.labels();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let cell = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    match layout {
        TableLayout::Wide => {
            w.write_record(std::iter::once("unit_id").chain(labels.iter().map(String::as_str)))?;
            for (unit, row) in table.rows() {
                let mut record = vec![unit.to_string()];
                record.extend(row.iter().map(|&v| cell(v)));
                w.write_record(&record)?;
            }
        }
        TableLayout::Long => {
            w.write_record(["unit_id", "period", "value"])?;
            for (unit, row) in table.rows() {
                for (label, &v) in labels.iter().zip(row) {
                    w.write_record([unit, label.as_str(), cell(v).as_str()])?;
                }
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn render_json(table: &UnitTable, layout: TableLayout) -> Result<Vec<u8>> {
    let labels = table.time.labels();
    let mut records = Vec::new();
    for (unit, row) in table.rows() {
        match layout {
            TableLayout::Wide => {
                let mut obj = Map::new();
                obj.insert("unit_id".into(), Value::String(unit.to_string()));
                for (label, &v) in labels.iter().zip(row) {
                    obj.insert(label.clone(), json_number(v));
                }
                records.push(Value::Object(obj));
            }
            TableLayout::Long => {
                for (label, &v) in labels.iter().zip(row) {
                    let mut obj = Map::new();
                    obj.insert("unit_id".into(), Value::String(unit.to_string()));
                    obj.insert("period".into(), Value::String(label.clone()));
                    obj.insert("value".into(), json_number(v));
                    records.push(Value::Object(obj));
                }
            }
        }
    }
    let mut out = serde_json::to_vec(&Value::Array(records))?;
    out.push(b'\n');
    Ok(out)
}

fn render_parquet(table: &UnitTable, layout: TableLayout) -> Result<Vec<u8>> {
    let labels = table.time.labels();
    let (schema, columns): (Schema, Vec<ArrayRef>) = match layout {
        TableLayout::Wide => {
            let mut fields = vec![Field::new("unit_id", DataType::Utf8, false)];
            let mut columns: Vec<ArrayRef> =
                vec![Arc::new(StringArray::from_iter_values(table.unit_ids()))];
            for (t, label) in labels.iter().enumerate() {
                fields.push(Field::new(label, DataType::Float64, true));
                let col: Float64Array = table.rows().map(|(_, row)| row[t]).collect();
                columns.push(Arc::new(col));
            }
            (Schema::new(fields), columns)
        }
        TableLayout::Long => {
            let n = table.time.len();
            let units = StringArray::from_iter_values(
                table.unit_ids().flat_map(|u| std::iter::repeat(u).take(n)),
            );
            let periods = StringArray::from_iter_values(
                table.unit_ids().flat_map(|_| labels.iter().map(String::as_str)),
            );
            let values: Float64Array = table.rows().flat_map(|(_, row)| row.iter().copied()).collect();
            (
                Schema::new(vec![
                    Field::new("unit_id", DataType::Utf8, false),
                    Field::new("period", DataType::Utf8, false),
                    Field::new("value", DataType::Float64, true),
                ]),
                vec![Arc::new(units), Arc::new(periods), Arc::new(values)],
            )
        }
    };
    let schema = Arc::new(schema);
    let batch = RecordBatch::try_new(schema.clone(), columns)?;
    let mut buf = Vec::new();
    let mut writer = ArrowWriter::try_new(&mut buf, schema, None)?;
    writer.write(&batch)?;
    writer.close()?;
    Ok(buf)
}

/// Serialize `table` to bytes.
pub fn render_table(table: &UnitTable, layout: TableLayout, format: TableFormat) -> Result<Vec<u8>> {
    if table.is_empty() || table.time.is_empty() {
        return Err(Error::Validation("cannot export an empty table".into()));
    }
    match format {
        TableFormat::Csv => render_csv(table, layout),
        TableFormat::Json => render_json(table, layout),
        TableFormat::Parquet => render_parquet(table, layout),
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialize `table` and write it atomically to `path`.
pub fn export_table(
    table: &UnitTable,
    layout: TableLayout,
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = render_table(table, layout, format)?;
    write_atomic(path.as_ref(), &bytes)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_value(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format_err(format!("`{s}` is not a number")))
}

/// Rows gathered while parsing, before the time axis is known.
#[derive(Default)]
struct Collected {
    labels: Vec<String>,
    cells: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

impl Collected {
    fn insert(&mut self, unit: &str, label: &str, value: Option<f64>) -> Result<()> {
        let prev = self
            .cells
            .entry(unit.to_string())
            .or_default()
            .insert(label.to_string(), value);
        if prev.is_some() {
            return Err(format_err(format!("duplicate cell ({unit}, {label})")));
        }
        Ok(())
    }

    fn finish(mut self, meta: TableMeta) -> Result<UnitTable> {
        if self.labels.is_empty() {
            let set: BTreeSet<&String> = self.cells.values().flat_map(|m| m.keys()).collect();
            self.labels = set.into_iter().cloned().collect();
        }
        let mut periods = self
            .labels
            .iter()
            .map(|l| Period::parse_any(l))
            .collect::<Result<Vec<_>>>()?;
        periods.sort();
        let time = TimeAxis::from_periods(&periods)?;
        let labels = time.labels();
        let values = self
            .cells
            .into_iter()
            .map(|(unit, cells)| {
                let row = labels.iter().map(|l| cells.get(l).copied().flatten()).collect();
                (unit, row)
            })
            .collect();
        Ok(UnitTable::new(meta.level, time, meta.variable, meta.scheme, values)?.with_measure(meta.measure))
    }
}

fn read_csv(bytes: &[u8], layout: TableLayout) -> Result<Collected> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut out = Collected::default();
    match layout {
        TableLayout::Wide => {
            if header.first().map(String::as_str) != Some("unit_id") {
                return Err(format_err("wide table must start with a unit_id column"));
            }
            out.labels = header[1..].to_vec();
            for rec in r.records() {
                let rec = rec?;
                let unit = &rec[0];
                out.cells.entry(unit.to_string()).or_default();
                for (label, field) in out.labels.clone().iter().zip(rec.iter().skip(1)) {
                    out.insert(unit, label, parse_value(field)?)?;
                }
            }
        }
        TableLayout::Long => {
            if header != ["unit_id", "period", "value"] {
                return Err(format_err("long table columns must be unit_id, period, value"));
            }
            for rec in r.records() {
                let rec = rec?;
                out.insert(&rec[0], &rec[1], parse_value(&rec[2])?)?;
            }
        }
    }
    Ok(out)
}

fn json_value(v: &Value) -> Result<Option<f64>> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => n.as_f64().map(Some).ok_or_else(|| format_err("number out of range")),
        other => Err(format_err(format!("expected number or null, got {other}"))),
    }
}

fn read_json(bytes: &[u8], layout: TableLayout) -> Result<Collected> {
    let doc: Value = serde_json::from_slice(bytes)?;
    let records = doc.as_array().ok_or_else(|| format_err("expected a JSON array"))?;
    let mut out = Collected::default();
    for rec in records {
        let obj = rec.as_object().ok_or_else(|| format_err("expected JSON objects"))?;
        let unit = obj
            .get("unit_id")
            .and_then(Value::as_str)
            .ok_or_else(|| format_err("record without unit_id"))?;
        match layout {
            TableLayout::Wide => {
                if out.labels.is_empty() {
                    out.labels = obj.keys().filter(|k| *k != "unit_id").cloned().collect();
                }
                out.cells.entry(unit.to_string()).or_default();
                for (k, v) in obj.iter().filter(|(k, _)| *k != "unit_id") {
                    out.insert(unit, k, json_value(v)?)?;
                }
            }
            TableLayout::Long => {
                let period = obj
                    .get("period")
                    .and_then(Value::as_str)
                    .ok_or_else(|| format_err("record without period"))?;
                out.insert(unit, period, json_value(obj.get("value").unwrap_or(&Value::Null))?)?;
            }
        }
    }
    Ok(out)
}

fn string_column<'a>(batch: &'a RecordBatch, name: &str) -> Result<&'a StringArray> {
    batch
        .column_by_name(name)
        .and_then(|c| c.as_any().downcast_ref::<StringArray>())
        .ok_or_else(|| format_err(format!("missing string column `{name}`")))
}

fn float_column<'a>(batch: &'a RecordBatch, name: &str) -> Result<&'a Float64Array> {
    batch
        .column_by_name(name)
        .and_then(|c| c.as_any().downcast_ref::<Float64Array>())
        .ok_or_else(|| format_err(format!("missing float column `{name}`")))
}

fn read_parquet(bytes: &[u8], layout: TableLayout) -> Result<Collected> {
    let reader = ParquetRecordBatchReaderBuilder::try_new(bytes::Bytes::copy_from_slice(bytes))?.build()?;
    let mut out = Collected::default();
    for batch in reader {
        let batch = batch?;
        let units = string_column(&batch, "unit_id")?;
        let get = |col: &Float64Array, i: usize| (!col.is_null(i)).then(|| col.value(i));
        match layout {
            TableLayout::Wide => {
                let labels: Vec<String> = batch
                    .schema()
                    .fields()
                    .iter()
                    .map(|f| f.name().clone())
                    .filter(|n| n != "unit_id")
                    .collect();
                if out.labels.is_empty() {
                    out.labels = labels.clone();
                }
                for i in 0..batch.num_rows() {
                    out.cells.entry(units.value(i).to_string()).or_default();
                }
                for label in &labels {
                    let col = float_column(&batch, label)?;
                    for i in 0..batch.num_rows() {
                        out.insert(units.value(i), label, get(col, i))?;
                    }
                }
            }
            TableLayout::Long => {
                let periods = string_column(&batch, "period")?;
                let values = float_column(&batch, "value")?;
                for i in 0..batch.num_rows() {
                    out.insert(units.value(i), periods.value(i), get(values, i))?;
                }
            }
        }
    }
    Ok(out)
}

/// Parse bytes produced by [`render_table`] back into a table.
pub fn read_table(bytes: &[u8], layout: TableLayout, format: TableFormat, meta: TableMeta) -> Result<UnitTable> {
    let collected = match format {
        TableFormat::Csv => read_csv(bytes, layout)?,
        TableFormat::Json => read_json(bytes, layout)?,
        TableFormat::Parquet => read_parquet(bytes, layout)?,
    };
    collected.finish(meta)
}
