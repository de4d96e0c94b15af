//! Query parsing, validation and canonical hashing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use wclim_core::extremes::{Direction, StatPeriod, ThresholdMode, ThresholdSpec};
use wclim_core::io::{TableFormat, TableLayout};
use wclim_core::temporal::VariableKind;
use wclim_core::time::Frequency;
use wclim_core::weights::{WeightKind, WeightScheme};
use wclim_core::{AdminLevel, Source};

use crate::error::{ApiError, ErrorCode};

/// Query as submitted, before validation. Field names match the JSON body
/// of `POST /api/v1/aggregate`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuery {
    pub source: Option<String>,
    pub variable: Option<String>,
    pub level: Option<String>,
    pub weight: Option<String>,
    pub base_year: Option<i32>,
    #[serde(alias = "freq")]
    pub frequency: Option<String>,
    pub from: Option<i32>,
    pub to: Option<i32>,
    pub threshold: Option<RawThreshold>,
    pub layout: Option<String>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThreshold {
    pub mode: Option<String>,
    pub direction: Option<String>,
    pub value: Option<f64>,
    pub baseline: Option<[i32; 2]>,
}

/// A validated query.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub source: Source,
    pub variable: VariableKind,
    pub level: AdminLevel,
    pub scheme: WeightScheme,
    pub frequency: Frequency,
    pub from: i32,
    pub to: i32,
    pub threshold: Option<ThresholdSpec>,
    pub layout: TableLayout,
    pub format: TableFormat,
}

fn invalid(message: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::InvalidField, message)
}

fn required<'a>(field: &'static str, value: &'a Option<String>) -> Result<&'a str, ApiError> {
    value
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| invalid(format!("`{field}` is required")))
}

fn parse<T: std::str::FromStr>(field: &'static str, text: &str) -> Result<T, ApiError>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e| invalid(format!("`{field}`: {e}")))
}

impl RawQuery {
    /// Parse a JSON request body.
    pub fn from_json(bytes: &[u8]) -> Result<RawQuery, ApiError> {
        serde_json::from_slice(bytes).map_err(|e| invalid(format!("malformed query: {e}")))
    }

    /// Check the query against the source/variable matrix and the
    /// threshold and weighting rules.
    pub fn validate(&self) -> Result<Query, ApiError> {
        let source: Source = parse("source", required("source", &self.source)?)?;
        let variable: VariableKind = parse("variable", required("variable", &self.variable)?)?;
        let level: AdminLevel = parse("level", required("level", &self.level)?)?;
        let kind: WeightKind = match self.weight.as_deref() {
            Some(w) => parse("weight", w)?,
            None => WeightKind::Unweighted,
        };
        let frequency: Frequency = parse("frequency", required("frequency", &self.frequency)?)?;
        let from = self.from.ok_or_else(|| invalid("`from` is required"))?;
        let to = self.to.ok_or_else(|| invalid("`to` is required"))?;
        let layout: TableLayout = match self.layout.as_deref() {
            Some(l) => parse("layout", l)?,
            None => TableLayout::Long,
        };
        let format: TableFormat = match self.format.as_deref() {
            Some(f) => parse("format", f)?,
            None => TableFormat::Json,
        };

        if !source.supports(variable) {
            return Err(ApiError::new(
                ErrorCode::VariableNotInSource,
                format!(
                    "{source} does not provide {variable}; it provides {}",
                    source
                        .variables()
                        .iter()
                        .map(|v| v.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
        if frequency == Frequency::Hourly {
            return Err(ApiError::new(
                ErrorCode::FrequencyUnavailable,
                "hourly values are aggregated to daily before export; choose daily, monthly or annual",
            ));
        }
        if variable == VariableKind::Spei && frequency == Frequency::Annual {
            return Err(ApiError::new(
                ErrorCode::SpeiAnnualForbidden,
                "spei cannot be annual: it is available only monthly",
            ));
        }

        let scheme = match (kind, self.base_year) {
            (WeightKind::Unweighted | WeightKind::Concurrent, Some(y)) => {
                return Err(ApiError::new(
                    ErrorCode::BaseYearInvalid,
                    format!("{kind} weighting takes no base year (got {y})"),
                ))
            }
            (WeightKind::Concurrent, None) => WeightScheme::concurrent(),
            _ => WeightScheme::new(kind, self.base_year)
                .map_err(|e| ApiError::new(ErrorCode::BaseYearInvalid, e.to_string()))?,
        };

        if from > to {
            return Err(ApiError::new(
                ErrorCode::TimeRangeInvalid,
                format!("`from` ({from}) is after `to` ({to})"),
            ));
        }
        check_coverage(source, from, to, "time range")?;

        let threshold = match &self.threshold {
            None => None,
            Some(raw) => Some(raw.validate(source, frequency)?),
        };

        Ok(Query {
            source,
            variable,
            level,
            scheme,
            frequency,
            from,
            to,
            threshold,
            layout,
            format,
        })
    }
}

fn check_coverage(source: Source, from: i32, to: i32, what: &str) -> Result<(), ApiError> {
    if let Some((first, last)) = source.coverage() {
        if from < first || to > last {
            return Err(ApiError::new(
                ErrorCode::TimeRangeOutsideCoverage,
                format!("{what} {from}-{to} lies outside {source} coverage {first}-{last}"),
            ));
        }
    }
    Ok(())
}

impl RawThreshold {
    fn validate(&self, source: Source, frequency: Frequency) -> Result<ThresholdSpec, ApiError> {
        if source != Source::Era5 {
            return Err(ApiError::new(
                ErrorCode::ThresholdRequiresEra5Daily,
                format!("thresholds are computed from era5 daily data, not {source}"),
            ));
        }
        let period = match frequency {
            Frequency::Monthly => StatPeriod::Monthly,
            Frequency::Annual => StatPeriod::Annual,
            other => {
                return Err(ApiError::new(
                    ErrorCode::ThresholdFrequencyInvalid,
                    format!("threshold statistics are monthly or annual, not {other}"),
                ))
            }
        };
        let bad = |m: String| ApiError::new(ErrorCode::ThresholdInvalid, m);
        let mode: ThresholdMode = self
            .mode
            .as_deref()
            .ok_or_else(|| bad("`threshold.mode` is required".into()))?
            .parse()
            .map_err(|e| bad(format!("`threshold.mode`: {e}")))?;
        let direction: Direction = match self.direction.as_deref() {
            Some(d) => d.parse().map_err(|e| bad(format!("`threshold.direction`: {e}")))?,
            None => Direction::Above,
        };
        let value = self
            .value
            .ok_or_else(|| bad("`threshold.value` is required".into()))?;
        let spec = ThresholdSpec {
            mode,
            direction,
            value,
            baseline: self.baseline.map(|[a, b]| (a, b)),
            period,
        };
        spec.validate().map_err(|e| bad(e.to_string()))?;
        if let Some((a, b)) = spec.baseline {
            check_coverage(source, a, b, "baseline")?;
        }
        Ok(spec)
    }
}

fn number(x: f64) -> Value {
    // -0.0 and 0.0 describe the same threshold.
    json!(if x == 0.0 { 0.0 } else { x })
}

fn sorted(entries: Vec<(&'static str, Value)>) -> Value {
    let map: BTreeMap<&str, Value> = entries.into_iter().collect();
    Value::Object(map.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

impl Query {
    /// Computational fields with sorted keys and lowercase names. Layout and
    /// format only change the encoding of a result, so they are left out.
    pub fn canonical(&self) -> Value {
        let threshold = match &self.threshold {
            None => Value::Null,
            Some(t) => sorted(vec![
                ("mode", json!(t.mode.as_str())),
                ("direction", json!(t.direction.as_str())),
                ("value", number(t.value)),
                (
                    "baseline",
                    t.baseline.map_or(Value::Null, |(a, b)| json!([a, b])),
                ),
            ]),
        };
        sorted(vec![
            ("source", json!(self.source.as_str())),
            ("variable", json!(self.variable.as_str())),
            ("level", json!(self.level.as_str())),
            ("weight", json!(self.scheme.kind.as_str())),
            ("base_year", json!(self.scheme.base_year)),
            ("frequency", json!(self.frequency.as_str())),
            ("from", json!(self.from)),
            ("to", json!(self.to)),
            ("threshold", threshold),
        ])
    }

    /// The query back in request form, with defaults filled in.
    pub fn to_raw(&self) -> RawQuery {
        RawQuery {
            source: Some(self.source.as_str().into()),
            variable: Some(self.variable.as_str().into()),
            level: Some(self.level.as_str().into()),
            weight: Some(self.scheme.kind.as_str().into()),
            base_year: self.scheme.base_year,
            frequency: Some(self.frequency.as_str().into()),
            from: Some(self.from),
            to: Some(self.to),
            threshold: self.threshold.map(|t| RawThreshold {
                mode: Some(t.mode.as_str().into()),
                direction: Some(t.direction.as_str().into()),
                value: Some(t.value),
                baseline: t.baseline.map(|(a, b)| [a, b]),
            }),
            layout: Some(self.layout.as_str().into()),
            format: Some(self.format.as_str().into()),
        }
    }

    /// Years of data the computation reads: the requested range widened by
    /// the threshold baseline. `record` is the span of the input file.
    pub fn input_years(&self, record: (i32, i32)) -> (i32, i32) {
        match &self.threshold {
            Some(t) if t.mode == ThresholdMode::Relative => match t.baseline {
                Some((a, b)) => (self.from.min(a), self.to.max(b)),
                None => (self.from.min(record.0), self.to.max(record.1)),
            },
            _ => (self.from, self.to),
        }
    }
}

/// Deterministic result id from the canonical query and the digests of
/// every file the computation reads.
pub fn result_id(query: &Query, fingerprints: &BTreeMap<String, String>) -> String {
    let doc = sorted(vec![
        ("version", json!(1)),
        ("query", query.canonical()),
        ("data", json!(fingerprints)),
    ]);
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&doc).expect("json values serialize"));
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RawQuery {
        RawQuery {
            source: Some("era5".into()),
            variable: Some("temperature_avg".into()),
            level: Some("gadm1".into()),
            weight: Some("nightlight".into()),
            base_year: Some(2015),
            frequency: Some("annual".into()),
            from: Some(1950),
            to: Some(2000),
            ..Default::default()
        }
    }

    fn code(q: RawQuery) -> ErrorCode {
        q.validate().unwrap_err().code
    }

    #[test]
    fn valid_query() {
        let q = base().validate().unwrap();
        assert_eq!(q.scheme.base_year, Some(2015));
        assert_eq!(q.layout, TableLayout::Long);
    }

    #[test]
    fn error_codes() {
        let spei_annual = RawQuery {
            source: Some("csic".into()),
            variable: Some("spei".into()),
            weight: None,
            base_year: None,
            ..base()
        };
        assert_eq!(code(spei_annual), ErrorCode::SpeiAnnualForbidden);
        assert_eq!(
            code(RawQuery { variable: Some("spei".into()), ..base() }),
            ErrorCode::VariableNotInSource
        );
        assert_eq!(code(RawQuery { base_year: Some(2012), ..base() }), ErrorCode::BaseYearInvalid);
        assert_eq!(
            code(RawQuery { weight: Some("concurrent".into()), ..base() }),
            ErrorCode::BaseYearInvalid
        );
        assert_eq!(code(RawQuery { from: Some(2001), ..base() }), ErrorCode::TimeRangeInvalid);
        assert_eq!(code(RawQuery { from: Some(1900), ..base() }), ErrorCode::TimeRangeOutsideCoverage);
        assert_eq!(code(RawQuery { level: Some("gadm7".into()), ..base() }), ErrorCode::InvalidField);
        assert_eq!(code(RawQuery { source: None, ..base() }), ErrorCode::InvalidField);
    }

    #[test]
    fn threshold_rules() {
        let t = |mode: &str, value: f64| RawThreshold {
            mode: Some(mode.into()),
            direction: None,
            value: Some(value),
            baseline: None,
        };
        let ok = RawQuery { threshold: Some(t("relative", 95.0)), ..base() };
        assert!(ok.validate().unwrap().threshold.is_some());
        let cru = RawQuery {
            source: Some("cru_ts".into()),
            weight: None,
            base_year: None,
            threshold: Some(t("absolute", 30.0)),
            ..base()
        };
        assert_eq!(code(cru), ErrorCode::ThresholdRequiresEra5Daily);
        let daily = RawQuery {
            frequency: Some("daily".into()),
            threshold: Some(t("absolute", 30.0)),
            ..base()
        };
        assert_eq!(code(daily), ErrorCode::ThresholdFrequencyInvalid);
        assert_eq!(
            code(RawQuery { threshold: Some(t("relative", 100.0)), ..base() }),
            ErrorCode::ThresholdInvalid
        );
        assert_eq!(
            code(RawQuery { threshold: Some(t("sideways", 1.0)), ..base() }),
            ErrorCode::ThresholdInvalid
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = RawQuery::from_json(br#"{"source":"era5","colour":"red"}"#).unwrap_err();
        assert_eq!(err.code, ErrorCode::InvalidField);
    }

    #[test]
    fn canonical_form_ignores_casing_encoding_and_key_order() {
        let a = RawQuery::from_json(
            br#"{"source":"ERA5","variable":"temperature_avg","level":"GADM1","weight":"nightlight",
                 "base_year":2015,"freq":"Annual","from":1950,"to":2000,"format":"csv"}"#,
        )
        .unwrap()
        .validate()
        .unwrap();
        let b = RawQuery::from_json(
            br#"{"to":2000,"from":1950,"frequency":"annual","base_year":2015,"weight":"nightlight",
                 "level":"gadm1","variable":"temperature_avg","source":"era5","layout":"wide"}"#,
        )
        .unwrap()
        .validate()
        .unwrap();
        assert_eq!(a.canonical().to_string(), b.canonical().to_string());
        let fp = BTreeMap::from([("climate".to_string(), "ab".to_string())]);
        assert_eq!(result_id(&a, &fp), result_id(&b, &fp));
        let other = BTreeMap::from([("climate".to_string(), "cd".to_string())]);
        assert_ne!(result_id(&a, &fp), result_id(&a, &other));
    }

    #[test]
    fn canonical_keys_are_sorted() {
        let q = base().validate().unwrap();
        let keys: Vec<String> = q.canonical().as_object().unwrap().keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn raw_round_trip() {
        let q = base().validate().unwrap();
        assert_eq!(q.to_raw().validate().unwrap(), q);
    }
}
