use std::fmt;

use serde::Serialize;

/// Machine-readable error codes shared by the HTTP API and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidField,
    VariableNotInSource,
    SpeiAnnualForbidden,
    FrequencyUnavailable,
    ThresholdRequiresEra5Daily,
    ThresholdFrequencyInvalid,
    ThresholdInvalid,
    BaseYearInvalid,
    TimeRangeInvalid,
    PeriodOutsideResult,
    TimeRangeOutsideCoverage,
    DataUnavailable,
    UnknownResult,
    NotFound,
    IndexCorrupt,
    NotIndexed,
    Internal,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::InvalidField => "invalid_field",
            ErrorCode::VariableNotInSource => "variable_not_in_source",
            ErrorCode::SpeiAnnualForbidden => "spei_annual_forbidden",
            ErrorCode::FrequencyUnavailable => "frequency_unavailable",
            ErrorCode::ThresholdRequiresEra5Daily => "threshold_requires_era5_daily",
            ErrorCode::ThresholdFrequencyInvalid => "threshold_frequency_invalid",
            ErrorCode::ThresholdInvalid => "threshold_invalid",
            ErrorCode::BaseYearInvalid => "base_year_invalid",
            ErrorCode::TimeRangeInvalid => "time_range_invalid",
            ErrorCode::PeriodOutsideResult => "period_outside_result",
            ErrorCode::TimeRangeOutsideCoverage => "time_range_outside_coverage",
            ErrorCode::DataUnavailable => "data_unavailable",
            ErrorCode::UnknownResult => "unknown_result",
            ErrorCode::NotFound => "not_found",
            ErrorCode::IndexCorrupt => "index_corrupt",
            ErrorCode::NotIndexed => "not_indexed",
            ErrorCode::Internal => "internal",
        }
    }

    /// HTTP status for the code.
    pub fn status(&self) -> u16 {
        use ErrorCode::*;
        match self {
            InvalidField | VariableNotInSource | SpeiAnnualForbidden | FrequencyUnavailable
            | ThresholdRequiresEra5Daily | ThresholdFrequencyInvalid | ThresholdInvalid
            | BaseYearInvalid | TimeRangeInvalid | PeriodOutsideResult => 400,
            UnknownResult | NotFound => 404,
            TimeRangeOutsideCoverage | DataUnavailable => 422,
            IndexCorrupt | NotIndexed => 503,
            Internal => 500,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn internal(err: impl fmt::Display) -> Self {
        Self::new(ErrorCode::Internal, err.to_string())
    }

    /// The request itself was at fault (4xx).
    pub fn is_client_error(&self) -> bool {
        (400..500).contains(&self.code.status())
    }

    pub fn body(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "code": self.code, "message": self.message } })
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<wclim_core::Error> for ApiError {
    fn from(err: wclim_core::Error) -> Self {
        ApiError::internal(err)
    }
}
