//! Scalar literals used in test cases: signed integers up to 64 bits and
//! decimal floats. Strings and arrays are out of the supported problem class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One scalar value read from a test file or printed by a test binary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum ScalarValue {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Error)]
#[error("not a scalar literal: `{0}`")]
pub struct ScalarParseError(pub String);

impl ScalarValue {
    /// Parse a whitespace-delimited token. Tokens that look integral parse as
    /// `Int`; anything with a decimal point or exponent parses as `Float`.
    pub fn parse(token: &str) -> Result<Self, ScalarParseError> {
        if let Ok(v) = token.parse::<i64>() {
            return Ok(ScalarValue::Int(v));
        }
        if let Ok(v) = token.parse::<f64>() {
            if v.is_finite() {
                return Ok(ScalarValue::Float(v));
            }
        }
        Err(ScalarParseError(token.to_string()))
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            ScalarValue::Int(v) => v as f64,
            ScalarValue::Float(v) => v,
        }
    }

    /// Value comparison: integer pairs compare exactly, anything involving a
    /// float compares within `epsilon`, relative above 1.0 and absolute below.
    pub fn matches(&self, actual: &ScalarValue, epsilon: f64) -> bool {
        match (self, actual) {
            (ScalarValue::Int(e), ScalarValue::Int(a)) => e == a,
            _ => {
                let e = self.as_f64();
                let a = actual.as_f64();
                e == a || (e - a).abs() <= epsilon * 1.0_f64.max(e.abs()).max(a.abs())
            }
        }
    }
}

impl std::fmt::Display for ScalarValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ScalarValue::Int(v) => write!(f, "{v}"),
            ScalarValue::Float(v) => {
                // keep floats float-looking so a rendered value parses back
                // to the same variant
                let s = format!("{v}");
                if s.contains(['.', 'e', 'E']) {
                    write!(f, "{s}")
                } else {
                    write!(f, "{v:.1}")
                }
            }
        }
    }
}

/// Parse every whitespace-separated token of `text` as a scalar.
pub fn parse_scalars(text: &str) -> Result<Vec<ScalarValue>, ScalarParseError> {
    text.split_whitespace().map(ScalarValue::parse).collect()
}
