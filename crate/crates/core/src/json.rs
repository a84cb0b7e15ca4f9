//! Float formatting shared by the JSON and CSV writers.
//!
//! Numbers are written in scientific notation with 17 significant digits, which
//! is enough for every `f64` to parse back to the identical bit pattern.

use serde::Serializer;
use serde_json::value::RawValue;

/// `x` with 17 significant digits, or `None` when it is not finite.
pub fn fmt_f64(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

/// Same as [`fmt_f64`] but writes `NaN`/`inf` literally, for CSV cells.
pub fn fmt_f64_cell(x: f64) -> String {
    fmt_f64(x).unwrap_or_else(|| x.to_string())
}

pub(crate) fn serialize_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match fmt_f64(*x) {
        Some(text) => {
            let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
            s.serialize_some(&raw)
        }
        None => s.serialize_none(),
    }
}

pub(crate) fn serialize_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_f64(v, s),
        None => s.serialize_none(),
    }
}
