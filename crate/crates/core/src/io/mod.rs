//! File-format plumbing shared by the CLI and the test harnesses: a
//! plain-text sectioned config format, CSV schemas for every artifact the
//! tools emit, and small hand-rolled SVG plots.
//!
//! CSV is the interface of record; SVG output is a viewing convenience.
//! Every float is serialized with 17 significant digits (`{:.16e}`), which
//! is enough for `f64` values to round-trip bit-exactly through their
//! readers.

pub mod config;
pub mod csv;
pub mod svg;

pub use config::{ConfigError, Integrator, RunConfig};
pub use csv::CsvError;

use crate::num::Real;

/// Canonical float serialization: 17 significant digits, so parsing the
/// string back recovers the original `f64` bit pattern. Non-finite values
/// print as `inf`, `-inf` and `NaN`, which `f64::from_str` accepts.
pub fn fmt_float<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Parses a float serialized by [`fmt_float`] (or any decimal literal).
pub fn parse_float<T: Real>(s: &str) -> Option<T> {
    s.trim().parse::<f64>().ok().map(T::lit)
}
