//! Serde helpers for extended reals: finite values as JSON numbers,
//! infinities as the strings `"inf"` / `"-inf"`, NaN as `null`.

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

pub fn serialize<S: Serializer>(x: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        serializer.serialize_f64(*x)
    } else if x.is_nan() {
        serializer.serialize_none()
    } else if *x > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    struct ExtRealVisitor;

    impl<'de> Visitor<'de> for ExtRealVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number, \"inf\", \"-inf\" or null")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }

        fn visit_none<E: de::Error>(self) -> Result<f64, E> {
            Ok(f64::NAN)
        }

        fn visit_unit<E: de::Error>(self) -> Result<f64, E> {
            Ok(f64::NAN)
        }
    }

    deserializer.deserialize_any(ExtRealVisitor)
}

/// Formats with `decimals` places after half-away-from-zero rounding of the
/// decimal value; infinities print as `inf` / `-inf`.
pub fn display(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        let r = round_half_away(x, decimals);
        // avoid "-0.00"
        let r = if r == 0.0 { 0.0 } else { r };
        format!("{:.*}", decimals, r)
    }
}

/// Shortest round-trip form; infinities print as `inf` / `-inf`.
pub fn display_full(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        display(x, 0)
    }
}

/// Rounds half away from zero at `decimals` places, treating values within
/// 1e-9 of a tie as ties (so `0.745` rounds to `0.75` despite its binary
/// representation sitting just below).
pub fn round_half_away(x: f64, decimals: usize) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    (scaled + scaled.signum() * 1e-9).round() / scale
}
