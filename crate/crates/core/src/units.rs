//! Engineering-unit parsing.
//!
//! Everything inside the crate is SI. Config files and command-line flags may
//! write quantities either as bare SI numbers or as strings with a unit suffix,
//! e.g. `"40 ns"`, `"1.62mA"`, `"4 GHz"`, `"50 ohm"`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;

use crate::error::{Error, Result};

const PREFIXES: &[(&str, f64)] = &[
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
];

const BASE_UNITS: &[&str] = &["s", "A", "Hz", "S/s", "ohm", "Ω", "m", "H/m", "F/m", "V"];

/// Parses a quantity such as `"1.62 mA"` into SI units.
///
/// A bare number is taken as SI. The unit, if present, must be one of the
/// recognised base units with an optional metric prefix.
pub fn parse_quantity(text: &str) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && text[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse number in quantity {text:?}")))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let scale = unit_scale(unit)
        .ok_or_else(|| Error::Config(format!("unknown unit {unit:?} in quantity {text:?}")))?;
    // Re-parse with the prefix as a decimal exponent so "1.62 mA" lands on
    // exactly the same double as the literal 1.62e-3.
    let exp = scale.log10().round() as i32;
    let exact: f64 = format!("{}e{exp}", num.trim()).parse().unwrap_or(value * scale);
    Ok(exact)
}

fn unit_scale(unit: &str) -> Option<f64> {
    // "m" alone is metres, not milli-nothing.
    if BASE_UNITS.contains(&unit) {
        return Some(1.0);
    }
    for &(prefix, scale) in PREFIXES {
        if prefix.is_empty() {
            continue;
        }
        if let Some(base) = unit.strip_prefix(prefix) {
            if BASE_UNITS.contains(&base) {
                return Some(scale);
            }
        }
    }
    None
}

/// Serde adapter: accepts a number or a unit-suffixed string, always writes a number.
pub mod quantity {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(*value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        d.deserialize_any(QuantityVisitor)
    }
}

/// Same as [`quantity`] for `Vec<f64>`.
pub mod quantity_vec {
    use serde::Deserialize;

    use super::*;

    #[derive(Deserialize)]
    struct Q(#[serde(with = "super::quantity")] f64);

    pub fn serialize<S: Serializer>(value: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(value.len()))?;
        for v in value {
            seq.serialize_element(v)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let v: Vec<Q> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|q| q.0).collect())
    }
}

struct QuantityVisitor;

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a quantity string such as \"40 ns\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
        parse_quantity(v).map_err(E::custom)
    }
}
