//! Quantities with unit suffixes in configuration files.
//!
//! A field accepts either a bare number, read in the base unit of its
//! dimension (Ah, Ω, V, s, F, degrees), or a string such as `"30 mOhm"`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};

/// Physical dimension of a configuration field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Charge,
    Resistance,
    Voltage,
    Time,
    Capacitance,
    Angle,
    Ratio,
}

impl Dimension {
    /// Recognized suffixes and their factor to the base unit.
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Charge => &[("Ah", 1.0), ("mAh", 1e-3), ("As", 1.0 / 3600.0), ("C", 1.0 / 3600.0)],
            Dimension::Resistance => {
                &[("Ohm", 1.0), ("ohm", 1.0), ("Ω", 1.0), ("mOhm", 1e-3), ("mohm", 1e-3), ("mΩ", 1e-3)]
            }
            Dimension::Voltage => &[("V", 1.0), ("mV", 1e-3)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("min", 60.0), ("h", 3600.0)],
            Dimension::Capacitance => &[("F", 1.0), ("kF", 1e3), ("mF", 1e-3)],
            Dimension::Angle => &[("deg", 1.0), ("°", 1.0), ("rad", 180.0 / std::f64::consts::PI)],
            Dimension::Ratio => &[("%", 0.01)],
        }
    }

    fn base(self) -> &'static str {
        self.units()[0].0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Charge => "charge",
            Dimension::Resistance => "resistance",
            Dimension::Voltage => "voltage",
            Dimension::Time => "time",
            Dimension::Capacitance => "capacitance",
            Dimension::Angle => "angle",
            Dimension::Ratio => "ratio",
        };
        f.write_str(name)
    }
}

/// Parses `"<number> <unit>"` (space optional) into the base unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .map_or(text.len(), |(i, _)| i);
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot read a number from {text:?}"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, factor)| value * factor)
        .ok_or_else(|| {
            let known: Vec<_> = dim.units().iter().map(|(u, _)| *u).collect();
            format!("unknown {dim} unit {unit:?} (expected one of {})", known.join(", "))
        })
}

struct QuantityVisitor(Dimension);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a number in {} or a string with a {} unit", self.0.base(), self.0)
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
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

fn quantity<'de, D: Deserializer<'de>>(d: D, dim: Dimension) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(dim))
}

macro_rules! field {
    ($name:ident, $opt:ident, $dim:expr) => {
        pub fn $name<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            quantity(d, $dim)
        }

        pub fn $opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            quantity(d, $dim).map(Some)
        }
    };
}

field!(charge, opt_charge, Dimension::Charge);
field!(resistance, opt_resistance, Dimension::Resistance);
field!(voltage, opt_voltage, Dimension::Voltage);
field!(time, opt_time, Dimension::Time);
field!(capacitance, opt_capacitance, Dimension::Capacitance);
field!(angle, opt_angle, Dimension::Angle);
field!(ratio, opt_ratio, Dimension::Ratio);

/// A list of angles.
pub fn angles<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(serde::Deserialize)]
    struct Angle(#[serde(deserialize_with = "angle")] f64);
    let v: Vec<Angle> = serde::Deserialize::deserialize(d)?;
    Ok(v.into_iter().map(|a| a.0).collect())
}

/// A list of ratios.
pub fn ratios<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(serde::Deserialize)]
    struct Ratio(#[serde(deserialize_with = "ratio")] f64);
    let v: Vec<Ratio> = serde::Deserialize::deserialize(d)?;
    Ok(v.into_iter().map(|a| a.0).collect())
}
