//! Fixed-point currency. Amounts are whole hundredths; per-point exchange
//! rates keep six decimals so that rates such as 0.065 stay exact.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// An amount in hundredths of the currency unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(pub i64);

/// Currency per point, in millionths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(pub i64);

const MICROS_PER_CENT: i64 = 10_000;

fn parse_fixed(s: &str, decimals: u32) -> Option<i64> {
    let s = s.trim();
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > decimals as usize {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let scale = 10i64.pow(decimals);
    let frac_scaled = frac_val * 10i64.pow(decimals - frac.len() as u32);
    let v = int.checked_mul(scale)?.checked_add(frac_scaled)?;
    Some(if neg { -v } else { v })
}

impl Money {
    pub fn from_cents(cents: i64) -> Money {
        Money(cents)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    /// Rounds an amount in millionths to the nearest hundredth, halves up.
    pub fn from_micros(micros: i64) -> Money {
        Money((micros + MICROS_PER_CENT / 2).div_euclid(MICROS_PER_CENT))
    }

    pub fn micros(self) -> i64 {
        self.0 * MICROS_PER_CENT
    }
}

impl Rate {
    pub fn micros(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{:02}", self.0.abs() / 100, self.0.abs() % 100)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let s = format!("{}.{:06}", self.0.abs() / 1_000_000, self.0.abs() % 1_000_000);
        let s = s.trim_end_matches('0').trim_end_matches('.');
        write!(f, "{sign}{s}")
    }
}

impl FromStr for Money {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_fixed(s, 2).map(Money).ok_or_else(|| format!("not an amount: {s:?}"))
    }
}

impl FromStr for Rate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_fixed(s, 6).map(Rate).ok_or_else(|| format!("not a rate: {s:?}"))
    }
}

/// Both accept a decimal string or a plain number in config files; numbers
/// go through their shortest decimal representation, so `0.06` is exact.
fn deserialize_fixed<'de, D: Deserializer<'de>, T: FromStr<Err = String>>(d: D) -> Result<T, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Float(f64),
        Text(String),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Int(i) => i.to_string(),
        Raw::Float(f) if f.is_finite() => format!("{f}"),
        Raw::Float(f) => return Err(de::Error::custom(format!("not finite: {f}"))),
        Raw::Text(s) => s,
    };
    text.parse().map_err(de::Error::custom)
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        deserialize_fixed(d)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        deserialize_fixed(d)
    }
}
