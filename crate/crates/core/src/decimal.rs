//! Decimal helpers shared by the catalog and pricing code.

use std::fmt;
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Fractional digits kept for every monetary amount.
pub const MONEY_SCALE: u32 = 6;

/// Rounds to [`MONEY_SCALE`] digits, half to even.
pub fn round_money(value: Decimal) -> Decimal {
    value
        .round_dp_with_strategy(MONEY_SCALE, RoundingStrategy::MidpointNearestEven)
        .normalize()
}

/// Correctly rounded conversion to `f64`.
///
/// Goes through the decimal string so the result is the nearest double,
/// which `Decimal::to_f64` does not guarantee for every scale.
pub fn to_f64(value: Decimal) -> f64 {
    value
        .to_string()
        .parse()
        .expect("decimal renders as a valid float literal")
}

/// Parses a decimal from a JSON number or a string such as `"0.125"`.
pub fn deserialize<'de, D>(deserializer: D) -> Result<Decimal, D::Error>
where
    D: Deserializer<'de>,
{
    deserializer.deserialize_any(DecimalVisitor)
}

/// Serializes as a JSON string so no precision is lost.
pub fn serialize<S>(value: &Decimal, serializer: S) -> Result<S::Ok, S::Error>
where
    S: Serializer,
{
    serializer.serialize_str(&value.normalize().to_string())
}

pub mod option {
    use rust_decimal::Decimal;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn deserialize<'de, D>(deserializer: D) -> Result<Option<Decimal>, D::Error>
    where
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Wrapped(#[serde(deserialize_with = "super::deserialize")] Decimal);
        Ok(Option::<Wrapped>::deserialize(deserializer)?.map(|w| w.0))
    }

    pub fn serialize<S>(value: &Option<Decimal>, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
    {
        match value {
            Some(v) => super::serialize(v, serializer),
            None => serializer.serialize_none(),
        }
    }
}

struct DecimalVisitor;

impl<'de> Visitor<'de> for DecimalVisitor {
    type Value = Decimal;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a decimal number or numeric string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
        Ok(Decimal::from(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
        Ok(Decimal::from(v))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        // Shortest round-trip rendering recovers the literal as written.
        parse_decimal(&v.to_string()).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
        parse_decimal(v).map_err(E::custom)
    }
}

fn parse_decimal(text: &str) -> Result<Decimal, String> {
    let text = text.trim();
    Decimal::from_str(text)
        .or_else(|_| Decimal::from_scientific(text))
        .map_err(|_| format!("invalid decimal `{text}`"))
}

/// Upper bound of a tier or capacity: a finite amount or unbounded.
///
/// Encoded in JSON as a number (or numeric string) or the literal string
/// `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Finite(Decimal),
    Unbounded,
}

impl Bound {
    pub fn finite(self) -> Option<Decimal> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn admits(self, value: Decimal) -> bool {
        match self {
            Bound::Finite(limit) => value <= limit,
            Bound::Unbounded => true,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{}", v.normalize()),
            Bound::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => serialize(v, serializer),
            Bound::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BoundVisitor;

        impl<'de> Visitor<'de> for BoundVisitor {
            type Value = Bound;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal number or \"unbounded\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Bound, E> {
                DecimalVisitor.visit_i64(v).map(Bound::Finite)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Bound, E> {
                DecimalVisitor.visit_u64(v).map(Bound::Finite)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Bound, E> {
                DecimalVisitor.visit_f64(v).map(Bound::Finite)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bound, E> {
                if v.eq_ignore_ascii_case("unbounded") {
                    Ok(Bound::Unbounded)
                } else {
                    DecimalVisitor.visit_str(v).map(Bound::Finite)
                }
            }
        }

        deserializer.deserialize_any(BoundVisitor)
    }
}
