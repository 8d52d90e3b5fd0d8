//! Serialization helpers: exact rationals travel as "p/q" strings.

use serde::{Deserialize, Serialize};

use crate::numeric::{parse_rational, q_to_f64, q_to_string, Q};

pub mod qstr {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q_to_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("not a rational: {s}")))
    }
}

/// Big integers as decimal strings.
pub mod bigstr {
    use num_bigint::BigInt;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }
}

/// A value that is exact when the inputs allow it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Exact(#[serde(with = "qstr")] Q),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => q_to_f64(q),
            Number::Float(f) => *f,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Number::Exact(q) => Some(q),
            Number::Float(_) => None,
        }
    }
}
