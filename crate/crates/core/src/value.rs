//! Guest-visible values and their wire encoding.
//!
//! Values form a small tree grammar (null, bool, arbitrary precision
//! integers, IEEE-754 doubles, strings, lists and string-keyed maps). The
//! same JSON encoding is used in suite files, sidecar inputs and the runner
//! protocol:
//!
//! | value              | encoding                                  |
//! |--------------------|-------------------------------------------|
//! | null, bool, string | native JSON                               |
//! | float (finite)     | JSON number, always with `.` or exponent  |
//! | float (non-finite) | `{"$float": "nan" \| "inf" \| "-inf"}`    |
//! | integer            | `{"$int": "<decimal>"}`                   |
//! | list               | JSON array                                |
//! | map                | `{"$map": {...}}` with sorted keys        |
//!
//! Every JSON object is a tag, so the encoding is injective.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map as JsonMap, Number, Value as Json};
use thiserror::Error;

/// Absolute tolerance applied to floats when comparing guest outputs.
pub const FLOAT_ABS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("malformed value encoding: {0}")]
    Malformed(String),
    #[error("invalid integer literal {0:?}")]
    BadInt(String),
    #[error("json syntax: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

/// Structural identity: floats compare by bit pattern so that encoding
/// round-trips can be checked exactly.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => a == b,
            (Value::Map(a), Value::Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn int(v: i64) -> Self {
        Value::Int(BigInt::from(v))
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }

    /// Output comparison used for correctness checks: exact structure,
    /// floats within [`FLOAT_ABS_TOLERANCE`] (NaN matches NaN).
    pub fn matches(&self, other: &Value) -> bool {
        self.matches_within(other, FLOAT_ABS_TOLERANCE)
    }

    pub fn matches_within(&self, other: &Value, tol: f64) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => {
                if a.is_nan() || b.is_nan() {
                    return a.is_nan() && b.is_nan();
                }
                if a.is_infinite() || b.is_infinite() {
                    return a == b;
                }
                (a - b).abs() <= tol
            }
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.matches_within(y, tol))
            }
            (Value::Map(a), Value::Map(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|((ka, va), (kb, vb))| ka == kb && va.matches_within(vb, tol))
            }
            _ => self == other,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Null => Json::Null,
            Value::Bool(b) => Json::Bool(*b),
            Value::Int(i) => tagged("$int", Json::String(i.to_string())),
            Value::Float(f) => match Number::from_f64(*f) {
                Some(n) => Json::Number(n),
                None => {
                    let repr = if f.is_nan() {
                        "nan"
                    } else if *f > 0.0 {
                        "inf"
                    } else {
                        "-inf"
                    };
                    tagged("$float", Json::String(repr.into()))
                }
            },
            Value::Str(s) => Json::String(s.clone()),
            Value::List(items) => Json::Array(items.iter().map(Value::to_json).collect()),
            Value::Map(m) => {
                let inner: JsonMap<String, Json> =
                    m.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
                tagged("$map", Json::Object(inner))
            }
        }
    }

    pub fn from_json(json: &Json) -> Result<Self, DecodeError> {
        Ok(match json {
            Json::Null => Value::Null,
            Json::Bool(b) => Value::Bool(*b),
            Json::String(s) => Value::Str(s.clone()),
            Json::Number(n) => {
                // Integers only travel as `$int` tags.
                if n.is_f64() {
                    Value::Float(n.as_f64().expect("f64 number"))
                } else {
                    return Err(DecodeError::Malformed(format!(
                        "bare integer {n}; integers must be tagged with $int"
                    )));
                }
            }
            Json::Array(items) => {
                Value::List(items.iter().map(Value::from_json).collect::<Result<_, _>>()?)
            }
            Json::Object(obj) => {
                if obj.len() != 1 {
                    return Err(DecodeError::Malformed(format!(
                        "object with {} keys is not a tag",
                        obj.len()
                    )));
                }
                let (tag, payload) = obj.iter().next().expect("one entry");
                match (tag.as_str(), payload) {
                    ("$int", Json::String(s)) => Value::Int(parse_int(s)?),
                    ("$float", Json::String(s)) => Value::Float(match s.as_str() {
                        "nan" => f64::NAN,
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        other => {
                            return Err(DecodeError::Malformed(format!("float tag {other:?}")))
                        }
                    }),
                    ("$map", Json::Object(inner)) => Value::Map(
                        inner
                            .iter()
                            .map(|(k, v)| Ok((k.clone(), Value::from_json(v)?)))
                            .collect::<Result<_, DecodeError>>()?,
                    ),
                    (other, _) => {
                        return Err(DecodeError::Malformed(format!("unknown tag {other:?}")))
                    }
                }
            }
        })
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("json encoding is infallible")
    }

    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        let json: Json =
            serde_json::from_str(text).map_err(|e| DecodeError::Syntax(e.to_string()))?;
        Value::from_json(&json)
    }

    /// Size proxy used by work-scaled guests: list/str/map length, integer
    /// magnitude (saturating), 1 otherwise.
    pub fn magnitude(&self) -> u64 {
        match self {
            Value::List(v) => v.len() as u64,
            Value::Str(s) => s.chars().count() as u64,
            Value::Map(m) => m.len() as u64,
            Value::Int(i) => i.abs().to_u64().unwrap_or(u64::MAX),
            Value::Float(f) if f.is_finite() => f.abs() as u64,
            _ => 1,
        }
    }

    pub fn is_zero_int(&self) -> bool {
        matches!(self, Value::Int(i) if i.is_zero())
    }
}

fn tagged(tag: &str, payload: Json) -> Json {
    let mut m = JsonMap::new();
    m.insert(tag.to_string(), payload);
    Json::Object(m)
}

fn parse_int(s: &str) -> Result<BigInt, DecodeError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    let canonical = !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
        && s != "-0";
    if !canonical {
        return Err(DecodeError::BadInt(s.to_string()));
    }
    BigInt::from_str(s).map_err(|_| DecodeError::BadInt(s.to_string()))
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(deserializer)?;
        Value::from_json(&json).map_err(D::Error::custom)
    }
}

/// Positional arguments of one guest invocation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Args(pub Vec<Value>);

impl Args {
    pub fn new(values: Vec<Value>) -> Self {
        Args(values)
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(&Json::Array(self.0.iter().map(Value::to_json).collect()))
            .expect("json encoding is infallible")
    }

    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        match Value::decode(text)? {
            Value::List(v) => Ok(Args(v)),
            other => Err(DecodeError::Malformed(format!(
                "arguments must be a list, got {}",
                other.type_name()
            ))),
        }
    }

    /// Turns a generator's return value into call arguments. Generators
    /// return the argument list itself.
    pub fn from_generated(value: Value) -> Result<Self, DecodeError> {
        match value {
            Value::List(v) => Ok(Args(v)),
            other => Err(DecodeError::Malformed(format!(
                "generator must return an argument list, got {}",
                other.type_name()
            ))),
        }
    }

    pub fn first(&self) -> Option<&Value> {
        self.0.first()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(Value::int),
            "[0-9]{1,60}".prop_map(|s| Value::Int(s.parse::<BigInt>().unwrap() * -1)),
            any::<f64>().prop_map(Value::Float),
            ".{0,12}".prop_map(Value::Str),
        ];
        leaf.prop_recursive(4, 48, 6, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..6).prop_map(Value::List),
                prop::collection::btree_map(".{0,6}", inner, 0..5).prop_map(Value::Map),
            ]
        })
    }

    proptest! {
        #[test]
        fn encoding_round_trips_bit_exactly(v in arb_value()) {
            let text = v.encode();
            let back = Value::decode(&text).unwrap();
            prop_assert_eq!(&back, &v);
            prop_assert_eq!(back.encode(), text);
        }

        #[test]
        fn distinct_values_have_distinct_encodings(a in arb_value(), b in arb_value()) {
            if a != b {
                prop_assert_ne!(a.encode(), b.encode());
            }
        }

        #[test]
        fn output_match_is_reflexive_and_symmetric(a in arb_value(), b in arb_value()) {
            prop_assert!(a.matches(&a));
            prop_assert_eq!(a.matches(&b), b.matches(&a));
        }
    }

    #[test]
    fn string_that_looks_like_an_int_stays_a_string() {
        let s = Value::Str("42".into());
        let i = Value::int(42);
        assert_ne!(s.encode(), i.encode());
        assert_eq!(i.encode(), r#"{"$int":"42"}"#);
    }

    #[test]
    fn map_with_tag_like_key_is_unambiguous() {
        let mut m = BTreeMap::new();
        m.insert("$int".to_string(), Value::Str("7".into()));
        let v = Value::Map(m);
        assert_eq!(Value::decode(&v.encode()).unwrap(), v);
        assert_ne!(v.encode(), Value::int(7).encode());
    }

    #[test]
    fn big_integers_survive() {
        let p: BigInt = "170141183460469231731687303715884105727".parse().unwrap();
        let v = Value::Int(p.pow(4));
        assert_eq!(Value::decode(&v.encode()).unwrap(), v);
    }

    #[test]
    fn floats_keep_their_type() {
        for f in [1.0, -0.0, 1e300, 5e-324, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            let v = Value::Float(f);
            let back = Value::decode(&v.encode()).unwrap();
            assert_eq!(back, v, "{f}");
        }
    }

    #[test]
    fn rejects_bare_and_noncanonical_integers() {
        assert!(Value::decode("3").is_err());
        assert!(Value::decode(r#"{"$int":"007"}"#).is_err());
        assert!(Value::decode(r#"{"$int":"-0"}"#).is_err());
        assert!(Value::decode(r#"{"$int":"1e3"}"#).is_err());
        assert!(Value::decode(r#"{"a":1.0,"b":2.0}"#).is_err());
    }

    #[test]
    fn float_tolerance_policy() {
        let a = Value::Float(0.5);
        assert!(a.matches(&Value::Float(0.5 + 1e-9)));
        assert!(!a.matches(&Value::Float(0.5 + 1e-3)));
        assert!(Value::Float(f64::NAN).matches(&Value::Float(f64::NAN)));
        assert!(!Value::int(1).matches(&Value::Float(1.0)));
        let l = Value::List(vec![Value::Float(1.0), Value::int(2)]);
        assert!(l.matches(&Value::List(vec![Value::Float(1.0 - 1e-9), Value::int(2)])));
    }

    #[test]
    fn args_reject_non_list() {
        assert!(Args::decode(r#"{"$int":"1"}"#).is_err());
        assert_eq!(Args::decode("[]").unwrap(), Args::default());
    }
}
