//! Intent extra types and typed values.

use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize, Serializer};

/// Type of an intent extra.
///
/// Only the basic types can be populated from outside the app. `Opaque`
/// stands for app-specific objects; an intent carrying one cannot be
/// replayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Long,
    Double,
    Boolean,
    Text,
    Opaque,
}

impl ValueType {
    pub fn is_basic(self) -> bool {
        !matches!(self, ValueType::Opaque)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Int => "int",
            ValueType::Long => "long",
            ValueType::Double => "double",
            ValueType::Boolean => "boolean",
            ValueType::Text => "text",
            ValueType::Opaque => "opaque",
        }
    }

    /// A fixed representative value, used when a script needs some value
    /// of this type and the caller did not supply one.
    pub fn default_value(self) -> Option<Value> {
        Some(match self {
            ValueType::Int => Value::Int(0),
            ValueType::Long => Value::Long(0),
            ValueType::Double => Value::Double(0.0),
            ValueType::Boolean => Value::Boolean(false),
            ValueType::Text => Value::Text(String::from("x")),
            ValueType::Opaque => return None,
        })
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concrete extra value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Long(i64),
    Double(f64),
    Boolean(bool),
    Text(String),
}

/// A literal that does not parse as the requested type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralError {
    pub expected: ValueType,
    pub literal: String,
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int,
            Value::Long(_) => ValueType::Long,
            Value::Double(_) => ValueType::Double,
            Value::Boolean(_) => ValueType::Boolean,
            Value::Text(_) => ValueType::Text,
        }
    }

    /// Parses a textual literal as a value of type `ty`.
    ///
    /// Doubles must be finite. `Opaque` never parses.
    pub fn parse(ty: ValueType, literal: &str) -> Result<Value, LiteralError> {
        let err = || LiteralError {
            expected: ty,
            literal: literal.to_string(),
        };
        match ty {
            ValueType::Int => literal.parse().map(Value::Int).map_err(|_| err()),
            ValueType::Long => literal.parse().map(Value::Long).map_err(|_| err()),
            ValueType::Double => match literal.parse::<f64>() {
                Ok(d) if d.is_finite() => Ok(Value::Double(d)),
                _ => Err(err()),
            },
            ValueType::Boolean => match literal {
                "true" => Ok(Value::Boolean(true)),
                "false" => Ok(Value::Boolean(false)),
                _ => Err(err()),
            },
            ValueType::Text => Ok(Value::Text(literal.to_string())),
            ValueType::Opaque => Err(err()),
        }
    }
}

/// Renders the literal form accepted by [`Value::parse`].
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Long(v) => write!(f, "{v}"),
            Value::Double(v) => write!(f, "{v}"),
            Value::Boolean(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => serializer.serialize_i32(*v),
            Value::Long(v) => serializer.serialize_i64(*v),
            Value::Double(v) => serializer.serialize_f64(*v),
            Value::Boolean(v) => serializer.serialize_bool(*v),
            Value::Text(v) => serializer.serialize_str(v),
        }
    }
}
