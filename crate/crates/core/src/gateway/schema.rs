//! Closed JSON-Schema-style parameter schemas for tool arguments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Object,
    Array,
}

impl ParamType {
    fn name(self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::Boolean => "boolean",
            ParamType::Object => "object",
            ParamType::Array => "array",
        }
    }

    fn accepts(self, value: &Value) -> bool {
        match self {
            ParamType::String => value.is_string(),
            ParamType::Integer => value.is_i64() || value.is_u64(),
            ParamType::Number => value.is_number(),
            ParamType::Boolean => value.is_boolean(),
            ParamType::Object => value.is_object(),
            ParamType::Array => value.is_array(),
        }
    }
}

/// Kind of network entity a parameter refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Slice,
    Collection,
    Session,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub ty: ParamType,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "enum", default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Box<ParamSpec>>,
    /// Entity this argument names; used for assumption checks by the agent.
    #[serde(rename = "x-entity", default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityKind>,
}

impl ParamSpec {
    pub fn new(ty: ParamType, description: &str) -> Self {
        Self {
            ty,
            description: description.to_owned(),
            enum_values: None,
            minimum: None,
            maximum: None,
            items: None,
            entity: None,
        }
    }

    pub fn string(description: &str) -> Self {
        Self::new(ParamType::String, description)
    }

    pub fn integer(description: &str) -> Self {
        Self::new(ParamType::Integer, description)
    }

    pub fn number(description: &str) -> Self {
        Self::new(ParamType::Number, description)
    }

    pub fn one_of(mut self, values: &[&str]) -> Self {
        self.enum_values = Some(values.iter().map(|v| Value::from(*v)).collect());
        self
    }

    pub fn range(mut self, min: Option<f64>, max: Option<f64>) -> Self {
        self.minimum = min;
        self.maximum = max;
        self
    }

    pub fn array_of(item: ParamSpec, description: &str) -> Self {
        let mut spec = Self::new(ParamType::Array, description);
        spec.items = Some(Box::new(item));
        spec
    }

    pub fn entity(mut self, kind: EntityKind) -> Self {
        self.entity = Some(kind);
        self
    }

    fn check(&self, path: &str) -> Result<(), String> {
        if let Some(values) = &self.enum_values {
            if values.is_empty() {
                return Err(format!("{path}: enum is empty"));
            }
            if let Some(bad) = values.iter().find(|v| !self.ty.accepts(v)) {
                return Err(format!("{path}: enum value {bad} is not {}", self.ty.name()));
            }
        }
        if self.minimum.is_some() || self.maximum.is_some() {
            if !matches!(self.ty, ParamType::Integer | ParamType::Number) {
                return Err(format!("{path}: numeric range on non-numeric type"));
            }
            if let (Some(lo), Some(hi)) = (self.minimum, self.maximum) {
                if lo > hi {
                    return Err(format!("{path}: minimum {lo} above maximum {hi}"));
                }
            }
        }
        match (&self.items, self.ty) {
            (Some(items), ParamType::Array) => items.check(&format!("{path}[]")),
            (Some(_), _) => Err(format!("{path}: items on non-array type")),
            (None, _) => Ok(()),
        }
    }

    fn validate(&self, path: &str, value: &Value) -> Result<(), SchemaViolation> {
        if !self.ty.accepts(value) {
            return Err(SchemaViolation::new(
                path,
                format!("expected {}, got {}", self.ty.name(), json_type(value)),
            ));
        }
        if let Some(values) = &self.enum_values {
            if !values.contains(value) {
                let allowed: Vec<String> = values.iter().map(Value::to_string).collect();
                return Err(SchemaViolation::new(
                    path,
                    format!("{value} is not one of [{}]", allowed.join(", ")),
                ));
            }
        }
        if let Some(x) = value.as_f64() {
            if let Some(lo) = self.minimum {
                if x < lo {
                    return Err(SchemaViolation::new(path, format!("{x} is below minimum {lo}")));
                }
            }
            if let Some(hi) = self.maximum {
                if x > hi {
                    return Err(SchemaViolation::new(path, format!("{x} is above maximum {hi}")));
                }
            }
        }
        if let (Some(items), Some(array)) = (&self.items, value.as_array()) {
            for (i, item) in array.iter().enumerate() {
                items.validate(&format!("{path}[{i}]"), item)?;
            }
        }
        Ok(())
    }
}

fn json_type(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_f64() => "number",
        Value::Number(_) => "integer",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub field: String,
    pub message: String,
}

impl SchemaViolation {
    fn new(field: &str, message: String) -> Self {
        Self {
            field: field.to_owned(),
            message,
        }
    }
}

impl std::fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "field '{}': {}", self.field, self.message)
    }
}

fn object_type() -> String {
    "object".into()
}

/// Object schema: named properties, a required list, no extra fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSchema {
    #[serde(rename = "type", default = "object_type")]
    pub schema_type: String,
    #[serde(default)]
    pub properties: BTreeMap<String, ParamSpec>,
    #[serde(default)]
    pub required: Vec<String>,
    #[serde(rename = "additionalProperties", default)]
    pub additional_properties: bool,
}

impl Default for ParamsSchema {
    fn default() -> Self {
        Self {
            schema_type: object_type(),
            properties: BTreeMap::new(),
            required: Vec::new(),
            additional_properties: false,
        }
    }
}

impl ParamsSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn required(mut self, name: &str, spec: ParamSpec) -> Self {
        self.properties.insert(name.to_owned(), spec);
        self.required.push(name.to_owned());
        self
    }

    pub fn optional(mut self, name: &str, spec: ParamSpec) -> Self {
        self.properties.insert(name.to_owned(), spec);
        self
    }

    /// Checks the schema is internally consistent.
    pub fn check(&self) -> Result<(), String> {
        if self.schema_type != "object" {
            return Err(format!("top-level type must be object, got {}", self.schema_type));
        }
        for name in &self.required {
            if !self.properties.contains_key(name) {
                return Err(format!("required field '{name}' is not a declared property"));
            }
        }
        for (name, spec) in &self.properties {
            spec.check(name)?;
        }
        Ok(())
    }

    pub fn validate(&self, args: &Value) -> Result<(), SchemaViolation> {
        let Some(map) = args.as_object() else {
            return Err(SchemaViolation::new(
                "arguments",
                format!("expected object, got {}", json_type(args)),
            ));
        };
        self.validate_map(map)
    }

    pub fn validate_map(&self, map: &Map<String, Value>) -> Result<(), SchemaViolation> {
        if !self.additional_properties {
            if let Some(extra) = map.keys().find(|k| !self.properties.contains_key(*k)) {
                return Err(SchemaViolation::new(extra, "unknown field".into()));
            }
        }
        for name in &self.required {
            if map.get(name).is_none_or(Value::is_null) {
                return Err(SchemaViolation::new(name, "required field missing".into()));
            }
        }
        for (name, value) in map {
            if let Some(spec) = self.properties.get(name) {
                spec.validate(name, value)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn schema() -> ParamsSchema {
        ParamsSchema::new()
            .required("slice_name", ParamSpec::string("slice").entity(EntityKind::Slice))
            .required("amount", ParamSpec::number("percent").range(Some(-99.0), Some(1000.0)))
            .optional("mode", ParamSpec::string("mode").one_of(&["percent_delta", "absolute"]))
            .optional("limit", ParamSpec::integer("n").range(Some(1.0), None))
            .optional("days", ParamSpec::array_of(ParamSpec::string("day").one_of(&["mon", "tue"]), "days"))
    }

    #[test]
    fn accepts_valid_arguments() {
        let s = schema();
        assert!(s.check().is_ok());
        assert!(s.validate(&json!({"slice_name": "streaming", "amount": 20})).is_ok());
        assert!(s
            .validate(&json!({"slice_name": "s", "amount": 20.5, "mode": "absolute", "limit": 3, "days": ["mon"]}))
            .is_ok());
    }

    #[test]
    fn names_the_offending_field() {
        let s = schema();
        let err = s.validate(&json!({"slice_name": "s", "amount": "twenty"})).unwrap_err();
        assert_eq!(err.field, "amount");
        let err = s.validate(&json!({"amount": 1})).unwrap_err();
        assert_eq!(err.field, "slice_name");
        let err = s.validate(&json!({"slice_name": "s", "amount": 1, "bogus": true})).unwrap_err();
        assert_eq!(err.field, "bogus");
        let err = s.validate(&json!({"slice_name": "s", "amount": -150})).unwrap_err();
        assert_eq!(err.field, "amount");
        let err = s.validate(&json!({"slice_name": "s", "amount": 1, "mode": "other"})).unwrap_err();
        assert_eq!(err.field, "mode");
        let err = s.validate(&json!({"slice_name": "s", "amount": 1, "limit": 2.5})).unwrap_err();
        assert_eq!(err.field, "limit");
        let err = s.validate(&json!({"slice_name": "s", "amount": 1, "days": ["sun"]})).unwrap_err();
        assert_eq!(err.field, "days[0]");
        assert_eq!(s.validate(&json!([1])).unwrap_err().field, "arguments");
    }

    #[test]
    fn null_required_counts_as_missing() {
        let err = schema().validate(&json!({"slice_name": null, "amount": 1})).unwrap_err();
        assert_eq!(err.field, "slice_name");
    }

    #[test]
    fn self_check_catches_inconsistencies() {
        let mut s = schema();
        s.required.push("ghost".into());
        assert!(s.check().is_err());
        let s = ParamsSchema::new().optional("x", ParamSpec::string("x").range(Some(0.0), None));
        assert!(s.check().is_err());
        let s = ParamsSchema::new().optional("x", ParamSpec::integer("x").range(Some(5.0), Some(1.0)));
        assert!(s.check().is_err());
        let mut spec = ParamSpec::integer("x");
        spec.enum_values = Some(vec![json!("a")]);
        assert!(ParamsSchema::new().optional("x", spec).check().is_err());
    }

    #[test]
    fn serializes_as_json_schema() {
        let v = serde_json::to_value(schema()).unwrap();
        assert_eq!(v["type"], "object");
        assert_eq!(v["additionalProperties"], false);
        assert_eq!(v["properties"]["slice_name"]["x-entity"], "slice");
        assert_eq!(v["properties"]["days"]["items"]["enum"], json!(["mon", "tue"]));
        let back: ParamsSchema = serde_json::from_value(v).unwrap();
        assert_eq!(back, schema());
    }
}
