//! Shared helpers for CLI integration tests: running the binary and
//! validating JSON outputs against the schemas shipped in `docs/schemas`.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Run the `mqiv` binary with the given arguments.
pub fn mqiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal termination")
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

pub fn load_schema(name: &str) -> Value {
    let path = schema_dir().join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading schema {}: {e}", path.display()));
    serde_json::from_str(&text).expect("schema is valid JSON")
}

/// Validate `value` against the subset of JSON Schema used by the shipped
/// schemas: `type` (single or list), `enum`, `properties`, `required`,
/// `additionalProperties` (boolean or schema), `items`, `minItems`,
/// `maxItems`. Returns every violation with a JSON-pointer-style path.
pub fn validate(schema: &Value, value: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, value, "$", &mut errors);
    errors
}

/// Assert conformance with a readable failure message.
pub fn assert_valid(schema_name: &str, value: &Value) {
    let schema = load_schema(schema_name);
    let errors = validate(&schema, value);
    assert!(
        errors.is_empty(),
        "{schema_name} violations:\n  {}\nvalue: {value:#}",
        errors.join("\n  ")
    );
}

fn type_matches(name: &str, value: &Value) -> bool {
    match name {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        _ => false,
    }
}

fn check(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(schema) = schema.as_object() else {
        if schema == &Value::Bool(false) {
            errors.push(format!("{path}: no value allowed here"));
        }
        return;
    };

    if let Some(expected) = schema.get("type") {
        let names: Vec<&str> = match expected {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        if !names.iter().any(|n| type_matches(n, value)) {
            errors.push(format!("{path}: expected type {names:?}, got {value}"));
            return;
        }
    }

    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }

    if let Some(object) = value.as_object() {
        let properties = schema.get("properties").and_then(Value::as_object);
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !object.contains_key(key) {
                    errors.push(format!("{path}: missing required property {key:?}"));
                }
            }
        }
        for (key, child) in object {
            let child_path = format!("{path}.{key}");
            match properties.and_then(|p| p.get(key)) {
                Some(subschema) => check(subschema, child, &child_path, errors),
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        errors.push(format!("{path}: unexpected property {key:?}"))
                    }
                    Some(subschema) if subschema.is_object() => {
                        check(subschema, child, &child_path, errors)
                    }
                    _ => {}
                },
            }
        }
    }

    if let Some(list) = value.as_array() {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (list.len() as u64) < min {
                errors.push(format!("{path}: fewer than {min} items"));
            }
        }
        if let Some(max) = schema.get("maxItems").and_then(Value::as_u64) {
            if (list.len() as u64) > max {
                errors.push(format!("{path}: more than {max} items"));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, child) in list.iter().enumerate() {
                check(items, child, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn validator_catches_each_violation_kind() {
        let schema = json!({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {
                "a": { "type": ["number", "null"] },
                "b": { "type": "array", "items": { "type": "integer" }, "minItems": 2, "maxItems": 2 },
                "c": { "enum": ["x", "y"] }
            }
        });
        assert!(validate(&schema, &json!({"a": 1.5})).is_empty());
        assert!(validate(&schema, &json!({"a": null})).is_empty());
        assert!(!validate(&schema, &json!({})).is_empty());
        assert!(!validate(&schema, &json!({"a": "s"})).is_empty());
        assert!(!validate(&schema, &json!({"a": 1, "d": 2})).is_empty());
        assert!(!validate(&schema, &json!({"a": 1, "b": [1]})).is_empty());
        assert!(!validate(&schema, &json!({"a": 1, "b": [1, 2, 3]})).is_empty());
        assert!(!validate(&schema, &json!({"a": 1, "b": [1.5, 2.0]})).is_empty());
        assert!(!validate(&schema, &json!({"a": 1, "c": "z"})).is_empty());
    }
}
