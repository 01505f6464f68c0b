#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

pub fn load_schema(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Validates `doc` against the keyword subset our schemas use: `type`,
/// `enum`, `required`, `properties`, `additionalProperties: false`,
/// `items`, `minItems`, `pattern` (anchored hex only), numeric bounds and
/// `$ref` to a sibling file or to `#/$defs/...`.
pub fn validate(schema_name: &str, doc: &Value) -> Vec<String> {
    let root = load_schema(schema_name);
    let mut errors = Vec::new();
    check(&root, &root, doc, "$", &mut errors);
    errors
}

fn resolve(root: &Value, reference: &str) -> Value {
    if let Some(path) = reference.strip_prefix("#/$defs/") {
        root["$defs"][path].clone()
    } else {
        load_schema(reference)
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        other => panic!("schema uses unsupported type {other}"),
    }
}

fn check(root: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let target = resolve(root, r);
        let new_root = if r.starts_with('#') { root.clone() } else { target.clone() };
        check(&new_root, &target, v, at, errors);
        return;
    }
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        if !ok {
            errors.push(format!("{at}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        let bound = |k: &str| schema.get(k).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|m| x < m) {
            errors.push(format!("{at}: {x} below minimum"));
        }
        if bound("maximum").is_some_and(|m| x > m) {
            errors.push(format!("{at}: {x} above maximum"));
        }
        if bound("exclusiveMinimum").is_some_and(|m| x <= m) {
            errors.push(format!("{at}: {x} not above exclusiveMinimum"));
        }
        if bound("exclusiveMaximum").is_some_and(|m| x >= m) {
            errors.push(format!("{at}: {x} not below exclusiveMaximum"));
        }
    }
    if let (Some(p), Some(s)) = (schema.get("pattern").and_then(Value::as_str), v.as_str()) {
        assert_eq!(p, "^[0-9a-f]{64}$", "only the digest pattern is supported");
        if !(s.len() == 64 && s.chars().all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c))) {
            errors.push(format!("{at}: {s} is not a hex digest"));
        }
    }
    if let Some(obj) = v.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        if let Some(req) = schema.get("required").and_then(Value::as_array) {
            for k in req {
                if !obj.contains_key(k.as_str().unwrap()) {
                    errors.push(format!("{at}: missing required key {k}"));
                }
            }
        }
        for (k, val) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => check(root, sub, val, &format!("{at}.{k}"), errors),
                None => {
                    if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                        errors.push(format!("{at}: unexpected key {k}"));
                    }
                }
            }
        }
    }
    if let Some(arr) = v.as_array() {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < min {
                errors.push(format!("{at}: fewer than {min} items"));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, item) in arr.iter().enumerate() {
                check(root, items, item, &format!("{at}[{i}]"), errors);
            }
        }
    }
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dpp-lab")
}

pub fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}
