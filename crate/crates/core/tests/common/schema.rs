//! Validator for the subset of JSON Schema used under `docs/api/`.
//!
//! Unknown keywords are rejected so the validator can never silently
//! accept a schema it does not understand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

pub struct Schemas {
    docs: BTreeMap<String, Value>,
}

const ANNOTATIONS: &[&str] = &["$schema", "$id", "$defs", "title", "description"];

impl Schemas {
    pub fn load(dir: &Path) -> Self {
        let mut docs = BTreeMap::new();
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json") {
                let name = path.file_name().unwrap().to_string_lossy().to_string();
                let doc: Value =
                    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
                docs.insert(name, doc);
            }
        }
        Schemas { docs }
    }

    pub fn api_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/api")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    /// Errors found validating `value` against the schema file `name`.
    pub fn validate(&self, name: &str, value: &Value) -> Vec<String> {
        let mut errors = Vec::new();
        let schema = self
            .docs
            .get(name)
            .unwrap_or_else(|| panic!("no schema {name}"));
        self.check(name, schema, value, "$", &mut errors);
        errors
    }

    fn resolve(&self, doc: &str, reference: &str) -> (String, &Value) {
        let (file, fragment) = reference.split_once('#').unwrap_or((reference, ""));
        let file = if file.is_empty() {
            doc.to_string()
        } else {
            file.to_string()
        };
        let mut node = self
            .docs
            .get(&file)
            .unwrap_or_else(|| panic!("unresolved $ref {reference}"));
        for part in fragment.split('/').filter(|p| !p.is_empty()) {
            node = node
                .get(part)
                .unwrap_or_else(|| panic!("unresolved $ref {reference}"));
        }
        (file, node)
    }

    fn check(&self, doc: &str, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
        let Some(map) = schema.as_object() else {
            panic!("schema at {at} is not an object");
        };
        for (key, rule) in map {
            match key.as_str() {
                k if ANNOTATIONS.contains(&k) => {}
                "$ref" => {
                    let (file, target) = self.resolve(doc, rule.as_str().unwrap());
                    self.check(&file, target, v, at, errors);
                }
                "type" => {
                    let types: Vec<&str> = match rule {
                        Value::String(s) => vec![s.as_str()],
                        Value::Array(a) => a.iter().map(|t| t.as_str().unwrap()).collect(),
                        _ => panic!("bad type keyword"),
                    };
                    if !types.iter().any(|t| has_type(v, t)) {
                        errors.push(format!("{at}: expected {types:?}, got {v}"));
                    }
                }
                "enum" => {
                    if !rule.as_array().unwrap().contains(v) {
                        errors.push(format!("{at}: {v} not in {rule}"));
                    }
                }
                "const" => {
                    if rule != v {
                        errors.push(format!("{at}: expected {rule}, got {v}"));
                    }
                }
                "properties" => {
                    if let Some(obj) = v.as_object() {
                        for (name, sub) in rule.as_object().unwrap() {
                            if let Some(field) = obj.get(name) {
                                self.check(doc, sub, field, &format!("{at}.{name}"), errors);
                            }
                        }
                    }
                }
                "required" => {
                    if let Some(obj) = v.as_object() {
                        for name in rule.as_array().unwrap() {
                            let name = name.as_str().unwrap();
                            if !obj.contains_key(name) {
                                errors.push(format!("{at}: missing `{name}`"));
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    if let Some(obj) = v.as_object() {
                        let declared = map.get("properties").and_then(Value::as_object);
                        for (name, field) in obj {
                            if declared.is_some_and(|d| d.contains_key(name)) {
                                continue;
                            }
                            match rule {
                                Value::Bool(false) => {
                                    errors.push(format!("{at}: unexpected `{name}`"))
                                }
                                Value::Bool(true) => {}
                                sub => self.check(doc, sub, field, &format!("{at}.{name}"), errors),
                            }
                        }
                    }
                }
                "items" => {
                    if let Some(items) = v.as_array() {
                        let skip = map
                            .get("prefixItems")
                            .and_then(Value::as_array)
                            .map_or(0, Vec::len);
                        for (i, item) in items.iter().enumerate().skip(skip) {
                            self.check(doc, rule, item, &format!("{at}[{i}]"), errors);
                        }
                    }
                }
                "prefixItems" => {
                    if let Some(items) = v.as_array() {
                        for (i, (sub, item)) in
                            rule.as_array().unwrap().iter().zip(items).enumerate()
                        {
                            self.check(doc, sub, item, &format!("{at}[{i}]"), errors);
                        }
                    }
                }
                "minItems" | "maxItems" => {
                    if let Some(items) = v.as_array() {
                        let n = rule.as_u64().unwrap() as usize;
                        if (key == "minItems" && items.len() < n)
                            || (key == "maxItems" && items.len() > n)
                        {
                            errors.push(format!("{at}: {key} {n}, got {}", items.len()));
                        }
                    }
                }
                "minLength" | "maxLength" => {
                    if let Some(s) = v.as_str() {
                        let n = rule.as_u64().unwrap() as usize;
                        let len = s.chars().count();
                        if (key == "minLength" && len < n) || (key == "maxLength" && len > n) {
                            errors.push(format!("{at}: {key} {n}, got {len}"));
                        }
                    }
                }
                "pattern" => {
                    if let Some(s) = v.as_str() {
                        let re = regex::Regex::new(rule.as_str().unwrap()).unwrap();
                        if !re.is_match(s) {
                            errors.push(format!("{at}: {s:?} does not match {rule}"));
                        }
                    }
                }
                "minimum" | "maximum" | "exclusiveMinimum" => {
                    if let Some(x) = v.as_f64() {
                        let bound = rule.as_f64().unwrap();
                        let ok = match key.as_str() {
                            "minimum" => x >= bound,
                            "maximum" => x <= bound,
                            _ => x > bound,
                        };
                        if !ok {
                            errors.push(format!("{at}: {x} violates {key} {bound}"));
                        }
                    }
                }
                "anyOf" | "oneOf" => {
                    let branches = rule.as_array().unwrap();
                    let passing = branches
                        .iter()
                        .filter(|b| {
                            let mut e = Vec::new();
                            self.check(doc, b, v, at, &mut e);
                            e.is_empty()
                        })
                        .count();
                    let ok = if key == "anyOf" {
                        passing >= 1
                    } else {
                        passing == 1
                    };
                    if !ok {
                        errors.push(format!(
                            "{at}: {passing} of {} {key} branches match",
                            branches.len()
                        ));
                    }
                }
                other => panic!("unsupported schema keyword `{other}` at {at}"),
            }
        }
    }
}

fn has_type(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        _ => panic!("unknown type {t}"),
    }
}
