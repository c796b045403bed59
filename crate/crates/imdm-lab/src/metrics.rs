//! metrics.json payload and its shipped JSON-schema mirror.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Metrics emitted by sample/eval/analyze runs. Field names are part of the
/// external contract.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub validity: f64,
    pub token_entropy_nats: f64,
    /// Null when no model joint is defined (e.g. the random baseline).
    pub fact_error_nats: Option<f64>,
    pub thm1_bound_nats: f64,
    pub n_samples: usize,
    pub n_eps: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// The JSON schema shipped at `schemas/metrics.schema.json`.
pub const METRICS_SCHEMA: &str = include_str!("../schemas/metrics.schema.json");

/// Validate a metrics document against the shipped schema. Covers the
/// subset of JSON Schema the file uses: type, required, properties,
/// additionalProperties, and numeric minimums.
pub fn validate_against_schema(doc: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(METRICS_SCHEMA)?;
    validate_object(doc, &schema)
}

fn type_matches(v: &Value, ty: &str) -> bool {
    match ty {
        "object" => v.is_object(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "string" => v.is_string(),
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "array" => v.is_array(),
        _ => false,
    }
}

fn validate_object(doc: &Value, schema: &Value) -> Result<()> {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(s) => type_matches(doc, s),
            Value::Array(options) => options
                .iter()
                .filter_map(|t| t.as_str())
                .any(|s| type_matches(doc, s)),
            _ => bail!("schema type must be string or array"),
        };
        if !ok {
            bail!("value {doc} does not match type {ty}");
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if let Some(x) = doc.as_f64() {
            if x < min {
                bail!("value {x} below minimum {min}");
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        let obj = doc
            .as_object()
            .ok_or_else(|| anyhow::anyhow!("expected object"))?;
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    bail!("missing required field {key:?}");
                }
            }
        }
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in obj.keys() {
                if !props.contains_key(key) {
                    bail!("unexpected field {key:?}");
                }
            }
        }
        for (key, sub) in props {
            if let Some(v) = obj.get(key) {
                validate_object(v, sub)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Metrics {
        Metrics {
            validity: 0.5,
            token_entropy_nats: 0.69,
            fact_error_nats: Some(0.693),
            thm1_bound_nats: 0.693,
            n_samples: 5000,
            n_eps: 10_000,
            steps: 1,
            seed: 7,
        }
    }

    #[test]
    fn emitted_metrics_validate() {
        let doc: Value = serde_json::from_str(&sample().to_json()).unwrap();
        validate_against_schema(&doc).unwrap();
    }

    #[test]
    fn null_error_is_allowed() {
        let mut m = sample();
        m.fact_error_nats = None;
        let doc: Value = serde_json::from_str(&m.to_json()).unwrap();
        validate_against_schema(&doc).unwrap();
    }

    #[test]
    fn schema_rejects_missing_and_extra_fields() {
        let mut doc: Value = serde_json::from_str(&sample().to_json()).unwrap();
        doc.as_object_mut().unwrap().remove("validity");
        assert!(validate_against_schema(&doc).is_err());

        let mut doc: Value = serde_json::from_str(&sample().to_json()).unwrap();
        doc.as_object_mut()
            .unwrap()
            .insert("surprise".into(), Value::Bool(true));
        assert!(validate_against_schema(&doc).is_err());
    }
}
