//! Canonical JSON: sorted object keys, no insignificant whitespace, floats
//! rounded to six significant digits.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Rounds to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                let x = round_significant(n.as_f64().unwrap_or(0.0), 6);
                out.push_str(&format!("{x:?}"));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

pub fn to_canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

pub fn to_canonical<T: Serialize + ?Sized>(v: &T) -> Result<String, serde_json::Error> {
    Ok(to_canonical_string(&serde_json::to_value(v)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_of<T: Serialize + ?Sized>(v: &T) -> Result<String, serde_json::Error> {
    Ok(sha256_hex(to_canonical(v)?.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_at_every_level() {
        let v = json!({"b": 1, "a": {"z": [3, {"y": true, "x": null}], "c": "s"}});
        assert_eq!(
            to_canonical_string(&v),
            r#"{"a":{"c":"s","z":[3,{"x":null,"y":true}]},"b":1}"#
        );
    }

    #[test]
    fn floats_use_six_significant_digits() {
        let v = json!([0.7, 0.310111599594, 3.0, 1234567.8, -0.000123456789]);
        assert_eq!(to_canonical_string(&v), "[0.7,0.310112,3.0,1234570.0,-0.000123457]");
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let v = json!({"p": 0.123456789, "q": [1.5e-9, 2.0e30]});
        let once = to_canonical_string(&v);
        let reparsed: Value = serde_json::from_str(&once).unwrap();
        assert_eq!(to_canonical_string(&reparsed), once);
    }

    #[test]
    fn strings_are_escaped() {
        let v = json!({"k\"": "line\nbreak"});
        assert_eq!(to_canonical_string(&v), r#"{"k\"":"line\nbreak"}"#);
    }
}
