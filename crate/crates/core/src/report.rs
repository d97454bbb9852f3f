//! Deterministic serialization: JSON with every float printed at 17
//! significant digits (round-trip exact) and keys in sorted order, plus the
//! matching CSV writer for field output.

use crate::error::Result;
use serde_json::Value;
use std::fmt::Write as _;

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "\"nan\"".into();
    }
    if v.is_infinite() {
        return if v > 0.0 {
            "\"inf\"".into()
        } else {
            "\"-inf\"".into()
        };
    }
    format!("{v:.16e}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_value(v: &Value, out: &mut String, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap()));
            }
        }
        Value::String(s) => out.push_str(&escape(s)),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                let _ = write!(out, "{pad}  ");
                write_value(item, out, indent + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            let _ = write!(out, "{pad}]");
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            // serde_json's default map is ordered; iteration is sorted by key.
            for (i, (k, item)) in map.iter().enumerate() {
                let _ = write!(out, "{pad}  {}: ", escape(k));
                write_value(item, out, indent + 1);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            let _ = write!(out, "{pad}}}");
        }
    }
}

/// Serialize a JSON value deterministically with 17-significant-digit
/// floats and sorted object keys.
pub fn json_to_string_17(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out, 0);
    out.push('\n');
    out
}

/// Write a CSV file of f64 rows at 17 significant digits.
pub fn write_csv(path: &std::path::Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_exactly() {
        for &v in &[std::f64::consts::PI, 1.0 / 3.0, 1e-300, -2.5e17, 0.1 + 0.2] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn deterministic_output() {
        let v = json!({"b": 1.5, "a": [1, 2.5, true], "c": {"y": "s", "x": null}});
        let s1 = json_to_string_17(&v);
        let s2 = json_to_string_17(&v);
        assert_eq!(s1, s2);
        // Keys come out sorted regardless of insertion order.
        assert!(s1.find("\"a\"").unwrap() < s1.find("\"b\"").unwrap());
        assert!(s1.find("\"x\"").unwrap() < s1.find("\"y\"").unwrap());
        // Parses back as valid JSON.
        let _: serde_json::Value = serde_json::from_str(&s1).unwrap();
    }
}
