use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Running SHA-256 over everything a report depends on.
#[derive(Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn update(&mut self, label: &str, bytes: &[u8]) {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn finish(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn report(subcommand: &str, digest: String, seed: u64, results: Value, tolerances: Value) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "inputs_digest": digest,
        "seed": seed,
        "results": results,
        "tolerances": tolerances,
    })
}

pub fn error_report(subcommand: &str, kind: &str, message: &str, location: Option<&str>) -> Value {
    let mut err = Map::new();
    err.insert("kind".into(), kind.into());
    err.insert("message".into(), message.into());
    if let Some(loc) = location {
        err.insert("location".into(), loc.into());
    }
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "error": Value::Object(err),
    })
}

/// Pretty JSON with every float written as `{:.16e}` and keys sorted, so
/// equal inputs give byte-identical output.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize, out: &mut String| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (None, Some(i), _) => out.push_str(&i.to_string()),
            (None, None, Some(f)) => out.push_str(&format!("{f:.16e}")),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|x| x.is_number()) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(x, depth, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(depth + 1, out);
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(depth + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], depth + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(depth, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let v = json!({"b": [1.0, 0.1], "a": 3, "c": {"x": null}});
        assert_eq!(
            render(&v),
            "{\n  \"a\": 3,\n  \"b\": [1.0000000000000000e0, 1.0000000000000001e-1],\n  \"c\": {\n    \"x\": null\n  }\n}\n"
        );
        let parsed: Value = serde_json::from_str(&render(&v)).unwrap();
        assert_eq!(parsed["b"][1].as_f64(), Some(0.1));
    }

    #[test]
    fn digest_separates_fields() {
        let mut a = InputDigest::default();
        a.update("x", b"ab");
        let mut b = InputDigest::default();
        b.update("xa", b"b");
        assert_ne!(a.finish(), b.finish());
    }
}
