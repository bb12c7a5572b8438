use serde::Serialize;
use serde_json::Value;

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// CSV text from a header and string rows.
pub fn csv_text<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.iter().map(AsRef::as_ref))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Dotted-path `key,value` CSV of any serializable report. Numbers keep the
/// same shortest round-trip text the JSON output uses.
pub fn flat_csv<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("reports serialize");
    let mut rows = Vec::new();
    flatten("", &v, &mut rows);
    csv_text(&["key", "value"], &rows)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (k, x) in a.iter().enumerate() {
                flatten(&join(&k.to_string()), x, out);
            }
        }
        Value::Null => out.push(vec![prefix.to_string(), String::new()]),
        Value::String(s) => out.push(vec![prefix.to_string(), s.clone()]),
        other => out.push(vec![prefix.to_string(), other.to_string()]),
    }
}

pub fn vector(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn matrix(m: &[Vec<f64>], indent: &str) -> String {
    m.iter()
        .map(|r| format!("{indent}{}\n", vector(r)))
        .collect()
}
