//! Text rendering of JSON reports: scalars as `key: value`, arrays of objects as
//! aligned tables, nested objects indented.

use serde_json::{Map, Value};

/// Fixed float formatting so text reports are reproducible byte for byte.
pub fn number(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if !x.is_finite() {
        format!("{x}")
    } else if x.abs() >= 1e8 || x.abs() < 1e-6 {
        format!("{x:.9e}")
    } else {
        format!("{x:.12}")
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => i.to_string(),
            _ => number(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        Value::Array(xs) => format!("[{}]", xs.iter().map(scalar).collect::<Vec<_>>().join(", ")),
        Value::Object(_) => "{..}".into(),
    }
}

fn is_table(xs: &[Value]) -> bool {
    !xs.is_empty() && xs.iter().all(Value::is_object)
}

/// Column order: `node` and `time` first, the rest alphabetically.
fn columns(rows: &[Value]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for row in rows {
        for k in row.as_object().expect("table rows are objects").keys() {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    let rank = |c: &str| match c {
        "node" => 0,
        "time" => 1,
        _ => 2,
    };
    cols.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    cols
}

fn table(out: &mut String, indent: &str, rows: &[Value]) {
    let cols = columns(rows);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| r.get(c).map(scalar).unwrap_or_default()).collect())
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |vals: Vec<&str>| {
        let padded: Vec<String> = vals.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        format!("{indent}  {}\n", padded.join("  "))
    };
    out.push_str(&line(cols.iter().map(String::as_str).collect()));
    for row in &cells {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
}

fn object(out: &mut String, indent: &str, map: &Map<String, Value>) {
    for (k, v) in map {
        match v {
            Value::Object(inner) => {
                out.push_str(&format!("{indent}{k}:\n"));
                object(out, &format!("{indent}  "), inner);
            }
            Value::Array(xs) if is_table(xs) => {
                out.push_str(&format!("{indent}{k}:\n"));
                table(out, indent, xs);
            }
            other => out.push_str(&format!("{indent}{k}: {}\n", scalar(other))),
        }
    }
}

pub fn text(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(map) => object(&mut out, "", map),
        other => out.push_str(&format!("{}\n", scalar(other))),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn numbers_have_fixed_formats() {
        assert_eq!(number(0.0), "0");
        assert_eq!(number(1.0 / 3.0), "0.333333333333");
        assert_eq!(number(2.5e-10), "2.500000000e-10");
        assert_eq!(number(-1e9), "-1.000000000e9");
    }

    #[test]
    fn tables_put_node_first() {
        let r = json!({"rows": [{"y": 1.0, "node": 0}, {"y": 0.5, "node": 1}], "ok": true});
        let s = text(&r);
        assert!(s.starts_with("ok: true\nrows:\n"), "{s}");
        let header = s.lines().nth(2).unwrap();
        assert!(header.trim_start().starts_with("node"), "{header}");
        assert!(s.contains("0.500000000000"));
    }
}
