use serde::Serialize;
use serde_json::{json, Map, Value};

/// JSON has no infinities; non-finite numbers are written as "inf", "-inf" or "nan".
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// Serialize `value` and overwrite the named float fields with [`number`].
pub fn with_numbers<T: Serialize>(value: &T, fields: &[(&str, f64)]) -> anyhow::Result<Value> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        for &(k, x) in fields {
            map.insert(k.to_string(), number(x));
        }
    }
    Ok(v)
}

/// Print `body` with the resolved config and tool version attached.
pub fn emit(mut body: Value, config: Value) -> anyhow::Result<()> {
    let map = match &mut body {
        Value::Object(map) => map,
        _ => unreachable!("reports are JSON objects"),
    };
    let mut head = Map::new();
    head.insert("version".into(), json!(covol_core::VERSION));
    head.insert("config".into(), config);
    head.append(map);
    println!("{}", serde_json::to_string_pretty(&Value::Object(head))?);
    Ok(())
}
