use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

/// What every command prints: its inputs, results and timing.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub results: Value,
    /// Seconds.
    pub wall_time: f64,
    pub version: String,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "boundent {} ({:.2} s)", self.command, self.wall_time);
        if !self.parameters.is_empty() {
            let params: Vec<String> = self.parameters.iter().map(|(k, v)| format!("{k}={}", compact(v))).collect();
            let _ = writeln!(out, "  parameters: {}", params.join(", "));
        }
        if let Value::Object(map) = &self.results {
            let width = map.keys().map(String::len).max().unwrap_or(0);
            for (k, v) in map {
                let _ = writeln!(out, "  {k:<width$}  {}", compact(v));
            }
        } else {
            let _ = writeln!(out, "  {}", compact(&self.results));
        }
        out
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Array(items) if items.len() > 12 => {
            let head: Vec<String> = items[..12].iter().map(compact).collect();
            format!("[{}, … ({} total)]", head.join(", "), items.len())
        }
        Value::Array(items) => format!("[{}]", items.iter().map(compact).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}
