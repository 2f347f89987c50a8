pub mod diag;
pub mod eval;
pub mod fit;
pub mod loocv;
pub mod predict;
pub mod stability;
pub mod synth;

use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// `Some(x)` as a fixed-width cell, `None` as "n/a".
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}
