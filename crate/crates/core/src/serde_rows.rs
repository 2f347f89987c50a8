//! Serialises an `Array2<f64>` as a JSON array of rows.

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.outer_iter().map(|r| r.to_vec()).collect();
    rows.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows, None).map_err(serde::de::Error::custom)
}

/// Builds a matrix from rows; `cols` fixes the width when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], cols: Option<usize>) -> Result<Array2<f64>, String> {
    let ncols = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| e.to_string())
}
