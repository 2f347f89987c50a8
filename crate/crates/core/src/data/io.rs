use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::Dataset;

/// Layout of a dense CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// Zero-based column holding the label; `None` means the last column.
    pub label_column: Option<usize>,
    /// The first line holds column names.
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            has_header: false,
        }
    }
}

fn parse_label(cell: &str, row: usize, column: usize) -> Result<f64> {
    let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column: Some(column),
        message: format!("label `{cell}` is not numeric"),
    })?;
    match value {
        v if v == 1.0 => Ok(1.0),
        v if v == -1.0 || v == 0.0 => Ok(-1.0),
        _ => Err(Error::Parse {
            row,
            column: Some(column),
            message: format!("label `{cell}` is not one of -1, +1, 0, 1"),
        }),
    }
}

/// Reads a dense CSV dataset. Rows and columns in errors are 1-based file
/// coordinates. Labels 0 are mapped to −1.
pub fn read_dense_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Option<Vec<String>> = if options.has_header {
        Some(
            rdr.headers()
                .map_err(|e| Error::Parse { row: 1, column: None, message: e.to_string() })?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };

    let mut width = headers.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_col = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: None,
                message: format!("expected {w} cells, found {}", record.len()),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                row,
                column: None,
                message: "need at least one feature and a label".into(),
            });
        }
        label_col = options.label_column.unwrap_or(w - 1);
        if label_col >= w {
            return Err(Error::Parse {
                row,
                column: None,
                message: format!("label column {} out of range for {w} cells", label_col + 1),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_col {
                labels.push(parse_label(cell, row, c + 1)?);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: Some(c + 1),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: Some(c + 1),
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse { row: 0, column: None, message: "no data rows".into() });
    }
    let m = values.len() / labels.len();
    let x = Array2::from_shape_vec((labels.len(), m), values)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let dataset = Dataset::new(x, Array1::from(labels))?;
    match headers {
        Some(mut names) => {
            names.remove(label_col);
            dataset.with_feature_names(names)
        }
        None => Ok(dataset),
    }
}

pub fn load_dense_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    read_dense_csv(std::fs::File::open(path)?, options)
}

/// Writes features followed by the label as the last column, with a header
/// line `x0,...,x{M-1},label` (or the dataset's own feature names).
pub fn write_dense_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(writer);
    let names: Vec<String> = match &dataset.feature_names {
        Some(n) => n.clone(),
        None => (0..dataset.num_features()).map(|k| format!("x{k}")).collect(),
    };
    writeln!(out, "{},label", names.join(","))?;
    for (row, &label) in dataset.x.outer_iter().zip(&dataset.y) {
        for v in row {
            // `{}` prints the shortest string that parses back to the same f64
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", label as i64)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses svmlight text: `label idx:val ...` with 1-based, strictly
/// increasing indices. The feature count is the largest index seen unless
/// `num_features` is given.
pub fn parse_sparse_svmlight<R: Read>(reader: R, num_features: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let row = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), row, 1)?;
        let mut entries = Vec::new();
        let mut last = 0;
        for (pos, token) in tokens.enumerate() {
            let column = Some(pos + 2);
            let malformed = || Error::Parse {
                row,
                column,
                message: format!("malformed token `{token}`"),
            };
            let (idx, val) = token.split_once(':').ok_or_else(malformed)?;
            let idx: usize = idx.parse().map_err(|_| malformed())?;
            let val: f64 = val.parse().map_err(|_| malformed())?;
            if idx == 0 || !val.is_finite() {
                return Err(malformed());
            }
            if idx <= last {
                return Err(Error::Parse {
                    row,
                    column,
                    message: if idx == last {
                        format!("duplicate index {idx}")
                    } else {
                        format!("index {idx} after {last}; indices must increase")
                    },
                });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        rows.push(entries);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse { row: 0, column: None, message: "no data rows".into() });
    }
    let m = match num_features {
        Some(m) if m < max_index => {
            return Err(Error::Dimension(format!("index {max_index} exceeds {m} features")))
        }
        Some(m) => m,
        None => max_index,
    };
    let mut x = Array2::zeros((labels.len(), m));
    for (i, entries) in rows.iter().enumerate() {
        for &(k, v) in entries {
            x[[i, k]] = v;
        }
    }
    Dataset::new(x, Array1::from(labels))
}

pub fn load_sparse_svmlight(path: impl AsRef<Path>, num_features: Option<usize>) -> Result<Dataset> {
    parse_sparse_svmlight(std::fs::File::open(path)?, num_features)
}
