//! Cell/relation CSV ingestion, missing-value handling and z-score
//! normalization.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{valid_coordinate, CoordColumns, FeatureError, FeatureMatrix};
use crate::graph::CellId;
use crate::nn::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing or malformed header: {0}")]
    MissingHeader(String),
    #[error("duplicate cell id {0:?}")]
    DuplicateCellId(String),
    #[error("row {row}: coordinate out of range")]
    BadCoordinate { row: usize },
    #[error("line {line}: malformed row")]
    BadRow { line: u64 },
    #[error("every value of column {0:?} is missing")]
    AllValuesMissing(String),
    #[error("normalization needs at least one row")]
    EmptyRowSet,
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error("column mismatch: parameters fit on {expected:?}, matrix has {found:?}")]
    ColumnMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("missing mask is {mask:?} but features are {features:?}")]
    MaskMismatch { mask: (usize, usize), features: (usize, usize) },
    #[error("norm params are inconsistent: {0}")]
    BadNormParams(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major flags marking absent entries of a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingMask {
    rows: usize,
    cols: usize,
    missing: Vec<bool>,
}

impl MissingMask {
    pub fn none(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            missing: vec![false; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let missing: Vec<bool> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        assert_eq!(missing.len(), rows.len() * cols, "ragged mask");
        Self {
            rows: rows.len(),
            cols,
            missing,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_missing(&self, r: usize, c: usize) -> bool {
        self.missing[r * self.cols + c]
    }

    pub fn any(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRow,
    FillColumnMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCells {
    pub ids: Vec<CellId>,
    /// Missing entries hold 0.0 and are flagged in `missing`.
    pub features: FeatureMatrix,
    pub missing: MissingMask,
}

/// Parses `cell_id,lat,lon,<features...>`. Empty or non-numeric fields are
/// recorded as missing.
pub fn parse_cells_csv<R: Read>(input: R) -> Result<ParsedCells, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header.len() < 3 || header[0] != "cell_id" || header[1] != "lat" || header[2] != "lon" {
        return Err(DataError::MissingHeader(format!(
            "expected `cell_id,lat,lon,...`, found `{}`",
            header.join(",")
        )));
    }
    let columns: Vec<String> = header[1..].to_vec();
    let k = columns.len();

    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != k + 1 {
            return Err(DataError::BadRow { line });
        }
        let id = record[0].trim().to_owned();
        if id.is_empty() {
            return Err(DataError::BadRow { line });
        }
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateCellId(id));
        }
        for field in record.iter().skip(1) {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    values.push(v);
                    missing.push(false);
                }
                _ => {
                    values.push(0.0);
                    missing.push(true);
                }
            }
        }
        let base = row * k;
        let (lat, lon) = (values[base], values[base + 1]);
        if !valid_coordinate(lat, lon) {
            return Err(DataError::BadCoordinate { row });
        }
        ids.push(CellId::from(id));
    }

    let rows = ids.len();
    let values = Matrix::from_vec(rows, k, values).expect("row widths checked above");
    let features = FeatureMatrix::new(columns, values, Some(CoordColumns { lat: 0, lon: 1 }))?;
    Ok(ParsedCells {
        ids,
        features,
        missing: MissingMask {
            rows,
            cols: k,
            missing,
        },
    })
}

/// Parses `cell_id_a,cell_id_b`. Pairs come back verbatim.
pub fn parse_edges_csv<R: Read>(input: R) -> Result<Vec<(CellId, CellId)>, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != ["cell_id_a", "cell_id_b"] {
        return Err(DataError::MissingHeader(format!(
            "expected `cell_id_a,cell_id_b`, found `{}`",
            header.join(",")
        )));
    }
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(DataError::BadRow { line });
        }
        let (a, b) = (record[0].trim(), record[1].trim());
        if a.is_empty() || b.is_empty() {
            return Err(DataError::BadRow { line });
        }
        edges.push((CellId::from(a), CellId::from(b)));
    }
    Ok(edges)
}

pub fn write_cells_csv<W: Write>(ids: &[CellId], features: &FeatureMatrix, out: W) -> Result<(), DataError> {
    let coords = features.coord_columns();
    if coords != Some(CoordColumns { lat: 0, lon: 1 }) {
        return Err(DataError::MissingHeader("cells.csv needs lat, lon as the first feature columns".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cell_id".to_owned()];
    header.extend(features.columns().iter().cloned());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (r, id) in ids.iter().enumerate() {
        record.clear();
        record.push(id.as_str().to_owned());
        // `Display` for f64 is the shortest representation that parses back
        // to the same bits.
        record.extend(features.row(r).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_csv<W: Write>(edges: &[(CellId, CellId)], out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_id_a", "cell_id_b"])?;
    for (a, b) in edges {
        w.write_record([a.as_str(), b.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Resolves missing entries. Returns the cleaned matrix and the indices of
/// the input rows it keeps.
pub fn apply_missing_policy(
    features: &FeatureMatrix,
    mask: &MissingMask,
    policy: MissingPolicy,
) -> Result<(FeatureMatrix, Vec<usize>), DataError> {
    let shape = (features.num_rows(), features.num_cols());
    if mask.shape() != shape {
        return Err(DataError::MaskMismatch {
            mask: mask.shape(),
            features: shape,
        });
    }
    let (rows, cols) = shape;
    match policy {
        MissingPolicy::DropRow => {
            let kept: Vec<usize> = (0..rows).filter(|&r| (0..cols).all(|c| !mask.is_missing(r, c))).collect();
            Ok((features.select_rows(&kept), kept))
        }
        MissingPolicy::FillColumnMean => {
            let mut values = features.values().clone();
            for c in 0..cols {
                let present: Vec<f64> = (0..rows).filter(|&r| !mask.is_missing(r, c)).map(|r| values.get(r, c)).collect();
                if present.len() == rows {
                    continue;
                }
                if present.is_empty() {
                    return Err(DataError::AllValuesMissing(features.columns()[c].clone()));
                }
                let mean = present.iter().sum::<f64>() / present.len() as f64;
                for r in 0..rows {
                    if mask.is_missing(r, c) {
                        values.set(r, c, mean);
                    }
                }
            }
            let out = FeatureMatrix::new(features.columns().to_vec(), values, features.coord_columns())?;
            Ok((out, (0..rows).collect()))
        }
    }
}

/// Per-column z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations below this map their column to zero.
pub const DEGENERATE_STD: f64 = 1e-12;

impl NormParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let k = self.columns.len();
        if self.mean.len() != k || self.std.len() != k {
            return Err(DataError::BadNormParams(format!(
                "{} columns, {} means, {} stds",
                k,
                self.mean.len(),
                self.std.len()
            )));
        }
        if self.std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(DataError::BadNormParams("non-finite or negative statistic".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let p: NormParams = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Normalizes a single raw feature vector in column order.
    pub fn apply_row(&self, raw: &[f64]) -> Result<Vec<f64>, DataError> {
        if raw.len() != self.columns.len() {
            return Err(DataError::BadNormParams(format!(
                "row has {} values, parameters have {} columns",
                raw.len(),
                self.columns.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| standardize(x, m, s))
            .collect())
    }
}

#[inline]
fn standardize(x: f64, mean: f64, std: f64) -> f64 {
    if std < DEGENERATE_STD {
        0.0
    } else {
        (x - mean) / std
    }
}

/// Fits mean and population standard deviation over `rows` only.
pub fn zscore_fit(features: &FeatureMatrix, rows: &[usize]) -> Result<NormParams, DataError> {
    if rows.is_empty() {
        return Err(DataError::EmptyRowSet);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= features.num_rows()) {
        return Err(DataError::RowOutOfRange(bad));
    }
    let k = features.num_cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; k];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; k];
    for &r in rows {
        for ((s, v), m) in var.iter_mut().zip(features.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(NormParams {
        columns: features.columns().to_vec(),
        mean,
        std,
    })
}

/// Applies `(x - mean) / std` per column. The result carries no coordinate
/// flag since its values are no longer degrees.
pub fn zscore_apply(params: &NormParams, features: &FeatureMatrix) -> Result<FeatureMatrix, DataError> {
    if params.columns != features.columns() {
        return Err(DataError::ColumnMismatch {
            expected: params.columns.clone(),
            found: features.columns().to_vec(),
        });
    }
    params.validate()?;
    let mut values = features.values().clone();
    for r in 0..values.rows() {
        for ((x, &m), &s) in values.row_mut(r).iter_mut().zip(&params.mean).zip(&params.std) {
            *x = standardize(*x, m, s);
        }
    }
    Ok(FeatureMatrix::new(features.columns().to_vec(), values, None)?)
}
