use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("a feature matrix needs at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("{names} column names for a matrix with {cols} columns")]
    ColumnCountMismatch { names: usize, cols: usize },
    #[error("coordinate column index {0} out of range")]
    BadCoordinateColumn(usize),
    #[error("row {row}: coordinate ({lat}, {lon}) outside lat [-90, 90] / lon [-180, 180]")]
    BadCoordinate { row: usize, lat: f64, lon: f64 },
}

/// Positions of the latitude and longitude columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordColumns {
    pub lat: usize,
    pub lon: usize,
}

/// Per-cell attribute table, one row per node and one named column per
/// attribute. When coordinate columns are flagged the values there are raw
/// degrees and range-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    values: Matrix,
    coords: Option<CoordColumns>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, values: Matrix, coords: Option<CoordColumns>) -> Result<Self, FeatureError> {
        if values.cols() < 2 {
            return Err(FeatureError::TooFewColumns(values.cols()));
        }
        if columns.len() != values.cols() {
            return Err(FeatureError::ColumnCountMismatch {
                names: columns.len(),
                cols: values.cols(),
            });
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(FeatureError::DuplicateColumn(c.clone()));
            }
        }
        if let Some(cc) = coords {
            for idx in [cc.lat, cc.lon] {
                if idx >= values.cols() {
                    return Err(FeatureError::BadCoordinateColumn(idx));
                }
            }
            for row in 0..values.rows() {
                let (lat, lon) = (values.get(row, cc.lat), values.get(row, cc.lon));
                if !valid_coordinate(lat, lon) {
                    return Err(FeatureError::BadCoordinate { row, lat, lon });
                }
            }
        }
        Ok(Self { columns, values, coords })
    }

    /// Builds a matrix whose coordinates live in columns named `lat` and `lon`.
    pub fn with_named_coordinates(columns: Vec<String>, values: Matrix) -> Result<Self, FeatureError> {
        let lat = columns.iter().position(|c| c == "lat");
        let lon = columns.iter().position(|c| c == "lon");
        let coords = match (lat, lon) {
            (Some(lat), Some(lon)) => Some(CoordColumns { lat, lon }),
            _ => None,
        };
        Self::new(columns, values, coords)
    }

    /// Drops the coordinate flag, e.g. after values have been rescaled.
    pub fn without_coordinates(mut self) -> Self {
        self.coords = None;
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn coord_columns(&self) -> Option<CoordColumns> {
        self.coords
    }

    pub fn num_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn num_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.values.row(r)
    }

    /// `(lat, lon)` of row `r`, if coordinates are flagged.
    pub fn coordinate(&self, r: usize) -> Option<(f64, f64)> {
        self.coords.map(|c| (self.values.get(r, c.lat), self.values.get(r, c.lon)))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            values: self.values.select_rows(rows),
            coords: self.coords,
        }
    }
}

pub fn valid_coordinate(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}
