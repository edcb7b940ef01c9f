//! Feature cleaning (missing values, z-score outliers, normalization) and
//! city-level aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::regions::{ColumnKind, RegionTable, LISTING_COLUMNS};
use super::{GraphError, NodeType};
use crate::tensor::Matrix;

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

pub const POPULATION_COLUMN: &str = "population_count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Mean used for normalization (after missing/outlier replacement).
    pub mean: f64,
    /// Population standard deviation used for normalization.
    pub std: f64,
    /// Zero-variance column; stored as all zeros.
    pub constant: bool,
    /// Whether values were z-score normalized (booleans are not).
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub node_type: NodeType,
    pub matrix: Matrix,
    pub columns: Vec<FeatureColumn>,
}

impl FeatureTable {
    pub fn num_rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn num_features(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Copy with column `col` set to zero for every row.
    pub fn with_zeroed_column(&self, col: usize) -> FeatureTable {
        let mut out = self.clone();
        for r in 0..out.matrix.rows() {
            out.matrix.set(r, col, 0.0);
        }
        out
    }

    /// Flat `key=value` audit dump of the cleaning metadata.
    pub fn metadata_text(&self) -> String {
        let mut s = String::new();
        for c in &self.columns {
            let _ = writeln!(s, "{}.mean={}", c.name, c.mean);
            let _ = writeln!(s, "{}.std={}", c.name, c.std);
            let _ = writeln!(s, "{}.constant={}", c.name, c.constant as u8);
            let _ = writeln!(s, "{}.normalized={}", c.name, c.normalized as u8);
        }
        s
    }

    /// CSV dump with a header row of column names.
    pub fn to_csv(&self, row_keys: &[String]) -> String {
        let mut s = String::from("id");
        for c in &self.columns {
            s.push(',');
            s.push_str(&c.name);
        }
        s.push('\n');
        for (r, key) in row_keys.iter().enumerate().take(self.num_rows()) {
            s.push_str(key);
            for v in self.matrix.row(r) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Result of cleaning a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedColumn {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub constant: bool,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Two-pass cleaning of a numeric column.
///
/// Missing entries and entries with `|z| > z_threshold` (z computed from the
/// present values) are replaced by the mean of the present values; the column
/// is then z-scored with the post-replacement mean and population std.
pub fn clean_column(raw: &[Option<f64>], z_threshold: f64) -> CleanedColumn {
    let present: Vec<f64> = raw.iter().flatten().copied().collect();
    if present.is_empty() {
        return CleanedColumn {
            values: vec![0.0; raw.len()],
            mean: 0.0,
            std: 0.0,
            constant: true,
        };
    }
    let (mean0, std0) = mean_std(&present);
    let replaced: Vec<f64> = raw
        .iter()
        .map(|v| match v {
            None => mean0,
            Some(x) if std0 > 0.0 && ((x - mean0) / std0).abs() > z_threshold => mean0,
            Some(x) => *x,
        })
        .collect();
    let (mean, std) = mean_std(&replaced);
    if !(std > 0.0) || std <= f64::EPSILON * mean.abs().max(1.0) {
        return CleanedColumn {
            values: vec![0.0; raw.len()],
            mean,
            std,
            constant: true,
        };
    }
    CleanedColumn {
        values: replaced.iter().map(|x| (x - mean) / std).collect(),
        mean,
        std,
        constant: false,
    }
}

/// Boolean columns keep their 0/1 scale; missing entries take the column mean.
fn clean_boolean(raw: &[Option<f64>]) -> CleanedColumn {
    let present: Vec<f64> = raw.iter().flatten().copied().collect();
    if present.is_empty() {
        return CleanedColumn {
            values: vec![0.0; raw.len()],
            mean: 0.0,
            std: 0.0,
            constant: true,
        };
    }
    let (mean0, _) = mean_std(&present);
    let filled: Vec<f64> = raw.iter().map(|v| v.unwrap_or(mean0)).collect();
    let (mean, std) = mean_std(&filled);
    if std == 0.0 {
        return CleanedColumn {
            values: vec![0.0; raw.len()],
            mean,
            std,
            constant: true,
        };
    }
    CleanedColumn {
        values: filled,
        mean,
        std,
        constant: false,
    }
}

/// Cleans every listing column of `raw` into a listing [`FeatureTable`]
/// whose rows follow the table's row order.
pub fn clean_numeric(raw: &RegionTable, z_threshold: f64) -> Result<FeatureTable, GraphError> {
    if raw.is_empty() {
        return Err(GraphError::EmptyTable);
    }
    if !(z_threshold > 0.0) {
        return Err(GraphError::InvalidParameter(format!(
            "z_threshold must be positive, got {z_threshold}"
        )));
    }
    let n = raw.len();
    let mut matrix = Matrix::zeros(n, LISTING_COLUMNS.len());
    let mut columns = Vec::with_capacity(LISTING_COLUMNS.len());
    for (c, (name, kind)) in LISTING_COLUMNS.iter().enumerate() {
        let col = raw.column(c);
        let cleaned = match kind {
            ColumnKind::Boolean => clean_boolean(&col),
            _ => clean_column(&col, z_threshold),
        };
        for (r, v) in cleaned.values.iter().enumerate() {
            matrix.set(r, c, *v);
        }
        columns.push(FeatureColumn {
            name: name.to_string(),
            kind: *kind,
            mean: cleaned.mean,
            std: cleaned.std,
            constant: cleaned.constant,
            normalized: *kind != ColumnKind::Boolean && !cleaned.constant,
        });
    }
    Ok(FeatureTable {
        node_type: NodeType::Listing,
        matrix,
        columns,
    })
}

/// Averages cleaned listing rows per city and appends a z-scored population
/// column. `membership[l]` is the city index of listing row `l`.
pub fn aggregate_city(
    listings: &FeatureTable,
    membership: &[usize],
    population: &[f64],
) -> Result<FeatureTable, GraphError> {
    if membership.len() != listings.num_rows() {
        return Err(GraphError::InvalidParameter(format!(
            "membership has {} entries for {} listings",
            membership.len(),
            listings.num_rows()
        )));
    }
    let n_cities = population.len();
    let f = listings.num_features();
    let mut sums = Matrix::zeros(n_cities, f + 1);
    let mut counts = vec![0usize; n_cities];
    for (l, &c) in membership.iter().enumerate() {
        if c >= n_cities {
            return Err(GraphError::InvalidParameter(format!(
                "listing {l} maps to unknown city index {c}"
            )));
        }
        counts[c] += 1;
        let src = listings.matrix.row(l);
        let dst = &mut sums.row_mut(c)[..f];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(GraphError::CityWithNoListings(empty));
    }
    for (c, &k) in counts.iter().enumerate() {
        for v in &mut sums.row_mut(c)[..f] {
            *v /= k as f64;
        }
    }
    let pop: Vec<Option<f64>> = population.iter().map(|p| Some(*p)).collect();
    let pop_clean = clean_column(&pop, f64::INFINITY);
    for (c, v) in pop_clean.values.iter().enumerate() {
        sums.set(c, f, *v);
    }
    let mut columns = listings.columns.clone();
    columns.push(FeatureColumn {
        name: POPULATION_COLUMN.to_string(),
        kind: ColumnKind::Numeric,
        mean: pop_clean.mean,
        std: pop_clean.std,
        constant: pop_clean.constant,
        normalized: !pop_clean.constant,
    });
    Ok(FeatureTable {
        node_type: NodeType::City,
        matrix: sums,
        columns,
    })
}
