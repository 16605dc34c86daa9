//! Tabulated benchmarks: the objective value of every config of a space.
//!
//! On disk a table is a CSV file whose header names the dimensions followed by
//! a `value` column, one row per config, plus a sidecar `<stem>.meta.json`
//! holding `{name, direction, metric, count}`. Dimension values are ordered by
//! first appearance in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::SpaceStats;
use crate::model::{Dimension, Direction, Scalar, SearchSpace, TrialConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub name: String,
    pub direction: Direction,
    pub metric: String,
    pub count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("table declares {declared} configs but its space has {actual}")]
    CountMismatch { declared: usize, actual: usize },
    #[error("config {0} appears twice")]
    DuplicateRow(usize),
    #[error("config {0} has no row")]
    MissingRow(usize),
    #[error("config {0} has a non-finite value")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: TableMeta,
    pub space: SearchSpace,
    /// Indexed by config number.
    values: Vec<f64>,
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    csv.with_file_name(format!("{stem}.meta.json"))
}

impl Table {
    pub fn new(meta: TableMeta, space: SearchSpace, values: Vec<f64>) -> Result<Self, TableError> {
        let actual = space.cardinality();
        if meta.count != actual || values.len() != actual {
            return Err(TableError::CountMismatch {
                declared: meta.count,
                actual: values.len().max(actual),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TableError::NonFinite(i));
        }
        Ok(Self { meta, space, values })
    }

    pub fn load(csv_path: &Path) -> Result<Self, TableError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| TableError::Io { path, source }
        };
        let fmt = |reason: String| TableError::Format {
            path: csv_path.to_path_buf(),
            reason,
        };
        let meta_file = meta_path(csv_path);
        let meta_text = std::fs::read_to_string(&meta_file).map_err(io(&meta_file))?;
        let meta: TableMeta = serde_json::from_str(&meta_text).map_err(|e| TableError::Format {
            path: meta_file.clone(),
            reason: e.to_string(),
        })?;

        let mut reader = csv::Reader::from_path(csv_path).map_err(|e| fmt(e.to_string()))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| fmt(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.last().map(String::as_str) != Some("value") || headers.len() < 2 {
            return Err(fmt("header must list the dimensions followed by `value`".into()));
        }
        let n_dims = headers.len() - 1;
        let mut dims: Vec<Vec<Scalar>> = vec![Vec::new(); n_dims];
        let mut rows: Vec<(Vec<Scalar>, f64)> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| fmt(e.to_string()))?;
            if rec.len() != headers.len() {
                return Err(fmt(format!("row {} has {} cells", i + 1, rec.len())));
            }
            let cells: Vec<Scalar> = (0..n_dims).map(|d| Scalar::parse_token(&rec[d])).collect();
            for (d, c) in cells.iter().enumerate() {
                if !dims[d].contains(c) {
                    dims[d].push(c.clone());
                }
            }
            let value: f64 = rec[n_dims]
                .trim()
                .parse()
                .map_err(|_| fmt(format!("row {} has a bad value `{}`", i + 1, &rec[n_dims])))?;
            rows.push((cells, value));
        }
        let space = SearchSpace::new(
            headers[..n_dims]
                .iter()
                .zip(dims)
                .map(|(h, v)| Dimension::new(h.clone(), v))
                .collect(),
        )
        .map_err(|e| fmt(e.to_string()))?;
        let card = space.cardinality();
        if meta.count != card || rows.len() != card {
            return Err(TableError::CountMismatch {
                declared: meta.count,
                actual: if rows.len() != card { rows.len() } else { card },
            });
        }
        let mut values: Vec<Option<f64>> = vec![None; card];
        for (cells, value) in rows {
            let positions: Vec<usize> = space
                .dimensions()
                .iter()
                .zip(&cells)
                .map(|(d, c)| d.position(c).expect("collected"))
                .collect();
            let n = space.number_of_positions(&positions);
            if values[n].replace(value).is_some() {
                return Err(TableError::DuplicateRow(n));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(TableError::MissingRow(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Table::new(meta, space, values)
    }

    /// Writes `<dir>/<name>.csv` and its sidecar; returns the CSV path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, TableError> {
        let path = dir.join(format!("{}.csv", self.meta.name));
        let io = |source| TableError::Io {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| TableError::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let mut header: Vec<String> = self.space.names().map(str::to_string).collect();
        header.push("value".into());
        let werr = |e: csv::Error| TableError::Format {
            path: path.clone(),
            reason: e.to_string(),
        };
        w.write_record(&header).map_err(werr)?;
        for (n, cfg) in self.space.enumerate().into_iter().enumerate() {
            let mut row: Vec<String> = cfg.values().map(|v| v.to_string()).collect();
            row.push(self.values[n].to_string());
            w.write_record(&row).map_err(werr)?;
        }
        w.flush().map_err(io)?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("serializable");
        std::fs::write(meta_path(&path), meta + "\n").map_err(io)?;
        Ok(path)
    }

    pub fn value_at(&self, number: usize) -> Option<f64> {
        self.values.get(number).copied()
    }

    pub fn lookup(&self, config: &TrialConfig) -> Option<f64> {
        let n = self.space.number_of(config).ok()?;
        self.value_at(n)
    }

    /// All values in enumeration order, which is also the grid trajectory.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stats(&self) -> SpaceStats {
        SpaceStats::from_values(&self.values)
    }

    /// Number of the first config holding the optimum.
    pub fn optimum_number(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if self.meta.direction.is_better(v, self.values[best]) {
                best = i;
            }
        }
        best
    }
}
