use serde::{Deserialize, Serialize};

use super::euler::EulerParams;
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// Where a snapshot set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Kpp,
    Euler,
    VksImport,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Kpp => "kpp",
            Source::Euler => "euler",
            Source::VksImport => "vks_import",
            Source::Synthetic => "synthetic",
        }
    }
}

/// A named contiguous segment of each snapshot row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub size: usize,
}

impl Field {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self { name: name.into(), size }
    }
}

/// Time-indexed snapshots: row `j` of `data` is the flattened state at `times[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    times: Vec<f64>,
    data: DenseMatrix,
    fields: Vec<Field>,
    pub params: Option<EulerParams>,
    pub source: Source,
}

impl SnapshotSet {
    pub fn new(times: Vec<f64>, data: DenseMatrix, fields: Vec<Field>, source: Source) -> Result<Self> {
        if times.len() != data.rows() {
            return Err(Error::Shape(format!("{} times for {} snapshot rows", times.len(), data.rows())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("snapshot times must be strictly increasing".into()));
        }
        let total: usize = fields.iter().map(|f| f.size).sum();
        if total != data.cols() {
            return Err(Error::Shape(format!("field sizes sum to {total}, rows have {} entries", data.cols())));
        }
        if !data.all_finite() {
            return Err(Error::NonFinite("snapshot data".into()));
        }
        Ok(Self { times, data, fields, params: None, source })
    }

    pub fn with_params(mut self, params: EulerParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn n_t(&self) -> usize {
        self.data.rows()
    }

    pub fn n_dof(&self) -> usize {
        self.data.cols()
    }

    /// Same metadata, new data of identical shape.
    pub fn with_data(&self, data: DenseMatrix) -> Result<Self> {
        let mut out = Self::new(self.times.clone(), data, self.fields.clone(), self.source)?;
        out.params = self.params;
        Ok(out)
    }

    /// Snapshot rows `start..end`.
    pub fn slice_time(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_t() {
            return Err(Error::Shape(format!("time slice {start}..{end} of {}", self.n_t())));
        }
        let mut out = Self::new(
            self.times[start..end].to_vec(),
            self.data.row_range(start, end),
            self.fields.clone(),
            self.source,
        )?;
        out.params = self.params;
        Ok(out)
    }

    /// Entries of field `name` in snapshot `j`.
    pub fn field_values(&self, j: usize, name: &str) -> Option<&[f64]> {
        let mut offset = 0;
        for f in &self.fields {
            if f.name == name {
                return Some(&self.data.row(j)[offset..offset + f.size]);
            }
            offset += f.size;
        }
        None
    }
}

/// `n` uniformly spaced output times on `[0, t_final]`, both ends included.
pub(crate) fn output_times(t_final: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_final * k as f64 / (n - 1) as f64).collect()
}
