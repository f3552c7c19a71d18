use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// One input/label pair cut from a coefficient series. `start` is the row of
/// the first input in the source series (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    /// `seq_in × r`
    pub inputs: DenseMatrix,
    /// `seq_out × r`
    pub labels: DenseMatrix,
    /// Series the window came from (the trajectory index for ensembles).
    pub series: usize,
}

impl Window {
    /// Source-row indices of the labels.
    pub fn label_rows(&self) -> Range<usize> {
        let s = self.start + self.inputs.rows();
        s..s + self.labels.rows()
    }

    /// Every source row the window touches.
    pub fn rows(&self) -> Range<usize> {
        self.start..self.label_rows().end
    }
}

/// Sliding windows split into disjoint training and validation sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDataset {
    pub seq_in: usize,
    pub seq_out: usize,
    pub stride: usize,
    pub train: Vec<Window>,
    pub val: Vec<Window>,
}

impl WindowDataset {
    pub fn width(&self) -> usize {
        self.train.first().or(self.val.first()).map_or(0, |w| w.inputs.cols())
    }

    /// Appends another dataset with the same window geometry, tagging its
    /// windows with series ids offset past the current ones.
    pub fn extend(&mut self, other: WindowDataset) -> Result<()> {
        if (other.seq_in, other.seq_out) != (self.seq_in, self.seq_out) {
            return Err(Error::Shape("cannot merge datasets with different window lengths".into()));
        }
        if self.width() != 0 && other.width() != 0 && other.width() != self.width() {
            return Err(Error::Shape(format!("cannot merge {}-mode and {}-mode windows", self.width(), other.width())));
        }
        self.train.extend(other.train);
        self.val.extend(other.val);
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<()> {
        for w in self.train.iter().chain(&self.val) {
            if w.inputs.rows() != self.seq_in || w.labels.rows() != self.seq_out {
                return Err(Error::Contract(format!("window at row {} has the wrong length", w.start)));
            }
        }
        let key = |w: &Window| (w.series, w.start);
        let train: std::collections::HashSet<_> = self.train.iter().map(key).collect();
        if self.val.iter().any(|w| train.contains(&key(w))) {
            return Err(Error::Contract("a window sits in both the training and the validation set".into()));
        }
        Ok(())
    }
}

fn cut(coeffs: &DenseMatrix, start: usize, seq_in: usize, seq_out: usize, series: usize) -> Window {
    Window {
        start,
        inputs: coeffs.row_range(start, start + seq_in),
        labels: coeffs.row_range(start + seq_in, start + seq_in + seq_out),
        series,
    }
}

/// Windows of `seq_in` inputs followed by `seq_out` labels, every `stride`
/// rows. Training windows lie entirely below `split_point`; validation
/// windows start at or after it. Windows overrunning the series are dropped.
pub fn make_windows(coeffs: &DenseMatrix, seq_in: usize, seq_out: usize, stride: usize, split_point: usize) -> Result<WindowDataset> {
    let n = coeffs.rows();
    make_windows_in(coeffs, seq_in, seq_out, stride, 0..split_point.min(n), split_point.min(n)..n)
}

/// Like [`make_windows`] with explicit row ranges: a window belongs to a set
/// when all of its rows fall inside that set's range.
pub fn make_windows_in(
    coeffs: &DenseMatrix,
    seq_in: usize,
    seq_out: usize,
    stride: usize,
    train: Range<usize>,
    val: Range<usize>,
) -> Result<WindowDataset> {
    if seq_in == 0 || seq_out == 0 || stride == 0 {
        return Err(Error::Config("window lengths and stride must be positive".into()));
    }
    let n = coeffs.rows();
    let len = seq_in + seq_out;
    if n < len {
        return Err(Error::InsufficientData(format!("{n} time steps cannot hold a window of {len}")));
    }
    // the ranges may share a boundary row (last training label = first
    // validation input), never more
    if train.end.min(val.end) > train.start.max(val.start) + 1 {
        return Err(Error::Config("training and validation ranges overlap".into()));
    }
    let windows = |r: &Range<usize>| -> Vec<Window> {
        let end = r.end.min(n);
        let mut out = Vec::new();
        let mut s = r.start;
        while s + len <= end {
            out.push(cut(coeffs, s, seq_in, seq_out, 0));
            s += stride;
        }
        out
    };
    let ds = WindowDataset { seq_in, seq_out, stride, train: windows(&train), val: windows(&val) };
    ds.check_invariants()?;
    Ok(ds)
}

/// One window per series: the first `seq_in` rows predict the following
/// `seq_out`. Series listed in `val_series` go to validation.
pub fn per_series_windows(series: &[DenseMatrix], seq_in: usize, seq_out: usize, val_series: &[usize]) -> Result<WindowDataset> {
    if seq_in == 0 || seq_out == 0 {
        return Err(Error::Config("window lengths must be positive".into()));
    }
    let mut ds = WindowDataset { seq_in, seq_out, stride: seq_in + seq_out, train: Vec::new(), val: Vec::new() };
    for (k, c) in series.iter().enumerate() {
        if c.rows() < seq_in + seq_out {
            return Err(Error::InsufficientData(format!("series {k} has {} rows, windows need {}", c.rows(), seq_in + seq_out)));
        }
        let w = cut(c, 0, seq_in, seq_out, k);
        if val_series.contains(&k) {
            ds.val.push(w);
        } else {
            ds.train.push(w);
        }
    }
    ds.check_invariants()?;
    Ok(ds)
}
