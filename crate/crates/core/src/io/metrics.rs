use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::numkit::DenseMatrix;
use crate::pipeline::EpochRecord;
use crate::{Error, Result};

pub const METRICS_HEADER: [&str; 8] = ["epoch", "train_mse", "val_mse", "fwd_nfe", "bwd_nfe", "stiffness", "adj_norm_t0", "adj_norm_tT"];

/// One row of a metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub fwd_nfe: usize,
    pub bwd_nfe: usize,
    pub stiffness: f64,
    pub adj_norm_t0: f64,
    #[serde(rename = "adj_norm_tT")]
    pub adj_norm_t_end: f64,
}

impl From<&EpochRecord> for MetricsRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            train_mse: r.train_mse,
            val_mse: r.val_mse,
            fwd_nfe: r.fwd_nfe,
            bwd_nfe: r.bwd_nfe,
            stiffness: r.stiffness,
            adj_norm_t0: r.adj_norm_t0,
            adj_norm_t_end: r.adj_norm_t_end,
        }
    }
}

/// Streams metrics rows, writing the header up front and flushing after
/// every row so an interrupted run keeps its history.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = MetricsWriter::new(w)?;
    rows.iter().try_for_each(|r| out.push(r))
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Format { offset: 0, detail: format!("metrics header must be {}", METRICS_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        if rec.len() != METRICS_HEADER.len() {
            return Err(Error::Format { offset, detail: format!("row has {} columns, expected 8", rec.len()) });
        }
        let row: MetricsRow = rec.deserialize(Some(&header)).map_err(|e| Error::Format { offset, detail: e.to_string() })?;
        let floats = [row.train_mse, row.val_mse, row.stiffness, row.adj_norm_t0, row.adj_norm_t_end];
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format { offset, detail: "metrics values must be finite".into() });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// CSV with a `t` column followed by `{prefix}_1 … {prefix}_r`; `times`
/// must have one entry per row. With `times = None` only the value columns
/// are written.
pub fn write_coefficients_csv<W: Write>(w: W, prefix: &str, times: Option<&[f64]>, values: &DenseMatrix) -> Result<()> {
    if let Some(t) = times {
        if t.len() != values.rows() {
            return Err(Error::Shape(format!("{} times for {} rows", t.len(), values.rows())));
        }
    }
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let mut header: Vec<String> = times.map(|_| "t".to_string()).into_iter().collect();
    header.extend((1..=values.cols()).map(|k| format!("{prefix}_{k}")));
    out.write_record(&header)?;
    for i in 0..values.rows() {
        let mut row: Vec<f64> = times.map(|t| t[i]).into_iter().collect();
        row.extend_from_slice(values.row(i));
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<MetricsRow> {
        (1..=3)
            .map(|e| MetricsRow {
                epoch: e,
                train_mse: 0.1 / e as f64,
                val_mse: 1e-7 * e as f64,
                fwd_nfe: 38 * e,
                bwd_nfe: 26,
                stiffness: 12.5,
                adj_norm_t0: 3.0e-5,
                adj_norm_t_end: 1.0 / 3.0,
            })
            .collect()
    }

    #[test]
    fn metrics_round_trip_byte_identically() {
        let mut a = Vec::new();
        write_metrics(&mut a, &rows()).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("epoch,train_mse,val_mse,fwd_nfe,bwd_nfe,stiffness,adj_norm_t0,adj_norm_tT\n"));
        assert_eq!(text.lines().count(), 4);
        let back = read_metrics(a.as_slice()).unwrap();
        assert_eq!(back, rows());
        let mut b = Vec::new();
        write_metrics(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed_metrics() {
        assert!(read_metrics("epoch,train\n1,2\n".as_bytes()).is_err());
        let bad = "epoch,train_mse,val_mse,fwd_nfe,bwd_nfe,stiffness,adj_norm_t0,adj_norm_tT\n1,NaN,1,1,1,1,1,1\n";
        assert!(matches!(read_metrics(bad.as_bytes()), Err(Error::Format { .. })));
    }

    #[test]
    fn coefficient_csv_layout() {
        let m = DenseMatrix::from_fn(2, 3, |i, j| (i + j) as f64 * 0.5);
        let mut out = Vec::new();
        write_coefficients_csv(&mut out, "alpha", Some(&[1.0, 2.0]), &m).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,alpha_1,alpha_2,alpha_3");
        assert_eq!(text.lines().nth(2).unwrap(), "2.0,0.5,1.0,1.5");
        let mut empty = Vec::new();
        write_coefficients_csv(&mut empty, "alpha", Some(&[]), &DenseMatrix::zeros(0, 2)).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "t,alpha_1,alpha_2\n");
    }
}
