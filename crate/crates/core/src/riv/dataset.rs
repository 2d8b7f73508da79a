use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Equidistant sampled record `t_k = t0 + k h`, `k = 0..N`.
///
/// `u` is `N x n_u`, `y` is `N x n_y`; the optional reference `r` (`N x n_y`)
/// is required for closed-loop estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataset {
    h: f64,
    t0: f64,
    u: DMatrix<f64>,
    y: DMatrix<f64>,
    r: Option<DMatrix<f64>>,
}

impl SampledDataset {
    pub fn new(
        h: f64,
        t0: f64,
        u: DMatrix<f64>,
        y: DMatrix<f64>,
        r: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(
                "sampling interval must be positive".into(),
            ));
        }
        let n = u.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "a dataset needs at least two samples".into(),
            ));
        }
        if y.nrows() != n {
            return Err(Error::DimMismatch(format!(
                "input has {n} samples, output has {}",
                y.nrows()
            )));
        }
        if let Some(r) = &r {
            if r.nrows() != n || r.ncols() != y.ncols() {
                return Err(Error::DimMismatch(format!(
                    "reference must be {n} x {}, got {:?}",
                    y.ncols(),
                    r.shape()
                )));
            }
        }
        Ok(Self { h, t0, u, y, r })
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn len(&self) -> usize {
        self.u.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn n_u(&self) -> usize {
        self.u.ncols()
    }
    pub fn n_y(&self) -> usize {
        self.y.ncols()
    }
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
    pub fn r(&self) -> Option<&DMatrix<f64>> {
        self.r.as_ref()
    }

    /// Writes the CSV contract: header `t,u1..,y1..[,r1..]`, one row per sample.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_u()).map(|i| format!("u{i}")));
        header.extend((1..=self.n_y()).map(|i| format!("y{i}")));
        if self.r.is_some() {
            header.extend((1..=self.n_y()).map(|i| format!("r{i}")));
        }
        wr.write_record(&header).map_err(csv_err)?;
        let mut row = Vec::with_capacity(header.len());
        for k in 0..self.len() {
            row.clear();
            row.push(format!("{}", self.t0 + k as f64 * self.h));
            row.extend(self.u.row(k).iter().map(|v| format!("{v}")));
            row.extend(self.y.row(k).iter().map(|v| format!("{v}")));
            if let Some(r) = &self.r {
                row.extend(r.row(k).iter().map(|v| format!("{v}")));
            }
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Parses the CSV contract. The step is taken from the first two time
    /// stamps and the grid is checked for equidistance.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        let mut cols: [Vec<usize>; 3] = Default::default();
        if header.get(0).map(str::trim) != Some("t") {
            return Err(Error::InvalidArgument(
                "first CSV column must be 't'".into(),
            ));
        }
        for (idx, name) in header.iter().enumerate().skip(1) {
            let name = name.trim();
            let slot = match name.chars().next() {
                Some('u') => 0,
                Some('y') => 1,
                Some('r') => 2,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown CSV column '{name}'"
                    )))
                }
            };
            let expected = format!("{}{}", &name[..1], cols[slot].len() + 1);
            if name != expected {
                return Err(Error::InvalidArgument(format!(
                    "CSV column '{name}' out of order, expected '{expected}'"
                )));
            }
            cols[slot].push(idx);
        }
        if cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::InvalidArgument("CSV needs u and y columns".into()));
        }
        if !cols[2].is_empty() && cols[2].len() != cols[1].len() {
            return Err(Error::DimMismatch(
                "reference and output channel counts differ".into(),
            ));
        }
        let mut t = Vec::new();
        let mut data: [Vec<f64>; 3] = Default::default();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::InvalidArgument("short CSV row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad number in CSV: {e}")))
            };
            t.push(parse(0)?);
            for s in 0..3 {
                for &i in &cols[s] {
                    data[s].push(parse(i)?);
                }
            }
        }
        if t.len() < 2 {
            return Err(Error::InvalidArgument(
                "a dataset needs at least two samples".into(),
            ));
        }
        let h = t[1] - t[0];
        for k in 1..t.len() {
            let expected = t[0] + k as f64 * h;
            if (t[k] - expected).abs() > 1e-6 * h.abs().max(1e-300) + 1e-9 * expected.abs() {
                return Err(Error::InvalidArgument(format!(
                    "time grid is not equidistant at row {k}"
                )));
            }
        }
        let n = t.len();
        let mat = |s: usize| DMatrix::from_row_slice(n, cols[s].len(), &data[s]);
        let r = if cols[2].is_empty() {
            None
        } else {
            Some(mat(2))
        };
        Self::new(h, t[0], mat(0), mat(1), r)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_with_reference() {
        let u = DMatrix::from_fn(5, 2, |i, j| i as f64 * 0.5 - j as f64);
        let y = DMatrix::from_fn(5, 1, |i, _| 1.0 / (i as f64 + 1.0));
        let r = DMatrix::from_fn(5, 1, |i, _| -(i as f64));
        let ds = SampledDataset::new(0.01, 0.0, u, y, Some(r)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u1,u2,y1,r1\n"));
        let back = SampledDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.u(), ds.u());
        assert_eq!(back.y(), ds.y());
        assert_eq!(back.r(), ds.r());
        assert!((back.h() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(
            SampledDataset::new(0.1, 0.0, DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), None)
                .is_err()
        );
        assert!(
            SampledDataset::new(0.1, 0.0, DMatrix::zeros(3, 1), DMatrix::zeros(4, 1), None)
                .is_err()
        );
        assert!(
            SampledDataset::new(0.0, 0.0, DMatrix::zeros(3, 1), DMatrix::zeros(3, 1), None)
                .is_err()
        );
    }

    #[test]
    fn rejects_uneven_grid() {
        let text = "t,u1,y1\n0,1,1\n0.1,1,1\n0.3,1,1\n";
        assert!(SampledDataset::read_csv(text.as_bytes()).is_err());
    }
}
