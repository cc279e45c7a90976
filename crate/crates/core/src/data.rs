//! Labeled samples and datasets.
//!
//! Features are stored row-major in one flat buffer; a dataset is immutable
//! once built.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

/// Branch-free finiteness test: `v·0` is NaN exactly for non-finite `v`.
fn all_finite(v: &[f64]) -> bool {
    v.iter().fold(0.0, |acc, &x| acc + x * 0.0) == 0.0
}

impl Dataset {
    /// Builds a dataset from a flat row-major feature buffer.
    pub fn from_parts(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dataset dimension must be at least 1".into()));
        }
        if labels.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch { expected: dim * labels.len(), got: features.len() });
        }
        if !(all_finite(&features) && all_finite(&labels)) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self { dim, features, labels })
    }

    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().ok_or(Error::Empty("dataset"))?.x.len();
        let mut features = Vec::with_capacity(dim * samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.x.len() });
            }
            features.extend_from_slice(&s.x);
            labels.push(s.y);
        }
        Self::from_parts(dim, features, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.iter().map(|(x, y)| Sample::new(x.to_vec(), y)).collect()
    }

    /// Projections `w·xᵢ` for every sample.
    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        crate::metrics::check_dim(self.dim, w.len())?;
        Ok(self.features.chunks_exact(self.dim).map(|x| crate::metrics::dot(w, x)).collect())
    }

    /// Maps every label through `f`.
    pub fn map_labels(mut self, f: impl Fn(f64) -> f64) -> Self {
        for y in &mut self.labels {
            *y = f(*y);
        }
        self
    }

    /// Writes `x1,…,xd,y` with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for (x, y) in self.iter() {
            wtr.write_record(x.iter().chain(std::iter::once(&y)).map(|v| format!("{v:.16e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let cols = header.len();
        let expected = (1..cols).map(|j| format!("x{j}")).chain(std::iter::once("y".to_string()));
        if cols < 2 || !header.iter().zip(expected).all(|(h, e)| h.trim() == e) {
            return Err(Error::InvalidArgument(format!(
                "dataset CSV header must be x1,...,xd,y; got {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let dim = cols - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("unparseable number {field:?} in dataset CSV")))?;
                if j < dim {
                    features.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        Self::from_parts(dim, features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_ragged_samples() {
        let r = Dataset::from_samples(vec![Sample::new(vec![1.0], 0.0), Sample::new(vec![1.0, 2.0], 0.0)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let r = Dataset::from_samples(vec![Sample::new(vec![f64::NAN], 0.0)]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(Dataset::from_samples(vec![]).is_err());
    }

    #[test]
    fn csv_header_layout() {
        let d = Dataset::from_samples(vec![Sample::new(vec![0.1, -2.0], 3.0)]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,y"));
        assert_eq!(lines.next(), Some("1.0000000000000001e-1,-2.0000000000000000e0,3.0000000000000000e0"));
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(rows in prop::collection::vec((prop::collection::vec(-1e6..1e6f64, 3), -1e3..1e3f64), 1..20)) {
            let d = Dataset::from_samples(rows.into_iter().map(|(x, y)| Sample::new(x, y)).collect()).unwrap();
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
        }
    }
}
