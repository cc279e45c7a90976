//! Providers of i.i.d. batches.

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Yields batches from a fixed distribution.
///
/// A batch is a pure function of `(m, stream)`: the same stream id always
/// replays the same batch, distinct ids give independent batches.
pub trait SampleSource: Sync {
    fn dim(&self) -> usize;

    fn draw(&self, m: usize, stream: u64) -> Result<Dataset>;

    /// Planted direction `w*`, when known; used only for diagnostics.
    fn reference(&self) -> Option<&[f64]> {
        None
    }
}

impl<S: SampleSource + ?Sized> SampleSource for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn draw(&self, m: usize, stream: u64) -> Result<Dataset> {
        (**self).draw(m, stream)
    }
    fn reference(&self) -> Option<&[f64]> {
        (**self).reference()
    }
}

/// Resamples a fixed dataset with replacement.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    data: Dataset,
    seed: u64,
}

impl Bootstrap {
    pub fn new(data: Dataset, seed: u64) -> Self {
        Self { data, seed }
    }
}

impl SampleSource for Bootstrap {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn draw(&self, m: usize, stream: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let mut rng = rng_for(self.seed, stream);
        let d = self.data.dim();
        let mut features = Vec::with_capacity(m * d);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let i = rng.random_range(0..self.data.len());
            features.extend_from_slice(self.data.x(i));
            labels.push(self.data.y(i));
        }
        Dataset::from_parts(d, features, labels)
    }
}

/// Serves the same dataset for every request (batch reuse).
///
/// Requests larger than the dataset fail.
#[derive(Debug, Clone)]
pub struct Reuse {
    data: Dataset,
}

impl Reuse {
    pub fn new(data: Dataset) -> Self {
        Self { data }
    }
}

impl SampleSource for Reuse {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn draw(&self, m: usize, _stream: u64) -> Result<Dataset> {
        if m > self.data.len() {
            return Err(Error::SourceExhausted(format!("requested {m} samples, dataset has {}", self.data.len())));
        }
        if m == self.data.len() {
            return Ok(self.data.clone());
        }
        let d = self.data.dim();
        Dataset::from_parts(d, self.data.features()[..m * d].to_vec(), self.data.labels()[..m].to_vec())
    }
}

/// Clips every label to `[−M, M]`, preserving sign.
pub struct Truncated<S> {
    inner: S,
    cap: f64,
}

impl<S: SampleSource> Truncated<S> {
    pub fn new(inner: S, cap: f64) -> Self {
        Self { inner, cap }
    }
}

impl<S: SampleSource> SampleSource for Truncated<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn draw(&self, m: usize, stream: u64) -> Result<Dataset> {
        let cap = self.cap;
        Ok(self.inner.draw(m, stream)?.map_labels(|y| truncate_label(y, cap)))
    }
    fn reference(&self) -> Option<&[f64]> {
        self.inner.reference()
    }
}

/// `sgn(y)·min(|y|, M)`.
pub fn truncate_label(y: f64, cap: f64) -> f64 {
    y.clamp(-cap, cap)
}
