//! Labelled datasets and the Gaussian-blob generator used for toy tasks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::engine::DenseArray;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("need at least {need} classes, got {got}")]
    TooFewClasses { need: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DenseArray,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: DenseArray, labels: Vec<usize>, num_classes: usize) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::BadLabel { label: labels.len(), classes: features.rows() });
        }
        for &l in &labels {
            if l >= num_classes {
                return Err(DataError::BadLabel { label: l, classes: num_classes });
            }
        }
        Ok(Dataset { features, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Copies the rows at `idx` into a new dataset, preserving order.
    pub fn gather(&self, idx: &[usize]) -> Dataset {
        let d = self.dim();
        let mut features = DenseArray::zeros(vec![idx.len(), d]);
        let mut labels = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            features.row_mut(r).copy_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset { features, labels, num_classes: self.num_classes }
    }

    /// Contiguous batch as (features, labels).
    pub fn batch(&self, range: std::ops::Range<usize>) -> (DenseArray, &[usize]) {
        (self.features.slice_rows(range.clone()), &self.labels[range])
    }

    /// Row ranges for batches of at most `batch_size`, in order.
    pub fn batch_ranges(&self, batch_size: usize) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.len() {
            let end = (start + batch_size).min(self.len());
            out.push(start..end);
            start = end;
        }
        out
    }

    /// Deterministic split into (train, holdout) by shuffling indices.
    pub fn split<R: Rng>(&self, holdout_frac: f64, rng: &mut R) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut idx, rng);
        let holdout = ((self.len() as f64 * holdout_frac).round() as usize).min(self.len());
        let (hold, train) = idx.split_at(holdout);
        (self.gather(train), self.gather(hold))
    }

    /// Indices per class.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Fisher-Yates with the supplied RNG, so shuffles are seed-stable.
pub fn shuffle<R: Rng, T>(xs: &mut [T], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}

/// Gaussian blobs: class means at distance `separation` (in units of the
/// per-class standard deviation 1.0), rejection-placed so no two means sit
/// closer than `separation`.
pub fn make_blobs<R: Rng>(
    n: usize,
    dim: usize,
    num_classes: usize,
    separation: f64,
    rng: &mut R,
) -> Result<Dataset, DataError> {
    if num_classes == 0 {
        return Err(DataError::TooFewClasses { need: 1, got: 0 });
    }
    let normal = StandardNormal;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut m: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
            let norm: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = separation * (1.0 + 0.2 * (means.len() as f64));
            if norm > 0.0 {
                for v in &mut m {
                    *v *= radius / norm;
                }
            }
            let ok = means.iter().all(|e| {
                let d2: f64 = e.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= separation
            });
            if ok || attempt > 200 {
                means.push(m);
                break;
            }
        }
    }
    let mut features = DenseArray::zeros(vec![n, dim]);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let c = r % num_classes;
        let row = features.row_mut(r);
        for (k, v) in row.iter_mut().enumerate() {
            let noise: f64 = normal.sample(rng);
            *v = means[c][k] + noise;
        }
        labels.push(c);
    }
    Dataset::new(features, labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn blobs_have_all_classes_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = make_blobs(103, 6, 4, 5.0, &mut rng).unwrap();
        assert_eq!(ds.len(), 103);
        assert_eq!(ds.dim(), 6);
        let counts = ds.by_class();
        assert!(counts.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn split_is_disjoint_and_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = make_blobs(50, 4, 3, 4.0, &mut rng).unwrap();
        let (train, hold) = ds.split(0.2, &mut rng);
        assert_eq!(train.len() + hold.len(), 50);
        assert_eq!(hold.len(), 10);
    }

    #[test]
    fn batch_ranges_cover_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = make_blobs(23, 4, 2, 4.0, &mut rng).unwrap();
        let ranges = ds.batch_ranges(8);
        assert_eq!(ranges.len(), 3);
        assert_eq!(ranges.iter().map(|r| r.len()).sum::<usize>(), 23);
    }
}
