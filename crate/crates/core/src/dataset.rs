//! Synthetic regression data and the sufficient statistics every solver works from.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::regression::{RowSource, WeightVector};
use crate::rng::{self, Normal};

/// Parameters of a synthetic dataset. The same value always regenerates the
/// same rows, bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticSpec {
    pub n_rows: u64,
    /// Feature count, excluding the bias column.
    pub n_features: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

    pub fn new(n_rows: u64, n_features: usize, noise_sigma: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_rows,
            n_features,
            noise_sigma,
            seed,
        }
    }

    /// Number of coefficients, bias included.
    pub fn dim(&self) -> usize {
        self.n_features + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(invalid("n_rows must be at least 1"));
        }
        if self.n_features == 0 {
            return Err(invalid("n_features must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Ground-truth coefficients of a generated dataset, bias first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrueModel {
    pub weights: WeightVector,
}

/// Generates `spec.n_rows` rows and hands each one to `sink` as
/// `(features, label)`. `features[0]` is the bias column (always 1).
///
/// Draw order from the seeded stream: the `D` true weights (uniform on
/// `[0, 1]`), then per row `d` standard-normal features followed by one
/// standard-normal noise draw scaled by `noise_sigma`.
pub fn generate_dataset<F>(spec: &SyntheticSpec, mut sink: F) -> Result<TrueModel>
where
    F: FnMut(&[f64], f64),
{
    spec.validate()?;
    let dim = spec.dim();
    let mut rng = rng::stream(spec.seed);
    let weights: Vec<f64> = (0..dim).map(|_| rng::uniform01(&mut rng)).collect();
    let mut normal = Normal::new();
    let mut row = vec![0.0; dim];
    row[0] = 1.0;
    for _ in 0..spec.n_rows {
        for x in row[1..].iter_mut() {
            *x = normal.sample(&mut rng);
        }
        let noise = normal.sample(&mut rng);
        let mut label = 0.0;
        for (w, x) in weights.iter().zip(&row) {
            label += w * x;
        }
        label += spec.noise_sigma * noise;
        sink(&row, label);
    }
    Ok(TrueModel {
        weights: WeightVector::new(weights),
    })
}

impl RowSource for SyntheticSpec {
    fn dim(&self) -> usize {
        SyntheticSpec::dim(self)
    }

    fn for_each_row(&mut self, f: &mut dyn FnMut(&[f64], f64)) -> Result<()> {
        generate_dataset(self, |x, y| f(x, y)).map(|_| ())
    }
}

/// Sufficient statistics of a regression dataset: `XᵀX`, `XᵀY`, `YᵀY`,
/// `Σy` and the row count.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
    pub y_sq: f64,
    pub y_sum: f64,
    pub n_rows: u64,
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    /// Total sum of squares, clamped at zero.
    pub fn tss(&self) -> f64 {
        let n = self.n_rows as f64;
        (self.y_sq - self.y_sum * self.y_sum / n).max(0.0)
    }

    /// Residual sum of squares `wᵀGw − 2wᵀm + YᵀY`, clamped at zero.
    pub fn rss(&self, w: &[f64]) -> Result<f64> {
        let d = self.dim();
        if w.len() != d {
            return Err(invalid(alloc::format!(
                "weight vector has {} entries, Gram system has {d}",
                w.len()
            )));
        }
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..d {
            let gi: f64 = w
                .iter()
                .enumerate()
                .map(|(j, wj)| self.gram[(i, j)] * wj)
                .sum();
            quad += w[i] * gi;
            lin += w[i] * self.moment[i];
        }
        Ok((quad - 2.0 * lin + self.y_sq).max(0.0))
    }
}

/// Streaming builder for [`GramSystem`]. Only the upper triangle is
/// accumulated; it is mirrored when the system is finished.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    dim: usize,
    upper: Vec<f64>,
    moment: Vec<f64>,
    y_sq: f64,
    y_sum: f64,
    n_rows: u64,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        GramAccumulator {
            dim,
            upper: vec![0.0; dim * dim],
            moment: vec![0.0; dim],
            y_sq: 0.0,
            y_sum: 0.0,
            n_rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> u64 {
        self.n_rows
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                row: self.n_rows,
                expected: self.dim,
                found: x.len(),
            });
        }
        let d = self.dim;
        for i in 0..d {
            let xi = x[i];
            let row = &mut self.upper[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += xi * x[j];
            }
            self.moment[i] += y * xi;
        }
        self.y_sq += y * y;
        self.y_sum += y;
        self.n_rows += 1;
        Ok(())
    }

    /// Adds the statistics of a disjoint chunk of rows.
    pub fn merge(&mut self, other: &GramAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                row: self.n_rows,
                expected: self.dim,
                found: other.dim,
            });
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += b;
        }
        for (a, b) in self.moment.iter_mut().zip(&other.moment) {
            *a += b;
        }
        self.y_sq += other.y_sq;
        self.y_sum += other.y_sum;
        self.n_rows += other.n_rows;
        Ok(())
    }

    pub fn finish(self) -> Result<GramSystem> {
        if self.n_rows == 0 {
            return Err(Error::EmptyStream);
        }
        let d = self.dim;
        let upper = &self.upper;
        let gram = DMatrix::from_fn(d, d, |i, j| {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            upper[r * d + c]
        });
        Ok(GramSystem {
            gram,
            moment: DVector::from_vec(self.moment),
            y_sq: self.y_sq,
            y_sum: self.y_sum,
            n_rows: self.n_rows,
        })
    }
}

/// Reduces a stream of `(features, label)` rows to a [`GramSystem`] in one pass.
/// The dimension is fixed by the first row.
pub fn accumulate_gram<I, R>(rows: I) -> Result<GramSystem>
where
    I: IntoIterator<Item = (R, f64)>,
    R: AsRef<[f64]>,
{
    let mut iter = rows.into_iter();
    let (first, y0) = iter.next().ok_or(Error::EmptyStream)?;
    let mut acc = GramAccumulator::new(first.as_ref().len());
    acc.push(first.as_ref(), y0)?;
    for (x, y) in iter {
        acc.push(x.as_ref(), y)?;
    }
    acc.finish()
}

/// Generates a dataset straight into a [`GramSystem`] without storing rows.
pub fn synthetic_gram(spec: &SyntheticSpec) -> Result<(TrueModel, GramSystem)> {
    let mut acc = GramAccumulator::new(spec.dim());
    let model = generate_dataset(spec, |x, y| {
        // dimensions always agree for generated rows
        let _ = acc.push(x, y);
    })?;
    Ok((model, acc.finish()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_outer_product() {
        let g = accumulate_gram([(vec![1.0, 2.0], 3.0)]).unwrap();
        assert_eq!(g.gram, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert_eq!(g.moment.as_slice(), &[3.0, 6.0]);
        assert_eq!(g.y_sq, 9.0);
        assert_eq!(g.n_rows, 1);
    }

    #[test]
    fn two_rows_by_hand() {
        let g = accumulate_gram([(vec![1.0, 0.0], 1.0), (vec![1.0, 1.0], 2.0)]).unwrap();
        assert_eq!(g.gram, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(g.moment.as_slice(), &[3.0, 2.0]);
        assert_eq!(g.y_sq, 5.0);
        assert_eq!(g.y_sum, 3.0);
    }

    #[test]
    fn mismatch_names_row() {
        let err = accumulate_gram([
            (vec![1.0, 0.0], 1.0),
            (vec![1.0, 1.0], 2.0),
            (vec![1.0], 2.0),
        ])
        .unwrap_err();
        match err {
            Error::DimensionMismatch {
                row,
                expected,
                found,
            } => {
                assert_eq!((row, expected, found), (2, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_stream_rejected() {
        let rows: Vec<(Vec<f64>, f64)> = Vec::new();
        assert!(matches!(accumulate_gram(rows), Err(Error::EmptyStream)));
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(generate_dataset(&SyntheticSpec::new(0, 2, 0.1, 1), |_, _| {}).is_err());
        assert!(generate_dataset(&SyntheticSpec::new(5, 0, 0.1, 1), |_, _| {}).is_err());
        assert!(generate_dataset(&SyntheticSpec::new(5, 2, -1.0, 1), |_, _| {}).is_err());
    }

    #[test]
    fn noiseless_labels_forced() {
        let spec = SyntheticSpec::new(4, 1, 0.0, 99);
        let mut rows = Vec::new();
        let model = generate_dataset(&spec, |x, y| rows.push((x.to_vec(), y))).unwrap();
        assert_eq!(rows.len(), 4);
        let w = model.weights.as_slice();
        for (x, y) in rows {
            assert_eq!(x[0], 1.0);
            assert_eq!(y, w[0] + w[1] * x[1]);
        }
    }

    #[test]
    fn weights_in_unit_interval() {
        let spec = SyntheticSpec::new(1, 87, 0.1, 3);
        let model = generate_dataset(&spec, |x, _| assert_eq!(x.len(), 88)).unwrap();
        assert_eq!(model.weights.len(), 88);
        assert!(model
            .weights
            .as_slice()
            .iter()
            .all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn deterministic_by_seed() {
        let spec = SyntheticSpec::new(1000, 3, 0.1, 7);
        let (m1, g1) = synthetic_gram(&spec).unwrap();
        let (m2, g2) = synthetic_gram(&spec).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(g1, g2);
        assert_eq!(g1.gram[(0, 0)], 1000.0);
    }

    #[test]
    fn chunked_merge_matches_single_pass() {
        let spec = SyntheticSpec::new(3000, 4, 0.1, 11);
        let mut rows = Vec::new();
        generate_dataset(&spec, |x, y| rows.push((x.to_vec(), y))).unwrap();
        let whole = accumulate_gram(rows.iter().map(|(x, y)| (x, *y))).unwrap();

        let mut merged = GramAccumulator::new(5);
        for chunk in rows.chunks(777).rev() {
            let mut part = GramAccumulator::new(5);
            for (x, y) in chunk {
                part.push(x, *y).unwrap();
            }
            merged.merge(&part).unwrap();
        }
        let merged = merged.finish().unwrap();
        let scale = whole.gram.amax();
        assert!((&whole.gram - &merged.gram).amax() <= 1e-10 * scale);
        assert!((&whole.moment - &merged.moment).amax() <= 1e-10 * whole.moment.amax());
        assert!((whole.y_sq - merged.y_sq).abs() <= 1e-10 * whole.y_sq);
        assert_eq!(whole.n_rows, merged.n_rows);
    }

    #[test]
    fn gram_is_exactly_symmetric() {
        let spec = SyntheticSpec::new(500, 6, 0.1, 5);
        let (_, g) = synthetic_gram(&spec).unwrap();
        assert_eq!(g.gram, g.gram.transpose());
    }
}
