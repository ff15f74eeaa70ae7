//! Classical baselines (closed form, mini-batch SGD) and the R² metric.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, SymmetricEigen};

use crate::dataset::GramSystem;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// Regression coefficients, bias first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Self {
        WeightVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        WeightVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Coordinate-wise midpoint of `self` and `other`.
    pub fn midpoint(&self, other: &WeightVector) -> WeightVector {
        WeightVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (a + b) / 2.0)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// A re-iterable source of `(features, label)` rows.
pub trait RowSource {
    fn dim(&self) -> usize;

    /// Visits every row once, in storage order.
    fn for_each_row(&mut self, f: &mut dyn FnMut(&[f64], f64)) -> Result<()>;
}

/// Rows held in memory, packed as `dim` features followed by the label.
#[derive(Debug, Clone, Default)]
pub struct InMemoryRows {
    dim: usize,
    packed: Vec<f64>,
}

impl InMemoryRows {
    pub fn new(dim: usize) -> Self {
        InMemoryRows {
            dim,
            packed: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                row: self.len() as u64,
                expected: self.dim,
                found: x.len(),
            });
        }
        self.packed.extend_from_slice(x);
        self.packed.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.packed.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.packed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.packed
            .chunks_exact(self.dim + 1)
            .map(|r| (&r[..r.len() - 1], r[r.len() - 1]))
    }
}

impl RowSource for InMemoryRows {
    fn dim(&self) -> usize {
        self.dim
    }

    fn for_each_row(&mut self, f: &mut dyn FnMut(&[f64], f64)) -> Result<()> {
        for (x, y) in self.iter() {
            f(x, y);
        }
        Ok(())
    }
}

/// Condition number above which the normal equations are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `(XᵀX) w = XᵀY` by Cholesky factorization.
pub fn solve_closed_form(stats: &GramSystem) -> Result<WeightVector> {
    let eig = SymmetricEigen::new(stats.gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !(max / min <= MAX_CONDITION) {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::IllConditioned { condition });
    }
    let chol = Cholesky::new(stats.gram.clone()).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let w = chol.solve(&stats.moment);
    let w = WeightVector(w.iter().copied().collect());
    if !w.is_finite() {
        return Err(Error::IllConditioned {
            condition: max / min,
        });
    }
    Ok(w)
}

/// `1 − RSS/TSS` from the sufficient statistics. Negative for fits worse than
/// predicting the mean.
pub fn r_squared(w: &WeightVector, stats: &GramSystem) -> Result<f64> {
    let tss = stats.tss();
    if !(tss > 0.0) {
        return Err(Error::DegenerateTarget { tss });
    }
    Ok(1.0 - stats.rss(w.as_slice())? / tss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once an epoch improves R² by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 100,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("batch_size and max_epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdFit {
    pub weights: WeightVector,
    pub epochs: usize,
}

/// Rows held back by the streaming shuffle.
pub const SHUFFLE_WINDOW: usize = 4096;

struct MiniBatch {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<f64>,
    grad: Vec<f64>,
}

impl MiniBatch {
    fn push(&mut self, x: &[f64], y: f64) {
        self.rows.extend_from_slice(x);
        self.labels.push(y);
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    /// `w ← w − α·(2/B)·Xᵦᵀ(Xᵦw − Yᵦ)`
    fn step(&mut self, w: &mut [f64], alpha: f64) {
        let b = self.len();
        if b == 0 {
            return;
        }
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in self.rows.chunks_exact(self.dim).zip(&self.labels) {
            let mut pred = 0.0;
            for (xi, wi) in x.iter().zip(w.iter()) {
                pred += xi * wi;
            }
            let r = pred - y;
            for (g, xi) in self.grad.iter_mut().zip(x) {
                *g += r * xi;
            }
        }
        let scale = alpha * 2.0 / b as f64;
        for (wi, g) in w.iter_mut().zip(&self.grad) {
            *wi -= scale * g;
        }
        self.rows.clear();
        self.labels.clear();
    }
}

/// Mini-batch stochastic gradient descent from zero weights.
///
/// Each epoch streams the source once through a seeded shuffle window of
/// [`SHUFFLE_WINDOW`] rows. `stats` is only used to monitor R² between epochs;
/// when the target has no variance the run goes to `max_epochs`.
pub fn solve_sgd<S: RowSource + ?Sized>(
    source: &mut S,
    stats: &GramSystem,
    config: &SgdConfig,
) -> Result<SgdFit> {
    config.validate()?;
    let dim = source.dim();
    if dim != stats.dim() {
        return Err(invalid("row source and Gram system disagree on dimension"));
    }
    let mut w = vec![0.0; dim];
    let monitor = stats.tss() > 0.0;
    let mut prev_r2 = if monitor {
        r_squared(&WeightVector(w.clone()), stats)?
    } else {
        0.0
    };
    let mut rng = rng::stream(config.seed);
    let mut batch = MiniBatch {
        dim,
        rows: Vec::with_capacity(config.batch_size * dim),
        labels: Vec::with_capacity(config.batch_size),
        grad: vec![0.0; dim],
    };
    let mut window: VecDeque<(Vec<f64>, f64)> = VecDeque::with_capacity(SHUFFLE_WINDOW);
    let alpha = config.learning_rate;
    let bsize = config.batch_size;

    for epoch in 1..=config.max_epochs {
        {
            let mut emit = |x: &[f64], y: f64, w: &mut [f64]| {
                batch.push(x, y);
                if batch.len() == bsize {
                    batch.step(w, alpha);
                }
            };
            source.for_each_row(&mut |x, y| {
                if window.len() < SHUFFLE_WINDOW {
                    window.push_back((x.to_vec(), y));
                    return;
                }
                let j = (rng::uniform01(&mut rng) * window.len() as f64) as usize;
                let (held_x, held_y) = core::mem::replace(&mut window[j], (x.to_vec(), y));
                emit(&held_x, held_y, &mut w);
            })?;
            while !window.is_empty() {
                let j = (rng::uniform01(&mut rng) * window.len() as f64) as usize;
                let (x, y) = window.swap_remove_back(j).expect("index in range");
                emit(&x, y, &mut w);
            }
        }
        batch.step(&mut w, alpha);

        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        if monitor {
            let r2 = r_squared(&WeightVector(w.clone()), stats)?;
            if !r2.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            if r2 - prev_r2 < config.tol {
                return Ok(SgdFit {
                    weights: WeightVector(w),
                    epochs: epoch,
                });
            }
            prev_r2 = r2;
        }
    }
    Ok(SgdFit {
        weights: WeightVector(w),
        epochs: config.max_epochs,
    })
}
