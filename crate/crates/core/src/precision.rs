//! Precision vectors: the binary encoding of real regression coefficients.
//!
//! Coefficient `i` is represented by `K` selector bits `z_i1..z_iK` and its
//! own precision vector `π_i`, so that `w_i = Σ_k π_ik · z_ik`. Stacking the
//! vectors block-diagonally gives the `D × D·K` precision matrix
//! `P = Σ_i 𝓘ⁱ ⊗ π_iᵀ`, which reduces to `I_D ⊗ pᵀ` when every coefficient
//! shares the same vector `p`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::regression::WeightVector;

/// `D` precision vectors of common length `K`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrecisionSpec {
    k: usize,
    values: Vec<f64>,
}

impl PrecisionSpec {
    pub fn from_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| invalid("at least one precision vector is required"))?;
        let k = first.as_ref().len();
        if k == 0 {
            return Err(invalid("precision vectors must have at least one entry"));
        }
        let mut values = Vec::with_capacity(k * vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            let v = v.as_ref();
            if v.len() != k {
                return Err(invalid(format!(
                    "precision vector {i} has length {}, expected {k}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!(
                    "precision vector {i} has a non-finite entry"
                )));
            }
            values.extend_from_slice(v);
        }
        Ok(PrecisionSpec { k, values })
    }

    /// The same vector `p` for all `dim` coefficients.
    pub fn shared(dim: usize, p: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let vectors: Vec<&[f64]> = (0..dim).map(|_| p).collect();
        Self::from_vectors(&vectors)
    }

    /// Number of coefficients `D`.
    pub fn dim(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of binary variables `D·K`.
    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, coeff: usize) -> &[f64] {
        &self.values[coeff * self.k..(coeff + 1) * self.k]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k)
    }

    /// Whether every coefficient uses the same vector.
    pub fn is_uniform(&self) -> bool {
        let first = self.vector(0);
        self.vectors().all(|v| v == first)
    }
}

/// Fixed baseline: every coefficient splits `[lo, hi]` into `k` equal parts,
/// `p = (lo + s, s, …, s)` with `s = (hi − lo)/k`.
pub fn uniform_precision(dim: usize, k: usize, lo: f64, hi: f64) -> Result<PrecisionSpec> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!(
            "range [{lo}, {hi}] is empty or not finite"
        )));
    }
    let step = (hi - lo) / k as f64;
    let mut p = alloc::vec![step; k];
    p[0] = lo + step;
    PrecisionSpec::shared(dim, &p)
}

/// Per-coefficient grid of spacing `rate` around `center`.
///
/// `π_i = (c_i − rate·(2^(K−1) − 1)/2, rate, 2·rate, …, 2^(K−2)·rate)`: the
/// base entry plus any subset of the dyadic ladder walks a `2^(K−1)`-point
/// grid centred on `c_i`, and the empty selection keeps 0 representable.
pub fn centered_precision(center: &WeightVector, rate: f64, k: usize) -> Result<PrecisionSpec> {
    if k < 2 {
        return Err(invalid("a centered precision vector needs k >= 2"));
    }
    if k > 52 {
        return Err(invalid("k above 52 exceeds f64 ladder resolution"));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!(
            "rate must be positive and finite, got {rate}"
        )));
    }
    if center.is_empty() {
        return Err(invalid("center has no coefficients"));
    }
    let half_span = rate * ((1u64 << (k - 1)) - 1) as f64 / 2.0;
    let mut values = Vec::with_capacity(center.len() * k);
    for &c in center.as_slice() {
        if !c.is_finite() {
            return Err(invalid("center has a non-finite coefficient"));
        }
        values.push(c - half_span);
        let mut step = rate;
        for _ in 1..k {
            values.push(step);
            step *= 2.0;
        }
    }
    Ok(PrecisionSpec { k, values })
}

/// `P = Σ_i 𝓘ⁱ ⊗ π_iᵀ`: row `i` carries `π_i` in columns `[i·K, (i+1)·K)`.
pub fn expand_precision_matrix(spec: &PrecisionSpec) -> DMatrix<f64> {
    let (d, k) = (spec.dim(), spec.k());
    let mut p = DMatrix::zeros(d, d * k);
    for (i, pi) in spec.vectors().enumerate() {
        for (c, &v) in pi.iter().enumerate() {
            p[(i, i * k + c)] = v;
        }
    }
    p
}

/// Largest `K` accepted by [`representable_grid`].
pub const MAX_GRID_BITS: usize = 20;

/// Every value coefficient `coeff` can take: the sorted, deduplicated
/// (to 1e-12) subset sums of its precision vector.
pub fn representable_grid(spec: &PrecisionSpec, coeff: usize) -> Result<Vec<f64>> {
    let k = spec.k();
    if k > MAX_GRID_BITS {
        return Err(Error::TooLarge {
            what: "grid enumeration",
            dim: k,
            max: MAX_GRID_BITS,
        });
    }
    if coeff >= spec.dim() {
        return Err(invalid(format!("coefficient {coeff} out of range")));
    }
    let pi = spec.vector(coeff);
    let mut sums: Vec<f64> = (0u32..1 << k)
        .map(|mask| {
            pi.iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, v)| v)
                .sum()
        })
        .collect();
    sums.sort_by(f64::total_cmp);
    sums.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    Ok(sums)
}
