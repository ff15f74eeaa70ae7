//! Iterative per-coefficient precision tuning.
//!
//! Each iteration encodes every coefficient on a small grid of spacing
//! `rate` centred on the current weights, solves the resulting QUBO, and
//! scores the decoded weights by R². An improvement over the previous
//! iteration moves the centre halfway to the new weights and divides the rate
//! by `rate_desc`; anything else multiplies the rate by `rate_asc` and keeps
//! the centre. The best weights seen are returned.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::dataset::GramSystem;
use crate::error::{invalid, Error, Result};
use crate::precision::{centered_precision, uniform_precision, PrecisionSpec};
use crate::qubo::{build_qubo, decode_weights};
use crate::regression::{r_squared, WeightVector};
use crate::sampler::{SampleSet, Sampler};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AdaptiveConfig {
    /// Initial grid spacing.
    pub rate: f64,
    /// Divisor applied to the rate after an improving iteration.
    pub rate_desc: f64,
    /// Multiplier applied to the rate otherwise.
    pub rate_asc: f64,
    pub n_iter: usize,
    /// Bits per coefficient.
    pub k: usize,
    /// Stop once `|ΔR²| < plateau_tol` for `patience` consecutive
    /// iterations. Zero disables the check.
    pub plateau_tol: f64,
    pub patience: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            rate: 0.25,
            rate_desc: 2.0,
            rate_asc: 1.5,
            n_iter: 30,
            k: 2,
            plateau_tol: 1e-5,
            patience: 5,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(invalid("rate must be positive and finite"));
        }
        if !(self.rate_desc > 1.0 && self.rate_desc.is_finite()) {
            return Err(invalid("rate_desc must be greater than 1"));
        }
        if !(self.rate_asc > 1.0 && self.rate_asc.is_finite()) {
            return Err(invalid("rate_asc must be greater than 1"));
        }
        if self.k < 2 {
            return Err(invalid("k must be at least 2"));
        }
        if !(self.plateau_tol >= 0.0) {
            return Err(invalid("plateau_tol must be nonnegative"));
        }
        if self.plateau_tol > 0.0 && self.patience == 0 {
            return Err(invalid("patience must be at least 1 when plateau_tol > 0"));
        }
        Ok(())
    }
}

/// One pass of the loop.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    /// Centre the precision vectors were built around.
    pub center: WeightVector,
    /// Rate used to build this iteration's precision vectors.
    pub rate: f64,
    pub w_new: WeightVector,
    pub r2_new: f64,
    pub improved: bool,
    /// Rate handed to the next iteration.
    pub rate_after: f64,
    pub best_energy: f64,
    pub sampler_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptiveState {
    pub w: WeightVector,
    pub w_best: WeightVector,
    pub r2_init: f64,
    pub r2_old: f64,
    pub r2_best: f64,
    pub rate: f64,
    pub iteration: usize,
    pub trace: Vec<IterationRecord>,
}

/// Runs the adaptive loop from `w_init`.
pub fn adaptive_fit<S: Sampler + ?Sized>(
    stats: &GramSystem,
    w_init: &WeightVector,
    cfg: &AdaptiveConfig,
    sampler: &mut S,
) -> Result<AdaptiveState> {
    cfg.validate()?;
    if w_init.len() != stats.dim() {
        return Err(invalid("w_init dimension does not match the data"));
    }
    let r2_init = r_squared(w_init, stats)?;
    let mut state = AdaptiveState {
        w: w_init.clone(),
        w_best: w_init.clone(),
        r2_init,
        r2_old: r2_init,
        r2_best: r2_init,
        rate: cfg.rate,
        iteration: 0,
        trace: Vec::with_capacity(cfg.n_iter),
    };
    let mut flat = 0usize;

    while state.iteration < cfg.n_iter {
        let iteration = state.iteration;
        let at = |e: Error| Error::AtIteration {
            iteration,
            source: Box::new(e),
        };
        let spec = centered_precision(&state.w, state.rate, cfg.k)?;
        let q = build_qubo(stats, &spec)?;
        let set = sampler.sample(&q).map_err(at)?;
        let best = set.best().ok_or(Error::NoSamples).map_err(at)?;
        let w_new = decode_weights(&best.assignment, &spec).map_err(at)?;
        let r2_new = r_squared(&w_new, stats)?;

        let center = state.w.clone();
        let rate = state.rate;
        let improved = r2_new > state.r2_old;
        if improved {
            state.w = state.w.midpoint(&w_new);
            state.rate /= cfg.rate_desc;
        } else {
            state.rate *= cfg.rate_asc;
        }
        if r2_new > state.r2_best {
            state.r2_best = r2_new;
            state.w_best = w_new.clone();
        }
        if cfg.plateau_tol > 0.0 && (r2_new - state.r2_old).abs() < cfg.plateau_tol {
            flat += 1;
        } else {
            flat = 0;
        }
        state.r2_old = r2_new;
        state.iteration += 1;
        state.trace.push(IterationRecord {
            iteration,
            center,
            rate,
            w_new,
            r2_new,
            improved,
            rate_after: state.rate,
            best_energy: best.energy,
            sampler_ms: set.wall_time().as_secs_f64() * 1e3,
        });
        if cfg.plateau_tol > 0.0 && flat >= cfg.patience {
            break;
        }
    }
    Ok(state)
}

/// Solves the fixed-precision QUBO (every coefficient on `k` equal parts of
/// `[lo, hi]`) and decodes the best read.
pub fn solve_fixed<S: Sampler + ?Sized>(
    stats: &GramSystem,
    k: usize,
    lo: f64,
    hi: f64,
    sampler: &mut S,
) -> Result<(WeightVector, PrecisionSpec, SampleSet)> {
    let spec = uniform_precision(stats.dim(), k, lo, hi)?;
    let q = build_qubo(stats, &spec)?;
    let set = sampler.sample(&q)?;
    let best = set.best().ok_or(Error::NoSamples)?;
    let w = decode_weights(&best.assignment, &spec)?;
    Ok((w, spec, set))
}

/// Starting point for [`adaptive_fit`]: the fixed-precision solution.
pub fn initial_weights_from_fixed<S: Sampler + ?Sized>(
    stats: &GramSystem,
    k: usize,
    lo: f64,
    hi: f64,
    sampler: &mut S,
) -> Result<WeightVector> {
    solve_fixed(stats, k, lo, hi, sampler).map(|(w, _, _)| w)
}
