//! QUBO minimizers: an exhaustive oracle and a simulated annealer.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use rand_core::RngCore;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::qubo::{BinaryAssignment, QuboProblem};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleRecord {
    pub assignment: BinaryAssignment,
    /// `zᵀAz + bᵀz`, offset excluded.
    pub energy: f64,
    pub occurrences: u64,
}

/// Samples sorted best-first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleSet {
    records: Vec<SampleRecord>,
    sampler_name: String,
    wall_time: Duration,
    num_reads: u64,
}

fn record_order(a: &SampleRecord, b: &SampleRecord) -> core::cmp::Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then_with(|| a.assignment.cmp(&b.assignment))
}

impl SampleSet {
    /// Aggregates raw reads; identical assignments are merged into one record.
    pub fn from_reads(
        sampler_name: impl Into<String>,
        reads: Vec<(BinaryAssignment, f64)>,
        wall_time: Duration,
    ) -> Self {
        let records = reads
            .into_iter()
            .map(|(assignment, energy)| SampleRecord {
                assignment,
                energy,
                occurrences: 1,
            })
            .collect();
        Self::from_records(sampler_name, records, wall_time)
    }

    pub fn from_records(
        sampler_name: impl Into<String>,
        mut records: Vec<SampleRecord>,
        wall_time: Duration,
    ) -> Self {
        records.sort_by(record_order);
        let mut merged: Vec<SampleRecord> = Vec::with_capacity(records.len());
        for r in records {
            match merged.last_mut() {
                Some(last) if last.assignment == r.assignment => last.occurrences += r.occurrences,
                _ => merged.push(r),
            }
        }
        let num_reads = merged.iter().map(|r| r.occurrences).sum();
        SampleSet {
            records: merged,
            sampler_name: sampler_name.into(),
            wall_time,
            num_reads,
        }
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn best(&self) -> Option<&SampleRecord> {
        self.records.first()
    }

    pub fn sampler_name(&self) -> &str {
        &self.sampler_name
    }

    pub fn wall_time(&self) -> Duration {
        self.wall_time
    }

    pub fn set_wall_time(&mut self, wall_time: Duration) {
        self.wall_time = wall_time;
    }

    pub fn num_reads(&self) -> u64 {
        self.num_reads
    }

    /// Recomputes every energy from `q`; returns the index and both values of
    /// the first record off by more than `tol` (absolute, scaled by
    /// `max(1, |energy|)`).
    pub fn find_energy_mismatch(&self, q: &QuboProblem, tol: f64) -> Option<(usize, f64, f64)> {
        self.records.iter().enumerate().find_map(|(i, r)| {
            if r.assignment.len() != q.dim() {
                return Some((i, r.energy, f64::NAN));
            }
            let e = q.energy(&r.assignment);
            ((e - r.energy).abs() > tol * e.abs().max(1.0)).then_some((i, r.energy, e))
        })
    }
}

/// Anything that minimizes a [`QuboProblem`].
pub trait Sampler {
    fn name(&self) -> &str;

    fn sample(&mut self, q: &QuboProblem) -> Result<SampleSet>;
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn sample(&mut self, q: &QuboProblem) -> Result<SampleSet> {
        (**self).sample(q)
    }
}

impl<S: Sampler + ?Sized> Sampler for alloc::boxed::Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn sample(&mut self, q: &QuboProblem) -> Result<SampleSet> {
        (**self).sample(q)
    }
}

#[cfg(feature = "std")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed())
}

#[cfg(not(feature = "std"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    (f(), Duration::ZERO)
}

/// Folded linear term `b_i + A_ii` and the zero-diagonal coupling matrix
/// `A + Aᵀ`, from which a single-bit flip costs `(1 − 2z_i)(lin_i + Σ_j C_ij z_j)`.
struct FlipModel {
    m: usize,
    lin: Vec<f64>,
    coupling: Vec<f64>,
}

impl FlipModel {
    fn new(q: &QuboProblem) -> Self {
        let m = q.dim();
        let a = q.matrix();
        let lin = q.folded_linear();
        let mut coupling = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    coupling[i * m + j] = a[(i, j)] + a[(j, i)];
                }
            }
        }
        FlipModel { m, lin, coupling }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.coupling[i * self.m..(i + 1) * self.m]
    }

    fn fields(&self, z: &[u8]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(z)
                    .filter(|(_, &b)| b == 1)
                    .map(|(c, _)| c)
                    .sum()
            })
            .collect()
    }

    #[inline]
    fn flip(&self, z: &mut [u8], fields: &mut [f64], i: usize) {
        z[i] ^= 1;
        let sign = if z[i] == 1 { 1.0 } else { -1.0 };
        let row = &self.row(i)[..fields.len()];
        for (h, c) in fields.iter_mut().zip(row) {
            *h += sign * c;
        }
    }
}

/// Largest QUBO [`brute_force`] will enumerate.
pub const MAX_BRUTE_FORCE_DIM: usize = 24;

/// Exact minimum by Gray-code enumeration of all `2^M` assignments.
///
/// Ties keep the first minimizer in Gray-code order. The returned set holds
/// the single minimizer with `num_reads = 1`.
pub fn brute_force(q: &QuboProblem) -> Result<SampleSet> {
    let m = q.dim();
    if m > MAX_BRUTE_FORCE_DIM {
        return Err(Error::TooLarge {
            what: "brute-force enumeration",
            dim: m,
            max: MAX_BRUTE_FORCE_DIM,
        });
    }
    let (best, wall) = timed(|| {
        let model = FlipModel::new(q);
        let mut z = vec![0u8; m];
        let mut fields = vec![0.0; m];
        let mut energy = 0.0;
        let mut best_e = 0.0;
        let mut best_z = z.clone();
        for g in 1u64..(1u64 << m) {
            let i = g.trailing_zeros() as usize;
            let local = model.lin[i] + fields[i];
            energy += if z[i] == 0 { local } else { -local };
            model.flip(&mut z, &mut fields, i);
            if energy < best_e {
                best_e = energy;
                best_z.copy_from_slice(&z);
            }
        }
        BinaryAssignment::from_bits(best_z).expect("bits are binary")
    });
    let energy = q.energy(&best);
    Ok(SampleSet::from_reads(
        "brute-force",
        vec![(best, energy)],
        wall,
    ))
}

/// [`brute_force`] behind the [`Sampler`] trait.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForce;

impl Sampler for BruteForce {
    fn name(&self) -> &str {
        "brute-force"
    }

    fn sample(&mut self, q: &QuboProblem) -> Result<SampleSet> {
        brute_force(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SaConfig {
    pub num_reads: usize,
    pub sweeps: usize,
    /// `(hot, cold)` inverse temperatures; derived from the problem when absent.
    pub beta_range: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            num_reads: 1000,
            sweeps: 1000,
            beta_range: None,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(invalid("num_reads and sweeps must be at least 1"));
        }
        if let Some((hot, cold)) = self.beta_range {
            if !(hot > 0.0 && hot < cold && cold.is_finite()) {
                return Err(invalid("beta_range must satisfy 0 < hot < cold"));
            }
        }
        Ok(())
    }
}

/// Inverse-temperature endpoints for [`simulated_anneal`].
///
/// `hot = ln 2 / ΔE_max` with `ΔE_max = max_i (|b_i| + Σ_j |A_ij + A_ji|)`,
/// the largest single-flip energy bound, so the worst move starts out
/// accepted about half the time. `cold = ln 100 / ΔE_min` with `ΔE_min` the
/// smallest nonzero single-flip term, `|b_i + A_ii|` or `|A_ij + A_ji|`, so
/// the smallest move ends up accepted about 1% of the time.
pub fn default_beta_range(q: &QuboProblem) -> Result<(f64, f64)> {
    let a = q.matrix();
    let m = q.dim();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for i in 0..m {
        let mut bound = q.linear()[i].abs();
        for j in 0..m {
            let c = a[(i, j)] + a[(j, i)];
            bound += c.abs();
            if j != i && c != 0.0 {
                min = min.min(c.abs());
            }
        }
        let folded = (q.linear()[i] + a[(i, i)]).abs();
        if folded > 0.0 {
            min = min.min(folded);
        }
        max = max.max(bound);
    }
    if max == 0.0 || !min.is_finite() {
        return Err(Error::DegenerateQubo);
    }
    Ok((core::f64::consts::LN_2 / max, libm::log(100.0) / min))
}

fn geometric_schedule(hot: f64, cold: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![cold];
    }
    let ratio = cold / hot;
    (0..sweeps)
        .map(|t| hot * libm::pow(ratio, t as f64 / (sweeps - 1) as f64))
        .collect()
}

/// Acceptance probabilities below `exp(-MAX_EXPONENT)` are treated as zero.
const MAX_EXPONENT: f64 = 40.0;

// Metropolis test in the log domain: an uphill move of size `x = βΔ` is
// accepted when an Exp(1) draw exceeds `x`, which happens with probability
// `exp(-x)`.

fn anneal_read(model: &FlipModel, betas: &[f64], seed: u64) -> Vec<u8> {
    let m = model.m;
    let mut rng = rng::stream(seed);
    let mut z = Vec::with_capacity(m);
    let mut word = 0u64;
    for i in 0..m {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        z.push(((word >> (i % 64)) & 1) as u8);
    }
    let mut fields = model.fields(&z);
    let lin = &model.lin[..];
    for &beta in betas {
        for i in 0..m {
            let local = lin[i] + fields[i];
            let delta = if z[i] == 0 { local } else { -local };
            let accept = delta <= 0.0 || {
                let x = beta * delta;
                x < MAX_EXPONENT && {
                    let e: f64 = Exp1.sample(&mut rng);
                    e > x
                }
            };
            if accept {
                model.flip(&mut z, &mut fields, i);
            }
        }
    }
    z
}

/// Simulated annealing with `num_reads` independent restarts.
///
/// Each read starts from a random assignment and performs `sweeps` passes of
/// sequential single-bit Metropolis updates, the inverse temperature rising
/// geometrically from hot to cold. Read `r` draws from the child stream
/// `(seed, r)`, so results do not depend on how reads are scheduled.
pub fn simulated_anneal(q: &QuboProblem, cfg: &SaConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let (reads, wall) = timed(|| -> Result<Vec<(BinaryAssignment, f64)>> {
        let model = FlipModel::new(q);
        let (hot, cold) = match cfg.beta_range {
            Some(range) => range,
            None => match default_beta_range(q) {
                Ok(range) => range,
                // every assignment has energy 0
                Err(Error::DegenerateQubo) => (1.0, 2.0),
                Err(e) => return Err(e),
            },
        };
        let betas = geometric_schedule(hot, cold, cfg.sweeps);
        let run = |r: usize| {
            let bits = anneal_read(&model, &betas, rng::child_seed(cfg.seed, r as u64));
            let z = BinaryAssignment::from_bits(bits).expect("bits are binary");
            let e = q.energy(&z);
            (z, e)
        };
        #[cfg(feature = "std")]
        let reads = {
            use rayon::prelude::*;
            (0..cfg.num_reads).into_par_iter().map(run).collect()
        };
        #[cfg(not(feature = "std"))]
        let reads = (0..cfg.num_reads).map(run).collect();
        Ok(reads)
    });
    Ok(SampleSet::from_reads("simulated-annealing", reads?, wall))
}

/// [`simulated_anneal`] behind the [`Sampler`] trait.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedAnnealing {
    pub config: SaConfig,
}

impl SimulatedAnnealing {
    pub fn new(config: SaConfig) -> Self {
        SimulatedAnnealing { config }
    }
}

impl Sampler for SimulatedAnnealing {
    fn name(&self) -> &str {
        "simulated-annealing"
    }

    fn sample(&mut self, q: &QuboProblem) -> Result<SampleSet> {
        simulated_anneal(q, &self.config)
    }
}
