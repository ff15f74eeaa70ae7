//! Experiment plans, the solver matrix, and rate grid searches.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context};
use qreg_core::rng::child_seed;
use qreg_core::{
    adaptive_fit, r_squared, solve_closed_form, solve_fixed, solve_sgd, synthetic_gram,
    AdaptiveConfig, GramSystem, IterationRecord, RowSource, SaConfig, Sampler, SgdConfig,
    SimulatedAnnealing, SyntheticSpec, WeightVector,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::datafile::{generate_to_file, DatasetReader, DEFAULT_CHUNK_ROWS};
use crate::external::ExternalSampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Cf,
    Sgd,
    Sa,
    SaAda,
    Ext,
    ExtAda,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::Cf,
        Solver::Sgd,
        Solver::Sa,
        Solver::SaAda,
        Solver::Ext,
        Solver::ExtAda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Cf => "cf",
            Solver::Sgd => "sgd",
            Solver::Sa => "sa",
            Solver::SaAda => "sa-ada",
            Solver::Ext => "ext",
            Solver::ExtAda => "ext-ada",
        }
    }

    pub fn is_external(self) -> bool {
        matches!(self, Solver::Ext | Solver::ExtAda)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Solver::SaAda | Solver::ExtAda)
    }

    fn index(self) -> u64 {
        Solver::ALL.iter().position(|&s| s == self).unwrap() as u64
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Solver {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .with_context(|| {
                format!("unknown solver `{s}` (expected one of cf, sgd, sa, sa-ada, ext, ext-ada)")
            })
    }
}

/// Everything a benchmark run needs. Feature sizes count the bias column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub feature_sizes: Vec<usize>,
    pub n_rows: u64,
    pub noise_sigma: f64,
    /// Bits per coefficient, for fixed and adaptive solvers alike.
    pub k: usize,
    pub solvers: Vec<Solver>,
    pub seeds: Vec<u64>,
    pub adaptive: AdaptiveConfig,
    pub sa: SaConfig,
    pub sgd: SgdConfig,
    pub output_dir: PathBuf,
    /// Interval of the fixed-precision baseline.
    pub lo: f64,
    pub hi: f64,
    /// Start the adaptive loop from zero instead of the fixed solution.
    pub start_from_zero: bool,
    /// Write datasets here and stream them back from disk; in memory otherwise.
    pub data_dir: Option<PathBuf>,
    pub external_cmd: Option<String>,
    pub external_timeout_s: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            feature_sizes: (1..=8).map(|i| 5 * i).collect(),
            n_rows: 10_000,
            noise_sigma: SyntheticSpec::DEFAULT_NOISE_SIGMA,
            k: 2,
            solvers: vec![Solver::Cf, Solver::Sgd, Solver::Sa, Solver::SaAda],
            seeds: vec![0],
            adaptive: AdaptiveConfig::default(),
            sa: SaConfig::default(),
            sgd: SgdConfig::default(),
            output_dir: PathBuf::from("results"),
            lo: 0.0,
            hi: 1.0,
            start_from_zero: false,
            data_dir: None,
            external_cmd: None,
            external_timeout_s: 600.0,
        }
    }
}

impl ExperimentPlan {
    /// Reads a `.toml` or `.json` plan; fields left out take their defaults.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
        let plan: ExperimentPlan = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        Ok(plan)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(!self.feature_sizes.is_empty(), "feature_sizes is empty");
        ensure!(
            self.feature_sizes.windows(2).all(|w| w[0] < w[1]),
            "feature_sizes must be strictly ascending"
        );
        ensure!(
            self.feature_sizes[0] >= 1,
            "feature sizes must be at least 1"
        );
        ensure!(!self.solvers.is_empty(), "solver list is empty");
        ensure!(!self.seeds.is_empty(), "seed list is empty");
        ensure!(self.n_rows >= 2, "n_rows must be at least 2");
        ensure!(
            self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(),
            "noise_sigma must be nonnegative"
        );
        ensure!(self.k >= 2, "k must be at least 2");
        ensure!(self.lo < self.hi, "lo must be below hi");
        ensure!(
            self.external_timeout_s > 0.0,
            "external_timeout_s must be positive"
        );
        if self.solvers.iter().any(|s| s.is_external()) {
            ensure!(
                self.external_cmd
                    .as_deref()
                    .is_some_and(|c| !c.trim().is_empty()),
                "ext and ext-ada need an external command"
            );
        }
        self.adaptive_config().validate()?;
        self.sa.validate()?;
        self.sgd.validate()?;
        Ok(())
    }

    fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            k: self.k,
            ..self.adaptive
        }
    }

    fn dataset_spec(&self, features: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_rows: self.n_rows,
            n_features: features - 1,
            noise_sigma: self.noise_sigma,
            seed: child_seed(seed, features as u64),
        }
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.external_timeout_s)
    }
}

/// One (feature size, seed, solver) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub features: usize,
    pub solver: Solver,
    pub seed: u64,
    /// Absent when the solver failed.
    pub r2: Option<f64>,
    pub tts_ms: f64,
    pub extra: Map<String, Value>,
}

impl ResultRow {
    pub fn error(&self) -> Option<&str> {
        self.extra.get("error").and_then(Value::as_str)
    }

    pub fn is_error(&self) -> bool {
        self.r2.is_none()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    features: usize,
    solver: Solver,
    seed: u64,
    r2: Option<f64>,
    tts_ms: f64,
    extra_json: String,
}

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const TRACES_JSON: &str = "traces.json";
pub const GRID_CSV: &str = "grid.csv";

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(CsvRow {
            features: r.features,
            solver: r.solver,
            seed: r.seed,
            r2: r.r2,
            tts_ms: r.tts_ms,
            extra_json: serde_json::to_string(&r.extra)?,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut rd =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rd.deserialize::<CsvRow>().enumerate() {
        let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
        let extra = match serde_json::from_str(&rec.extra_json)
            .with_context(|| format!("{} record {}: extra_json", path.display(), i + 1))?
        {
            Value::Object(m) => m,
            _ => bail!(
                "{} record {}: extra_json is not an object",
                path.display(),
                i + 1
            ),
        };
        rows.push(ResultRow {
            features: rec.features,
            solver: rec.solver,
            seed: rec.seed,
            r2: rec.r2,
            tts_ms: rec.tts_ms,
            extra,
        });
    }
    Ok(rows)
}

/// Adaptive trace of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrace {
    pub features: usize,
    pub solver: Solver,
    pub seed: u64,
    pub r2_init: f64,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<CellTrace>,
}

impl BenchOutcome {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }
}

/// A prepared dataset: its sufficient statistics plus a way to stream rows.
pub struct Dataset {
    pub spec: SyntheticSpec,
    pub stats: GramSystem,
    file: Option<PathBuf>,
}

impl Dataset {
    /// Generates the data in memory, or through `data_dir` when given.
    pub fn prepare(spec: SyntheticSpec, data_dir: Option<&Path>) -> anyhow::Result<Self> {
        match data_dir {
            None => {
                let (_, stats) = synthetic_gram(&spec)?;
                Ok(Dataset {
                    spec,
                    stats,
                    file: None,
                })
            }
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("d{}_s{}.qrd", spec.dim(), spec.seed));
                generate_to_file(&path, &spec)?;
                Self::open(&path)
            }
        }
    }

    pub fn open(path: &Path) -> anyhow::Result<Self> {
        let meta = crate::datafile::load_meta(path)?;
        let stats = DatasetReader::open(path, DEFAULT_CHUNK_ROWS)?.gram()?;
        Ok(Dataset {
            spec: meta.spec,
            stats,
            file: Some(path.to_path_buf()),
        })
    }

    fn rows(&self) -> anyhow::Result<Box<dyn RowSource>> {
        Ok(match &self.file {
            Some(p) => Box::new(DatasetReader::open(p, DEFAULT_CHUNK_ROWS)?),
            None => Box::new(self.spec),
        })
    }
}

/// Result of one solver call.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub weights: WeightVector,
    pub r2: f64,
    pub tts: Duration,
    pub extra: Map<String, Value>,
    pub trace: Option<(f64, Vec<IterationRecord>)>,
}

/// Runs one solver on one dataset. `seed` drives every random choice.
pub fn solve(
    plan: &ExperimentPlan,
    data: &Dataset,
    solver: Solver,
    seed: u64,
) -> anyhow::Result<SolveOutcome> {
    let stats = &data.stats;
    let mut extra = Map::new();
    let mut trace = None;
    let sa = SaConfig { seed, ..plan.sa };
    let mut sampler: Box<dyn Sampler> = if solver.is_external() {
        Box::new(ExternalSampler {
            command: plan
                .external_cmd
                .clone()
                .context("no external command configured")?,
            num_reads: plan.sa.num_reads,
            timeout: plan.timeout(),
        })
    } else {
        Box::new(SimulatedAnnealing::new(sa))
    };

    let mut source = match solver {
        Solver::Sgd => Some(data.rows()?),
        _ => None,
    };
    let start = Instant::now();
    let weights = match solver {
        Solver::Cf => solve_closed_form(stats)?,
        Solver::Sgd => {
            let cfg = SgdConfig { seed, ..plan.sgd };
            let fit = solve_sgd(source.as_deref_mut().unwrap(), stats, &cfg)?;
            extra.insert("epochs".into(), json!(fit.epochs));
            fit.weights
        }
        Solver::Sa | Solver::Ext => {
            let (w, _, set) = solve_fixed(stats, plan.k, plan.lo, plan.hi, &mut sampler)?;
            extra.insert("best_energy".into(), json!(set.best().map(|r| r.energy)));
            w
        }
        Solver::SaAda | Solver::ExtAda => {
            let w0 = if plan.start_from_zero {
                WeightVector::zeros(stats.dim())
            } else {
                let (w, _, _) = solve_fixed(stats, plan.k, plan.lo, plan.hi, &mut sampler)?;
                w
            };
            let fixed_ms = start.elapsed().as_secs_f64() * 1e3;
            let state = adaptive_fit(stats, &w0, &plan.adaptive_config(), &mut sampler)?;
            extra.insert("iterations".into(), json!(state.iteration));
            extra.insert("initial_ms".into(), json!(fixed_ms));
            extra.insert("r2_init".into(), json!(state.r2_init));
            extra.insert("final_rate".into(), json!(state.rate));
            extra.insert(
                "best_energy".into(),
                json!(state.trace.last().map(|t| t.best_energy)),
            );
            trace = Some((state.r2_init, state.trace));
            state.w_best
        }
    };
    let tts = start.elapsed();
    let r2 = r_squared(&weights, stats)?;
    extra.insert("weights".into(), json!(weights.as_slice()));
    Ok(SolveOutcome {
        weights,
        r2,
        tts,
        extra,
        trace,
    })
}

/// Seed handed to `solver` in the cell `(features, seed)`.
///
/// Fixed and adaptive variants of one sampler share it, so the adaptive loop
/// starts from exactly the fixed solution reported next to it.
pub fn cell_seed(seed: u64, features: usize, solver: Solver) -> u64 {
    let family = match solver {
        Solver::SaAda => Solver::Sa,
        Solver::ExtAda => Solver::Ext,
        s => s,
    };
    child_seed(child_seed(seed, features as u64), 0x100 + family.index())
}

/// Runs the full plan and writes results.csv, results.json and traces.json
/// into the output directory. Solver failures become error rows.
pub fn run_benchmark(plan: &ExperimentPlan) -> anyhow::Result<BenchOutcome> {
    plan.validate()?;
    fs::create_dir_all(&plan.output_dir)
        .with_context(|| format!("creating {}", plan.output_dir.display()))?;
    let mut outcome = BenchOutcome {
        rows: Vec::new(),
        traces: Vec::new(),
    };
    for &features in &plan.feature_sizes {
        for &seed in &plan.seeds {
            let spec = plan.dataset_spec(features, seed);
            let data = Dataset::prepare(spec, plan.data_dir.as_deref());
            for &solver in &plan.solvers {
                let result = data
                    .as_ref()
                    .map_err(|e| anyhow::anyhow!("dataset: {e:#}"))
                    .and_then(|d| solve(plan, d, solver, cell_seed(seed, features, solver)));
                let row = match result {
                    Ok(out) => {
                        if let Some((r2_init, trace)) = out.trace {
                            outcome.traces.push(CellTrace {
                                features,
                                solver,
                                seed,
                                r2_init,
                                trace,
                            });
                        }
                        ResultRow {
                            features,
                            solver,
                            seed,
                            r2: Some(out.r2),
                            tts_ms: out.tts.as_secs_f64() * 1e3,
                            extra: out.extra,
                        }
                    }
                    Err(e) => {
                        let mut extra = Map::new();
                        extra.insert("error".into(), json!(format!("{e:#}")));
                        ResultRow {
                            features,
                            solver,
                            seed,
                            r2: None,
                            tts_ms: 0.0,
                            extra,
                        }
                    }
                };
                outcome.rows.push(row);
            }
        }
    }
    write_results_csv(&plan.output_dir.join(RESULTS_CSV), &outcome.rows)?;
    write_json(
        &plan.output_dir.join(RESULTS_JSON),
        &json!({"plan": plan, "rows": outcome.rows}),
    )?;
    write_json(&plan.output_dir.join(TRACES_JSON), &outcome.traces)?;
    Ok(outcome)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Aggregate of one `(rate_desc, rate_asc)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub rate_desc: f64,
    pub rate_asc: f64,
    pub runs: usize,
    pub mean_r2_best: Option<f64>,
    pub mean_tts_ms: Option<f64>,
    pub error: Option<String>,
}

impl GridCell {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: (f64, f64),
    pub cells: Vec<GridCell>,
}

/// Picks the winning cell: highest mean r2_best, then lower mean TTS, then
/// the smaller `(rate_desc, rate_asc)`. Failed cells never win.
pub fn select_best(cells: &[GridCell]) -> Option<&GridCell> {
    cells
        .iter()
        .filter(|c| !c.failed() && c.mean_r2_best.is_some())
        .min_by(|a, b| {
            let r2 = |c: &GridCell| c.mean_r2_best.unwrap_or(f64::NEG_INFINITY);
            let tts = |c: &GridCell| c.mean_tts_ms.unwrap_or(f64::INFINITY);
            r2(b)
                .total_cmp(&r2(a))
                .then(tts(a).total_cmp(&tts(b)))
                .then(a.rate_desc.total_cmp(&b.rate_desc))
                .then(a.rate_asc.total_cmp(&b.rate_asc))
        })
}

/// Runs the adaptive loop for every grid cell over every (feature size, seed)
/// of `plan` and writes grid.csv. The sampler is SA unless the plan asks for
/// ext-ada only.
pub fn grid_search(
    plan: &ExperimentPlan,
    rate_desc_grid: &[f64],
    rate_asc_grid: &[f64],
) -> anyhow::Result<GridOutcome> {
    plan.validate()?;
    ensure!(!rate_desc_grid.is_empty(), "rate_desc grid is empty");
    ensure!(!rate_asc_grid.is_empty(), "rate_asc grid is empty");
    let solver = if plan.solvers.contains(&Solver::ExtAda) && !plan.solvers.contains(&Solver::SaAda)
    {
        Solver::ExtAda
    } else {
        Solver::SaAda
    };
    let mut datasets = Vec::new();
    for &features in &plan.feature_sizes {
        for &seed in &plan.seeds {
            let data =
                Dataset::prepare(plan.dataset_spec(features, seed), plan.data_dir.as_deref())?;
            datasets.push((features, seed, data));
        }
    }

    let mut cells = Vec::new();
    for &rate_desc in rate_desc_grid {
        for &rate_asc in rate_asc_grid {
            let mut cell_plan = plan.clone();
            cell_plan.adaptive.rate_desc = rate_desc;
            cell_plan.adaptive.rate_asc = rate_asc;
            let mut r2s = Vec::new();
            let mut tts = Vec::new();
            let mut error = None;
            for (features, seed, data) in &datasets {
                match cell_plan
                    .adaptive_config()
                    .validate()
                    .map_err(anyhow::Error::from)
                    .and_then(|_| {
                        solve(
                            &cell_plan,
                            data,
                            solver,
                            cell_seed(*seed, *features, solver),
                        )
                    }) {
                    Ok(out) => {
                        r2s.push(out.r2);
                        tts.push(out.tts.as_secs_f64() * 1e3);
                    }
                    Err(e) => {
                        error = Some(format!("features {features}, seed {seed}: {e:#}"));
                        break;
                    }
                }
            }
            let mean = |v: &[f64]| {
                (error.is_none() && !v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            cells.push(GridCell {
                rate_desc,
                rate_asc,
                runs: r2s.len(),
                mean_r2_best: mean(&r2s),
                mean_tts_ms: mean(&tts),
                error,
            });
        }
    }

    fs::create_dir_all(&plan.output_dir)
        .with_context(|| format!("creating {}", plan.output_dir.display()))?;
    let path = plan.output_dir.join(GRID_CSV);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for c in &cells {
        w.serialize(c)?;
    }
    w.flush()?;

    let best = select_best(&cells).context("every grid cell failed")?;
    Ok(GridOutcome {
        best: (best.rate_desc, best.rate_asc),
        cells,
    })
}
