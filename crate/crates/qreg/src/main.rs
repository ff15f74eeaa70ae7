use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qreg::bench::{
    grid_search, run_benchmark, solve, Dataset, ExperimentPlan, Solver, RESULTS_CSV,
};
use qreg::datafile::generate_to_file;
use qreg::report::report;
use qreg_core::SyntheticSpec;

#[derive(Parser)]
#[command(
    name = "qreg",
    version,
    about = "Linear regression as QUBO: datasets, solvers, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset file plus its `.meta.json` sidecar.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Coefficients per row, bias included.
        #[arg(long)]
        features: usize,
        #[arg(long, default_value_t = 10_000)]
        rows: u64,
        #[arg(long, default_value_t = SyntheticSpec::DEFAULT_NOISE_SIGMA)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one solver on one dataset file.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        solver: Solver,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Run the full solver matrix.
    Bench {
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Search (rate_desc, rate_asc) for the adaptive solver.
    GridSearch {
        #[arg(long, value_delimiter = ',', default_value = "1.5,2,3")]
        rate_desc: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.25,1.5,2")]
        rate_asc: Vec<f64>,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Print the R² table of a results.csv and write tts_plot.csv beside it.
    Report {
        /// A results.csv, or the directory holding one.
        results: PathBuf,
    },
}

/// Plan file plus per-field overrides.
#[derive(Args)]
struct PlanArgs {
    /// TOML or JSON plan; flags below override its fields.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<usize>>,
    #[arg(long)]
    rows: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<Solver>>,
    /// Single base seed; see also --seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    num_reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Command speaking the JSON sampling protocol on stdin/stdout.
    #[arg(long)]
    external_cmd: Option<String>,
    #[arg(long)]
    timeout_s: Option<f64>,
    #[arg(long)]
    start_from_zero: bool,
}

impl PlanArgs {
    fn into_plan(self) -> anyhow::Result<ExperimentPlan> {
        let mut p = match &self.plan {
            Some(path) => ExperimentPlan::load(path)?,
            None => ExperimentPlan::default(),
        };
        if let Some(v) = self.features {
            p.feature_sizes = v;
        }
        if let Some(v) = self.rows {
            p.n_rows = v;
        }
        if let Some(v) = self.noise {
            p.noise_sigma = v;
        }
        if let Some(v) = self.k {
            p.k = v;
        }
        if let Some(v) = self.solvers {
            p.solvers = v;
        }
        if let Some(v) = self.seed {
            p.seeds = vec![v];
        }
        if let Some(v) = self.seeds {
            p.seeds = v;
        }
        if let Some(v) = self.num_reads {
            p.sa.num_reads = v;
        }
        if let Some(v) = self.sweeps {
            p.sa.sweeps = v;
        }
        if let Some(v) = self.n_iter {
            p.adaptive.n_iter = v;
        }
        if let Some(v) = self.out_dir {
            p.output_dir = v;
        }
        if let Some(v) = self.data_dir {
            p.data_dir = Some(v);
        }
        if let Some(v) = self.external_cmd {
            p.external_cmd = Some(v);
        }
        if let Some(v) = self.timeout_s {
            p.external_timeout_s = v;
        }
        if self.start_from_zero {
            p.start_from_zero = true;
        }
        Ok(p)
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Gen {
            out,
            features,
            rows,
            noise,
            seed,
        } => {
            anyhow::ensure!(features >= 1, "--features must be at least 1");
            let spec = SyntheticSpec {
                n_rows: rows,
                n_features: features - 1,
                noise_sigma: noise,
                seed,
            };
            let model = generate_to_file(&out, &spec)?;
            println!(
                "wrote {} ({rows} rows, {features} coefficients)",
                out.display()
            );
            println!("true weights: {:?}", model.weights.as_slice());
            Ok(true)
        }
        Command::Solve { data, solver, plan } => {
            let plan = plan.into_plan()?;
            let dataset = Dataset::open(&data)?;
            let seed = plan.seeds[0];
            let out = solve(&plan, &dataset, solver, seed)?;
            println!("solver   {solver}");
            println!("r2       {:.6}", out.r2);
            println!("tts_ms   {:.3}", out.tts.as_secs_f64() * 1e3);
            println!("weights  {:?}", out.weights.as_slice());
            Ok(true)
        }
        Command::Bench { plan } => {
            let plan = plan.into_plan()?;
            let outcome = run_benchmark(&plan)?;
            for r in &outcome.rows {
                match r.r2 {
                    Some(v) => println!(
                        "{:>4} {:>8} seed {:<6} r2 {v:.4}  {:.1} ms",
                        r.features,
                        r.solver.as_str(),
                        r.seed,
                        r.tts_ms
                    ),
                    None => eprintln!(
                        "{:>4} {:>8} seed {:<6} error: {}",
                        r.features,
                        r.solver.as_str(),
                        r.seed,
                        r.error().unwrap_or("unknown")
                    ),
                }
            }
            println!("results in {}", plan.output_dir.display());
            Ok(outcome.failed() == 0)
        }
        Command::GridSearch {
            rate_desc,
            rate_asc,
            plan,
        } => {
            let plan = plan.into_plan()?;
            let outcome = grid_search(&plan, &rate_desc, &rate_asc)?;
            for c in &outcome.cells {
                match (c.mean_r2_best, &c.error) {
                    (Some(r2), None) => println!(
                        "rate_desc {:<6} rate_asc {:<6} mean r2_best {r2:.4}  {:.1} ms",
                        c.rate_desc,
                        c.rate_asc,
                        c.mean_tts_ms.unwrap_or(f64::NAN)
                    ),
                    (_, e) => eprintln!(
                        "rate_desc {:<6} rate_asc {:<6} failed: {}",
                        c.rate_desc,
                        c.rate_asc,
                        e.as_deref().unwrap_or("no runs")
                    ),
                }
            }
            println!(
                "best rate_desc {} rate_asc {}",
                outcome.best.0, outcome.best.1
            );
            Ok(outcome.cells.iter().all(|c| !c.failed()))
        }
        Command::Report { results } => {
            let path = if results.is_dir() {
                results.join(RESULTS_CSV)
            } else {
                results
            };
            let r = report(&path).with_context(|| format!("reporting {}", path.display()))?;
            print!("{}", r.table);
            println!("plot data in {}", r.plot_path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
