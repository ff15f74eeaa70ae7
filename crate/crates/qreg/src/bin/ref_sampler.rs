//! Reference external sampler: solves each request exactly by enumeration.

use std::io::{self, BufRead, Write};

use anyhow::Context;
use qreg::external::{SampleRequest, SampleResponse};
use qreg_core::brute_force;

fn main() -> anyhow::Result<()> {
    let stdin = io::stdin();
    let mut line = String::new();
    stdin
        .lock()
        .read_line(&mut line)
        .context("reading request")?;
    let request: SampleRequest = serde_json::from_str(line.trim()).context("parsing request")?;
    let q = request.qubo.to_problem()?;
    let set = brute_force(&q)?;
    let best = set.best().context("empty QUBO")?;
    let response = SampleResponse {
        samples: vec![best.assignment.bits().to_vec()],
        energies: vec![best.energy],
        occurrences: Some(vec![request.num_reads.max(1) as u64]),
        info: serde_json::json!({"solver": "enumeration"}),
    };
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, &response)?;
    writeln!(out)?;
    Ok(())
}
