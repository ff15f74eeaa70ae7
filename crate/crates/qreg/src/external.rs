//! Out-of-process samplers speaking newline-delimited JSON.
//!
//! The child receives one request line on stdin:
//!
//! ```json
//! {"dim": M, "linear": [...], "quadratic": [[i, j, v], ...], "offset": o, "num_reads": n}
//! ```
//!
//! and answers with one line on stdout:
//!
//! ```json
//! {"samples": [[0, 1, ...], ...], "energies": [...], "occurrences": [...], "info": {}}
//! ```
//!
//! `linear` already contains the diagonal of `A`; each coupler `(i, j)` with
//! `i < j` carries `A_ij + A_ji`. Energies exclude the offset.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use qreg_core::{BinaryAssignment, QuboProblem, SampleRecord, SampleSet, Sampler};
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

/// Relative tolerance for re-verifying child energies.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

/// A QUBO in exchange form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboExport {
    pub dim: usize,
    pub linear: Vec<f64>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl QuboExport {
    pub fn from_problem(q: &QuboProblem) -> Self {
        QuboExport {
            dim: q.dim(),
            linear: q.folded_linear(),
            quadratic: q.couplers(),
            offset: q.offset(),
        }
    }

    pub fn to_problem(&self) -> qreg_core::Result<QuboProblem> {
        if self.linear.len() != self.dim {
            return Err(qreg_core::Error::Invalid(format!(
                "dim is {} but linear has {} entries",
                self.dim,
                self.linear.len()
            )));
        }
        QuboProblem::from_couplers(self.linear.clone(), &self.quadratic, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    #[serde(flatten)]
    pub qubo: QuboExport,
    pub num_reads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub samples: Vec<Vec<u8>>,
    pub energies: Vec<f64>,
    /// One per sample; all ones when omitted.
    #[serde(default)]
    pub occurrences: Option<Vec<u64>>,
    #[serde(default)]
    pub info: serde_json::Value,
}

#[derive(Debug, thiserror::Error)]
pub enum ExternalError {
    #[error("failed to launch `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("pipe to child failed: {0}")]
    Pipe(#[source] std::io::Error),
    #[error("child exited with {status}{}", stderr_suffix(.stderr))]
    Exit { status: String, stderr: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("sample {index}: child reported energy {reported}, QUBO gives {recomputed}")]
    EnergyMismatch {
        index: usize,
        reported: f64,
        recomputed: f64,
    },
    #[error("child did not answer within {0:?}")]
    Timeout(Duration),
}

fn stderr_suffix(stderr: &str) -> String {
    if stderr.is_empty() {
        String::new()
    } else {
        format!(": {stderr}")
    }
}

/// Runs `command` (through `sh -c`) once and returns its verified samples.
pub fn external_sample(
    q: &QuboProblem,
    command: &str,
    num_reads: usize,
    timeout: Duration,
) -> Result<SampleSet, ExternalError> {
    let start = Instant::now();
    let request = SampleRequest {
        qubo: QuboExport::from_problem(q),
        num_reads,
    };
    let mut line =
        serde_json::to_vec(&request).map_err(|e| ExternalError::Malformed(e.to_string()))?;
    line.push(b'\n');

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| ExternalError::Spawn {
            command: command.to_string(),
            source,
        })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        // the child may exit without reading; a broken pipe then surfaces as
        // an exit or parse error instead
        let _ = stdin.write_all(&line);
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let status = match child.wait_timeout(timeout).map_err(ExternalError::Pipe)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ExternalError::Timeout(timeout));
        }
    };
    let _ = writer.join();
    let out = reader
        .join()
        .expect("reader thread")
        .map_err(ExternalError::Pipe)?;
    let err_text = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(ExternalError::Exit {
            status: status.to_string(),
            stderr: err_text.trim().to_string(),
        });
    }

    let text = String::from_utf8(out).map_err(|e| ExternalError::Malformed(e.to_string()))?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| ExternalError::Malformed("empty response".into()))?;
    let response: SampleResponse =
        serde_json::from_str(first).map_err(|e| ExternalError::Malformed(e.to_string()))?;
    let mut set = verify_response(q, response)?;
    set.set_wall_time(start.elapsed());
    Ok(set)
}

/// Checks shapes and energies; stored energies are recomputed from `q`.
pub fn verify_response(q: &QuboProblem, r: SampleResponse) -> Result<SampleSet, ExternalError> {
    let n = r.samples.len();
    if n == 0 {
        return Err(ExternalError::Malformed("no samples".into()));
    }
    if r.energies.len() != n {
        return Err(ExternalError::Malformed(format!(
            "{n} samples but {} energies",
            r.energies.len()
        )));
    }
    let occurrences = r.occurrences.unwrap_or_else(|| vec![1; n]);
    if occurrences.len() != n {
        return Err(ExternalError::Malformed(format!(
            "{n} samples but {} occurrence counts",
            occurrences.len()
        )));
    }
    let mut records = Vec::with_capacity(n);
    for (index, ((bits, reported), occ)) in r
        .samples
        .into_iter()
        .zip(r.energies)
        .zip(occurrences)
        .enumerate()
    {
        if bits.len() != q.dim() {
            return Err(ExternalError::Malformed(format!(
                "sample {index} has {} bits, QUBO has {}",
                bits.len(),
                q.dim()
            )));
        }
        let z = BinaryAssignment::from_bits(bits)
            .map_err(|e| ExternalError::Malformed(format!("sample {index}: {e}")))?;
        let recomputed = q.energy(&z);
        let agrees = (reported - recomputed).abs() <= ENERGY_TOLERANCE * recomputed.abs().max(1.0);
        if !agrees {
            return Err(ExternalError::EnergyMismatch {
                index,
                reported,
                recomputed,
            });
        }
        records.push(SampleRecord {
            assignment: z,
            energy: recomputed,
            occurrences: occ,
        });
    }
    Ok(SampleSet::from_records("external", records, Duration::ZERO))
}

/// [`external_sample`] behind the core [`Sampler`] trait.
#[derive(Debug, Clone)]
pub struct ExternalSampler {
    pub command: String,
    pub num_reads: usize,
    pub timeout: Duration,
}

impl Sampler for ExternalSampler {
    fn name(&self) -> &str {
        "external"
    }

    fn sample(&mut self, q: &QuboProblem) -> qreg_core::Result<SampleSet> {
        external_sample(q, &self.command, self.num_reads, self.timeout)
            .map_err(|e| qreg_core::Error::Sampler(Box::new(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qreg_core::{build_qubo, synthetic_gram, uniform_precision, SyntheticSpec};

    fn regression_qubo() -> QuboProblem {
        let spec = SyntheticSpec {
            n_rows: 200,
            n_features: 2,
            noise_sigma: 0.1,
            seed: 3,
        };
        let (_, stats) = synthetic_gram(&spec).unwrap();
        build_qubo(&stats, &uniform_precision(3, 2, 0.0, 1.0).unwrap()).unwrap()
    }

    fn one_var() -> QuboProblem {
        QuboProblem::from_couplers(vec![-1.0], &[], 0.0).unwrap()
    }

    #[test]
    fn export_keeps_energies() {
        let q = regression_qubo();
        let export = QuboExport::from_problem(&q);
        assert_eq!(export.dim, 6);
        assert!(export.quadratic.iter().all(|&(i, j, _)| i < j));
        let back = export.to_problem().unwrap();
        for mask in 0u32..64 {
            let z = BinaryAssignment::from_bits((0..6).map(|b| (mask >> b & 1) as u8).collect())
                .unwrap();
            let (a, b) = (q.energy(&z), back.energy(&z));
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn request_wire_shape() {
        let q = QuboProblem::from_couplers(vec![-1.0, 2.0], &[(0, 1, 0.5)], 1.0).unwrap();
        let req = SampleRequest {
            qubo: QuboExport::from_problem(&q),
            num_reads: 5,
        };
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "dim": 2, "linear": [-1.0, 2.0], "quadratic": [[0, 1, 0.5]],
                "offset": 1.0, "num_reads": 5
            })
        );
    }

    #[test]
    fn mismatched_energy_rejected() {
        let r = SampleResponse {
            samples: vec![vec![1]],
            energies: vec![-3.0],
            occurrences: None,
            info: serde_json::Value::Null,
        };
        assert!(matches!(
            verify_response(&one_var(), r),
            Err(ExternalError::EnergyMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn wrong_width_is_malformed() {
        let r = SampleResponse {
            samples: vec![vec![1, 0]],
            energies: vec![-1.0],
            occurrences: None,
            info: serde_json::Value::Null,
        };
        assert!(matches!(
            verify_response(&one_var(), r),
            Err(ExternalError::Malformed(_))
        ));
    }

    #[test]
    fn responses_are_resorted() {
        let r = SampleResponse {
            samples: vec![vec![0], vec![1]],
            energies: vec![0.0, -1.0],
            occurrences: Some(vec![3, 7]),
            info: serde_json::Value::Null,
        };
        let set = verify_response(&one_var(), r).unwrap();
        assert_eq!(set.best().unwrap().assignment.bits(), &[1]);
        assert_eq!(set.num_reads(), 10);
    }
}
