use std::time::{Duration, Instant};

use qreg::external::{external_sample, ExternalError, ExternalSampler};
use qreg_core::{
    brute_force, build_qubo, synthetic_gram, uniform_precision, QuboProblem, Sampler, SyntheticSpec,
};

const REF: &str = env!("CARGO_BIN_EXE_qreg-ref-sampler");

fn qubo(seed: u64) -> QuboProblem {
    let spec = SyntheticSpec {
        n_rows: 100,
        n_features: 3,
        noise_sigma: 0.1,
        seed,
    };
    let (_, stats) = synthetic_gram(&spec).unwrap();
    build_qubo(&stats, &uniform_precision(4, 3, 0.0, 1.0).unwrap()).unwrap()
}

#[test]
fn reference_child_matches_brute_force() {
    let q = qubo(1);
    let set = external_sample(&q, REF, 25, Duration::from_secs(30)).unwrap();
    let exact = brute_force(&q).unwrap();
    assert_eq!(
        set.best().unwrap().assignment,
        exact.best().unwrap().assignment
    );
    assert_eq!(set.best().unwrap().energy, exact.best().unwrap().energy);
    assert_eq!(set.num_reads(), 25);
    assert!(set.wall_time() > Duration::ZERO);
}

#[test]
fn sampler_trait_wraps_errors() {
    let mut s = ExternalSampler {
        command: "exit 3".into(),
        num_reads: 1,
        timeout: Duration::from_secs(10),
    };
    let e = s.sample(&qubo(2)).unwrap_err();
    let inner = std::error::Error::source(&e).expect("cause is kept");
    assert!(inner.to_string().contains("exited"), "{inner}");
}

#[test]
fn lying_child_is_caught() {
    let q = qubo(3);
    let bits = vec!["1"; q.dim()].join(",");
    let cmd =
        format!(r#"cat > /dev/null; echo '{{"samples": [[{bits}]], "energies": [12345.0]}}'"#);
    let e = external_sample(&q, &cmd, 1, Duration::from_secs(10)).unwrap_err();
    assert!(
        matches!(e, ExternalError::EnergyMismatch { index: 0, .. }),
        "{e}"
    );
}

#[test]
fn garbage_is_malformed() {
    let e = external_sample(
        &qubo(4),
        "cat > /dev/null; echo not json",
        1,
        Duration::from_secs(10),
    )
    .unwrap_err();
    assert!(matches!(e, ExternalError::Malformed(_)), "{e}");
    let e = external_sample(&qubo(4), "cat > /dev/null", 1, Duration::from_secs(10)).unwrap_err();
    assert!(matches!(e, ExternalError::Malformed(_)), "{e}");
}

#[test]
fn failing_child_reports_stderr() {
    let e = external_sample(
        &qubo(5),
        "echo nope >&2; exit 4",
        1,
        Duration::from_secs(10),
    )
    .unwrap_err();
    match e {
        ExternalError::Exit { stderr, .. } => assert_eq!(stderr, "nope"),
        other => panic!("{other}"),
    }
}

#[test]
fn hanging_child_times_out() {
    let start = Instant::now();
    let e = external_sample(&qubo(6), "exec sleep 30", 1, Duration::from_millis(300)).unwrap_err();
    assert!(matches!(e, ExternalError::Timeout(_)), "{e}");
    assert!(start.elapsed() < Duration::from_secs(10));
}
