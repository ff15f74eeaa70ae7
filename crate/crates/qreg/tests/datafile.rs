use std::fs::OpenOptions;

use qreg::datafile::{generate_to_file, load_meta, DataFileError, DatasetReader, HEADER_LEN};
use qreg_core::{synthetic_gram, SyntheticSpec};

fn spec(n_rows: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_rows,
        n_features: 4,
        noise_sigma: 0.1,
        seed: 17,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn file_gram_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.qrd");
    let model = generate_to_file(&path, &spec(10_000)).unwrap();
    let (mem_model, mem) = synthetic_gram(&spec(10_000)).unwrap();
    assert_eq!(model, mem_model);
    assert_eq!(load_meta(&path).unwrap().true_model, model);

    let big = DatasetReader::open(&path, 4096).unwrap().gram().unwrap();
    let one = DatasetReader::open(&path, 1).unwrap().gram().unwrap();
    for g in [&big, &one] {
        assert_eq!(g.n_rows, 10_000);
        assert!(g
            .gram
            .iter()
            .zip(mem.gram.iter())
            .all(|(a, b)| close(*a, *b)));
        assert!(g
            .moment
            .iter()
            .zip(mem.moment.iter())
            .all(|(a, b)| close(*a, *b)));
        assert!(close(g.y_sq, mem.y_sq));
        assert!(close(g.y_sum, mem.y_sum));
    }
}

#[test]
fn rows_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.qrd");
    generate_to_file(&path, &spec(300)).unwrap();
    let mut expected = Vec::new();
    qreg_core::generate_dataset(&spec(300), |x, y| expected.push((x.to_vec(), y))).unwrap();
    let mut got = Vec::new();
    DatasetReader::open(&path, 7)
        .unwrap()
        .for_each_record(|x, y| got.push((x.to_vec(), y)))
        .unwrap();
    assert_eq!(got, expected);
}

#[test]
fn truncated_and_padded_files_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.qrd");
    generate_to_file(&path, &spec(100)).unwrap();
    let len = std::fs::metadata(&path).unwrap().len();

    let f = OpenOptions::new().write(true).open(&path).unwrap();
    f.set_len(len - 3).unwrap();
    assert!(matches!(
        DatasetReader::open(&path, 16),
        Err(DataFileError::Truncated {
            expected: 100,
            found: 99,
            ..
        })
    ));
    f.set_len(HEADER_LEN - 1).unwrap();
    assert!(DatasetReader::open(&path, 16).is_err());

    generate_to_file(&path, &spec(100)).unwrap();
    let f = OpenOptions::new().write(true).open(&path).unwrap();
    f.set_len(len + 8).unwrap();
    assert!(matches!(
        DatasetReader::open(&path, 16),
        Err(DataFileError::TrailingData { extra_bytes: 8, .. })
    ));
}
