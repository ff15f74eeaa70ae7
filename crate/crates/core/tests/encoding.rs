//! QUBO encoding against row-wise and exhaustive oracles.

use nalgebra::DMatrix;
use proptest::prelude::*;
use qreg_core::rng::{self, Normal, RngCore};
use qreg_core::*;

/// Small random regression dataset held row-wise.
fn random_rows(n: usize, d: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut r = rng::stream(seed);
    let mut normal = Normal::new();
    (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..d).map(|_| normal.sample(&mut r)).collect();
            x[0] = 1.0;
            let y = normal.sample(&mut r) * 2.0 + 0.5;
            (x, y)
        })
        .collect()
}

fn rowwise_rss(rows: &[(Vec<f64>, f64)], w: &[f64]) -> f64 {
    rows.iter()
        .map(|(x, y)| {
            let pred: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            (y - pred).powi(2)
        })
        .sum()
}

fn random_spec(d: usize, k: usize, seed: u64) -> PrecisionSpec {
    let mut r = rng::stream(seed);
    let vectors: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..k).map(|_| rng::uniform01(&mut r) * 2.0 - 0.5).collect())
        .collect();
    PrecisionSpec::from_vectors(&vectors).unwrap()
}

fn bits_of(mask: u64, m: usize) -> BinaryAssignment {
    BinaryAssignment::from_bits((0..m).map(|b| (mask >> b & 1) as u8).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_plus_offset_is_rss(
        n in 1usize..50, d in 1usize..=6, k in 1usize..=4, seed in any::<u64>(), zseed in any::<u64>()
    ) {
        let rows = random_rows(n, d, seed);
        let stats = accumulate_gram(rows.iter().map(|(x, y)| (x, *y))).unwrap();
        let spec = random_spec(d, k, seed ^ 1);
        let q = build_qubo(&stats, &spec).unwrap();
        let mut r = rng::stream(zseed);
        for _ in 0..20 {
            let z = bits_of(r.next_u64(), d * k);
            let w = decode_weights(&z, &spec).unwrap();
            let rss = rowwise_rss(&rows, w.as_slice());
            let lhs = q.energy(&z) + q.offset();
            prop_assert!((lhs - rss).abs() <= 1e-8 * rss.abs().max(q.offset().abs()));
        }
    }

    #[test]
    fn qubo_matrix_is_symmetric(d in 1usize..=6, k in 1usize..=4, seed in any::<u64>()) {
        let rows = random_rows(20, d, seed);
        let stats = accumulate_gram(rows.iter().map(|(x, y)| (x, *y))).unwrap();
        let q = build_qubo(&stats, &random_spec(d, k, seed)).unwrap();
        prop_assert_eq!(q.matrix(), &q.matrix().transpose());
        prop_assert_eq!(q.dim(), d * k);
    }

    #[test]
    fn decode_is_linear_on_disjoint_blocks(d in 1usize..=6, k in 1usize..=4, seed in any::<u64>(), mask in any::<u64>()) {
        let spec = random_spec(d, k, seed);
        let m = d * k;
        let z = bits_of(mask, m);
        // split z by coefficient parity
        let even: Vec<u8> = (0..m).map(|i| if (i / k) % 2 == 0 { z.bits()[i] } else { 0 }).collect();
        let odd: Vec<u8> = (0..m).map(|i| if (i / k) % 2 == 1 { z.bits()[i] } else { 0 }).collect();
        let w = decode_weights(&z, &spec).unwrap();
        let we = decode_weights(&BinaryAssignment::from_bits(even).unwrap(), &spec).unwrap();
        let wo = decode_weights(&BinaryAssignment::from_bits(odd).unwrap(), &spec).unwrap();
        for i in 0..d {
            prop_assert_eq!(w.as_slice()[i], we.as_slice()[i] + wo.as_slice()[i]);
        }
    }

    #[test]
    fn decode_equals_precision_matrix_product(d in 1usize..=6, k in 1usize..=4, seed in any::<u64>(), mask in any::<u64>()) {
        let spec = random_spec(d, k, seed);
        let z = bits_of(mask, d * k);
        let p = expand_precision_matrix(&spec);
        let zv = nalgebra::DVector::from_iterator(d * k, z.bits().iter().map(|&b| b as f64));
        let w = decode_weights(&z, &spec).unwrap();
        let pw = p * zv;
        for i in 0..d {
            prop_assert!((w.as_slice()[i] - pw[i]).abs() <= 1e-12);
        }
    }
}

/// Σ_i 𝓘ⁱ ⊗ π_iᵀ evaluated literally with selector matrices and nalgebra's
/// Kronecker product.
fn summed_kronecker(spec: &PrecisionSpec) -> DMatrix<f64> {
    let (d, k) = (spec.dim(), spec.k());
    let mut total = DMatrix::zeros(d, d * k);
    for i in 0..d {
        let mut selector = DMatrix::zeros(d, d);
        selector[(i, i)] = 1.0;
        let pi = DMatrix::from_row_slice(1, k, spec.vector(i));
        total += selector.kronecker(&pi);
    }
    total
}

#[test]
fn uniform_spec_reduces_to_identity_kronecker() {
    for d in 1..=8 {
        for k in 1..=4 {
            let spec = uniform_precision(d, k, 0.0, 1.0).unwrap();
            let p = DMatrix::from_row_slice(1, k, spec.vector(0));
            let kron = DMatrix::<f64>::identity(d, d).kronecker(&p);
            assert_eq!(expand_precision_matrix(&spec), kron, "d={d} k={k}");
            assert_eq!(summed_kronecker(&spec), kron, "d={d} k={k}");
        }
    }
}

#[test]
fn per_coefficient_matches_summed_kronecker() {
    let spec = random_spec(5, 3, 17);
    assert_eq!(expand_precision_matrix(&spec), summed_kronecker(&spec));
    let spec = PrecisionSpec::from_vectors(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    assert_eq!(
        summed_kronecker(&spec),
        DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 3.0, 4.0])
    );
}

#[test]
fn uniform_two_coefficient_layout() {
    let spec = PrecisionSpec::shared(2, &[0.7, 0.3]).unwrap();
    assert_eq!(
        expand_precision_matrix(&spec),
        DMatrix::from_row_slice(2, 4, &[0.7, 0.3, 0.0, 0.0, 0.0, 0.0, 0.7, 0.3])
    );
}

/// Enumerates subset sums without going through `representable_grid`.
fn subset_sums(p: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0];
    for &v in p {
        let with: Vec<f64> = sums.iter().map(|s| s + v).collect();
        sums.extend(with);
    }
    sums
}

#[test]
fn centered_k3_grid_by_enumeration() {
    let spec = centered_precision(&WeightVector::new(vec![0.5]), 0.1, 3).unwrap();
    let sums = subset_sums(spec.vector(0));
    assert_eq!(sums.len(), 8);
    let mut distinct = sums.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    // base 0.35 with ladder (0.1, 0.2): {0, .1, .2, .3, .35, .45, .55, .65}
    assert_eq!(distinct.len(), 8);
    assert_eq!(representable_grid(&spec, 0).unwrap().len(), distinct.len());
    for (a, b) in representable_grid(&spec, 0).unwrap().iter().zip(&distinct) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn centered_grid_is_uniform_around_center() {
    for k in 2..=5 {
        let c = 0.37;
        let rate = 0.05;
        let spec = centered_precision(&WeightVector::new(vec![c]), rate, k).unwrap();
        let pi = spec.vector(0);
        // base plus every ladder subset
        let ladder = subset_sums(&pi[1..]);
        let mut pts: Vec<f64> = ladder.iter().map(|s| pi[0] + s).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts.len(), 1 << (k - 1));
        for w in pts.windows(2) {
            assert!((w[1] - w[0] - rate).abs() < 1e-12);
        }
        let mid = (pts[0] + pts[pts.len() - 1]) / 2.0;
        assert!((mid - c).abs() < 1e-12);
        assert!(representable_grid(&spec, 0).unwrap().contains(&0.0));
    }
}

#[test]
fn halving_rate_halves_spacing_and_span() {
    let center = WeightVector::new(vec![0.0]);
    let a = centered_precision(&center, 0.2, 4).unwrap();
    let b = centered_precision(&center, 0.1, 4).unwrap();
    let ga = representable_grid(&a, 0).unwrap();
    let gb = representable_grid(&b, 0).unwrap();
    assert_eq!(ga.len(), gb.len());
    for (x, y) in ga.iter().zip(&gb) {
        assert!((x / 2.0 - y).abs() < 1e-15);
    }
}

/// Grid-constrained least squares by exhaustive search over the Cartesian
/// product of each coefficient's subset sums, scored by row-wise RSS.
fn grid_oracle(rows: &[(Vec<f64>, f64)], spec: &PrecisionSpec) -> (Vec<f64>, f64) {
    let grids: Vec<Vec<f64>> = (0..spec.dim())
        .map(|i| subset_sums(spec.vector(i)))
        .collect();
    let mut idx = vec![0usize; grids.len()];
    let mut best = (Vec::new(), f64::INFINITY);
    loop {
        let w: Vec<f64> = idx.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
        let rss = rowwise_rss(rows, &w);
        if rss < best.1 {
            best = (w, rss);
        }
        let mut c = 0;
        loop {
            if c == idx.len() {
                return best;
            }
            idx[c] += 1;
            if idx[c] < grids[c].len() {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

#[test]
fn qubo_minimum_is_grid_constrained_ols() {
    let shapes = [
        (1, 4),
        (2, 2),
        (2, 4),
        (3, 3),
        (4, 2),
        (4, 4),
        (5, 3),
        (8, 2),
    ];
    for (case, seed) in (0..24u64).enumerate() {
        let (d, k) = shapes[case % shapes.len()];
        let rows = random_rows(30, d, 1000 + seed);
        let stats = accumulate_gram(rows.iter().map(|(x, y)| (x, *y))).unwrap();
        let spec = random_spec(d, k, 2000 + seed);
        let q = build_qubo(&stats, &spec).unwrap();
        let best = brute_force(&q).unwrap();
        let w = decode_weights(&best.best().unwrap().assignment, &spec).unwrap();
        let (w_oracle, rss_oracle) = grid_oracle(&rows, &spec);
        let rss = rowwise_rss(&rows, w.as_slice());
        assert!(
            (rss - rss_oracle).abs() <= 1e-9 * rss_oracle.max(1.0),
            "seed {seed}"
        );
        for (a, b) in w.as_slice().iter().zip(&w_oracle) {
            assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
        }
    }
}
