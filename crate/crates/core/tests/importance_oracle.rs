//! compute_importance against a straight-line evaluation of the correlation
//! definition that shares no code with the library.

use cann::{compute_importance, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force_corr(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..x.len() {
        sx += x[i];
        sy += y[i];
    }
    let (mx, my) = (sx / n, sy / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..x.len() {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return None;
    }
    Some((cov / n) / ((vx / n).sqrt() * (vy / n).sqrt()))
}

#[test]
fn two_class_toy_matches_hand_columns() {
    // feature 0 = [1,1,0,0], feature 1 = [1,0,1,0]; class 0 on rows 0 and 1
    let ds = Dataset::from_rows(
        &[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
        &[0, 0, 1, 1],
        2,
    )
    .unwrap();
    let rep = compute_importance(&ds).unwrap();
    assert!((rep.correlation(0, 0) - 1.0).abs() < 1e-12);
    assert!((rep.correlation(0, 1) + 1.0).abs() < 1e-12);
    assert!(rep.correlation(1, 0).abs() < 1e-12);
    assert!(rep.correlation(1, 1).abs() < 1e-12);
}

#[test]
fn random_datasets_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..10 {
        let n = rng.gen_range(5..40);
        let k = rng.gen_range(2..7);
        let c = rng.gen_range(2..4);
        let constant_col = case % k;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|j| if j == constant_col { 0.25 } else { rng.gen() })
                    .collect()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.gen_range(0..c) }).collect();
        let ds = Dataset::from_rows(&rows, &labels, c).unwrap();
        let rep = compute_importance(&ds).unwrap();
        for f in 0..k {
            let x: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            for o in 0..c {
                let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == o))).collect();
                let got = rep.get(f, o);
                match brute_force_corr(&x, &y) {
                    Some(r) => {
                        assert!(!got.undefined);
                        assert!((got.correlation - r).abs() <= 1e-12, "case {case}: {} vs {r}", got.correlation);
                    }
                    None => {
                        assert!(got.undefined);
                        assert_eq!(got.correlation, 0.0);
                    }
                }
            }
        }
        assert!(rep.get(constant_col, 0).undefined);
    }
}
