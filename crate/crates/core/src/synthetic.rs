//! Seeded synthetic datasets for tests and desk-scale benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::Result;

/// The four XOR points with two classes.
pub fn xor() -> Dataset {
    Dataset::from_rows(
        &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        &[0, 1, 1, 0],
        2,
    )
    .expect("xor rows are valid")
}

/// Binary task where feature 0 is the class plus noise and the remaining
/// `n_noise` features are uniform noise.
///
/// Feature 0 is `0.5 + (class - 0.5) * separation + N(0, noise)`, clipped
/// to `[0, 1]`, so `separation` and `noise` set how informative it is.
pub fn informative_plus_noise(
    n: usize,
    n_noise: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let mut row = Vec::with_capacity(n_noise + 1);
        let centre = 0.5 + (class as f64 - 0.5) * separation;
        row.push((centre + noise * gaussian(&mut rng)).clamp(0.0, 1.0));
        row.extend((0..n_noise).map(|_| rng.gen::<f64>()));
        rows.push(row);
        labels.push(class);
    }
    Dataset::from_rows(&rows, &labels, 2)
}

/// Binary task with `n_informative` class-shifted features followed by
/// `n_noise` uniform ones.
pub fn shifted_features(
    n: usize,
    n_informative: usize,
    n_noise: usize,
    shift: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let sign = if class == 1 { 1.0 } else { -1.0 };
        let mut row: Vec<f64> = (0..n_informative)
            .map(|_| (0.5 + sign * shift + 0.15 * gaussian(&mut rng)).clamp(0.0, 1.0))
            .collect();
        row.extend((0..n_noise).map(|_| rng.gen::<f64>()));
        rows.push(row);
        labels.push(class);
    }
    Dataset::from_rows(&rows, &labels, 2)
}

/// Two-class stand-in for a spam corpus: 57 skewed non-negative features,
/// about 39% positives, with class signal spread thinly over a dozen
/// features and the rest pure noise.
pub fn spam_like(n: usize, seed: u64) -> Result<Dataset> {
    const FEATURES: usize = 57;
    const INFORMATIVE: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // fixed per-feature effect sizes, alternating sign
    let effects: Vec<f64> = (0..INFORMATIVE)
        .map(|k| {
            let size = 0.25 + 0.25 * rng.gen::<f64>();
            if k % 3 == 2 {
                -size
            } else {
                size
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let class = usize::from(rng.gen::<f64>() < 0.394);
        let sign = if class == 1 { 1.0 } else { -1.0 };
        let row: Vec<f64> = (0..FEATURES)
            .map(|k| {
                let shift = effects.get(k).map_or(0.0, |e| sign * e);
                // skewed, like word frequencies: squash a shifted gaussian
                let z = shift + gaussian(&mut rng);
                1.0 / (1.0 + (-1.2 * z + 1.0).exp())
            })
            .collect();
        rows.push(row);
        labels.push(class);
    }
    Dataset::from_rows(&rows, &labels, 2)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}
