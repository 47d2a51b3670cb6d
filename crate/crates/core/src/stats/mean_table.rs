use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running mean over a fixed set of `n` instances, kept as per-instance
/// contributions `value_i / n` so one instance can be replaced in O(1).
///
/// The running `mean` accumulates rounding error with every subtract-add
/// update; [`MeanTable::refresh`] resets it to the exact sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTable {
    contributions: Vec<f64>,
    mean: f64,
}

impl MeanTable {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("mean table needs at least one value"));
        }
        let n = values.len() as f64;
        let contributions: Vec<f64> = values.iter().map(|v| v / n).collect();
        let mean = contributions.iter().sum();
        Ok(Self {
            contributions,
            mean,
        })
    }

    /// Replaces instance `i`'s value: `mean <- mean - T[i] + value / n`.
    pub fn update(&mut self, i: usize, value: f64) -> Result<()> {
        let n = self.contributions.len();
        let slot = self
            .contributions
            .get_mut(i)
            .ok_or(Error::IndexOutOfRange { index: i, len: n })?;
        let next = value / n as f64;
        self.mean = self.mean - *slot + next;
        *slot = next;
        Ok(())
    }

    pub fn refresh(&mut self) {
        self.mean = self.contributions.iter().sum();
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.contributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contributions.is_empty()
    }

    pub fn contributions(&self) -> &[f64] {
        &self.contributions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_stores_scaled_contributions() {
        let t = MeanTable::new(&[0.2, 0.6]).unwrap();
        assert_eq!(t.contributions(), &[0.1, 0.3]);
        assert!((t.mean() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn singleton_and_zeros() {
        assert_eq!(MeanTable::new(&[0.37]).unwrap().mean(), 0.37);
        assert_eq!(MeanTable::new(&[0.0; 5]).unwrap().mean(), 0.0);
        assert!(MeanTable::new(&[]).is_err());
    }

    #[test]
    fn subtract_add_update() {
        let mut t = MeanTable::new(&[0.2, 0.6]).unwrap();
        t.update(0, 0.8).unwrap();
        assert!((t.mean() - 0.7).abs() < 1e-15);
        assert_eq!(t.contributions()[0], 0.4);
        assert!(t.update(2, 0.1).is_err());
    }

    #[test]
    fn updating_with_current_value_keeps_mean() {
        let mut t = MeanTable::new(&[0.25, 0.5, 0.75, 1.0]).unwrap();
        let before = t.mean();
        t.update(2, 0.75).unwrap();
        assert_eq!(t.mean(), before);
    }

    #[test]
    fn refresh_of_fresh_table_is_noop() {
        let mut t = MeanTable::new(&[0.1, 0.7, 0.3]).unwrap();
        let before = t.clone();
        t.refresh();
        assert_eq!(t, before);
    }

    #[test]
    fn drift_after_a_million_updates_is_bounded() {
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut values: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut t = MeanTable::new(&values).unwrap();
        for _ in 0..1_000_000 {
            let i = rng.gen_range(0..n);
            let v: f64 = rng.gen();
            values[i] = v;
            t.update(i, v).unwrap();
        }
        // exact-recompute oracle, independent of the contribution table
        let exact = values.iter().sum::<f64>() / n as f64;
        assert!((t.mean() - exact).abs() <= 1e-9, "drift {}", t.mean() - exact);
        let before = t.mean();
        t.refresh();
        assert!((before - t.mean()).abs() <= 1e-9);
        assert_eq!(t.mean(), t.contributions().iter().sum::<f64>());
    }
}
