use serde::{Deserialize, Serialize};

use super::LinalgError;

/// The six summary statistics used throughout the feature extractors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Euclidean norm.
    pub norm: f64,
    /// Smallest non-zero absolute value; `0` when every entry is zero.
    pub smallest_nonzero_abs: f64,
}

impl StatSummary {
    pub const LEN: usize = 6;
    pub const NAMES: [&'static str; 6] = ["min", "max", "mean", "std", "norm", "min_nonzero_abs"];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.min,
            self.max,
            self.mean,
            self.std,
            self.norm,
            self.smallest_nonzero_abs,
        ]
    }
}

/// Single-pass (Welford) summary of `v`.
pub fn vector_stats(v: &[f64]) -> Result<StatSummary, LinalgError> {
    if v.is_empty() {
        return Err(LinalgError::EmptyVector);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut sq = 0.0;
    let mut nz = f64::INFINITY;
    for (i, &x) in v.iter().enumerate() {
        min = min.min(x);
        max = max.max(x);
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
        sq += x * x;
        if x != 0.0 {
            nz = nz.min(x.abs());
        }
    }
    Ok(StatSummary {
        min,
        max,
        // Rounding can push the running mean a hair outside [min, max].
        mean: mean.clamp(min, max),
        std: (m2 / v.len() as f64).max(0.0).sqrt(),
        norm: sq.sqrt(),
        smallest_nonzero_abs: if nz.is_finite() { nz } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_vector() {
        let s = vector_stats(&[1.0, -2.0, 0.0]).unwrap();
        assert_eq!(s.min, -2.0);
        assert_eq!(s.max, 1.0);
        assert!((s.mean + 1.0 / 3.0).abs() < 1e-15);
        assert!((s.norm - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.smallest_nonzero_abs, 1.0);
    }

    #[test]
    fn constant_vector() {
        let s = vector_stats(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.smallest_nonzero_abs, 5.0);
    }

    #[test]
    fn all_zero_and_empty() {
        assert_eq!(vector_stats(&[0.0, 0.0]).unwrap().smallest_nonzero_abs, 0.0);
        assert!(matches!(vector_stats(&[]), Err(LinalgError::EmptyVector)));
    }

    #[test]
    fn matches_two_pass_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..100).map(|_| rng.random_range(-50.0..50.0)).collect();
        let s = vector_stats(&v).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.std - var.sqrt()).abs() < 1e-12);
        assert!((s.norm - v.iter().map(|x| x * x).sum::<f64>().sqrt()).abs() < 1e-9);
        let nz = v.iter().filter(|x| **x != 0.0).fold(f64::INFINITY, |m, x| m.min(x.abs()));
        assert_eq!(s.smallest_nonzero_abs, nz);
    }
}
