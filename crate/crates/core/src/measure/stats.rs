//! Repetition statistics: mean, coefficient of variation, nearest-rank
//! percentiles.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("mean is not positive ({0})")]
    NonPositiveMean(f64),
    #[error("percentile {0} outside (0, 100]")]
    BadPercent(f64),
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation divided by the mean.
pub fn stats_cv(runs: &[f64]) -> Result<f64, StatsError> {
    let m = mean(runs)?;
    if !(m > 0.0) {
        return Err(StatsError::NonPositiveMean(m));
    }
    if runs.iter().all(|&r| r == runs[0]) {
        return Ok(0.0);
    }
    let var = runs.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / runs.len() as f64;
    Ok(var.sqrt() / m)
}

/// The `ceil(p/100 * n)`-th smallest value (1-based).
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(StatsError::BadPercent(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // p/100*n computed as p*n/100 keeps P99 of 100 values at exactly 99.
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cv_examples() {
        assert_eq!(stats_cv(&[10.0, 10.0, 10.0]).unwrap(), 0.0);
        assert_eq!(stats_cv(&[1.0, 3.0]).unwrap(), 0.5);
        assert_eq!(stats_cv(&[7.0]).unwrap(), 0.0);
        assert_eq!(stats_cv(&[]), Err(StatsError::Empty));
        assert!(matches!(stats_cv(&[0.0, 0.0]), Err(StatsError::NonPositiveMean(_))));
    }

    #[test]
    fn cv_is_scale_invariant() {
        let runs = [3.0, 5.0, 11.0, 4.5];
        let base = stats_cv(&runs).unwrap();
        for c in [1e-3, 2.0, 1e9] {
            let scaled: Vec<f64> = runs.iter().map(|r| r * c).collect();
            assert!((stats_cv(&scaled).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn percentile_examples() {
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&hundred, 99.0).unwrap(), 99.0);
        assert_eq!(percentile_nearest_rank(&hundred, 100.0).unwrap(), 100.0);
        assert_eq!(percentile_nearest_rank(&[4.0, 1.0, 3.0, 2.0], 99.0).unwrap(), 4.0);
        assert_eq!(percentile_nearest_rank(&[5.0, 9.0], 100.0).unwrap(), 9.0);
        assert_eq!(percentile_nearest_rank(&[], 50.0), Err(StatsError::Empty));
        assert!(percentile_nearest_rank(&[1.0], 0.0).is_err());
    }

    // Brute-force versions written with integer arithmetic only.
    fn brute_cv(runs: &[u32]) -> f64 {
        let n = runs.len() as f64;
        let m = runs.iter().map(|&r| r as f64).sum::<f64>() / n;
        let mut ss = 0.0;
        for &r in runs {
            ss += (r as f64 - m).powi(2);
        }
        (ss / n).sqrt() / m
    }

    fn brute_percentile(values: &[u32], p: u32) -> u32 {
        // smallest v such that at least p% of the values are <= v
        let n = values.len() as u64;
        let mut candidates = values.to_vec();
        candidates.sort();
        for v in candidates {
            let at_most = values.iter().filter(|&&x| x <= v).count() as u64;
            if at_most * 100 >= p as u64 * n {
                return v;
            }
        }
        unreachable!()
    }

    #[test]
    fn agrees_with_brute_force_on_random_instances() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(1..40);
            let ints: Vec<u32> = (0..n).map(|_| rng.gen_range(1..10_000)).collect();
            let floats: Vec<f64> = ints.iter().map(|&v| v as f64).collect();
            let cv = stats_cv(&floats).unwrap();
            assert!((cv - brute_cv(&ints)).abs() < 1e-9, "{ints:?}");
            let p = rng.gen_range(1..=100);
            assert_eq!(
                percentile_nearest_rank(&floats, p as f64).unwrap(),
                brute_percentile(&ints, p) as f64,
                "p={p} {ints:?}"
            );
        }
    }
}
