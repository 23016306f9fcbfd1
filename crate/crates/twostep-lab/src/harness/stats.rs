//! Interval estimates for success rates.

use serde::{Deserialize, Serialize};

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `trials`, or `None` with no trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Option<Interval> {
    if trials == 0 {
        return None;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the edges; rounding would leave a residue
    Some(Interval {
        lo: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
        hi: if successes == trials { 1.0 } else { (centre + half).min(1.0) },
    })
}

/// Standard deviation of a frequency over `trials` draws with success probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // reference values computed independently from the closed form
        let i = wilson_interval(8, 10, Z95).unwrap();
        assert!((i.lo - 0.490_162).abs() < 1e-5, "{i:?}");
        assert!((i.hi - 0.943_318).abs() < 1e-5, "{i:?}");
        let all = wilson_interval(20, 20, Z95).unwrap();
        assert_eq!(all.hi, 1.0);
        assert!(wilson_interval(0, 0, Z95).is_none());
    }
}
