//! Small order statistics helpers.

use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile (`q ∈ [0,1]`); `NaN` for empty input.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            min: quantile(xs, 0.0),
            median: quantile(xs, 0.5),
            p90: quantile(xs, 0.9),
            p99: quantile(xs, 0.99),
            max: quantile(xs, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.99), 9.9);
        assert!(quantile(&[], 0.5).is_nan());
        let q = Quantiles::of(&[4.0]);
        assert_eq!((q.min, q.max), (4.0, 4.0));
    }
}
