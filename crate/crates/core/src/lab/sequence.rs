//! Regularised majorant `α′` of a null sequence against a growth sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact sign of `a·b − c·d` for finite non-negative inputs.
fn cmp_products(a: f64, b: f64, c: f64, d: f64) -> std::cmp::Ordering {
    let p = a * b;
    let pe = a.mul_add(b, -p);
    let q = c * d;
    let qe = c.mul_add(d, -q);
    match p.total_cmp(&q) {
        std::cmp::Ordering::Equal => pe.total_cmp(&qe),
        o => o,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrime {
    pub values: Vec<f64>,
    /// `ᾱ_n = max_{j ≥ n} α_j` over the prefix.
    pub tail_sup: Vec<f64>,
    /// `ᾱ_N ≤ ᾱ_1 / 2`; false flags a prefix with no visible decay.
    pub decays: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaPrimeCheck {
    pub dominates: bool,
    pub nonincreasing: bool,
    pub product_nondecreasing: bool,
}

impl AlphaPrimeCheck {
    pub fn all(&self) -> bool {
        self.dominates && self.nonincreasing && self.product_nondecreasing
    }
}

/// `α′_1 = ᾱ_1`, `α′_{n+1} = max(ᾱ_{n+1}, α′_n β_n / β_{n+1})`.
///
/// The quotient is rounded upward as needed so that `α′_{n+1} β_{n+1} ≥ α′_n β_n`
/// holds for the exact products of the stored floats.
pub fn alpha_prime(alpha: &[f64], beta: &[f64]) -> Result<AlphaPrime> {
    if alpha.is_empty() || alpha.len() != beta.len() {
        return Err(Error::ShapeMismatch(format!(
            "alpha has {} terms, beta has {}",
            alpha.len(),
            beta.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidArgument(format!("alpha term {a} is not positive")));
    }
    if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::InvalidArgument(format!("beta term {b} is not positive")));
    }
    if let Some(i) = beta.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!("beta decreases at index {}", i + 1)));
    }
    let n = alpha.len();
    let mut tail_sup = alpha.to_vec();
    for i in (0..n - 1).rev() {
        tail_sup[i] = tail_sup[i].max(tail_sup[i + 1]);
    }
    let mut values = Vec::with_capacity(n);
    values.push(tail_sup[0]);
    for i in 1..n {
        let prev = values[i - 1];
        let mut c = prev / (beta[i] / beta[i - 1]);
        while cmp_products(c, beta[i], prev, beta[i - 1]).is_lt() {
            c = c.next_up();
        }
        values.push(tail_sup[i].max(c.min(prev)));
    }
    let decays = tail_sup[n - 1] <= 0.5 * tail_sup[0];
    Ok(AlphaPrime {
        values,
        tail_sup,
        decays,
    })
}

/// The three conclusions, each compared exactly.
pub fn check_alpha_prime(alpha: &[f64], beta: &[f64], ap: &[f64]) -> AlphaPrimeCheck {
    AlphaPrimeCheck {
        dominates: ap.iter().zip(alpha).all(|(p, a)| p >= a),
        nonincreasing: ap.windows(2).all(|w| w[1] <= w[0]),
        product_nondecreasing: (1..ap.len()).all(|i| cmp_products(ap[i], beta[i], ap[i - 1], beta[i - 1]).is_ge()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_is_fixed() {
        let n = 10_000;
        let alpha: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
        let beta: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let ap = alpha_prime(&alpha, &beta).unwrap();
        assert!(check_alpha_prime(&alpha, &beta, &ap.values).all());
        for (i, (p, a)) in ap.values.iter().zip(&alpha).enumerate() {
            assert!((p - a).abs() <= 1e-11 * a, "n = {}", i + 1);
            assert!((p * beta[i] - 1.0).abs() < 1e-11);
        }
        assert!(ap.decays);
    }

    #[test]
    fn floor_example() {
        let mut alpha = vec![0.01; 12];
        alpha[0] = 1.0;
        let beta: Vec<f64> = (1..=12).map(|i| 2f64.powi(i)).collect();
        let ap = alpha_prime(&alpha, &beta).unwrap();
        let want = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.01, 0.01, 0.01, 0.01, 0.01];
        assert_eq!(ap.values, want);
        assert!(check_alpha_prime(&alpha, &beta, &ap.values).all());
    }

    #[test]
    fn constant_alpha_is_flagged() {
        let alpha = vec![0.3; 50];
        let beta: Vec<f64> = (1..=50).map(f64::from).collect();
        let ap = alpha_prime(&alpha, &beta).unwrap();
        assert!(!ap.decays);
        assert_eq!(ap.values, alpha);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(alpha_prime(&[1.0, 0.5], &[2.0, 1.0]).is_err());
        assert!(alpha_prime(&[1.0], &[1.0, 2.0]).is_err());
        assert!(alpha_prime(&[0.0], &[1.0]).is_err());
        assert!(alpha_prime(&[], &[]).is_err());
    }

    #[test]
    fn exact_product_compare() {
        let third = 1.0 / 3.0;
        assert!(cmp_products(third, 3.0, 1.0, 1.0).is_lt());
        assert!(cmp_products(0.1, 10.0, 1.0, 1.0).is_gt());
        assert!(cmp_products(2.0, 3.0, 3.0, 2.0).is_eq());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..400).prop_flat_map(|n| {
            (
                prop::collection::vec(1e-6f64..1.0, n),
                prop::collection::vec(0.0f64..0.5, n),
            )
                .prop_map(|(noise, steps)| {
                    let alpha: Vec<f64> = noise
                        .iter()
                        .enumerate()
                        .map(|(i, z)| z / (1.0 + i as f64).sqrt())
                        .collect();
                    let mut b = 1.0;
                    let beta = steps
                        .iter()
                        .map(|s| {
                            b *= 1.0 + s;
                            b
                        })
                        .collect();
                    (alpha, beta)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn conclusions_hold_exactly((alpha, beta) in instance()) {
            let ap = alpha_prime(&alpha, &beta).unwrap();
            prop_assert!(check_alpha_prime(&alpha, &beta, &ap.values).all());
        }
    }
}
