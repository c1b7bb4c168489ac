//! Parameter pack and geometric block boundaries of the upper-bound argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martingale::iterated_log_unchecked;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPack {
    pub delta_prime: f64,
    pub delta: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub eta: f64,
}

impl EpsilonPack {
    /// Validates `1 + δ′ > η(1+δ)/(1−ε′)` and `(1+δ)²/(1+ε) > 1` plus the ranges.
    pub fn new(delta_prime: f64, delta: f64, eps: f64, eps_prime: f64, eta: f64) -> Result<Self> {
        let p = Self {
            delta_prime,
            delta,
            eps,
            eps_prime,
            eta,
        };
        if let Some(why) = p.violation() {
            return Err(Error::InvalidArgument(why));
        }
        Ok(p)
    }

    fn violation(&self) -> Option<String> {
        let Self {
            delta_prime,
            delta,
            eps,
            eps_prime,
            eta,
        } = *self;
        if !(delta_prime > 0.0 && delta > 0.0 && eps_prime > 0.0 && eps_prime < 1.0) {
            return Some(format!("need δ′, δ > 0 and ε′ ∈ (0,1), got {self:?}"));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Some(format!("ε = {eps} outside (0,1)"));
        }
        if !(eta > 1.0 && eta < 2.0) {
            return Some(format!("η = {eta} outside (1,2)"));
        }
        if !(1.0 + delta_prime > eta * (1.0 + delta) / (1.0 - eps_prime)) {
            return Some("1 + δ′ > η(1+δ)/(1−ε′) fails".into());
        }
        if !(self.exponent() > 1.0) {
            return Some("(1+δ)²/(1+ε) > 1 fails".into());
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.violation().is_none()
    }

    /// `(1+δ)²/(1+ε)`.
    pub fn exponent(&self) -> f64 {
        (1.0 + self.delta).powi(2) / (1.0 + self.eps)
    }
}

/// Deterministic feasible pack for a target excess `δ′ > 0`.
pub fn epsilon_solver(delta_prime: f64) -> Result<EpsilonPack> {
    if !(delta_prime > 0.0 && delta_prime.is_finite()) {
        return Err(Error::InvalidArgument(format!("δ′ = {delta_prime} must be positive")));
    }
    let delta = delta_prime / 3.0;
    let mut eps = (((1.0 + delta) * (1.0 + delta) - 1.0) / 2.0).min(1.0);
    while eps >= 1.0 {
        eps /= 2.0;
    }
    let eps_prime = (delta_prime / 10.0).min(delta_prime / (3.0 * (1.0 + delta_prime)));
    let eta_star = (1.0 + delta_prime) * (1.0 - eps_prime) / (1.0 + delta);
    let eta = (1.0 + delta_prime / 10.0).min(eta_star * (1.0 - 1e-9)).min(2.0 - 1e-6);
    EpsilonPack::new(delta_prime, delta, eps, eps_prime, eta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub eta: f64,
    /// `η²` used for the thresholds `η^{2n}`.
    pub eta2: f64,
    /// `k_0 = 0, k_1, …`.
    pub k: Vec<usize>,
    /// `s²_{k_n}`.
    pub s2: Vec<f64>,
    /// `u_{k_n}`.
    pub u: Vec<f64>,
    /// `s²_{k_n+1}u²_{k_n+1} / (s²_{k_{n+1}}u²_{k_{n+1}})` for `n = 1..`.
    pub growth: Vec<f64>,
    /// First block index from which the growth ratio stays above `(1−ε′)²η^{−2}`.
    pub n1: Option<usize>,
}

impl BlockScheme {
    pub fn threshold(&self, n: usize) -> f64 {
        self.eta2.powi(n as i32)
    }

    pub fn num_blocks(&self) -> usize {
        self.k.len()
    }

    /// Both defining inequalities for every `n ≥ 1` against `s2`.
    pub fn boundaries_hold(&self, s2: &[f64]) -> bool {
        self.k.windows(2).all(|w| w[0] <= w[1])
            && (1..self.k.len()).all(|n| {
                let t = self.threshold(n);
                let k = self.k[n];
                s2[k + 1] >= t && s2[k] < t
            })
    }
}

/// `blocks` with the thresholds given through `η²` directly.
pub fn blocks_eta2(s2: &[f64], eta2: f64, eps_prime: Option<f64>) -> Result<BlockScheme> {
    if !(eta2 > 1.0 && eta2 < 4.0) {
        return Err(Error::InvalidArgument(format!("η² = {eta2} outside (1,4)")));
    }
    if s2.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("s² is not nondecreasing".into()));
    }
    let mut k = vec![0usize];
    let mut j = 0usize;
    let mut n = 1i32;
    loop {
        let t = eta2.powi(n);
        while j + 1 < s2.len() && s2[j + 1] < t {
            j += 1;
        }
        if j + 1 >= s2.len() {
            break;
        }
        k.push(j);
        n += 1;
    }
    if k.len() < 2 {
        return Err(Error::Horizon(format!(
            "s² never reaches η² = {eta2} within {} steps",
            s2.len().saturating_sub(1)
        )));
    }
    let l2 = |i: usize| s2[i] * iterated_log_unchecked(s2[i]);
    let growth: Vec<f64> = (1..k.len() - 1)
        .map(|n| {
            let den = l2(k[n + 1]);
            if den > 0.0 {
                l2(k[n] + 1) / den
            } else {
                0.0
            }
        })
        .collect();
    let n1 = eps_prime.and_then(|ep| {
        let floor = (1.0 - ep).powi(2) / eta2;
        match growth.iter().rposition(|&g| g < floor) {
            None => Some(1),
            Some(i) if i + 1 < growth.len() => Some(i + 2),
            Some(_) => None,
        }
    });
    Ok(BlockScheme {
        eta: eta2.sqrt(),
        eta2,
        s2: k.iter().map(|&i| s2[i]).collect(),
        u: k.iter().map(|&i| iterated_log_unchecked(s2[i]).sqrt()).collect(),
        k,
        growth,
        n1,
    })
}

/// `k_n = inf{j : s²_{j+1} ≥ η^{2n}}` over the indices `0..=N` of `s2`.
pub fn blocks(s2: &[f64], eta: f64, eps_prime: Option<f64>) -> Result<BlockScheme> {
    if !(eta > 1.0 && eta < 2.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} outside (1,2)")));
    }
    let mut b = blocks_eta2(s2, eta * eta, eps_prime)?;
    b.eta = eta;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_examples() {
        let p = epsilon_solver(0.3).unwrap();
        assert!(p.is_valid());
        assert!((p.delta - 0.1).abs() < 1e-15);
        assert!((p.eps - 0.105).abs() < 1e-12);
        assert!((p.eps_prime - 0.03).abs() < 1e-15);
        assert!((p.eta - 1.03).abs() < 1e-12);
        assert!(1.3 > p.eta * 1.1 / 0.97);

        let big = epsilon_solver(10.0).unwrap();
        assert!(big.is_valid() && big.eta < 2.0 && big.eps < 1.0);
        assert!(epsilon_solver(0.0).is_err());
        assert!(EpsilonPack::new(0.3, 0.1, 0.5, 0.03, 1.03).is_err());
    }

    #[test]
    fn identity_bracket_gives_dyadic_boundaries() {
        let s2: Vec<f64> = (0..=5000).map(f64::from).collect();
        let b = blocks_eta2(&s2, 2.0, None).unwrap();
        assert_eq!(b.k[0], 0);
        for (n, &k) in b.k.iter().enumerate() {
            assert_eq!(k, (1usize << n) - 1);
        }
        assert_eq!(b.k.len(), 13);
        assert!(b.boundaries_hold(&s2));
    }

    #[test]
    fn jump_collects_early_boundaries() {
        let mut s2 = vec![0.0, 0.5, 0.5, 0.5, 0.5];
        s2.extend([10.0, 10.0, 12.0, 20.0]);
        let b = blocks(&s2, 1.2, None).unwrap();
        // η^{2n} ≤ 10 for n ≤ 6: all those boundaries sit just before the jump.
        assert_eq!(&b.k[..7], &[0, 4, 4, 4, 4, 4, 4]);
        assert!(b.boundaries_hold(&s2));
        assert!(blocks(&[0.0, 0.5, 1.0], 1.2, None).is_err());
        assert!(blocks(&[0.0, 2.0, 1.0], 1.2, None).is_err());
    }

    #[test]
    fn growth_horizon() {
        let s2: Vec<f64> = (0..=200_000).map(f64::from).collect();
        let p = epsilon_solver(0.3).unwrap();
        let b = blocks(&s2, p.eta, Some(p.eps_prime)).unwrap();
        let n1 = b.n1.expect("horizon reached");
        let floor = (1.0 - p.eps_prime).powi(2) / b.eta2;
        assert!(b.growth[n1 - 1..].iter().all(|&g| g >= floor));
    }

    proptest! {
        #[test]
        fn pack_always_valid(dp in 1e-6f64..50.0) {
            let p = epsilon_solver(dp).unwrap();
            prop_assert!(p.is_valid());
            prop_assert!(p.exponent() > 1.0);
        }

        #[test]
        fn boundaries_satisfy_definition(incs in prop::collection::vec(0.0f64..3.0, 50..400), eta in 1.05f64..1.9) {
            let mut s2 = vec![0.0];
            for d in incs {
                s2.push(s2.last().unwrap() + d);
            }
            if let Ok(b) = blocks(&s2, eta, None) {
                prop_assert!(b.boundaries_hold(&s2));
            } else {
                prop_assert!(*s2.last().unwrap() < eta * eta);
            }
        }
    }
}
