//! Finite-horizon diagnostic for weighted series and their normalised partial sums.

use serde::{Deserialize, Serialize};

use crate::algebra::{projection_meet, Interval, Operator};
use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 48;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KroneckerReport {
    pub checkpoints: Vec<usize>,
    /// `‖(P_n − P_N) e‖` with `P_n = Σ_{k≤n} x_k/α_k`.
    pub cauchy: Vec<f64>,
    /// `‖A_n e‖` with `A_n = α_n^{−1} Σ_{k≤n} x_k`.
    pub averages: Vec<f64>,
    /// `τ(1 − e)`.
    pub deficit: f64,
    /// Largest Cauchy defect over the second half of the horizon.
    pub cauchy_tail: f64,
    /// Mean of `‖A_n e‖` over checkpoints in `[N/8, N/4]` and `[N/2, N]`.
    pub early_mean: f64,
    pub late_mean: f64,
    pub decays: bool,
}

/// Evaluates both series at about 64 checkpoints and fixes one meet witness `e`
/// for the tail `n ≥ N/2` of `|P_n − P_N|` at trace budget `budget`.
pub fn kronecker_diag(xs: &[Operator], alphas: &[f64], budget: f64) -> Result<KroneckerReport> {
    let n = xs.len();
    if n == 0 || alphas.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} terms, {} weights", alphas.len())));
    }
    if alphas.iter().any(|a| !(*a > 0.0)) || alphas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("weights must be positive and nondecreasing".into()));
    }
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::InvalidArgument(format!("budget {budget} outside (0,1)")));
    }
    let step = (n / 64).max(1);
    let mut cps: Vec<usize> = (1..=n).filter(|k| k % step == 0).collect();
    if cps.last() != Some(&n) {
        cps.push(n);
    }
    let alg = xs[0].algebra().clone();
    let mut p = Operator::zeros(&alg);
    let mut s = Operator::zeros(&alg);
    let mut ps = Vec::with_capacity(cps.len());
    let mut avgs = Vec::with_capacity(cps.len());
    let mut next = 0;
    for (i, (x, &a)) in xs.iter().zip(alphas).enumerate() {
        x.check_same(&xs[0])?;
        p = &p + &x.scale(1.0 / a);
        s = &s + x;
        if cps[next] == i + 1 {
            ps.push(p.clone());
            avgs.push(s.scale(1.0 / a));
            next += 1;
        }
    }
    let limit = ps.last().expect("non-empty").clone();
    let diffs: Vec<Operator> = ps.iter().map(|q| q - &limit).collect();
    let tail: Vec<usize> = (0..cps.len()).filter(|&j| 2 * cps[j] >= n).collect();
    let specs: Vec<_> = tail.iter().map(|&j| diffs[j].modulus_spectrum()).collect();
    let one = Operator::identity(&alg);
    let meet = |theta: f64| -> Result<Operator> {
        let qs: Vec<Operator> = specs.iter().map(|sp| sp.indicator(&Interval::closed(0.0, theta))).collect();
        projection_meet(&qs)
    };
    let deficit_of = |e: &Operator| -> Result<f64> { Ok((&one - e).trace_re()?.max(0.0)) };
    let mut hi = specs.iter().map(|sp| sp.max()).fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut e = meet(hi)?;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let cand = meet(mid)?;
        if deficit_of(&cand)? <= budget {
            hi = mid;
            e = cand;
        } else {
            lo = mid;
        }
    }
    let widened = meet(hi * (1.0 + 1e-10))?;
    if deficit_of(&widened)? <= budget {
        e = widened;
    }
    let cauchy: Vec<f64> = diffs.iter().map(|d| (d * &e).op_norm()).collect();
    let averages: Vec<f64> = avgs.iter().map(|a| (a * &e).op_norm()).collect();
    let cauchy_tail = tail.iter().map(|&j| cauchy[j]).fold(0.0, f64::max);
    let mean_in = |lo: usize, hi: usize| {
        let v: Vec<f64> = (0..cps.len())
            .filter(|&j| cps[j] >= lo && cps[j] <= hi)
            .map(|j| averages[j])
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let early_mean = mean_in(n / 8, n / 4);
    let late_mean = mean_in(n / 2, n);
    Ok(KroneckerReport {
        checkpoints: cps,
        cauchy,
        averages,
        deficit: deficit_of(&e)?,
        cauchy_tail,
        early_mean,
        late_mean,
        decays: late_mean <= early_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TracialAlgebra;
    use crate::martingale::{iterated_log_unchecked, RademacherEnsemble};

    #[test]
    fn alternating_scalars() {
        let c = TracialAlgebra::scalars();
        let n = 4096;
        let xs: Vec<Operator> = (1..=n)
            .map(|k| Operator::from_real_diagonal(&c, &[if k % 2 == 0 { 1.0 } else { -1.0 }]).unwrap())
            .collect();
        let alphas: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let r = kronecker_diag(&xs, &alphas, 0.1).unwrap();
        assert_eq!(r.deficit, 0.0);
        assert!(r.cauchy_tail < 1.0 / 2048.0 + 1e-12);
        // Checkpoints are even, where the partial sum of (−1)^k vanishes.
        assert!(r.averages.iter().all(|&a| a == 0.0));
        assert!(r.decays);
    }

    #[test]
    fn zero_terms() {
        let d = TracialAlgebra::uniform_diagonal(3);
        let xs = vec![Operator::zeros(&d); 100];
        let alphas: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = kronecker_diag(&xs, &alphas, 0.1).unwrap();
        assert!(r.cauchy.iter().chain(&r.averages).all(|&v| v == 0.0));
        assert!(kronecker_diag(&xs, &alphas[..5], 0.1).is_err());
    }

    #[test]
    fn rademacher_decay() {
        for seed in 1..=3 {
            let r = rad(128, seed);
            assert!(r.deficit <= 0.05);
            assert!(r.decays, "seed {seed}: {} vs {}", r.late_mean, r.early_mean);
        }
    }

    fn rad(atoms: usize, seed: u64) -> KroneckerReport {
        let n = 10_000;
        let ens = RademacherEnsemble::new(atoms, n, seed).unwrap();
        let paths: Vec<Vec<i32>> = (0..atoms).map(|a| ens.signs(a).collect()).collect();
        let alg = TracialAlgebra::uniform_diagonal(atoms);
        let xs: Vec<Operator> = (0..n)
            .map(|k| {
                let v: Vec<f64> = paths.iter().map(|p| f64::from(p[k])).collect();
                Operator::from_real_diagonal(&alg, &v).unwrap()
            })
            .collect();
        let alphas: Vec<f64> = (1..=n)
            .map(|k| {
                let kf = k as f64;
                (kf * iterated_log_unchecked(kf)).sqrt()
            })
            .collect();
        kronecker_diag(&xs, &alphas, 0.05).unwrap()
    }
}
