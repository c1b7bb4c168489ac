//! Exponential moment bounds for bounded self-adjoint martingales.

use serde::{Deserialize, Serialize};

use super::report::{worst, IneqReport, INEQ_TOL};
use super::scalar::scalar_f;
use crate::algebra::Operator;
use crate::error::{Error, Result};
use crate::martingale::{Martingale, TwoPointLaw};

/// `exp(F(λM)·D²/M²)`.
pub fn exp_bound1(m: f64, d2: f64, lam: f64) -> f64 {
    (scalar_f(lam * m) * d2 / (m * m)).exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpHypotheses {
    pub max_difference_norm: f64,
    /// Largest eigenvalue of `Σ E_{k−1}(d_k²)`.
    pub bracket_max: f64,
    pub holds: bool,
    pub reason: Option<String>,
}

/// Checks `x_0 = 0`, self-adjointness, `‖d_k‖ ≤ M` and `Σ E_{k−1}(d_k²) ≤ D²·1`.
pub fn check_exp_hypotheses(mart: &Martingale, m: f64, d2: f64) -> Result<ExpHypotheses> {
    if !(m > 0.0) || !(d2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("M = {m}, D2 = {d2}")));
    }
    let f = mart.filtration();
    let mut max_d = 0.0_f64;
    let mut sum = Operator::zeros(f.parent());
    for k in 1..=mart.len() {
        let d = mart.d(k);
        max_d = max_d.max(d.op_norm());
        sum = &sum + &f.expect(k - 1, &(&d * &d))?;
    }
    let bracket_max = if mart.is_empty() {
        0.0
    } else {
        sum.hermitian_part().spectrum()?.max()
    };
    let reason = if !mart.is_self_adjoint() {
        Some("martingale is not self-adjoint".to_string())
    } else if mart.x(0).op_norm() != 0.0 {
        Some("x_0 is not 0".to_string())
    } else if max_d > m * (1.0 + 1e-12) {
        Some(format!("max |d_k| = {max_d} > M = {m}"))
    } else if bracket_max > d2 * (1.0 + 1e-12) + 1e-15 {
        Some(format!("bracket {bracket_max} exceeds D2 = {d2}"))
    } else {
        None
    };
    Ok(ExpHypotheses {
        max_difference_norm: max_d,
        bracket_max,
        holds: reason.is_none(),
        reason,
    })
}

fn trace_exp_atoms(atoms: &[(f64, f64)], lam: f64) -> f64 {
    atoms.iter().map(|&(v, w)| w * (lam * v).exp()).sum()
}

/// `τ(e^{λ x_N}) ≤ exp(F(λM)·D²/M²)` for each `λ` on the grid.
pub fn exp_check1(mart: &Martingale, m: f64, d2: f64, lams: &[f64]) -> Result<Vec<IneqReport>> {
    let hyp = check_exp_hypotheses(mart, m, d2)?;
    let atoms = mart.x(mart.len()).hermitian_part().spectrum()?.atoms();
    Ok(lams
        .iter()
        .map(|&lam| {
            let r = IneqReport::new(
                "exp1",
                format!("N={};M={m};D2={d2};lambda={lam}", mart.len()),
                trace_exp_atoms(&atoms, lam),
                exp_bound1(m, d2, lam),
                INEQ_TOL,
            );
            if hyp.holds {
                r
            } else {
                r.hypothesis_violated()
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exp2Mode {
    /// `λ ∈ [0, 3ε/M]`.
    AsStated,
    /// `λ ∈ [0, 3ε/((1+ε)M)]`.
    Corrected,
}

pub fn exp2_lambda_max(m: f64, eps: f64, mode: Exp2Mode) -> f64 {
    match mode {
        Exp2Mode::AsStated => 3.0 * eps / m,
        Exp2Mode::Corrected => 3.0 * eps / ((1.0 + eps) * m),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps = {eps} outside (0,1]")))
    }
}

/// `exp((1+ε)λ²D²/2)` for `λ` in the selected range.
pub fn exp_bound2(m: f64, d2: f64, lam: f64, eps: f64, mode: Exp2Mode) -> Result<f64> {
    check_eps(eps)?;
    let hi = exp2_lambda_max(m, eps, mode);
    if !(lam >= 0.0 && lam <= hi * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("lambda = {lam} outside [0, {hi}]")));
    }
    Ok(((1.0 + eps) * lam * lam * d2 / 2.0).exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Exp2Report {
    pub mode: Exp2Mode,
    pub lambda_max: f64,
    pub reports: Vec<IneqReport>,
    /// `F(λM) ≤ (1+ε)(λM)²/2` on the same grid.
    pub scalar: Vec<IneqReport>,
    /// Worst skewed two-point instance near the range boundary (as-stated mode only).
    pub counterexample: Option<IneqReport>,
}

impl Exp2Report {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().chain(&self.scalar).all(IneqReport::passed)
            && self.counterexample.as_ref().is_none_or(IneqReport::passed)
    }
}

pub fn exp_check2(
    mart: &Martingale,
    m: f64,
    d2: f64,
    lams: &[f64],
    eps: f64,
    mode: Exp2Mode,
) -> Result<Exp2Report> {
    check_eps(eps)?;
    let hyp = check_exp_hypotheses(mart, m, d2)?;
    let atoms = mart.x(mart.len()).hermitian_part().spectrum()?.atoms();
    let mut reports = Vec::with_capacity(lams.len());
    let mut scalar = Vec::with_capacity(lams.len());
    for &lam in lams {
        let rhs = exp_bound2(m, d2, lam, eps, mode)?;
        let r = IneqReport::new(
            "exp2",
            format!("N={};M={m};D2={d2};eps={eps};lambda={lam}", mart.len()),
            trace_exp_atoms(&atoms, lam),
            rhs,
            INEQ_TOL,
        );
        reports.push(if hyp.holds { r } else { r.hypothesis_violated() });
        scalar.push(scalar_step(lam * m, eps));
    }
    let counterexample = match mode {
        Exp2Mode::AsStated => Some(two_point_counterexample_search(m, eps)),
        Exp2Mode::Corrected => None,
    };
    Ok(Exp2Report {
        mode,
        lambda_max: exp2_lambda_max(m, eps, mode),
        reports,
        scalar,
        counterexample,
    })
}

/// `F(s) ≤ (1+ε)s²/2`.
pub fn scalar_step(s: f64, eps: f64) -> IneqReport {
    IneqReport::new(
        "exp2_scalar",
        format!("s={s};eps={eps}"),
        scalar_f(s),
        (1.0 + eps) * s * s / 2.0,
        INEQ_TOL,
    )
}

/// Single skewed two-point step against the part (2) bound with `D² = τ(d²)`.
pub fn two_point_exp2(law: &TwoPointLaw, lam: f64, eps: f64) -> IneqReport {
    let d2 = law.variance();
    IneqReport::new(
        "exp2_two_point",
        format!("p={};M={};eps={eps};lambda={lam}", law.p, law.m),
        law.mgf(lam),
        ((1.0 + eps) * lam * lam * d2 / 2.0).exp(),
        INEQ_TOL,
    )
}

/// Scans two-point laws with `p ∈ [1e-3, 0.5]` and `λ` at 80–100 % of `3ε/M`.
pub fn two_point_counterexample_search(m: f64, eps: f64) -> IneqReport {
    let hi = 3.0 * eps / m;
    let mut out = Vec::new();
    let mut ps: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + i as f64 * (0.5f64.log10() + 3.0) / 60.0)).collect();
    ps.push(0.05);
    for p in ps {
        let law = TwoPointLaw { p, m };
        for frac in [0.8, 0.9, 0.95, 1.0] {
            out.push(two_point_exp2(&law, frac * hi, eps));
        }
    }
    worst(&out).cloned().expect("non-empty scan")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::{TensorLaw, TensorSteps};

    fn single(law: TensorLaw) -> Martingale {
        TensorSteps::generate(1, law, 0, None).unwrap().martingale().unwrap()
    }

    #[test]
    fn rademacher_step() {
        let m = single(TensorLaw::TwoPoint { p: 0.5, m: 1.0 });
        let r = exp_check1(&m, 1.0, 1.0, &[0.0, 1.0]).unwrap();
        assert_eq!((r[0].lhs, r[0].rhs), (1.0, 1.0));
        assert!((r[1].lhs - 1f64.cosh()).abs() < 1e-14);
        assert!((r[1].rhs - 2.0509063727).abs() < 1e-9);
        assert!(r.iter().all(IneqReport::passed));
    }

    #[test]
    fn skewed_step() {
        let m = single(TensorLaw::TwoPoint { p: 0.05, m: 1.0 });
        let d2 = 0.05 / 0.95;
        let r = exp_check1(&m, 1.0, d2, &[3.0]).unwrap();
        assert!((r[0].lhs - 1.81552).abs() < 1e-5);
        assert!((r[0].rhs - 2.33172).abs() < 1e-5);
        assert!(r[0].passed());
    }

    #[test]
    fn hypotheses_are_reported() {
        let m = single(TensorLaw::TwoPoint { p: 0.5, m: 1.0 });
        let r = exp_check1(&m, 0.5, 1.0, &[1.0]).unwrap();
        assert_eq!(r[0].verdict, super::super::report::Verdict::HypothesisViolated);
        let r = exp_check1(&m, 1.0, 0.5, &[1.0]).unwrap();
        assert_eq!(r[0].verdict, super::super::report::Verdict::HypothesisViolated);
    }

    #[test]
    fn as_stated_boundary_fails() {
        let m = single(TensorLaw::TwoPoint { p: 0.05, m: 1.0 });
        let d2 = 0.05 / 0.95;
        let rep = exp_check2(&m, 1.0, d2, &[0.0, 3.0], 1.0, Exp2Mode::AsStated).unwrap();
        assert_eq!((rep.reports[0].lhs, rep.reports[0].rhs), (1.0, 1.0));
        let b = &rep.reports[1];
        assert!((b.lhs - 1.81552).abs() < 1e-5 && (b.rhs - 1.60590).abs() < 1e-5);
        assert!(!b.passed());
        assert!(!rep.scalar[1].passed());
        assert!(scalar_f(3.0) > 9.0);
        assert!(!rep.counterexample.as_ref().unwrap().passed());
        assert!(!rep.all_pass());
    }

    #[test]
    fn corrected_range_passes() {
        let m = single(TensorLaw::TwoPoint { p: 0.05, m: 1.0 });
        let d2 = 0.05 / 0.95;
        let rep = exp_check2(&m, 1.0, d2, &[0.5, 1.0, 1.5], 1.0, Exp2Mode::Corrected).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert!((scalar_f(1.5) - 1.98169).abs() < 1e-5);
        assert!(exp_bound2(1.0, d2, 1.6, 1.0, Exp2Mode::Corrected).is_err());
        assert!(exp_bound2(1.0, d2, 1.0, 1.5, Exp2Mode::Corrected).is_err());
    }
}
