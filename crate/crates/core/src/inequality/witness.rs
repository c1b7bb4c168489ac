//! Constructive tail witnesses and the polynomial-to-exponential gate.

use serde::{Deserialize, Serialize};

use super::report::{IneqReport, INEQ_TOL};
use crate::algebra::{lp_norm, projection_meet, Interval, Operator};
use crate::error::{Error, Result};

/// `|u|^p ≤ p^p e^{−p} (e^u + e^{−u})`.
pub fn poly_exp_bound(u: f64, p: f64) -> Result<IneqReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} < 1")));
    }
    let lhs = u.abs().powf(p);
    let rhs = p.powf(p) * (-p).exp() * 2.0 * u.cosh();
    Ok(IneqReport::new("poly_exp", format!("u={u};p={p}"), lhs, rhs, INEQ_TOL))
}

/// `poly_exp_bound` over `u ∈ [−umax, umax]` with `n` points.
pub fn poly_exp_grid(p: f64, umax: f64, n: usize) -> Result<Vec<IneqReport>> {
    (0..n)
        .map(|i| {
            let u = -umax + 2.0 * umax * i as f64 / (n.max(2) - 1) as f64;
            poly_exp_bound(u, p)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct WitnessTail {
    pub e: Operator,
    pub t: f64,
    /// `τ(1 − e)`.
    pub deficit: f64,
    /// `Σ_i t^{−p} ‖x_i‖_p^p`.
    pub bound: f64,
    /// `‖x_i e‖_∞`.
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub norms_ok: bool,
    pub deficit_ok: bool,
}

impl WitnessTail {
    /// Both contract inequalities: `‖x_i e‖ ≤ t(1+1e-9)` and `τ(1−e) ≤ bound`.
    pub fn check(&self) -> WitnessCheck {
        WitnessCheck {
            norms_ok: self.norms.iter().all(|&n| n <= self.t * (1.0 + 1e-9)),
            deficit_ok: self.deficit <= self.bound * (1.0 + 1e-12) + 1e-15,
        }
    }

    pub fn holds(&self) -> bool {
        let c = self.check();
        c.norms_ok && c.deficit_ok
    }
}

/// `e = ∧_i 1_[0,t](|x_i|)`. For self-adjoint `x_i` this is `1_[−t,t](x_i)`.
pub fn chebyshev_witness(xs: &[Operator], t: f64, p: f64) -> Result<WitnessTail> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} < 1")));
    }
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no operators".into()))?;
    let keep = Interval::closed(0.0, t);
    let projs = xs
        .iter()
        .map(|x| {
            x.check_same(first)?;
            Ok(x.modulus_spectrum().indicator(&keep))
        })
        .collect::<Result<Vec<_>>>()?;
    let e = projection_meet(&projs)?;
    let one = Operator::identity(first.algebra());
    let deficit = (&one - &e).trace_re()?.max(0.0);
    let mut bound = 0.0;
    for x in xs {
        bound += (lp_norm(x, p)? / t).powf(p);
    }
    let norms = xs.iter().map(|x| (x * &e).op_norm()).collect();
    Ok(WitnessTail {
        e,
        t,
        deficit,
        bound,
        norms,
    })
}

/// Witness deficit of `(x_i)` at `t` against that of `(a_i x_i)` at `t`, `a_i ≥ 1`.
pub fn scaling_monotonicity_check(xs: &[Operator], coeffs: &[f64], t: f64) -> Result<IneqReport> {
    if xs.len() != coeffs.len() {
        return Err(Error::ShapeMismatch("one coefficient per operator".into()));
    }
    if let Some(a) = coeffs.iter().find(|&&a| !(a >= 1.0)) {
        return Err(Error::InvalidArgument(format!("coefficient {a} < 1")));
    }
    let base = chebyshev_witness(xs, t, 2.0)?;
    let scaled: Vec<Operator> = xs.iter().zip(coeffs).map(|(x, &a)| x.scale(a)).collect();
    let up = chebyshev_witness(&scaled, t, 2.0)?;
    Ok(IneqReport::new(
        "scaling",
        format!("n={};t={t}", xs.len()),
        base.deficit,
        up.deficit,
        INEQ_TOL,
    ))
}
