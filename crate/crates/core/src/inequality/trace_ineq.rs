//! Golden–Thompson and the resolvent-kernel three-term refinement.

use serde::{Deserialize, Serialize};

use super::report::{IneqReport, INEQ_TOL};
use crate::algebra::{CMat, Operator, C64};
use crate::error::{Error, Result};
use crate::quad;

/// Tolerance used for three-term verdicts.
pub const IGT_TOL: f64 = 1e-6;
/// Eigenvalue gaps below this use the diagonal limit of the kernel.
const KERNEL_DEGENERATE: f64 = 1e-10;

fn exp_op(x: &Operator) -> Result<Operator> {
    x.spectrum()?.apply(f64::exp)
}

/// `τ(e^{a+b}) ≤ τ(e^a e^b)`; also records the symmetric form `τ(e^{a/2} e^b e^{a/2})`.
pub fn gt_gap(a: &Operator, b: &Operator) -> Result<IneqReport> {
    a.check_same(b)?;
    let lhs = exp_op(&(a + b))?.trace_re()?;
    let ea = exp_op(a)?;
    let eb = exp_op(b)?;
    let rhs = (&ea * &eb).trace().re;
    let half = exp_op(&a.scale(0.5))?;
    let sym = (&(&half * &eb) * &half).trace_re()?;
    let comm = (&(a * b) - &(b * a)).op_norm();
    Ok(IneqReport::new("gt", format!("dim={}", a.algebra().total_dim()), lhs, rhs, INEQ_TOL)
        .with_aux("symmetric_rhs", sym)
        .with_aux("commutator_norm", comm))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgtMode {
    Kernel,
    Quadrature,
}

/// `∫_0^∞ (s_i + t)^{-1}(s_j + t)^{-1} dt` with `s = e^{-a}`.
#[inline]
fn resolvent_kernel(ai: f64, aj: f64) -> f64 {
    let d = aj - ai;
    if d.abs() < KERNEL_DEGENERATE {
        ai.exp()
    } else {
        ai.exp() * d / -(-d).exp_m1()
    }
}

/// `∫_0^∞ τ(e^{c/2} (e^{-a}+t)^{-1} e^b (e^{-a}+t)^{-1} e^{c/2}) dt`.
pub fn igt_rhs(a: &Operator, b: &Operator, c: &Operator, mode: IgtMode) -> Result<f64> {
    a.check_same(b)?;
    a.check_same(c)?;
    let eb = exp_op(b)?;
    let ec = exp_op(c)?;
    match mode {
        IgtMode::Kernel => {
            let sa = a.spectrum()?;
            let alg = a.algebra();
            let mut total = C64::new(0.0, 0.0);
            for (i, bs) in sa.blocks().iter().enumerate() {
                let u = &bs.vectors;
                let bt = u.adjoint() * eb.block(i) * u;
                let n = bs.values.len();
                let k = CMat::from_fn(n, n, |r, s| bt[(r, s)] * resolvent_kernel(bs.values[r], bs.values[s]));
                let back = u * k * u.adjoint();
                total += (ec.block(i) * back).trace() * alg.eigen_weight(i);
            }
            Ok(total.re)
        }
        IgtMode::Quadrature => {
            let ema = exp_op(&a.scale(-1.0))?;
            let half_c = exp_op(&c.scale(0.5))?;
            let mut failure = None;
            let integrand = |u: f64| -> f64 {
                let t = u / (1.0 - u);
                let jac = 1.0 / ((1.0 - u) * (1.0 - u));
                let blocks: Option<Vec<CMat>> = ema
                    .blocks()
                    .iter()
                    .map(|m| (m + CMat::identity(m.nrows(), m.ncols()) * C64::new(t, 0.0)).try_inverse())
                    .collect();
                let Some(blocks) = blocks else {
                    failure = Some(t);
                    return f64::NAN;
                };
                let r = Operator::from_blocks(a.algebra(), blocks).expect("same shape");
                let inner = &(&(&half_c * &r) * &eb) * &(&r * &half_c);
                inner.trace().re * jac
            };
            let res = quad::integrate(integrand, 0.0, 1.0, 1e-10, 0.0, 4000)?;
            if let Some(t) = failure {
                return Err(Error::Quadrature(t));
            }
            Ok(res.value)
        }
    }
}

/// `τ(e^{a+b+c})` against the kernel right-hand side.
pub fn igt_gap(a: &Operator, b: &Operator, c: &Operator) -> Result<IneqReport> {
    let lhs = exp_op(&(&(a + b) + c))?.trace_re()?;
    let rhs = igt_rhs(a, b, c, IgtMode::Kernel)?;
    Ok(IneqReport::new("igt", format!("dim={}", a.algebra().total_dim()), lhs, rhs, IGT_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::random_hermitian;
    use crate::algebra::{real_matrix, TracialAlgebra};
    use crate::rng;

    fn paulis() -> (Operator, Operator, Operator) {
        let m2 = TracialAlgebra::matrix(2);
        let x = Operator::from_blocks(&m2, vec![real_matrix(2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
        let z = Operator::from_blocks(&m2, vec![real_matrix(2, &[1.0, 0.0, 0.0, -1.0])]).unwrap();
        let y = Operator::from_blocks(
            &m2,
            vec![CMat::from_row_slice(
                2,
                2,
                &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
            )],
        )
        .unwrap();
        (x, y, z)
    }

    #[test]
    fn pauli_gt() {
        let (x, _, z) = paulis();
        let r = gt_gap(&x, &z).unwrap();
        assert!((r.lhs - 2f64.sqrt().cosh()).abs() < 1e-12);
        assert!((r.rhs - 1f64.cosh().powi(2)).abs() < 1e-12);
        assert!((r.lhs - 2.17821).abs() < 1e-4 && (r.rhs - 2.38110).abs() < 1e-4);
        assert!((r.slack - 0.2029142889).abs() < 1e-9);
        assert!((r.aux["symmetric_rhs"] - r.rhs).abs() < 1e-12);
        assert!(r.passed());
    }

    #[test]
    fn commuting_gt_is_equality() {
        let d = TracialAlgebra::uniform_diagonal(3);
        let a = Operator::from_real_diagonal(&d, &[0.3, -1.0, 2.0]).unwrap();
        let b = Operator::from_real_diagonal(&d, &[1.0, 0.5, -0.2]).unwrap();
        assert!(gt_gap(&a, &b).unwrap().slack.abs() < 1e-10);
    }

    #[test]
    fn kernel_reductions() {
        let m3 = TracialAlgebra::matrix(3);
        let mut r = rng::stream(31, 0);
        let b = random_hermitian(&m3, &mut r);
        let c = random_hermitian(&m3, &mut r);
        let zero = Operator::zeros(&m3);
        let got = igt_rhs(&zero, &b, &c, IgtMode::Kernel).unwrap();
        let hc = exp_op(&c.scale(0.5)).unwrap();
        let want = (&(&hc * &exp_op(&b).unwrap()) * &hc).trace().re;
        assert!((got - want).abs() <= 1e-10 * want.abs());

        let d = TracialAlgebra::uniform_diagonal(3);
        let a = Operator::from_real_diagonal(&d, &[0.3, -1.0, 0.3]).unwrap();
        let b = Operator::from_real_diagonal(&d, &[1.0, 0.5, -0.2]).unwrap();
        let c = Operator::from_real_diagonal(&d, &[-0.4, 0.1, 2.0]).unwrap();
        let r = igt_gap(&a, &b, &c).unwrap();
        assert!(r.slack.abs() < 1e-12 * r.lhs);
    }

    #[test]
    fn kernel_matches_quadrature() {
        let mut r = rng::stream(32, 0);
        for dim in 2..=4 {
            let m = TracialAlgebra::matrix(dim);
            let a = random_hermitian(&m, &mut r);
            let b = random_hermitian(&m, &mut r);
            let c = random_hermitian(&m, &mut r);
            let k = igt_rhs(&a, &b, &c, IgtMode::Kernel).unwrap();
            let q = igt_rhs(&a, &b, &c, IgtMode::Quadrature).unwrap();
            assert!((k - q).abs() <= 1e-6 * k.abs(), "{k} vs {q}");
            assert!(igt_gap(&a, &b, &c).unwrap().passed());
        }
    }

    #[test]
    fn pauli_triple() {
        let (x, y, z) = paulis();
        let r = igt_gap(&x, &y, &z).unwrap();
        assert!(r.slack >= 0.0, "{r:?}");
        let m2 = x.algebra().clone();
        let gt = gt_gap(&x, &y).unwrap();
        let c0 = igt_gap(&x, &y, &Operator::zeros(&m2)).unwrap();
        assert!((gt.lhs - c0.lhs).abs() < 1e-12);
        assert!((c0.rhs - gt.rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_self_adjoint() {
        let m2 = TracialAlgebra::matrix(2);
        let n = Operator::from_blocks(&m2, vec![real_matrix(2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        assert!(gt_gap(&n, &n).is_err());
        assert!(igt_rhs(&n, &n, &n, IgtMode::Kernel).is_err());
    }
}
