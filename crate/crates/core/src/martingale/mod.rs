//! Martingales over a filtration, their brackets and the standard decompositions.

mod generators;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{spectral_indicator, CMat, Interval, Operator};
use crate::condexp::Filtration;
use crate::error::{Error, Result};

pub use generators::{
    gen_dyadic_rademacher, gen_gue_sum, gen_skewed_twopoint, gen_tensor_hermitian, gue_step,
    RademacherEnsemble, TensorLaw, TensorSteps, TwoPointLaw, GueWalk, MAX_GUE_DIM, MAX_GUE_STEPS,
};

/// Relative tolerance of the adaptedness and martingale checks.
pub const MARTINGALE_TOL: f64 = 1e-9;

/// `L(x) = max(1, ln ln x)`, extended by `1` on `[0, 1]`.
pub fn iterated_log(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("L({x}) undefined")));
    }
    Ok(iterated_log_unchecked(x))
}

#[inline]
pub fn iterated_log_unchecked(x: f64) -> f64 {
    if x <= std::f64::consts::E {
        1.0
    } else {
        x.ln().ln().max(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct Martingale {
    filtration: Arc<Filtration>,
    xs: Vec<Operator>,
    self_adjoint: bool,
}

impl Martingale {
    /// `x_0 = 0`, `x_k = d_1 + … + d_k`; checks adaptedness and the martingale property.
    pub fn from_differences(filtration: Arc<Filtration>, ds: Vec<Operator>) -> Result<Self> {
        let m = Self::from_differences_unchecked(filtration, ds)?;
        m.check()?;
        Ok(m)
    }

    pub(crate) fn from_differences_unchecked(filtration: Arc<Filtration>, ds: Vec<Operator>) -> Result<Self> {
        if ds.len() > filtration.depth() {
            return Err(Error::NotMartingale(format!(
                "{} steps but the filtration has depth {}",
                ds.len(),
                filtration.depth()
            )));
        }
        let mut xs = Vec::with_capacity(ds.len() + 1);
        xs.push(Operator::zeros(filtration.parent()));
        for d in &ds {
            d.check_same(&xs[0])?;
            let next = xs.last().unwrap() + d;
            xs.push(next);
        }
        let self_adjoint = ds.iter().all(Operator::is_self_adjoint);
        Ok(Self {
            filtration,
            xs,
            self_adjoint,
        })
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    pub fn values(&self) -> &[Operator] {
        &self.xs
    }

    pub fn x(&self, k: usize) -> &Operator {
        &self.xs[k]
    }

    /// `d_k = x_k − x_{k−1}` for `k ≥ 1`.
    pub fn d(&self, k: usize) -> Operator {
        assert!(k >= 1 && k <= self.len(), "difference index {k} out of range");
        &self.xs[k] - &self.xs[k - 1]
    }

    pub fn differences(&self) -> Vec<Operator> {
        (1..=self.len()).map(|k| self.d(k)).collect()
    }

    /// Largest `‖E_{k−1}(d_k)‖_∞` over `k`.
    pub fn max_conditional_drift(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 1..=self.len() {
            worst = worst.max(self.filtration.expect(k - 1, &self.d(k))?.op_norm());
        }
        Ok(worst)
    }

    pub fn check(&self) -> Result<()> {
        if self.xs[0].op_norm() != 0.0 {
            return Err(Error::NotMartingale("x_0 is not 0".into()));
        }
        for k in 1..=self.len() {
            let xk = &self.xs[k];
            let scale = xk.op_norm().max(1.0);
            let adapted = self.filtration.expect(k, xk)?.dist(xk);
            if adapted > MARTINGALE_TOL * scale {
                return Err(Error::NotMartingale(format!(
                    "x_{k} is not adapted (|E_k x_k - x_k| = {adapted:.3e})"
                )));
            }
            let drift = self.filtration.expect(k - 1, xk)?.dist(&self.xs[k - 1]);
            if drift > MARTINGALE_TOL * scale {
                return Err(Error::NotMartingale(format!(
                    "|E_{} x_{k} - x_{}| = {drift:.3e}",
                    k - 1,
                    k - 1
                )));
            }
        }
        Ok(())
    }
}

/// Bracket quantities indexed by `n = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleTrack {
    /// `‖Σ_{k≤n} E_{k−1}(d_k* d_k)‖`.
    pub s2: Vec<f64>,
    /// `max(‖Σ E_{k−1}(d_k* d_k)‖, ‖Σ E_{k−1}(d_k d_k*)‖)`.
    pub t2: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub column: Vec<f64>,
    pub row: Vec<f64>,
}

impl ScaleTrack {
    pub fn from_brackets(column: Vec<f64>, row: Vec<f64>) -> Self {
        let t2: Vec<f64> = column.iter().zip(&row).map(|(a, b)| a.max(*b)).collect();
        let s2 = column.clone();
        let u = s2.iter().map(|&s| iterated_log_unchecked(s).sqrt()).collect();
        let v = t2.iter().map(|&t| iterated_log_unchecked(t).sqrt()).collect();
        Self {
            s2,
            t2,
            u,
            v,
            column,
            row,
        }
    }

    /// Self-adjoint track from a list of `s_n²`.
    pub fn from_s2(s2: Vec<f64>) -> Self {
        Self::from_brackets(s2.clone(), s2)
    }

    pub fn len(&self) -> usize {
        self.s2.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_monotone(&self) -> bool {
        self.s2.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
            && self.t2.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
    }
}

pub fn bracket(m: &Martingale) -> Result<ScaleTrack> {
    let f = m.filtration();
    let mut col_acc = Operator::zeros(f.parent());
    let mut row_acc = Operator::zeros(f.parent());
    let mut column = vec![0.0];
    let mut row = vec![0.0];
    for k in 1..=m.len() {
        let d = m.d(k);
        let ds = d.adjoint();
        col_acc = &col_acc + &f.expect(k - 1, &(&ds * &d))?;
        column.push(col_acc.op_norm());
        if m.is_self_adjoint() {
            row.push(*column.last().unwrap());
        } else {
            row_acc = &row_acc + &f.expect(k - 1, &(&d * &ds))?;
            row.push(row_acc.op_norm());
        }
    }
    Ok(ScaleTrack::from_brackets(column, row))
}

/// `[[0, x], [x*, 0]]` in `M_2 ⊗ A`.
pub fn dilate_operator(x: &Operator) -> Operator {
    let alg = x.algebra().amplify(2);
    let blocks = x
        .blocks()
        .iter()
        .map(|b| {
            let d = b.nrows();
            let mut out = CMat::zeros(2 * d, 2 * d);
            out.view_mut((0, d), (d, d)).copy_from(b);
            out.view_mut((d, 0), (d, d)).copy_from(&b.adjoint());
            out
        })
        .collect();
    Operator::from_blocks(&alg, blocks).expect("dilation shape")
}

/// Self-adjoint dilation over the amplified filtration.
pub fn dilate(m: &Martingale) -> Result<Martingale> {
    let f = Arc::new(m.filtration().amplify(2));
    let ds = m
        .differences()
        .iter()
        .map(|d| dilate_operator(d).rehome(f.parent()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Martingale::from_differences_unchecked(f, ds)?;
    out.self_adjoint = true;
    Ok(out)
}

/// `d = (d′ − E_{k−1} d′) + (d″ − E_{k−1} d″)` with `d′ = d·1_[0,cutoff](|d|)`.
pub fn truncate_center(f: &Filtration, k: usize, d: &Operator, cutoff: f64) -> Result<(Operator, Operator)> {
    if k == 0 || k > f.depth() {
        return Err(Error::InvalidArgument(format!("level {k} outside 1..={}", f.depth())));
    }
    if cutoff.is_nan() || cutoff < 0.0 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} < 0")));
    }
    let spec = d.spectrum()?;
    let dp = if cutoff.is_infinite() {
        d.clone()
    } else {
        let keep = spec.indicator(&Interval::closed(-cutoff, cutoff));
        (d * &keep).hermitian_part()
    };
    let dpp = d - &dp;
    let small = &dp - &f.expect(k - 1, &dp)?;
    let large = &dpp - &f.expect(k - 1, &dpp)?;
    Ok((small, large))
}

/// Three-way split of a centred self-adjoint `y` at `c₁ = e√k/(2u_k)` and `c₂ = max(√k, c₁)`.
#[derive(Clone, Debug)]
pub struct HwParts {
    pub yprime: Operator,
    pub z: Operator,
    pub w: Operator,
    /// `y·1_[0,c₁](|y|)`, `y·1_(c₁,c₂](|y|)`, `y·1_(c₂,∞)(|y|)` before centring.
    pub uncentered: [Operator; 3],
    pub c1: f64,
    pub c2: f64,
}

pub fn hw_cuts(k: usize, e: f64) -> (f64, f64) {
    let kf = k as f64;
    let u = iterated_log_unchecked(kf).sqrt();
    (e * kf.sqrt() / (2.0 * u), kf.sqrt())
}

pub fn hw_split(y: &Operator, k: usize, e: f64) -> Result<HwParts> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(e > 0.0) {
        return Err(Error::InvalidArgument(format!("e = {e} must be positive")));
    }
    let tr = y.trace_re()?;
    if tr.abs() > 1e-10 * y.op_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("tau(y) = {tr:.3e} is not 0")));
    }
    let (c1, c2) = hw_cuts(k, e);
    // For e > 2u_k the lower cut passes √k; the middle piece is then empty.
    let c2 = c2.max(c1);
    let abs = y.spectrum()?.map_values(f64::abs);
    let pieces = [
        Interval::closed(0.0, c1),
        Interval::new(crate::algebra::Endpoint::Open(c1), crate::algebra::Endpoint::Closed(c2)),
        Interval::above(c2),
    ]
    .map(|iv| (y * &abs.indicator(&iv)).hermitian_part());
    let center = |a: &Operator| a.centered().hermitian_part();
    Ok(HwParts {
        yprime: center(&pieces[0]),
        z: center(&pieces[1]),
        w: center(&pieces[2]),
        uncentered: pieces,
        c1,
        c2,
    })
}

/// `1_I(|x|)` shorthand used by the witness code.
pub fn modulus_indicator(x: &Operator, interval: &Interval) -> Result<Operator> {
    spectral_indicator(x, interval, true)
}
