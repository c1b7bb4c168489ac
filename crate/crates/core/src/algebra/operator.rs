use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{CMat, Spectrum, TracialAlgebra, C64, SELF_ADJOINT_TOL, TRACE_IMAG_TOL};
use crate::error::{Error, Result};

/// An element of a [`TracialAlgebra`]: one complex matrix per block.
#[derive(Clone, Debug)]
pub struct Operator {
    alg: Arc<TracialAlgebra>,
    blocks: Vec<CMat>,
}

impl Operator {
    pub fn from_blocks(alg: &Arc<TracialAlgebra>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != alg.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks supplied, algebra has {}",
                blocks.len(),
                alg.num_blocks()
            )));
        }
        for (i, (m, b)) in blocks.iter().zip(alg.blocks()).enumerate() {
            if m.nrows() != b.dim || m.ncols() != b.dim {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    b.dim,
                    b.dim
                )));
            }
        }
        Ok(Self::from_blocks_unchecked(alg, blocks))
    }

    pub(crate) fn from_blocks_unchecked(alg: &Arc<TracialAlgebra>, blocks: Vec<CMat>) -> Self {
        debug_assert_eq!(blocks.len(), alg.num_blocks());
        Self {
            alg: Arc::clone(alg),
            blocks,
        }
    }

    pub fn zeros(alg: &Arc<TracialAlgebra>) -> Self {
        let blocks = alg.blocks().iter().map(|b| CMat::zeros(b.dim, b.dim)).collect();
        Self::from_blocks_unchecked(alg, blocks)
    }

    pub fn identity(alg: &Arc<TracialAlgebra>) -> Self {
        Self::scalar(alg, C64::new(1.0, 0.0))
    }

    pub fn scalar(alg: &Arc<TracialAlgebra>, c: C64) -> Self {
        let blocks = alg
            .blocks()
            .iter()
            .map(|b| CMat::from_diagonal_element(b.dim, b.dim, c))
            .collect();
        Self::from_blocks_unchecked(alg, blocks)
    }

    /// Diagonal operator; `values` runs over the concatenated block bases.
    pub fn from_real_diagonal(alg: &Arc<TracialAlgebra>, values: &[f64]) -> Result<Self> {
        if values.len() != alg.total_dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} diagonal entries for total dimension {}",
                values.len(),
                alg.total_dim()
            )));
        }
        let mut offset = 0;
        let blocks = alg
            .blocks()
            .iter()
            .map(|b| {
                let m = CMat::from_fn(b.dim, b.dim, |i, j| {
                    if i == j {
                        C64::new(values[offset + i], 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                offset += b.dim;
                m
            })
            .collect();
        Ok(Self::from_blocks_unchecked(alg, blocks))
    }

    /// Same matrix in every block; all blocks must share its size.
    pub fn from_matrix(alg: &Arc<TracialAlgebra>, m: CMat) -> Result<Self> {
        Self::from_blocks(alg, vec![m; alg.num_blocks()])
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.alg
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn map_blocks(&self, f: impl Fn(usize, &CMat) -> CMat) -> Self {
        let blocks = self.blocks.iter().enumerate().map(|(i, m)| f(i, m)).collect();
        Self::from_blocks_unchecked(&self.alg, blocks)
    }

    fn zip_blocks(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        assert!(
            TracialAlgebra::same(&self.alg, &other.alg),
            "operators live in different algebras"
        );
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| f(a, b))
            .collect();
        Self::from_blocks_unchecked(&self.alg, blocks)
    }

    pub fn same_algebra(&self, other: &Self) -> bool {
        TracialAlgebra::same(&self.alg, &other.alg)
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|_, m| m.adjoint())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_blocks(|_, m| m * C64::new(c, 0.0))
    }

    pub fn scale_c(&self, c: C64) -> Self {
        self.map_blocks(|_, m| m * c)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self + other)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self * other)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_algebra(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("operators live in different algebras".into()))
        }
    }

    /// `x − τ(x)·1`.
    pub fn centered(&self) -> Self {
        let t = self.trace();
        self - &Operator::scalar(&self.alg, t)
    }

    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .zip(self.alg.blocks())
            .map(|(m, b)| m.trace() * (b.weight / b.dim as f64))
            .sum()
    }

    /// Real trace; errors when the imaginary part is not negligible.
    pub fn trace_re(&self) -> Result<f64> {
        let t = self.trace();
        if t.im.abs() > TRACE_IMAG_TOL * t.re.abs().max(1.0) {
            return Err(Error::ComplexTrace(t.im));
        }
        Ok(t.re)
    }

    /// `⟨x, y⟩ = τ(x* y)`.
    pub fn inner(&self, y: &Self) -> C64 {
        assert!(self.same_algebra(y), "operators live in different algebras");
        self.blocks
            .iter()
            .zip(&y.blocks)
            .zip(self.alg.blocks())
            .map(|((a, b), blk)| a.dotc(b) * (blk.weight / blk.dim as f64))
            .sum()
    }

    pub fn norm2(&self) -> f64 {
        self.blocks
            .iter()
            .zip(self.alg.blocks())
            .map(|(m, b)| m.norm_squared() * (b.weight / b.dim as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Singular values paired with the trace weight each one carries.
    pub fn singular_values(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.alg.total_dim());
        for (i, m) in self.blocks.iter().enumerate() {
            let w = self.alg.eigen_weight(i);
            if m.nrows() == 1 {
                out.push((m[(0, 0)].norm(), w));
            } else {
                out.extend(m.clone().singular_values().iter().map(|&s| (s, w)));
            }
        }
        out
    }

    pub fn op_norm(&self) -> f64 {
        if self.is_exactly_hermitian() {
            return self
                .blocks
                .iter()
                .map(|m| {
                    if m.nrows() == 1 {
                        m[(0, 0)].re.abs()
                    } else {
                        m.symmetric_eigenvalues()
                            .iter()
                            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
                    }
                })
                .fold(0.0, f64::max);
        }
        self.singular_values()
            .into_iter()
            .fold(0.0, |acc, (s, _)| acc.max(s))
    }

    pub fn norm_p(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    fn is_exactly_hermitian(&self) -> bool {
        self.blocks.iter().all(|m| {
            let n = m.nrows();
            (0..n).all(|i| m[(i, i)].im == 0.0 && (0..i).all(|j| m[(i, j)] == m[(j, i)].conj()))
        })
    }

    /// `‖x − x*‖_∞`.
    pub fn self_adjoint_defect(&self) -> f64 {
        if self.is_exactly_hermitian() {
            return 0.0;
        }
        let i = C64::new(0.0, 1.0);
        self.blocks
            .iter()
            .map(|m| {
                let d = (m - m.adjoint()) * i;
                let d = (&d + d.adjoint()) * C64::new(0.5, 0.0);
                d.symmetric_eigenvalues()
                    .iter()
                    .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self) -> bool {
        let defect = self.self_adjoint_defect();
        defect == 0.0 || defect <= SELF_ADJOINT_TOL * self.op_norm().max(1.0)
    }

    pub(crate) fn require_self_adjoint(&self) -> Result<()> {
        let defect = self.self_adjoint_defect();
        if defect == 0.0 || defect <= SELF_ADJOINT_TOL * self.op_norm().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotSelfAdjoint { defect })
        }
    }

    /// `(x + x*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        self.map_blocks(|_, m| (m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Spectral decomposition of a self-adjoint operator.
    pub fn spectrum(&self) -> Result<Spectrum> {
        self.require_self_adjoint()?;
        Ok(Spectrum::of_hermitian(&self.hermitian_part()))
    }

    /// Spectral decomposition of `|x| = (x* x)^{1/2}`.
    pub fn modulus_spectrum(&self) -> Spectrum {
        if self.is_self_adjoint() {
            Spectrum::of_hermitian(&self.hermitian_part()).map_values(f64::abs)
        } else {
            let xx = (&self.adjoint() * self).hermitian_part();
            Spectrum::of_hermitian(&xx).map_values(|v| v.max(0.0).sqrt())
        }
    }

    /// `‖x − y‖_∞`.
    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).op_norm()
    }

    /// Largest block Frobenius norm, an upper bound for `‖x‖_∞`.
    pub fn frobenius_bound(&self) -> f64 {
        self.blocks.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Upper bound for `‖x − y‖_∞` without a decomposition.
    pub fn dist_bound(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Tensor product in the algebra `self.algebra() ⊗ other.algebra()`.
    pub fn kron(&self, other: &Self) -> Self {
        let alg = self.alg.tensor(&other.alg);
        let mut blocks = Vec::with_capacity(alg.num_blocks());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(a.kronecker(b));
            }
        }
        Self::from_blocks_unchecked(&alg, blocks)
    }

    /// Re-home this operator in a structurally identical algebra handle.
    pub fn rehome(&self, alg: &Arc<TracialAlgebra>) -> Result<Self> {
        if !TracialAlgebra::same(&self.alg, alg) {
            return Err(Error::ShapeMismatch("algebras differ".into()));
        }
        Ok(Self::from_blocks_unchecked(alg, self.blocks.clone()))
    }

    /// Real diagonal of each block, concatenated.
    pub fn real_diagonal(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|m| (0..m.nrows()).map(move |i| m[(i, i)].re))
            .collect()
    }
}

/// `τ(x)` after checking that `x` lives in `alg`.
pub fn trace(alg: &Arc<TracialAlgebra>, x: &Operator) -> Result<C64> {
    if !TracialAlgebra::same(alg, x.algebra()) {
        return Err(Error::ShapeMismatch("operator does not belong to algebra".into()));
    }
    Ok(x.trace())
}

pub fn hilbert_inner(alg: &Arc<TracialAlgebra>, x: &Operator, y: &Operator) -> Result<C64> {
    if !TracialAlgebra::same(alg, x.algebra()) || !TracialAlgebra::same(alg, y.algebra()) {
        return Err(Error::ShapeMismatch("operator does not belong to algebra".into()));
    }
    Ok(x.inner(y))
}

/// `‖x‖_p = τ(|x|^p)^{1/p}`; `p = ∞` gives the operator norm.
pub fn lp_norm(x: &Operator, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("p = {p} < 1")));
    }
    if p.is_infinite() {
        return Ok(x.op_norm());
    }
    if p == 2.0 {
        return Ok(x.norm2());
    }
    let s: f64 = x
        .singular_values()
        .into_iter()
        .map(|(s, w)| w * s.powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        self.zip_blocks(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        self.zip_blocks(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        self.zip_blocks(rhs, |a, b| a * b)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.map_blocks(|_, m| -m)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

/// Complex matrix from real entries, row-major.
pub fn real_matrix(n: usize, entries: &[f64]) -> CMat {
    assert_eq!(entries.len(), n * n);
    DMatrix::from_fn(n, n, |i, j| C64::new(entries[i * n + j], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{random_hermitian, random_operator};
    use crate::rng;

    fn pauli_x() -> CMat {
        real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
    }

    fn pauli_z() -> CMat {
        real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
    }

    #[test]
    fn trace_examples() {
        let m2 = TracialAlgebra::matrix(2);
        let x = Operator::from_real_diagonal(&m2, &[1.0, 3.0]).unwrap();
        assert_eq!(x.trace().re, 2.0);
        assert_eq!(Operator::identity(&m2).trace().re, 1.0);
        let d = TracialAlgebra::diagonal(&[0.5, 0.5]).unwrap();
        let y = Operator::from_real_diagonal(&d, &[2.0, 4.0]).unwrap();
        assert_eq!(trace(&d, &y).unwrap().re, 3.0);
        assert!(trace(&m2, &y).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let m2 = TracialAlgebra::matrix(2);
        let one = Operator::identity(&m2);
        assert_eq!(one.inner(&one).re, 1.0);
        let sx = Operator::from_blocks(&m2, vec![pauli_x()]).unwrap();
        let sz = Operator::from_blocks(&m2, vec![pauli_z()]).unwrap();
        assert_eq!(sx.inner(&sz).norm(), 0.0);
        let x = Operator::from_real_diagonal(&m2, &[3.0, 1.0]).unwrap();
        assert_eq!(hilbert_inner(&m2, &x, &x).unwrap().re, 5.0);
    }

    #[test]
    fn lp_norm_examples() {
        let m2 = TracialAlgebra::matrix(2);
        let x = Operator::from_real_diagonal(&m2, &[3.0, 1.0]).unwrap();
        assert!((lp_norm(&x, 2.0).unwrap() - 5f64.sqrt()).abs() < 1e-14);
        assert!((lp_norm(&x, 3.0).unwrap() - 14f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(lp_norm(&x, f64::INFINITY).unwrap(), 3.0);
        let z = Operator::zeros(&m2);
        for p in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert_eq!(lp_norm(&z, p).unwrap(), 0.0);
        }
        assert!(lp_norm(&x, 0.5).is_err());
    }

    #[test]
    fn self_adjointness() {
        let alg = TracialAlgebra::new(vec![
            crate::algebra::Block { dim: 3, weight: 0.5 },
            crate::algebra::Block { dim: 2, weight: 0.5 },
        ])
        .unwrap();
        let mut r = rng::stream(3, 0);
        let h = random_hermitian(&alg, &mut r);
        assert!(h.is_self_adjoint());
        let g = random_operator(&alg, &mut r);
        assert!(!g.is_self_adjoint());
        assert!(g.spectrum().is_err());
        let adj2 = g.adjoint().adjoint();
        assert_eq!(adj2.dist(&g), 0.0);
    }

    #[test]
    fn complex_trace_is_rejected() {
        let m1 = TracialAlgebra::scalars();
        let x = Operator::scalar(&m1, C64::new(1.0, 0.5));
        assert!(x.trace_re().is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m2 = TracialAlgebra::matrix(2);
        assert!(Operator::from_blocks(&m2, vec![CMat::zeros(3, 3)]).is_err());
        assert!(Operator::from_real_diagonal(&m2, &[1.0]).is_err());
    }
}
