use std::sync::Arc;

use super::{CMat, Operator, TracialAlgebra, C64, CUT_SNAP, RANK_TOL};
use crate::error::{Error, Result};

/// Eigen-data of one block, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors in the order of `values`.
    pub vectors: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedEigenvalue {
    pub value: f64,
    /// Trace weight of one copy, `block_weight / block_dim`.
    pub weight: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    alg: Arc<TracialAlgebra>,
    blocks: Vec<BlockSpectrum>,
}

fn eig_block(m: &CMat) -> BlockSpectrum {
    let n = m.nrows();
    if n == 1 {
        return BlockSpectrum {
            values: vec![m[(0, 0)].re],
            vectors: CMat::identity(1, 1),
        };
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    BlockSpectrum { values, vectors }
}

impl Spectrum {
    /// Caller guarantees `x` is exactly Hermitian blockwise.
    pub(crate) fn of_hermitian(x: &Operator) -> Self {
        Self {
            alg: Arc::clone(x.algebra()),
            blocks: x.blocks().iter().map(eig_block).collect(),
        }
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.alg
    }

    pub fn blocks(&self) -> &[BlockSpectrum] {
        &self.blocks
    }

    /// Replace each eigenvalue by `f(λ)` and re-sort.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let n = b.values.len();
                let vals: Vec<f64> = b.values.iter().map(|&v| f(v)).collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
                BlockSpectrum {
                    values: order.iter().map(|&i| vals[i]).collect(),
                    vectors: CMat::from_fn(n, n, |r, c| b.vectors[(r, order[c])]),
                }
            })
            .collect();
        Self {
            alg: Arc::clone(&self.alg),
            blocks,
        }
    }

    /// Flat `(eigenvalue, weight)` list, one entry per eigenvalue copy.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.alg.total_dim());
        for (i, b) in self.blocks.iter().enumerate() {
            let w = self.alg.eigen_weight(i);
            out.extend(b.values.iter().map(|&v| (v, w)));
        }
        out
    }

    /// Eigenvalues grouped by block and (near-)equality.
    pub fn weighted(&self) -> Vec<WeightedEigenvalue> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let weight = self.alg.eigen_weight(i);
            for &v in &b.values {
                match out.last_mut() {
                    Some(WeightedEigenvalue {
                        value,
                        weight: w,
                        multiplicity,
                    }) if *w == weight && (*value - v).abs() <= 1e-12 * value.abs().max(1.0) => {
                        *multiplicity += 1
                    }
                    _ => out.push(WeightedEigenvalue {
                        value: v,
                        weight,
                        multiplicity: 1,
                    }),
                }
            }
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.values[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| *b.values.last().unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ f(λ_j) P_j`; errors if `f` returns a non-finite value.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<Operator> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut fv = Vec::with_capacity(b.values.len());
            for &v in &b.values {
                let y = f(v);
                if !y.is_finite() {
                    return Err(Error::FunctionUndefined(v));
                }
                fv.push(y);
            }
            blocks.push(reconstruct(&b.vectors, &fv));
        }
        Ok(Operator::from_blocks_unchecked(&self.alg, blocks))
    }

    /// Spectral projection onto the eigenvalues in `interval`.
    pub fn indicator(&self, interval: &Interval) -> Operator {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let sel: Vec<usize> = (0..b.values.len())
                    .filter(|&i| interval.contains(b.values[i]))
                    .collect();
                column_projection(&b.vectors, &sel)
            })
            .collect();
        Operator::from_blocks_unchecked(&self.alg, blocks)
    }

    /// `τ(1_interval)`.
    pub fn indicator_trace(&self, interval: &Interval) -> f64 {
        self.atoms()
            .into_iter()
            .filter(|&(v, _)| interval.contains(v))
            .map(|(_, w)| w)
            .sum()
    }
}

fn reconstruct(v: &CMat, vals: &[f64]) -> CMat {
    let n = v.nrows();
    let mut scaled = v.clone();
    for (c, &f) in vals.iter().enumerate() {
        scaled.column_mut(c).scale_mut(f);
    }
    let out = &scaled * v.adjoint();
    // Hermitian symmetrisation removes round-off asymmetry.
    let mut h = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    for i in 0..n {
        h[(i, i)].im = 0.0;
    }
    h
}

fn column_projection(v: &CMat, cols: &[usize]) -> CMat {
    let n = v.nrows();
    if cols.is_empty() {
        return CMat::zeros(n, n);
    }
    if cols.len() == n {
        return CMat::identity(n, n);
    }
    let sub = CMat::from_fn(n, cols.len(), |r, c| v[(r, cols[c])]);
    let p = &sub * sub.adjoint();
    let mut h = (&p + p.adjoint()) * C64::new(0.5, 0.0);
    for i in 0..n {
        h[(i, i)].im = 0.0;
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint {
    Unbounded,
    Open(f64),
    Closed(f64),
}

/// Real interval. Values within `CUT_SNAP · max(1, |cut|)` of a finite endpoint
/// are treated as sitting on the cut itself, so they are kept by a closed
/// endpoint and dropped by an open one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: Endpoint,
    pub hi: Endpoint,
}

impl Interval {
    pub fn new(lo: Endpoint, hi: Endpoint) -> Self {
        Self { lo, hi }
    }

    /// `(a, ∞)`.
    pub fn above(a: f64) -> Self {
        Self::new(Endpoint::Open(a), Endpoint::Unbounded)
    }

    /// `[a, ∞)`.
    pub fn at_least(a: f64) -> Self {
        Self::new(Endpoint::Closed(a), Endpoint::Unbounded)
    }

    /// `[a, b]`.
    pub fn closed(a: f64, b: f64) -> Self {
        Self::new(Endpoint::Closed(a), Endpoint::Closed(b))
    }

    /// `(-∞, b]`.
    pub fn at_most(b: f64) -> Self {
        Self::new(Endpoint::Unbounded, Endpoint::Closed(b))
    }

    pub fn contains(&self, v: f64) -> bool {
        let lo_ok = match self.lo {
            Endpoint::Unbounded => true,
            Endpoint::Closed(a) => v >= a - snap(a),
            Endpoint::Open(a) => v > a + snap(a),
        };
        let hi_ok = match self.hi {
            Endpoint::Unbounded => true,
            Endpoint::Closed(b) => v <= b + snap(b),
            Endpoint::Open(b) => v < b - snap(b),
        };
        lo_ok && hi_ok
    }
}

fn snap(cut: f64) -> f64 {
    CUT_SNAP * cut.abs().max(1.0)
}

pub fn herm_spectrum(x: &Operator) -> Result<Spectrum> {
    x.spectrum()
}

pub fn apply_function(spec: &Spectrum, f: impl Fn(f64) -> f64) -> Result<Operator> {
    spec.apply(f)
}

/// `1_interval(x)`, or `1_interval(|x|)` when `of_modulus` is set.
pub fn spectral_indicator(x: &Operator, interval: &Interval, of_modulus: bool) -> Result<Operator> {
    let spec = if of_modulus {
        x.modulus_spectrum()
    } else {
        x.spectrum()?
    };
    Ok(spec.indicator(interval))
}

/// Generalised s-number `μ_t(x) = inf{s ≥ 0 : τ(1_(s,∞)(|x|)) ≤ t}`.
pub fn mu(alg: &Arc<TracialAlgebra>, x: &Operator, t: f64) -> Result<f64> {
    if !TracialAlgebra::same(alg, x.algebra()) {
        return Err(Error::ShapeMismatch("operator does not belong to algebra".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("t = {t} outside (0,1)")));
    }
    Ok(mu_of_atoms(x.singular_values(), t))
}

/// `μ_t` from `(value, weight)` atoms of a positive operator.
pub fn mu_of_atoms(mut atoms: Vec<(f64, f64)>, t: f64) -> f64 {
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum = 0.0;
    for &(s, w) in &atoms {
        cum += w;
        if cum > t + 1e-12 {
            return s.max(0.0);
        }
    }
    0.0
}

fn projection_defect(p: &Operator) -> f64 {
    let sa = p.self_adjoint_defect();
    let idem = (&(p * p) - p).op_norm();
    sa.max(idem)
}

/// Orthogonal projection onto the intersection of the ranges of `ps`.
pub fn projection_meet(ps: &[Operator]) -> Result<Operator> {
    let first = ps
        .first()
        .ok_or_else(|| Error::InvalidArgument("meet of an empty family".into()))?;
    for p in ps {
        first.check_same(p)?;
        let defect = projection_defect(p);
        if defect > 1e-8 {
            return Err(Error::NotProjection { defect });
        }
    }
    if ps.len() == 1 {
        return Ok(first.hermitian_part());
    }
    let alg = first.algebra();
    let blocks = (0..alg.num_blocks())
        .map(|bi| {
            let n = alg.blocks()[bi].dim;
            if n == 1 {
                let keep = ps.iter().all(|p| p.block(bi)[(0, 0)].re > 0.5);
                let v = if keep { 1.0 } else { 0.0 };
                return CMat::from_element(1, 1, C64::new(v, 0.0));
            }
            let mut s = CMat::zeros(n, n);
            for p in ps {
                let b = p.block(bi);
                s += CMat::identity(n, n) - (b + b.adjoint()) * C64::new(0.5, 0.0);
            }
            let eig = eig_block(&s);
            let cut = RANK_TOL * eig.values[0].max(1.0);
            let ker: Vec<usize> = (0..n).filter(|&i| eig.values[i] <= cut).collect();
            column_projection(&eig.vectors, &ker)
        })
        .collect();
    Ok(Operator::from_blocks_unchecked(alg, blocks))
}
