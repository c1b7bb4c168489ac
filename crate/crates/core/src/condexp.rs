//! Trace-preserving conditional expectations and filtrations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::random::random_operator;
use crate::algebra::{
    spectral_indicator, AlgebraJson, Block, CMat, Interval, Operator, OperatorJson,
    TracialAlgebra, C64,
};
use crate::error::{Error, Result};
use crate::rng;

pub const CLOSURE_ROUNDS: usize = 64;
pub const SPAN_TOL: f64 = 1e-9;
pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub enum SubalgebraKind {
    /// Orthonormal basis for `⟨x, y⟩ = τ(x* y)`.
    Basis(Vec<Operator>),
    /// `(first level factors) ⊗ 1` inside a tensor product.
    TensorMarginal {
        factors: Vec<Arc<TracialAlgebra>>,
        level: usize,
        rest: Arc<TracialAlgebra>,
    },
    /// `M_m ⊗ N` inside `M_m ⊗ A`.
    Amplified { inner: Box<Subalgebra>, m: usize },
}

#[derive(Clone, Debug)]
pub struct Subalgebra {
    parent: Arc<TracialAlgebra>,
    kind: SubalgebraKind,
}

fn orthogonalize(basis: &[Operator], v: &Operator) -> Operator {
    let mut r = v.clone();
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = b.inner(&r);
            if c.norm() > 0.0 {
                r = &r - &b.scale_c(c);
            }
        }
    }
    r
}

/// Appends `v` if it is not already in the span; returns whether it was added.
fn try_extend(basis: &mut Vec<Operator>, v: &Operator) -> bool {
    let scale = v.norm2();
    if scale == 0.0 {
        return false;
    }
    let r = orthogonalize(basis, v);
    let n = r.norm2();
    if n <= SPAN_TOL * scale.max(1.0) {
        return false;
    }
    basis.push(r.scale(1.0 / n));
    true
}

impl Subalgebra {
    pub fn scalars(parent: &Arc<TracialAlgebra>) -> Self {
        Self {
            parent: Arc::clone(parent),
            kind: SubalgebraKind::Basis(vec![Operator::identity(parent)]),
        }
    }

    /// Span of an already orthonormal, unital, *-closed and multiplicatively
    /// closed family. Only orthonormality is checked.
    pub fn from_orthonormal_basis(parent: &Arc<TracialAlgebra>, basis: Vec<Operator>) -> Result<Self> {
        for (i, a) in basis.iter().enumerate() {
            if !TracialAlgebra::same(parent, a.algebra()) {
                return Err(Error::ShapeMismatch("basis element outside parent".into()));
            }
            for (j, b) in basis.iter().enumerate().take(i + 1) {
                let want = if i == j { 1.0 } else { 0.0 };
                if (a.inner(b) - C64::new(want, 0.0)).norm() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "basis elements {i},{j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self {
            parent: Arc::clone(parent),
            kind: SubalgebraKind::Basis(basis),
        })
    }

    pub fn parent(&self) -> &Arc<TracialAlgebra> {
        &self.parent
    }

    pub fn kind(&self) -> &SubalgebraKind {
        &self.kind
    }

    /// Complex linear dimension.
    pub fn dim(&self) -> usize {
        match &self.kind {
            SubalgebraKind::Basis(b) => b.len(),
            SubalgebraKind::TensorMarginal { factors, level, .. } => {
                factors[..*level].iter().map(|f| f.linear_dim()).product()
            }
            SubalgebraKind::Amplified { inner, m } => m * m * inner.dim(),
        }
    }

    pub fn is_commutative(&self) -> bool {
        let s = self.spanning_set();
        s.iter().all(|a| s.iter().all(|b| (&(a * b) - &(b * a)).norm2() <= 1e-9))
    }

    /// A family whose linear span is the subalgebra.
    pub fn spanning_set(&self) -> Vec<Operator> {
        match &self.kind {
            SubalgebraKind::Basis(b) => b.clone(),
            SubalgebraKind::TensorMarginal { factors, level, rest } => {
                let mut units = vec![Operator::identity(&TracialAlgebra::scalars())];
                for f in &factors[..*level] {
                    let fu = matrix_units(f);
                    units = units.iter().flat_map(|u| fu.iter().map(move |v| u.kron(v))).collect();
                }
                let one = Operator::identity(rest);
                units
                    .into_iter()
                    .map(|u| u.kron(&one).rehome(&self.parent).expect("tensor layout"))
                    .collect()
            }
            SubalgebraKind::Amplified { inner, m } => {
                let mut out = Vec::new();
                for a in 0..*m {
                    for b in 0..*m {
                        for s in inner.spanning_set() {
                            out.push(amplify_unit(&self.parent, *m, a, b, &s));
                        }
                    }
                }
                out
            }
        }
    }

    /// `‖E(x) − x‖_∞ ≤ 1e-9 · max(1, ‖x‖_∞)`.
    pub fn contains(&self, x: &Operator) -> Result<bool> {
        let e = self.cond_expect(x)?;
        Ok(e.dist(x) <= SPAN_TOL * x.op_norm().max(1.0))
    }

    /// The trace-preserving conditional expectation onto this subalgebra.
    pub fn cond_expect(&self, x: &Operator) -> Result<Operator> {
        if !TracialAlgebra::same(&self.parent, x.algebra()) {
            return Err(Error::ShapeMismatch("operator outside parent algebra".into()));
        }
        Ok(match &self.kind {
            SubalgebraKind::Basis(basis) => {
                let mut acc = Operator::zeros(&self.parent);
                for b in basis {
                    acc = &acc + &b.scale_c(b.inner(x));
                }
                acc
            }
            SubalgebraKind::TensorMarginal { rest, .. } => {
                tensor_marginal_expect(&self.parent, rest, x)
            }
            SubalgebraKind::Amplified { inner, m } => {
                amplified_expect(&self.parent, inner, *m, x)?
            }
        })
    }

    /// `M_m ⊗ self` inside `M_m ⊗ parent`.
    pub fn amplify(&self, m: usize) -> Self {
        Self {
            parent: self.parent.amplify(m),
            kind: SubalgebraKind::Amplified {
                inner: Box::new(self.clone()),
                m,
            },
        }
    }
}

fn matrix_units(alg: &Arc<TracialAlgebra>) -> Vec<Operator> {
    let mut out = Vec::with_capacity(alg.linear_dim());
    for (bi, b) in alg.blocks().iter().enumerate() {
        for i in 0..b.dim {
            for j in 0..b.dim {
                let mut op = Operator::zeros(alg).into_blocks();
                op[bi][(i, j)] = C64::new(1.0, 0.0);
                out.push(Operator::from_blocks(alg, op).expect("unit shape"));
            }
        }
    }
    out
}

/// `e_ab ⊗ s` in the amplified algebra.
fn amplify_unit(amp: &Arc<TracialAlgebra>, m: usize, a: usize, b: usize, s: &Operator) -> Operator {
    let blocks = s
        .blocks()
        .iter()
        .map(|blk| {
            let d = blk.nrows();
            let mut out = CMat::zeros(m * d, m * d);
            out.view_mut((a * d, b * d), (d, d)).copy_from(blk);
            out
        })
        .collect();
    Operator::from_blocks(amp, blocks).expect("amplified shape")
}

/// `Y[i,j] = Σ_s X[i·r + s, j·r + s]`.
fn partial_trace(x: &CMat, r: usize) -> CMat {
    if r == 1 {
        return x.clone();
    }
    let d = x.nrows() / r;
    CMat::from_fn(d, d, |i, j| (0..r).map(|s| x[(i * r + s, j * r + s)]).sum())
}

fn kron_identity(y: &CMat, r: usize) -> CMat {
    if r == 1 {
        return y.clone();
    }
    y.kronecker(&CMat::identity(r, r))
}

fn tensor_marginal_expect(parent: &Arc<TracialAlgebra>, rest: &Arc<TracialAlgebra>, x: &Operator) -> Operator {
    let nr = rest.num_blocks();
    let np = parent.num_blocks() / nr;
    let mut blocks = Vec::with_capacity(parent.num_blocks());
    for p in 0..np {
        let d = x.block(p * nr).nrows() / rest.blocks()[0].dim;
        let mut y = CMat::zeros(d, d);
        for (r, rb) in rest.blocks().iter().enumerate() {
            let w = rb.weight / rb.dim as f64;
            let xb = x.block(p * nr + r);
            if rb.dim == 1 {
                y.zip_apply(xb, |a, b| *a += b * w);
            } else {
                y += partial_trace(xb, rb.dim) * C64::new(w, 0.0);
            }
        }
        for rb in rest.blocks() {
            blocks.push(kron_identity(&y, rb.dim));
        }
    }
    Operator::from_blocks(parent, blocks).expect("marginal shape")
}

fn amplified_expect(parent: &Arc<TracialAlgebra>, inner: &Subalgebra, m: usize, x: &Operator) -> Result<Operator> {
    let base = inner.parent();
    let mut out: Vec<CMat> = parent
        .blocks()
        .iter()
        .map(|b| CMat::zeros(b.dim, b.dim))
        .collect();
    for a in 0..m {
        for b in 0..m {
            let sub: Vec<CMat> = x
                .blocks()
                .iter()
                .zip(base.blocks())
                .map(|(blk, bb)| blk.view((a * bb.dim, b * bb.dim), (bb.dim, bb.dim)).into_owned())
                .collect();
            let e = inner.cond_expect(&Operator::from_blocks(base, sub)?)?;
            for (o, (eb, bb)) in out.iter_mut().zip(e.blocks().iter().zip(base.blocks())) {
                o.view_mut((a * bb.dim, b * bb.dim), (bb.dim, bb.dim)).copy_from(eb);
            }
        }
    }
    Operator::from_blocks(parent, out)
}

/// Smallest unital *-subalgebra containing `generators`.
pub fn span_subalgebra(parent: &Arc<TracialAlgebra>, generators: &[Operator]) -> Result<Subalgebra> {
    span_subalgebra_with_cap(parent, generators, CLOSURE_ROUNDS)
}

pub fn span_subalgebra_with_cap(
    parent: &Arc<TracialAlgebra>,
    generators: &[Operator],
    max_rounds: usize,
) -> Result<Subalgebra> {
    for g in generators {
        if !TracialAlgebra::same(parent, g.algebra()) {
            return Err(Error::ShapeMismatch("generator outside parent algebra".into()));
        }
    }
    let mut basis = vec![Operator::identity(parent)];
    for g in generators {
        try_extend(&mut basis, g);
        try_extend(&mut basis, &g.adjoint());
    }
    let full = parent.linear_dim();
    // Products b_i b_j with max(i, j) ≥ `fresh` have not been tried yet.
    let mut fresh = 1;
    let mut rounds = 0;
    while fresh < basis.len() && basis.len() < full {
        if rounds == max_rounds {
            return Err(Error::ClosureNotReached(max_rounds));
        }
        rounds += 1;
        let n = basis.len();
        for i in 0..n {
            for j in 0..n {
                if i.max(j) < fresh {
                    continue;
                }
                let prod = &basis[i] * &basis[j];
                try_extend(&mut basis, &prod);
            }
        }
        fresh = n;
    }
    Ok(Subalgebra {
        parent: Arc::clone(parent),
        kind: SubalgebraKind::Basis(basis),
    })
}

/// One tensor factor: a full matrix algebra or a weighted diagonal algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorSpec {
    Matrix { dim: usize },
    Diagonal { weights: Vec<f64> },
}

impl FactorSpec {
    pub fn algebra(&self) -> Result<Arc<TracialAlgebra>> {
        match self {
            FactorSpec::Matrix { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidAlgebra("factor of dimension 0".into()));
                }
                TracialAlgebra::new(vec![Block { dim: *dim, weight: 1.0 }])
            }
            FactorSpec::Diagonal { weights } => TracialAlgebra::diagonal(weights),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Filtration {
    parent: Arc<TracialAlgebra>,
    levels: Vec<Subalgebra>,
    tensor: bool,
}

impl Filtration {
    /// Generic tower. `levels[0]` must be the scalars; nesting is not checked
    /// here, see [`verify_tower`].
    pub fn new(levels: Vec<Subalgebra>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty filtration".into()))?;
        let parent = Arc::clone(first.parent());
        if levels.iter().any(|l| !TracialAlgebra::same(&parent, l.parent())) {
            return Err(Error::ShapeMismatch("levels live in different algebras".into()));
        }
        if first.dim() != 1 {
            return Err(Error::InvalidArgument("level 0 must be the scalars".into()));
        }
        Ok(Self {
            parent,
            levels,
            tensor: false,
        })
    }

    /// Tower generated by successive prefixes of `generators`.
    pub fn generated(parent: &Arc<TracialAlgebra>, generators: &[Operator]) -> Result<Self> {
        let mut levels = vec![Subalgebra::scalars(parent)];
        for k in 1..=generators.len() {
            levels.push(span_subalgebra(parent, &generators[..k])?);
        }
        Self::new(levels)
    }

    pub fn parent(&self) -> &Arc<TracialAlgebra> {
        &self.parent
    }

    pub fn levels(&self) -> &[Subalgebra] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Subalgebra {
        &self.levels[k]
    }

    /// Index of the last level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_tensor(&self) -> bool {
        self.tensor
    }

    pub fn expect(&self, k: usize, x: &Operator) -> Result<Operator> {
        self.levels
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("level {k} > depth {}", self.depth())))?
            .cond_expect(x)
    }

    /// `M_m ⊗ M_k` for every level. The bottom level becomes `M_m`, not the scalars.
    pub fn amplify(&self, m: usize) -> Self {
        Self {
            parent: self.parent.amplify(m),
            levels: self.levels.iter().map(|l| l.amplify(m)).collect(),
            tensor: false,
        }
    }

    /// The same tower evaluated with basis projections instead of partial traces.
    pub fn generic_copy(&self) -> Result<Self> {
        let mut levels = Vec::with_capacity(self.levels.len());
        for l in &self.levels {
            let mut basis = Vec::new();
            for s in l.spanning_set() {
                try_extend(&mut basis, &s);
            }
            levels.push(Subalgebra::from_orthonormal_basis(&self.parent, basis)?);
        }
        Ok(Self {
            parent: Arc::clone(&self.parent),
            levels,
            tensor: false,
        })
    }
}

pub fn tensor_filtration(factors: &[FactorSpec]) -> Result<(Arc<TracialAlgebra>, Filtration)> {
    tensor_filtration_with_cap(factors, DEFAULT_DIM_CAP)
}

/// `A = F_1 ⊗ … ⊗ F_N` with `M_k = F_1 ⊗ … ⊗ F_k ⊗ 1`.
pub fn tensor_filtration_with_cap(
    factors: &[FactorSpec],
    cap: usize,
) -> Result<(Arc<TracialAlgebra>, Filtration)> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("no tensor factors".into()));
    }
    let algs = factors.iter().map(FactorSpec::algebra).collect::<Result<Vec<_>>>()?;
    let mut requested: usize = 1;
    for a in &algs {
        requested = requested.saturating_mul(a.total_dim());
    }
    if requested > cap {
        return Err(Error::DimensionCap { requested, cap });
    }
    // rests[k] = F_{k+1} ⊗ … ⊗ F_N.
    let n = algs.len();
    let mut rests = vec![TracialAlgebra::scalars(); n + 1];
    for k in (0..n).rev() {
        rests[k] = if k + 1 == n {
            Arc::clone(&algs[k])
        } else {
            algs[k].tensor(&rests[k + 1])
        };
    }
    let parent = Arc::clone(&rests[0]);
    let levels = (0..=n)
        .map(|k| Subalgebra {
            parent: Arc::clone(&parent),
            kind: SubalgebraKind::TensorMarginal {
                factors: algs.clone(),
                level: k,
                rest: Arc::clone(&rests[k]),
            },
        })
        .collect();
    Ok((
        Arc::clone(&parent),
        Filtration {
            parent,
            levels,
            tensor: true,
        },
    ))
}

/// `1 ⊗ … ⊗ y ⊗ … ⊗ 1` with `y` in slot `k` of a tensor filtration.
pub fn embed_factor(factors: &[FactorSpec], k: usize, y: &Operator) -> Result<Operator> {
    let algs = factors.iter().map(FactorSpec::algebra).collect::<Result<Vec<_>>>()?;
    if k >= algs.len() || !TracialAlgebra::same(&algs[k], y.algebra()) {
        return Err(Error::ShapeMismatch(format!("operator does not fit factor {k}")));
    }
    // Right-nested like the parent algebra, so block weights agree bit for bit.
    let mut acc: Option<Operator> = None;
    for (i, a) in algs.iter().enumerate().rev() {
        let f = if i == k { y.clone() } else { Operator::identity(a) };
        acc = Some(match acc {
            None => f,
            Some(r) => f.kron(&r),
        });
    }
    Ok(acc.expect("at least one factor"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerReport {
    pub samples: usize,
    /// Largest `‖E_m E_n x − E_min(m,n) x‖_∞ / ‖x‖_∞`, numerator bounded by block Frobenius norms.
    pub max_rel_error: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub passed: bool,
}

pub fn verify_tower(f: &Filtration, n_samples: usize, seed: u64) -> TowerReport {
    let mut rng = rng::stream(seed, 0x70_7e);
    let mut worst = 0.0_f64;
    let mut worst_pair = None;
    let depth = f.depth();
    for _ in 0..n_samples {
        let x = random_operator(f.parent(), &mut rng);
        let norm = x.op_norm().max(f64::MIN_POSITIVE);
        let ex: Vec<Operator> = (0..=depth).map(|k| f.expect(k, &x).expect("same algebra")).collect();
        for n in 0..=depth {
            for m in 0..=depth {
                let emn = f.expect(m, &ex[n]).expect("same algebra");
                let err = emn.dist_bound(&ex[m.min(n)]) / norm;
                if err > worst || worst_pair.is_none() {
                    worst = worst.max(err);
                    worst_pair = Some((m, n));
                }
            }
        }
    }
    TowerReport {
        samples: n_samples,
        max_rel_error: worst,
        worst_pair,
        passed: worst <= 1e-9,
    }
}

/// `q = 1_[1−η, 1](E(p))`.
pub fn compress_projection(sub: &Subalgebra, p: &Operator, eta: f64) -> Result<Operator> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} outside (0,1)")));
    }
    let defect = p.self_adjoint_defect().max((&(p * p) - p).op_norm());
    if defect > 1e-8 {
        return Err(Error::NotProjection { defect });
    }
    let ep = sub.cond_expect(p)?.hermitian_part();
    spectral_indicator(&ep, &Interval::closed(1.0 - eta, 1.0), false)
}

/// JSON descriptor of a filtration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiltrationJson {
    Tensor { factors: Vec<FactorSpec> },
    Generated { algebra: AlgebraJson, generators: Vec<OperatorJson> },
}

impl FiltrationJson {
    pub fn build(&self) -> Result<(Arc<TracialAlgebra>, Filtration)> {
        match self {
            FiltrationJson::Tensor { factors } => tensor_filtration(factors),
            FiltrationJson::Generated { algebra, generators } => {
                let alg = algebra.to_algebra()?;
                let gens = generators
                    .iter()
                    .map(|g| g.to_operator(&alg))
                    .collect::<Result<Vec<_>>>()?;
                Ok((Arc::clone(&alg), Filtration::generated(&alg, &gens)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{random_hermitian, random_positive};
    use crate::algebra::real_matrix;

    fn m2_units() -> (CMat, CMat) {
        (
            real_matrix(2, &[0.0, 1.0, 1.0, 0.0]),
            real_matrix(2, &[1.0, 0.0, 0.0, -1.0]),
        )
    }

    #[test]
    fn span_examples() {
        let m2 = TracialAlgebra::matrix(2);
        assert_eq!(span_subalgebra(&m2, &[]).unwrap().dim(), 1);
        let d = Operator::from_real_diagonal(&m2, &[1.0, 2.0]).unwrap();
        let s = span_subalgebra(&m2, &[d]).unwrap();
        assert_eq!(s.dim(), 2);
        let (sx, sz) = m2_units();
        let sx = Operator::from_blocks(&m2, vec![sx]).unwrap();
        let s = span_subalgebra(&m2, &[sx.clone()]).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.is_commutative());
        assert!(s.contains(&sx).unwrap());
        let sz = Operator::from_blocks(&m2, vec![sz]).unwrap();
        assert_eq!(span_subalgebra(&m2, &[sx, sz]).unwrap().dim(), 4);
    }

    #[test]
    fn closure_cap_is_enforced() {
        let m3 = TracialAlgebra::matrix(3);
        let mut r = rng::stream(4, 0);
        let g = random_hermitian(&m3, &mut r);
        let h = random_hermitian(&m3, &mut r);
        assert_eq!(
            span_subalgebra_with_cap(&m3, &[g.clone(), h.clone()], 0).unwrap_err(),
            Error::ClosureNotReached(0)
        );
        assert_eq!(span_subalgebra(&m3, &[g, h]).unwrap().dim(), 9);
    }

    #[test]
    fn diagonal_expectation() {
        let m2 = TracialAlgebra::matrix(2);
        let d = Operator::from_real_diagonal(&m2, &[1.0, 2.0]).unwrap();
        let s = span_subalgebra(&m2, &[d]).unwrap();
        let x = Operator::from_blocks(&m2, vec![real_matrix(2, &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        let e = s.cond_expect(&x).unwrap();
        let b = e.block(0);
        assert!((b[(0, 0)].re - 1.0).abs() < 1e-14 && (b[(1, 1)].re - 4.0).abs() < 1e-14);
        assert!(b[(0, 1)].norm() < 1e-14 && b[(1, 0)].norm() < 1e-14);

        let sc = Subalgebra::scalars(&m2);
        let e = sc.cond_expect(&x).unwrap();
        assert!(e.dist(&Operator::identity(&m2).scale(2.5)) < 1e-14);
    }

    #[test]
    fn tensor_first_factor() {
        let f = [FactorSpec::Matrix { dim: 2 }, FactorSpec::Matrix { dim: 2 }];
        let (alg, filt) = tensor_filtration(&f).unwrap();
        let m2 = TracialAlgebra::matrix(2);
        let mut r = rng::stream(8, 0);
        let x = random_operator(&m2, &mut r);
        let y = random_operator(&m2, &mut r);
        let xy = x.kron(&y).rehome(&alg).unwrap();
        let want = x.kron(&Operator::identity(&m2)).scale_c(y.trace());
        let e1 = filt.expect(1, &xy).unwrap();
        assert!(e1.dist(&want.rehome(&alg).unwrap()) < 1e-12);

        let generic = filt.generic_copy().unwrap();
        let z = random_operator(&alg, &mut r);
        for k in 0..=2 {
            let a = filt.expect(k, &z).unwrap();
            let b = generic.expect(k, &z).unwrap();
            assert!(a.dist(&b) < 1e-11, "level {k}");
        }
        let e0 = filt.expect(0, &z).unwrap();
        assert!(e0.dist(&Operator::scalar(&alg, z.trace())) < 1e-13);

        let xe = embed_factor(&f, 0, &x).unwrap().rehome(&alg).unwrap();
        let ye = embed_factor(&f, 1, &y).unwrap().rehome(&alg).unwrap();
        assert!(((&xe * &ye).trace() - x.trace() * y.trace()).norm() < 1e-14);
    }

    #[test]
    fn weighted_diagonal_towers() {
        let f = [
            FactorSpec::Diagonal { weights: vec![0.3, 0.7] },
            FactorSpec::Matrix { dim: 2 },
            FactorSpec::Diagonal { weights: vec![0.2, 0.5, 0.3] },
        ];
        let (alg, filt) = tensor_filtration(&f).unwrap();
        let generic = filt.generic_copy().unwrap();
        let x = random_operator(&alg, &mut rng::stream(1, 1));
        for k in 0..=3 {
            assert!(filt.expect(k, &x).unwrap().dist(&generic.expect(k, &x).unwrap()) < 1e-11);
        }
        assert!(verify_tower(&filt, 3, 5).passed);
    }

    #[test]
    fn dimension_cap() {
        let f = vec![FactorSpec::Matrix { dim: 2 }; 13];
        assert!(matches!(
            tensor_filtration(&f).unwrap_err(),
            Error::DimensionCap { requested: 8192, cap: 4096 }
        ));
    }

    #[test]
    fn tower_checks() {
        let f = vec![FactorSpec::Matrix { dim: 2 }; 3];
        let (_, filt) = tensor_filtration(&f).unwrap();
        let rep = verify_tower(&filt, 4, 1);
        assert!(rep.passed && rep.max_rel_error <= 1e-12, "{rep:?}");

        let m2 = TracialAlgebra::matrix(2);
        let single = Filtration::new(vec![Subalgebra::scalars(&m2)]).unwrap();
        assert!(verify_tower(&single, 3, 1).passed);

        // σx-algebra then σz-algebra: not nested.
        let (sx, sz) = m2_units();
        let a = span_subalgebra(&m2, &[Operator::from_blocks(&m2, vec![sx]).unwrap()]).unwrap();
        let b = span_subalgebra(&m2, &[Operator::from_blocks(&m2, vec![sz]).unwrap()]).unwrap();
        let bad = Filtration::new(vec![Subalgebra::scalars(&m2), a, b]).unwrap();
        assert!(!verify_tower(&bad, 3, 1).passed);
    }

    #[test]
    fn compression_example() {
        let alg = TracialAlgebra::uniform_diagonal(4);
        let g = Operator::from_real_diagonal(&alg, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let sub = span_subalgebra(&alg, &[g]).unwrap();
        let p = Operator::from_real_diagonal(&alg, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        let ep = sub.cond_expect(&p).unwrap().real_diagonal();
        for (a, b) in ep.iter().zip([1.0, 1.0, 0.5, 0.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        let q = compress_projection(&sub, &p, 0.4).unwrap();
        assert_eq!(q.real_diagonal(), vec![1.0, 1.0, 0.0, 0.0]);
        let one = Operator::identity(&alg);
        let deficit = (&one - &q).trace_re().unwrap();
        assert!((deficit - 0.5).abs() < 1e-14);
        assert!(deficit <= 0.25 / 0.4);

        let inside = Operator::from_real_diagonal(&alg, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(compress_projection(&sub, &inside, 0.5).unwrap().dist(&inside) < 1e-14);
        assert!(compress_projection(&sub, &one, 0.5).unwrap().dist(&one) < 1e-14);
        assert!(compress_projection(&sub, &p, 1.0).is_err());
        assert!(compress_projection(&sub, &p.scale(2.0), 0.5).is_err());
    }

    #[test]
    fn compression_norm_bound() {
        let m4 = TracialAlgebra::matrix(4);
        let mut r = rng::stream(12, 0);
        let sub = span_subalgebra(&m4, &[random_hermitian(&m4, &mut r)]).unwrap();
        let p = crate::algebra::random::random_projection(&m4, 3, &mut r);
        let eta = 0.6;
        let q = compress_projection(&sub, &p, eta).unwrap();
        assert!(sub.contains(&q).unwrap());
        let one = Operator::identity(&m4);
        assert!((&one - &q).trace_re().unwrap() <= (&one - &p).trace_re().unwrap() / eta + 1e-12);
        let ep = sub.cond_expect(&p).unwrap();
        // E(p) ≥ (1−η) q.
        let gap = (&ep - &q.scale(1.0 - eta)).hermitian_part();
        assert!(gap.spectrum().unwrap().min() >= -1e-12);
        for _ in 0..20 {
            let x = sub.cond_expect(&random_operator(&m4, &mut r)).unwrap();
            let lhs = (1.0 - eta) * (&x * &q).op_norm().powi(2);
            let rhs = (&x * &p).op_norm().powi(2);
            assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn amplified_expectation() {
        let f = vec![FactorSpec::Matrix { dim: 2 }; 2];
        let (_, filt) = tensor_filtration(&f).unwrap();
        let amp = filt.amplify(2);
        let generic = amp.generic_copy().unwrap();
        let x = random_operator(amp.parent(), &mut rng::stream(3, 3));
        for k in 0..=2 {
            assert!(amp.expect(k, &x).unwrap().dist(&generic.expect(k, &x).unwrap()) < 1e-11);
        }
        assert_eq!(amp.level(0).dim(), 4);
        assert!(verify_tower(&amp, 2, 2).passed);
    }

    #[test]
    fn positivity_of_expectation() {
        let m3 = TracialAlgebra::matrix(3);
        let mut r = rng::stream(21, 0);
        let sub = span_subalgebra(&m3, &[random_hermitian(&m3, &mut r)]).unwrap();
        for _ in 0..50 {
            let x = random_positive(&m3, &mut r);
            let e = sub.cond_expect(&x).unwrap().hermitian_part();
            assert!(e.spectrum().unwrap().min() >= -1e-10 * x.op_norm());
        }
    }

    #[test]
    fn json_descriptor() {
        let js = r#"{"kind":"tensor","factors":[{"kind":"matrix","dim":2},{"kind":"diagonal","weights":[0.5,0.5]}]}"#;
        let fj: FiltrationJson = serde_json::from_str(js).unwrap();
        let (alg, filt) = fj.build().unwrap();
        assert_eq!(alg.total_dim(), 4);
        assert_eq!(filt.depth(), 2);
        assert!(filt.is_tensor());
    }
}
