//! Seeded generators for the experiments.

use std::sync::Arc;

use rand::{Rng as _, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{iterated_log_unchecked, Martingale};
use crate::algebra::random::random_hermitian;
use crate::algebra::{real_matrix, CMat, Operator, TracialAlgebra, C64};
use crate::condexp::{embed_factor, tensor_filtration, FactorSpec, DEFAULT_DIM_CAP};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const MAX_GUE_DIM: usize = 512;
pub const MAX_GUE_STEPS: usize = 100_000;
/// Entry budget for materialising a full GUE path.
const GUE_PATH_ENTRIES: usize = 50_000_000;

/// Exact dyadic Rademacher martingale on `ℓ∞(2)^{⊗N}`: atom `ω ∈ {0,1}^N` carries
/// the path `d_k(ω) = σ_k (−1)^{ω_k}` with seeded global signs `σ_k`.
pub fn gen_dyadic_rademacher(steps: usize, atoms: usize, seed: u64) -> Result<Martingale> {
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step".into()));
    }
    if steps >= usize::BITS as usize || atoms != 1usize << steps {
        return Err(Error::InvalidArgument(format!(
            "the dyadic filtration needs atoms = 2^steps; use RademacherEnsemble for {atoms} atoms"
        )));
    }
    if atoms > DEFAULT_DIM_CAP {
        return Err(Error::DimensionCap {
            requested: atoms,
            cap: DEFAULT_DIM_CAP,
        });
    }
    let factors = vec![
        FactorSpec::Diagonal {
            weights: vec![0.5, 0.5],
        };
        steps
    ];
    let (alg, filt) = tensor_filtration(&factors)?;
    let coin = TracialAlgebra::diagonal(&[0.5, 0.5])?;
    let mut r = rng::stream(seed, 0);
    let mut ds = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = if r.random::<bool>() { 1.0 } else { -1.0 };
        let h = Operator::from_real_diagonal(&coin, &[s, -s])?;
        ds.push(embed_factor(&factors, k, &h)?.rehome(&alg)?);
    }
    Martingale::from_differences(Arc::new(filt), ds)
}

/// Independent ±1 walks, one per equally weighted atom, generated lazily.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEnsemble {
    pub atoms: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Sign stream of one atom: 64 signs per generator word.
pub struct SignStream {
    rng: Rng,
    word: u64,
    left: u32,
    remaining: usize,
}

impl Iterator for SignStream {
    type Item = i32;

    #[inline]
    fn next(&mut self) -> Option<i32> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let bit = (self.word & 1) as i32;
        self.word >>= 1;
        self.left -= 1;
        Some(2 * bit - 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for SignStream {}

impl RademacherEnsemble {
    pub fn new(atoms: usize, steps: usize, seed: u64) -> Result<Self> {
        if atoms == 0 || steps == 0 {
            return Err(Error::InvalidArgument("atoms and steps must be positive".into()));
        }
        Ok(Self { atoms, steps, seed })
    }

    pub fn signs(&self, atom: usize) -> SignStream {
        assert!(atom < self.atoms);
        SignStream {
            rng: rng::stream(self.seed, atom as u64),
            word: 0,
            left: 0,
            remaining: self.steps,
        }
    }

    /// `S_N` for every atom.
    pub fn final_sums(&self) -> Vec<i64> {
        (0..self.atoms)
            .map(|a| self.signs(a).map(i64::from).sum())
            .collect()
    }

    /// `S_n` at each requested `n` (sorted, ≤ steps) for one atom.
    pub fn sums_at(&self, atom: usize, ns: &[usize]) -> Vec<i64> {
        let mut out = Vec::with_capacity(ns.len());
        let mut s = 0i64;
        let mut it = ns.iter().peekable();
        for (i, e) in self.signs(atom).enumerate() {
            s += i64::from(e);
            while it.peek() == Some(&&(i + 1)) {
                out.push(s);
                it.next();
            }
        }
        out
    }
}

/// Two-point law with weights `(p, 1−p)` on values `(M, −Mp/(1−p))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointLaw {
    pub p: f64,
    pub m: f64,
}

pub fn gen_skewed_twopoint(p: f64, m: f64) -> Result<TwoPointLaw> {
    TwoPointLaw::new(p, m)
}

impl TwoPointLaw {
    pub fn new(p: f64, m: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} outside (0,1)")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("M = {m} must be positive")));
        }
        Ok(Self { p, m })
    }

    pub fn values(&self) -> [f64; 2] {
        [self.m, -self.m * self.p / (1.0 - self.p)]
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.p, 1.0 - self.p]
    }

    pub fn mean(&self) -> f64 {
        let [a, b] = self.values();
        let [p, q] = self.weights();
        p * a + q * b
    }

    /// `M² p / (1 − p)`.
    pub fn variance(&self) -> f64 {
        self.m * self.m * self.p / (1.0 - self.p)
    }

    pub fn op_norm(&self) -> f64 {
        let [a, b] = self.values();
        a.abs().max(b.abs())
    }

    /// `τ(e^{λd})`.
    pub fn mgf(&self, lambda: f64) -> f64 {
        let [a, b] = self.values();
        let [p, q] = self.weights();
        p * (lambda * a).exp() + q * (lambda * b).exp()
    }

    pub fn factor(&self) -> FactorSpec {
        FactorSpec::Diagonal {
            weights: self.weights().to_vec(),
        }
    }

    pub fn operator(&self) -> Result<Operator> {
        let alg = TracialAlgebra::diagonal(&self.weights())?;
        Operator::from_real_diagonal(&alg, &self.values())
    }
}

/// Law of the single-factor variables `h_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TensorLaw {
    /// `h_k = σ_x` in `M_2`.
    Pauli,
    /// `h_k` distributed by a two-point law on a weighted diagonal factor.
    TwoPoint { p: f64, m: f64 },
    /// Random traceless Hermitian in `M_dim` with `‖h_k‖_∞ = scale`.
    Hermitian { dim: usize, scale: f64 },
}

impl TensorLaw {
    pub fn factor(&self) -> Result<FactorSpec> {
        Ok(match *self {
            TensorLaw::Pauli => FactorSpec::Matrix { dim: 2 },
            TensorLaw::TwoPoint { p, m } => TwoPointLaw::new(p, m)?.factor(),
            TensorLaw::Hermitian { dim, scale } => {
                if dim < 2 || !(scale > 0.0) {
                    return Err(Error::InvalidArgument("hermitian law needs dim >= 2, scale > 0".into()));
                }
                FactorSpec::Matrix { dim }
            }
        })
    }
}

/// Factor variables `h_1, …, h_N` of a tensor-independent sum `Σ 1⊗…⊗h_k⊗…⊗1`.
#[derive(Clone, Debug)]
pub struct TensorSteps {
    pub factors: Vec<FactorSpec>,
    pub h: Vec<Operator>,
    /// Envelope constant `e` when `‖h_k‖ ≤ e√k/u_k` was enforced.
    pub envelope: Option<f64>,
}

impl TensorSteps {
    /// Draws `h_k`; with an envelope `e`, `h_k` is rescaled to `‖h_k‖ ≤ e√k/u_k`.
    /// Rescaling keeps `τ(h_k) = 0`.
    pub fn generate(steps: usize, law: TensorLaw, seed: u64, envelope: Option<f64>) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one step".into()));
        }
        if let Some(e) = envelope {
            if !(e > 0.0) {
                return Err(Error::InvalidArgument(format!("envelope e = {e} must be positive")));
            }
        }
        let factor = law.factor()?;
        let falg = factor.algebra()?;
        let mut r = rng::stream(seed, 1);
        let mut h = Vec::with_capacity(steps);
        for k in 1..=steps {
            let mut hk = match law {
                TensorLaw::Pauli => Operator::from_blocks(&falg, vec![real_matrix(2, &[0.0, 1.0, 1.0, 0.0])])?,
                TensorLaw::TwoPoint { p, m } => {
                    Operator::from_real_diagonal(&falg, &TwoPointLaw::new(p, m)?.values())?
                }
                TensorLaw::Hermitian { scale, .. } => {
                    let g = random_hermitian(&falg, &mut r).centered().hermitian_part();
                    let n = g.op_norm();
                    g.scale(scale / n)
                }
            };
            if let Some(e) = envelope {
                let kf = k as f64;
                let cap = e * kf.sqrt() / iterated_log_unchecked(kf).sqrt();
                let n = hk.op_norm();
                if n > cap {
                    hk = hk.scale(cap / n);
                }
            }
            h.push(hk);
        }
        Ok(Self {
            factors: vec![factor; steps],
            h,
            envelope,
        })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `(eigenvalue, weight)` atoms of `h_k` (1-based `k`).
    pub fn atoms(&self, k: usize) -> Vec<(f64, f64)> {
        self.h[k - 1].spectrum().expect("h_k is self-adjoint").atoms()
    }

    /// `τ(h_k²)`.
    pub fn variance(&self, k: usize) -> f64 {
        let h = &self.h[k - 1];
        h.inner(h).re
    }

    /// Dense martingale `x_n = Σ_{k≤n} 1⊗…⊗h_k⊗…⊗1` (subject to the dimension cap).
    pub fn martingale(&self) -> Result<Martingale> {
        let (alg, filt) = tensor_filtration(&self.factors)?;
        let ds = self
            .h
            .iter()
            .enumerate()
            .map(|(k, h)| embed_factor(&self.factors, k, h)?.rehome(&alg))
            .collect::<Result<Vec<_>>>()?;
        Martingale::from_differences(Arc::new(filt), ds)
    }
}

pub fn gen_tensor_hermitian(
    steps: usize,
    law: TensorLaw,
    seed: u64,
    envelope: Option<f64>,
) -> Result<Martingale> {
    TensorSteps::generate(steps, law, seed, envelope)?.martingale()
}

/// One GUE step in `M_d`: Hermitian with independent entries of variance `1/d`.
pub fn gue_step(d: usize, rng: &mut Rng) -> CMat {
    let s = 1.0 / (d as f64).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2 * s;
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        let g: f64 = rng.sample(StandardNormal);
        m[(i, i)] = C64::new(g * s, 0.0);
        for j in 0..i {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(re * half, im * half);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Streaming partial sums `x_n = h_1 + … + h_n` of i.i.d. GUE steps.
pub struct GueWalk {
    d: usize,
    rng: Rng,
    x: CMat,
    n: usize,
}

impl GueWalk {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_GUE_DIM {
            return Err(Error::DimensionCap {
                requested: d,
                cap: MAX_GUE_DIM,
            });
        }
        Ok(Self {
            d,
            rng: rng::stream(seed, 2),
            x: CMat::zeros(d, d),
            n: 0,
        })
    }

    pub fn step(&mut self) -> &CMat {
        let h = gue_step(self.d, &mut self.rng);
        self.x += h;
        self.n += 1;
        &self.x
    }

    pub fn current(&self) -> &CMat {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// `x_0 = 0, x_1, …, x_N` in `M_d`. Not an independent family in the tensor sense.
pub fn gen_gue_sum(d: usize, steps: usize, seed: u64) -> Result<Vec<Operator>> {
    if steps > MAX_GUE_STEPS {
        return Err(Error::DimensionCap {
            requested: steps,
            cap: MAX_GUE_STEPS,
        });
    }
    let mut walk = GueWalk::new(d, seed)?;
    if d * d * (steps + 1) > GUE_PATH_ENTRIES {
        return Err(Error::DimensionCap {
            requested: d * d * (steps + 1),
            cap: GUE_PATH_ENTRIES,
        });
    }
    let alg = TracialAlgebra::matrix(d);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(Operator::zeros(&alg));
    for _ in 0..steps {
        out.push(Operator::from_blocks(&alg, vec![walk.step().clone()])?);
    }
    Ok(out)
}
