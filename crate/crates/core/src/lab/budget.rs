//! Block deficits, their certified bound chain and the summability envelope.

use serde::{Deserialize, Serialize};

use super::blocks::{blocks, BlockScheme, EpsilonPack};
use crate::error::{Error, Result};
use crate::inequality::{chebyshev_witness, exp_bound2, Exp2Mode};
use crate::martingale::{iterated_log_unchecked, Martingale, ScaleTrack};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDeficit {
    /// Block index `n`, covering `k_n < m ≤ k_{n+1}`.
    pub n: usize,
    /// `s²_{k_{n+1}}`.
    pub s2_next: f64,
    pub deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcBudget {
    /// `(1+δ)²/(1+ε)`.
    pub exponent: f64,
    pub summable: bool,
    /// `8(ln s²_{k_{n+1}})^{−q}`, infinite while `s² ≤ 1`.
    pub envelope: Vec<f64>,
    /// `[(2 ln η) n]^{−q}`, infinite at `n = 0`.
    pub coarse: Vec<f64>,
    pub partial_observed: Vec<f64>,
    pub partial_envelope: Vec<f64>,
    pub under: Vec<bool>,
    /// First position from which every observed deficit sits under the envelope.
    pub under_from: Option<usize>,
}

impl BcBudget {
    pub fn all_under(&self) -> bool {
        self.under.iter().all(|&b| b)
    }
}

pub fn block_envelope(s2_next: f64, exponent: f64) -> f64 {
    let l = s2_next.ln();
    if l > 0.0 {
        8.0 * l.powf(-exponent)
    } else {
        f64::INFINITY
    }
}

pub fn bc_budget(deficits: &[BlockDeficit], pack: &EpsilonPack) -> BcBudget {
    let q = pack.exponent();
    let envelope: Vec<f64> = deficits.iter().map(|d| block_envelope(d.s2_next, q)).collect();
    let two_ln_eta = 2.0 * pack.eta.ln();
    let coarse = deficits
        .iter()
        .map(|d| {
            if d.n == 0 {
                f64::INFINITY
            } else {
                (two_ln_eta * d.n as f64).powf(-q)
            }
        })
        .collect();
    let scan = |xs: &mut dyn Iterator<Item = f64>| {
        let mut acc = 0.0;
        xs.map(|x| {
            acc += x;
            acc
        })
        .collect::<Vec<f64>>()
    };
    let partial_observed = scan(&mut deficits.iter().map(|d| d.deficit));
    let partial_envelope = scan(&mut envelope.iter().copied());
    let under: Vec<bool> = deficits
        .iter()
        .zip(&envelope)
        .map(|(d, e)| d.deficit <= *e)
        .collect();
    let under_from = match under.iter().rposition(|&b| !b) {
        None => Some(0),
        Some(i) if i + 1 < under.len() => Some(i + 1),
        Some(_) => None,
    };
    BcBudget {
        exponent: q,
        summable: q > 1.0,
        envelope,
        coarse,
        partial_observed,
        partial_envelope,
        under,
        under_from,
    }
}

/// One block of the certified chain for a unit-step Rademacher walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockChain {
    pub n: usize,
    pub k_lo: usize,
    pub k_hi: usize,
    pub s2: f64,
    pub u: f64,
    pub lambda: f64,
    pub p: f64,
    /// `τ(1 − ∧_m 1_[0,√2(1+δ)](|x_m|/(s u)))`, computed exactly.
    pub observed: f64,
    /// `4 r^{−p} ‖y‖_p^p` with `y = λx_{k_{n+1}}/(s u)` and `r = λ√2(1+δ)`.
    pub doob: f64,
    /// `4 r^{−p} p^p e^{−p} τ(e^y + e^{−y})`.
    pub poly_exp: f64,
    /// `poly_exp` with `τ(e^{±y})` replaced by the corrected exponential bound.
    pub exp_chain: f64,
    pub envelope: f64,
    /// `n ≥ N₁`, `p ≥ 4`, `λ` in the corrected range, `√2(1+δ)u/(1+ε) ≥ 1`, `u² = ln ln s²`.
    pub hypotheses: bool,
}

impl BlockChain {
    /// `observed ≤ doob ≤ poly_exp ≤ exp_chain ≤ envelope` (relative slack 1e-9).
    pub fn chain_holds(&self) -> bool {
        let le = |a: f64, b: f64| a <= b * (1.0 + 1e-9) + 1e-300;
        le(self.observed, self.doob)
            && le(self.doob, self.poly_exp)
            && le(self.poly_exp, self.exp_chain)
            && le(self.exp_chain, self.envelope)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicChain {
    pub steps: usize,
    pub pack: EpsilonPack,
    pub scheme: BlockScheme,
    pub blocks: Vec<BlockChain>,
    pub budget: BcBudget,
}

impl DyadicChain {
    /// First block index from which all hypotheses hold.
    pub fn horizon(&self) -> Option<usize> {
        match self.blocks.iter().rposition(|b| !b.hypotheses) {
            None => self.blocks.first().map(|b| b.n),
            Some(i) => self.blocks.get(i + 1).map(|b| b.n),
        }
    }

    pub fn past_horizon(&self) -> &[BlockChain] {
        match self.horizon() {
            Some(h) => &self.blocks[self.blocks.iter().position(|b| b.n == h).unwrap_or(0)..],
            None => &[],
        }
    }
}

/// Law of `S_m` for a ±1 walk, stored with offset `N` (index `S + N`).
struct Walk {
    offset: usize,
    p: Vec<f64>,
    m: usize,
}

impl Walk {
    fn new(n: usize) -> Self {
        let mut p = vec![0.0; 2 * n + 3];
        p[n + 1] = 1.0;
        Self { offset: n + 1, p, m: 0 }
    }

    fn step(&mut self) {
        self.m += 1;
        let (lo, hi) = (self.offset - self.m, self.offset + self.m);
        let mut prev = 0.0;
        for i in lo - 1..=hi {
            let cur = self.p[i];
            self.p[i] = 0.5 * (prev + self.p[i + 1]);
            prev = cur;
        }
    }

    fn kill_beyond(&mut self, cut: f64) {
        for i in self.offset - self.m..=self.offset + self.m {
            let s = i.abs_diff(self.offset) as f64;
            if s > cut {
                self.p[i] = 0.0;
            }
        }
    }

    fn mass(&self) -> f64 {
        self.p.iter().sum()
    }

    fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        (self.offset - self.m..=self.offset + self.m)
            .filter(|&i| self.p[i] > 0.0)
            .map(|i| self.p[i] * f(i as f64 - self.offset as f64))
            .sum()
    }
}

const MAX_DYADIC_STEPS: usize = 1 << 16;

/// Certified chain on a symmetric unit Rademacher walk (`s²_m = m`) for every block.
///
/// Works on the exact law of the walk, which is also the joint spectral law of the
/// tensor-product Rademacher martingale on `ℓ∞(2)^{⊗N}`.
pub fn dyadic_block_chain(steps: usize, pack: &EpsilonPack) -> Result<DyadicChain> {
    if steps == 0 || steps > MAX_DYADIC_STEPS {
        return Err(Error::DimensionCap {
            requested: steps,
            cap: MAX_DYADIC_STEPS,
        });
    }
    let s2: Vec<f64> = (0..=steps).map(|m| m as f64).collect();
    let scheme = blocks(&s2, pack.eta, Some(pack.eps_prime))?;
    let q = pack.exponent();
    let t = std::f64::consts::SQRT_2 * (1.0 + pack.delta);
    let mut free = Walk::new(steps);
    let mut out = Vec::with_capacity(scheme.k.len());
    for n in 0..scheme.k.len() - 1 {
        let (k_lo, k_hi) = (scheme.k[n], scheme.k[n + 1]);
        let mut kept = Walk {
            offset: free.offset,
            p: free.p.clone(),
            m: free.m,
        };
        let big_s2 = s2[k_hi];
        let u = iterated_log_unchecked(big_s2).sqrt();
        let scale = big_s2.sqrt() * u;
        let cut = t * scale;
        for _ in k_lo..k_hi {
            free.step();
            kept.step();
            kept.kill_beyond(cut);
        }
        let observed = (1.0 - kept.mass()).max(0.0);
        let lambda = t * u * u / (1.0 + pack.eps);
        let p = lambda * t;
        let r = lambda * t;
        let y = |s: f64| lambda * s / scale;
        let (abs_p, two_cosh) = if scale > 0.0 {
            (free.expect(|s| y(s).abs().powf(p)), free.expect(|s| 2.0 * y(s).cosh()))
        } else {
            (0.0, 2.0)
        };
        let lead = 4.0 * r.powf(-p);
        let poly_pref = lead * p.powf(p) * (-p).exp();
        let m_step = if scale > 0.0 { 1.0 / scale } else { f64::INFINITY };
        let d2 = if u > 0.0 { 1.0 / (u * u) } else { f64::INFINITY };
        let in_range = exp_bound2(m_step, d2, lambda, pack.eps, Exp2Mode::Corrected);
        let exp_rhs = match in_range {
            Ok(v) => v,
            Err(_) => ((1.0 + pack.eps) * lambda * lambda * d2 / 2.0).exp(),
        };
        let envelope = block_envelope(big_s2, q);
        let hypotheses = scheme.n1.is_some_and(|n1| n >= n1)
            && p >= 4.0
            && in_range.is_ok()
            && t * u / (1.0 + pack.eps) >= 1.0
            && big_s2.ln() > std::f64::consts::E;
        out.push(BlockChain {
            n,
            k_lo,
            k_hi,
            s2: big_s2,
            u,
            lambda,
            p,
            observed,
            doob: lead * abs_p,
            poly_exp: poly_pref * two_cosh,
            exp_chain: poly_pref * 2.0 * exp_rhs,
            envelope,
            hypotheses,
        });
    }
    let deficits: Vec<BlockDeficit> = out
        .iter()
        .map(|b| BlockDeficit {
            n: b.n,
            s2_next: b.s2,
            deficit: b.observed,
        })
        .collect();
    let budget = bc_budget(&deficits, pack);
    Ok(DyadicChain {
        steps,
        pack: *pack,
        scheme,
        blocks: out,
        budget,
    })
}

/// Per-block witness deficits of a dense martingale through `chebyshev_witness`.
pub fn operator_block_deficits(
    mart: &Martingale,
    track: &ScaleTrack,
    scheme: &BlockScheme,
    pack: &EpsilonPack,
) -> Result<Vec<BlockDeficit>> {
    let t = std::f64::consts::SQRT_2 * (1.0 + pack.delta);
    let mut out = Vec::new();
    for n in 0..scheme.k.len() - 1 {
        let (k_lo, k_hi) = (scheme.k[n], scheme.k[n + 1]);
        let s2 = track.s2[k_hi];
        let scale = s2.sqrt() * track.u[k_hi];
        let deficit = if k_hi == k_lo || scale == 0.0 {
            0.0
        } else {
            let ys: Vec<_> = (k_lo + 1..=k_hi).map(|m| mart.x(m).scale(1.0 / scale)).collect();
            chebyshev_witness(&ys, t, 2.0)?.deficit
        };
        out.push(BlockDeficit {
            n,
            s2_next: s2,
            deficit,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::blocks::epsilon_solver;
    use crate::martingale::{bracket, gen_dyadic_rademacher};
    use proptest::prelude::*;

    #[test]
    fn synthetic_envelope_deficits() {
        let pack = epsilon_solver(0.3).unwrap();
        let s2s: Vec<f64> = (1..=60).map(|n| pack.eta.powi(2 * n)).collect();
        let q = pack.exponent();
        let ds: Vec<BlockDeficit> = s2s
            .iter()
            .enumerate()
            .map(|(n, &s2)| BlockDeficit {
                n,
                s2_next: s2,
                deficit: block_envelope(s2, q),
            })
            .collect();
        let b = bc_budget(&ds, &pack);
        assert!(b.summable && b.all_under());
        for (o, e) in b.partial_observed.iter().zip(&b.partial_envelope) {
            if e.is_finite() {
                assert!((o - e).abs() <= 1e-12 * e);
            }
        }
        assert_eq!(b.under_from, Some(0));
        // The envelope sits below the coarse bound once s² ≥ η^{2n}.
        for (e, c) in b.envelope.iter().zip(&b.coarse).skip(1) {
            assert!(*e <= 8.0 * c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dense_and_exact_block_deficits_agree() {
        let pack = epsilon_solver(0.3).unwrap();
        let steps = 12;
        let mart = gen_dyadic_rademacher(steps, 1 << steps, 5).unwrap();
        let track = bracket(&mart).unwrap();
        let chain = dyadic_block_chain(steps, &pack).unwrap();
        let dense = operator_block_deficits(&mart, &track, &chain.scheme, &pack).unwrap();
        assert_eq!(dense.len(), chain.blocks.len());
        for (d, c) in dense.iter().zip(&chain.blocks) {
            assert!((d.deficit - c.observed).abs() < 1e-12, "block {}: {} vs {}", d.n, d.deficit, c.observed);
        }
        assert!(chain.blocks.iter().any(|b| b.observed > 0.0));
    }

    #[test]
    fn chain_certifies_past_horizon() {
        let pack = epsilon_solver(0.3).unwrap();
        let chain = dyadic_block_chain(4096, &pack).unwrap();
        let past = chain.past_horizon();
        assert!(!past.is_empty(), "horizon not reached");
        for b in past {
            assert!(b.chain_holds(), "{b:?}");
            assert!(b.observed <= b.envelope);
        }
        assert!(chain.budget.summable);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn exponent_exceeds_one(dp in 1e-3f64..20.0) {
            let pack = epsilon_solver(dp).unwrap();
            let b = bc_budget(&[], &pack);
            prop_assert!(b.summable && b.exponent > 1.0);
        }
    }
}
