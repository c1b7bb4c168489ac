//! Finite-horizon LIL experiments: ratio series, witnesses and block budgets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::{blocks, epsilon_solver, BlockScheme, EpsilonPack};
use super::budget::{bc_budget, BcBudget, BlockDeficit};
use super::stats::{quantile, Quantiles};
use crate::algebra::{mu_of_atoms, projection_meet, Interval, Operator, Spectrum, TracialAlgebra};
use crate::error::{Error, Result};
use crate::martingale::{hw_split, iterated_log_unchecked, GueWalk, TensorLaw, TensorSteps};
use crate::rng;

pub const DEFAULT_TRACE_BUDGET: f64 = 0.05;
/// Joint atom count up to which tensor runs enumerate the product law exactly.
pub const EXACT_ATOM_CAP: usize = 4096;
const MAX_CLASSICAL_WORK: u128 = 20_000_000_000;
const MAX_TENSOR_WORK: u128 = 2_000_000_000;
const MAX_TENSOR_STEPS: usize = 200_000;
const TAIL_BISECTION_STEPS: usize = 48;

fn default_budget() -> f64 {
    DEFAULT_TRACE_BUDGET
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_delta_prime() -> f64 {
    0.3
}

fn default_window() -> usize {
    1000
}

fn default_atoms() -> usize {
    1024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Generator {
    /// Independent ±1 walks on equally weighted atoms.
    Classical {
        atoms: usize,
        steps: usize,
        #[serde(default = "default_window")]
        window_start: usize,
    },
    /// `x_n = Σ_{k≤n} 1⊗…⊗h_k⊗…⊗1`; `atoms` sampled paths when the product law is too large.
    Tensor {
        law: TensorLaw,
        steps: usize,
        #[serde(default)]
        envelope: Option<f64>,
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
    /// Sums of i.i.d. GUE matrices in `M_dim`.
    Gue { dim: usize, steps: usize },
    /// `x_n = 0`.
    Zero { steps: usize },
}

impl Generator {
    pub fn steps(&self) -> usize {
        match *self {
            Generator::Classical { steps, .. }
            | Generator::Tensor { steps, .. }
            | Generator::Gue { steps, .. }
            | Generator::Zero { steps } => steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilConfig {
    #[serde(flatten)]
    pub generator: Generator,
    /// Empty means a log-spaced default grid ending at `steps`.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// Trace budget `ε̃` of the s-number and witness ratios.
    #[serde(default = "default_budget")]
    pub trace_budget: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Drives the block scheme of the budget trace.
    #[serde(default = "default_delta_prime")]
    pub delta_prime: f64,
}

impl LilConfig {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            checkpoints: Vec::new(),
            trace_budget: DEFAULT_TRACE_BUDGET,
            seeds: default_seeds(),
            delta_prime: default_delta_prime(),
        }
    }

    pub fn with_checkpoints(mut self, ns: Vec<usize>) -> Self {
        self.checkpoints = ns;
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_budget(mut self, b: f64) -> Self {
        self.trace_budget = b;
        self
    }

    /// Sorted, deduplicated checkpoints inside `1..=steps`.
    pub fn resolved_checkpoints(&self) -> Result<Vec<usize>> {
        let n = self.generator.steps();
        if n == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        let mut ns = if self.checkpoints.is_empty() {
            default_checkpoints(n)
        } else {
            self.checkpoints.clone()
        };
        ns.sort_unstable();
        ns.dedup();
        if let Some(&bad) = ns.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::InvalidArgument(format!("checkpoint {bad} outside 1..={n}")));
        }
        Ok(ns)
    }

    fn validate(&self) -> Result<()> {
        if !(self.trace_budget > 0.0 && self.trace_budget < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "trace budget {} outside (0,1)",
                self.trace_budget
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("no seeds".into()));
        }
        match self.generator {
            Generator::Classical {
                atoms,
                steps,
                window_start,
            } => {
                if atoms == 0 || window_start == 0 || window_start > steps {
                    return Err(Error::InvalidArgument(format!(
                        "need atoms > 0 and 1 <= window_start <= steps, got {atoms}, {window_start}"
                    )));
                }
                let work = atoms as u128 * steps as u128;
                if work > MAX_CLASSICAL_WORK {
                    return Err(Error::DimensionCap {
                        requested: work.min(usize::MAX as u128) as usize,
                        cap: MAX_CLASSICAL_WORK as usize,
                    });
                }
            }
            Generator::Tensor { steps, atoms, .. } => {
                if atoms == 0 {
                    return Err(Error::InvalidArgument("atoms must be positive".into()));
                }
                if steps > MAX_TENSOR_STEPS {
                    return Err(Error::DimensionCap {
                        requested: steps,
                        cap: MAX_TENSOR_STEPS,
                    });
                }
                let work = atoms as u128 * steps as u128;
                if work > MAX_TENSOR_WORK {
                    return Err(Error::DimensionCap {
                        requested: work.min(usize::MAX as u128) as usize,
                        cap: MAX_TENSOR_WORK as usize,
                    });
                }
            }
            Generator::Gue { .. } | Generator::Zero { .. } => {}
        }
        Ok(())
    }
}

/// About 24 log-spaced points in `1..=n`, always including `n`.
pub fn default_checkpoints(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..24)
        .map(|i| ((n as f64).powf(i as f64 / 23.0)).round() as usize)
        .map(|k| k.clamp(1, n))
        .collect();
    v.push(n);
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub seed: u64,
    pub n: usize,
    pub s2: f64,
    pub u: f64,
    /// `‖x_n‖/(s_n u_n)`.
    pub op_ratio: f64,
    /// `μ_ε̃(x_n)/(s_n u_n)`.
    pub snum_ratio: f64,
    /// `‖x_n e‖/(s_n u_n)` for `e = 1_[0,μ_ε̃](|x_n|)`.
    pub witness_ratio: f64,
    /// `max_{m ≥ n} ‖x_m e‖/(s_m u_m)` over later checkpoints, one meet witness `e`.
    pub tail_witness_ratio: f64,
    /// `τ(1 − e)` of the tail witness.
    pub deficit: f64,
}

impl RatioRow {
    pub const CSV_HEADER: &'static str = "seed,n,s2,u,op_ratio,snum_ratio,witness_ratio,tail_witness_ratio,deficit";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.s2,
            self.u,
            self.op_ratio,
            self.snum_ratio,
            self.witness_ratio,
            self.tail_witness_ratio,
            self.deficit
        )
    }
}

/// Per-seed running maxima `max_{w ≤ n ≤ N} |S_n|/√(nL(n))` across atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMax {
    pub seed: u64,
    pub window_start: usize,
    pub median: f64,
    pub p99: f64,
    pub max: f64,
    #[serde(skip)]
    pub maxima: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedBudget {
    pub seed: u64,
    pub deficits: Vec<BlockDeficit>,
    pub budget: BcBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(id: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub op: Quantiles,
    pub snum: Quantiles,
    pub witness: Quantiles,
    pub tail_witness: Quantiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: LilConfig,
    pub checkpoints: Vec<usize>,
    pub rows: Vec<RatioRow>,
    pub summary: RatioSummary,
    pub classical: Vec<EnsembleMax>,
    pub budgets: Vec<SeedBudget>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn rows_for(&self, seed: u64) -> impl Iterator<Item = &RatioRow> {
        self.rows.iter().filter(move |r| r.seed == seed)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(RatioRow::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }
}

fn scale(s2: f64) -> (f64, f64) {
    let u = iterated_log_unchecked(s2).sqrt();
    (u, s2.sqrt() * u)
}

fn ratio(v: f64, c: f64) -> f64 {
    if c > 0.0 {
        v / c
    } else {
        0.0
    }
}

/// Checkpoint values of a commuting family on weighted atoms.
pub(crate) struct AtomPaths {
    pub weights: Vec<f64>,
    /// `values[j][a]` is `x_{n_j}` on atom `a`.
    pub values: Vec<Vec<f64>>,
}

pub(crate) fn rows_from_atoms(seed: u64, ns: &[usize], s2: &[f64], paths: &AtomPaths, budget: f64) -> Vec<RatioRow> {
    let w = &paths.weights;
    let mut theta = vec![0.0f64; w.len()];
    let mut rows = Vec::with_capacity(ns.len());
    for j in (0..ns.len()).rev() {
        let (u, c) = scale(s2[j]);
        let r: Vec<f64> = paths.values[j].iter().map(|v| ratio(v.abs(), c)).collect();
        for (t, x) in theta.iter_mut().zip(&r) {
            *t = t.max(*x);
        }
        let op = r.iter().copied().fold(0.0, f64::max);
        let snum = mu_of_atoms(r.iter().copied().zip(w.iter().copied()).collect(), budget);
        let witness = r.iter().copied().filter(|&x| x <= snum).fold(0.0, f64::max);
        let tail = mu_of_atoms(theta.iter().copied().zip(w.iter().copied()).collect(), budget);
        let deficit: f64 = theta.iter().zip(w).filter(|(t, _)| **t > tail).map(|(_, w)| w).sum();
        let tail_ratio = theta.iter().copied().filter(|&t| t <= tail).fold(0.0, f64::max);
        rows.push(RatioRow {
            seed,
            n: ns[j],
            s2: s2[j],
            u,
            op_ratio: op,
            snum_ratio: snum,
            witness_ratio: witness,
            tail_witness_ratio: tail_ratio,
            deficit,
        });
    }
    rows.reverse();
    rows
}

pub(crate) fn rows_from_operators(
    seed: u64,
    ns: &[usize],
    s2: &[f64],
    xs: &[Operator],
    budget: f64,
) -> Result<Vec<RatioRow>> {
    let specs: Vec<Spectrum> = xs.iter().map(Operator::modulus_spectrum).collect();
    let scales: Vec<(f64, f64)> = s2.iter().map(|&s| scale(s)).collect();
    let alg = xs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no checkpoints".into()))?
        .algebra()
        .clone();
    let one = Operator::identity(&alg);
    let ops: Vec<f64> = specs.iter().zip(&scales).map(|(sp, &(_, c))| ratio(sp.max(), c)).collect();
    let mut rows = Vec::with_capacity(ns.len());
    for j in 0..ns.len() {
        let (u, c) = scales[j];
        let snum = ratio(mu_of_atoms(specs[j].atoms(), budget), c);
        let witness = if c > 0.0 {
            let e = specs[j].indicator(&Interval::closed(0.0, snum * c));
            (&xs[j] * &e).op_norm() / c
        } else {
            0.0
        };
        let later: Vec<usize> = (j..ns.len()).filter(|&m| scales[m].1 > 0.0).collect();
        let meet = |theta: f64| -> Result<Operator> {
            if later.is_empty() {
                return Ok(one.clone());
            }
            let ps: Vec<Operator> = later
                .iter()
                .map(|&m| specs[m].indicator(&Interval::closed(0.0, theta * scales[m].1)))
                .collect();
            projection_meet(&ps)
        };
        let deficit_of = |e: &Operator| -> Result<f64> { Ok((&one - e).trace_re()?.max(0.0)) };
        let mut hi = ops[j..].iter().copied().fold(0.0, f64::max);
        let mut lo = 0.0;
        let mut e = meet(hi)?;
        for _ in 0..TAIL_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let cand = meet(mid)?;
            if deficit_of(&cand)? <= budget {
                hi = mid;
                e = cand;
            } else {
                lo = mid;
            }
        }
        // Widen past eigenvalue clusters split by rounding; the deficit can only drop.
        let widened = meet(hi * (1.0 + 1e-10))?;
        if deficit_of(&widened)? <= budget {
            e = widened;
        }
        let tail_ratio = later
            .iter()
            .map(|&m| (&xs[m] * &e).op_norm() / scales[m].1)
            .fold(0.0, f64::max);
        rows.push(RatioRow {
            seed,
            n: ns[j],
            s2: s2[j],
            u,
            op_ratio: ops[j],
            snum_ratio: snum,
            witness_ratio: witness,
            tail_witness_ratio: tail_ratio,
            deficit: deficit_of(&e)?,
        });
    }
    Ok(rows)
}

/// Per-step cut `√2(1+δ)s_{k_{n+1}}u_{k_{n+1}}` and block index for steps `1..=N`.
struct BlockCuts {
    scheme: BlockScheme,
    cut: Vec<f64>,
    block: Vec<u32>,
}

fn block_cuts(s2: &[f64], pack: &EpsilonPack) -> Option<BlockCuts> {
    let scheme = blocks(s2, pack.eta, Some(pack.eps_prime)).ok()?;
    let t = std::f64::consts::SQRT_2 * (1.0 + pack.delta);
    let n = s2.len() - 1;
    let mut cut = vec![f64::INFINITY; n + 1];
    let mut block = vec![u32::MAX; n + 1];
    for b in 0..scheme.k.len() - 1 {
        let (lo, hi) = (scheme.k[b], scheme.k[b + 1]);
        let c = t * scale(s2[hi]).1;
        for m in lo + 1..=hi {
            cut[m] = c;
            block[m] = b as u32;
        }
    }
    Some(BlockCuts { scheme, cut, block })
}

impl BlockCuts {
    fn num_blocks(&self) -> usize {
        self.scheme.k.len() - 1
    }

    fn budget(&self, s2: &[f64], hits: &[f64], pack: &EpsilonPack, seed: u64) -> SeedBudget {
        let deficits: Vec<BlockDeficit> = (0..self.num_blocks())
            .map(|n| BlockDeficit {
                n,
                s2_next: s2[self.scheme.k[n + 1]],
                deficit: hits[n],
            })
            .collect();
        let budget = bc_budget(&deficits, pack);
        SeedBudget { seed, deficits, budget }
    }
}

struct SeedRun {
    rows: Vec<RatioRow>,
    classical: Option<EnsembleMax>,
    budget: Option<SeedBudget>,
}

fn run_classical(atoms: usize, steps: usize, window: usize, ns: &[usize], cfg: &LilConfig, seed: u64) -> Result<SeedRun> {
    let ens = crate::martingale::RademacherEnsemble::new(atoms, steps, seed)?;
    let s2_all: Vec<f64> = (0..=steps).map(|m| m as f64).collect();
    let inv: Vec<f64> = s2_all
        .iter()
        .map(|&m| if m > 0.0 { 1.0 / scale(m).1 } else { 0.0 })
        .collect();
    let pack = epsilon_solver(cfg.delta_prime)?;
    let cuts = block_cuts(&s2_all, &pack);
    let nb = cuts.as_ref().map_or(0, BlockCuts::num_blocks);
    let per_atom: Vec<(Vec<i64>, f64, Vec<bool>)> = (0..atoms)
        .into_par_iter()
        .map(|a| {
            let mut s = 0i64;
            let mut at = Vec::with_capacity(ns.len());
            let mut next = 0usize;
            let mut best = 0.0f64;
            let mut hit = vec![false; nb];
            for (i, e) in ens.signs(a).enumerate() {
                let m = i + 1;
                s += i64::from(e);
                let abs = s.unsigned_abs() as f64;
                if m >= window {
                    best = best.max(abs * inv[m]);
                }
                if let Some(c) = &cuts {
                    if abs > c.cut[m] {
                        hit[c.block[m] as usize] = true;
                    }
                }
                if next < ns.len() && ns[next] == m {
                    at.push(s);
                    next += 1;
                }
            }
            (at, best, hit)
        })
        .collect();
    let w = 1.0 / atoms as f64;
    let paths = AtomPaths {
        weights: vec![w; atoms],
        values: (0..ns.len())
            .map(|j| per_atom.iter().map(|p| p.0[j] as f64).collect())
            .collect(),
    };
    let s2: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let rows = rows_from_atoms(seed, ns, &s2, &paths, cfg.trace_budget);
    let maxima: Vec<f64> = per_atom.iter().map(|p| p.1).collect();
    let budget = cuts.as_ref().map(|c| {
        let hits: Vec<f64> = (0..nb)
            .map(|b| per_atom.iter().filter(|p| p.2[b]).count() as f64 * w)
            .collect();
        c.budget(&s2_all, &hits, &pack, seed)
    });
    Ok(SeedRun {
        rows,
        classical: Some(EnsembleMax {
            seed,
            window_start: window,
            median: quantile(&maxima, 0.5),
            p99: quantile(&maxima, 0.99),
            max: quantile(&maxima, 1.0),
            maxima,
        }),
        budget,
    })
}

/// Spectral atoms of each `h_k` and the cumulative brackets `s²_0..s²_N`.
pub(crate) struct TensorAtoms {
    pub atoms: Vec<Vec<(f64, f64)>>,
    pub s2: Vec<f64>,
}

impl TensorAtoms {
    pub fn of(ts: &TensorSteps) -> Self {
        let mut s2 = vec![0.0];
        let mut atoms = Vec::with_capacity(ts.len());
        for k in 1..=ts.len() {
            s2.push(s2[k - 1] + ts.variance(k));
            let mut a = ts.atoms(k);
            a.retain(|x| x.1 > 0.0);
            atoms.push(a);
        }
        Self { atoms, s2 }
    }

    /// Joint atom count, `None` past `cap`.
    pub fn joint_count(&self, cap: usize) -> Option<usize> {
        let mut c = 1usize;
        for a in &self.atoms {
            c = c.checked_mul(a.len()).filter(|&c| c <= cap)?;
        }
        Some(c)
    }
}

/// Walks one joint atom; `pick(k)` selects the atom of `h_k` (0-based `k`).
fn walk_atom(
    ta: &TensorAtoms,
    ns: &[usize],
    cuts: Option<&BlockCuts>,
    nb: usize,
    mut pick: impl FnMut(usize) -> usize,
) -> (Vec<f64>, f64, Vec<bool>) {
    let mut x = 0.0;
    let mut wgt = 1.0;
    let mut at = Vec::with_capacity(ns.len());
    let mut hit = vec![false; nb];
    let mut next = 0;
    for (k, a) in ta.atoms.iter().enumerate() {
        let m = k + 1;
        let (v, w) = a[pick(k)];
        x += v;
        wgt *= w;
        if let Some(c) = cuts {
            if x.abs() > c.cut[m] {
                hit[c.block[m] as usize] = true;
            }
        }
        if next < ns.len() && ns[next] == m {
            at.push(x);
            next += 1;
        }
    }
    (at, wgt, hit)
}

fn tensor_paths(ta: &TensorAtoms, ns: &[usize], atoms: usize, seed: u64, cuts: Option<&BlockCuts>) -> (AtomPaths, Vec<f64>) {
    let nb = cuts.map_or(0, BlockCuts::num_blocks);
    let per: Vec<(Vec<f64>, f64, Vec<bool>)> = match ta.joint_count(EXACT_ATOM_CAP) {
        Some(total) => (0..total)
            .into_par_iter()
            .map(|idx| {
                // Mixed radix with the first step most significant, matching the tensor order.
                let mut digits = vec![0usize; ta.atoms.len()];
                let mut r = idx;
                for (k, a) in ta.atoms.iter().enumerate().rev() {
                    digits[k] = r % a.len();
                    r /= a.len();
                }
                walk_atom(ta, ns, cuts, nb, |k| digits[k])
            })
            .collect(),
        None => (0..atoms)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, (1u64 << 32) + i as u64);
                let (at, _, hit) = walk_atom(ta, ns, cuts, nb, |k| {
                    let a = &ta.atoms[k];
                    let mut z: f64 = r.random::<f64>();
                    for (j, &(_, w)) in a.iter().enumerate() {
                        if z < w {
                            return j;
                        }
                        z -= w;
                    }
                    a.len() - 1
                });
                (at, 1.0 / atoms as f64, hit)
            })
            .collect(),
    };
    let weights: Vec<f64> = per.iter().map(|p| p.1).collect();
    let hits = (0..nb)
        .map(|b| per.iter().filter(|p| p.2[b]).map(|p| p.1).sum())
        .collect();
    let values = (0..ns.len())
        .map(|j| per.iter().map(|p| p.0[j]).collect())
        .collect();
    (AtomPaths { weights, values }, hits)
}

fn run_tensor(ts: &TensorSteps, atoms: usize, ns: &[usize], cfg: &LilConfig, seed: u64) -> Result<SeedRun> {
    let ta = TensorAtoms::of(ts);
    let pack = epsilon_solver(cfg.delta_prime)?;
    let cuts = block_cuts(&ta.s2, &pack);
    let (paths, hits) = tensor_paths(&ta, ns, atoms, seed, cuts.as_ref());
    let s2: Vec<f64> = ns.iter().map(|&n| ta.s2[n]).collect();
    let rows = rows_from_atoms(seed, ns, &s2, &paths, cfg.trace_budget);
    let budget = cuts.as_ref().map(|c| c.budget(&ta.s2, &hits, &pack, seed));
    Ok(SeedRun {
        rows,
        classical: None,
        budget,
    })
}

fn run_gue(dim: usize, steps: usize, ns: &[usize], cfg: &LilConfig, seed: u64) -> Result<SeedRun> {
    let alg = TracialAlgebra::matrix(dim);
    let mut walk = GueWalk::new(dim, seed)?;
    let mut xs = Vec::with_capacity(ns.len());
    let mut next = 0;
    for m in 1..=steps {
        walk.step();
        if next < ns.len() && ns[next] == m {
            xs.push(Operator::from_matrix(&alg, walk.current().clone())?.hermitian_part());
            next += 1;
        }
    }
    let s2: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(SeedRun {
        rows: rows_from_operators(seed, ns, &s2, &xs, cfg.trace_budget)?,
        classical: None,
        budget: None,
    })
}

fn zero_rows(seed: u64, ns: &[usize]) -> Vec<RatioRow> {
    ns.iter()
        .map(|&n| RatioRow {
            seed,
            n,
            s2: 0.0,
            u: 1.0,
            op_ratio: 0.0,
            snum_ratio: 0.0,
            witness_ratio: 0.0,
            tail_witness_ratio: 0.0,
            deficit: 0.0,
        })
        .collect()
}

fn row_checks(rows: &[RatioRow], seeds: &[u64], budget: f64) -> Vec<Check> {
    let tol = |x: f64| 1e-9 * x.abs().max(1.0);
    let bad_order = rows
        .iter()
        .filter(|r| r.witness_ratio > r.snum_ratio + tol(r.op_ratio) || r.snum_ratio > r.op_ratio + tol(r.op_ratio))
        .count();
    let mut bad_tail = 0;
    for &seed in seeds {
        let rs: Vec<&RatioRow> = rows.iter().filter(|r| r.seed == seed).collect();
        let mut suffix = 0.0f64;
        for r in rs.iter().rev() {
            suffix = suffix.max(r.op_ratio);
            if r.snum_ratio > r.tail_witness_ratio + tol(suffix) || r.tail_witness_ratio > suffix + tol(suffix) {
                bad_tail += 1;
            }
        }
    }
    let bad_def = rows.iter().filter(|r| r.deficit > budget + 1e-12).count();
    let monotone = seeds.iter().all(|&seed| {
        let s: Vec<f64> = rows.iter().filter(|r| r.seed == seed).map(|r| r.s2).collect();
        s.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
    });
    vec![
        Check::new("ratio_ordering", bad_order == 0, format!("{bad_order} rows out of order")),
        Check::new("tail_ordering", bad_tail == 0, format!("{bad_tail} rows out of order")),
        Check::new("witness_certificates", bad_def == 0, format!("{bad_def} deficits above budget")),
        Check::new("bracket_monotone", monotone, ""),
    ]
}

fn summarize_rows(rows: &[RatioRow]) -> RatioSummary {
    let col = |f: fn(&RatioRow) -> f64| Quantiles::of(&rows.iter().map(f).collect::<Vec<_>>());
    RatioSummary {
        op: col(|r| r.op_ratio),
        snum: col(|r| r.snum_ratio),
        witness: col(|r| r.witness_ratio),
        tail_witness: col(|r| r.tail_witness_ratio),
    }
}

fn assemble(config: LilConfig, ns: Vec<usize>, runs: Vec<SeedRun>) -> ExperimentReport {
    let mut rows = Vec::new();
    let mut classical = Vec::new();
    let mut budgets = Vec::new();
    for r in runs {
        rows.extend(r.rows);
        classical.extend(r.classical);
        budgets.extend(r.budget);
    }
    let checks = row_checks(&rows, &config.seeds, config.trace_budget);
    ExperimentReport {
        summary: summarize_rows(&rows),
        config,
        checkpoints: ns,
        rows,
        classical,
        budgets,
        checks,
    }
}

/// Runs every seed (in parallel) and reduces in seed order.
pub fn lil_run(config: &LilConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let ns = config.resolved_checkpoints()?;
    let runs: Vec<SeedRun> = config
        .seeds
        .par_iter()
        .map(|&seed| match config.generator {
            Generator::Classical {
                atoms,
                steps,
                window_start,
            } => run_classical(atoms, steps, window_start, &ns, config, seed),
            Generator::Tensor {
                law,
                steps,
                envelope,
                atoms,
            } => {
                let ts = TensorSteps::generate(steps, law, seed, envelope)?;
                run_tensor(&ts, atoms, &ns, config, seed)
            }
            Generator::Gue { dim, steps } => run_gue(dim, steps, &ns, config, seed),
            Generator::Zero { .. } => Ok(SeedRun {
                rows: zero_rows(seed, &ns),
                classical: None,
                budget: None,
            }),
        })
        .collect::<Result<_>>()?;
    Ok(assemble(config.clone(), ns, runs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwConfig {
    pub law: TensorLaw,
    pub steps: usize,
    /// Truncation constant `e` of the split.
    pub e: f64,
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_budget")]
    pub trace_budget: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta_prime")]
    pub delta_prime: f64,
}

impl HwConfig {
    pub fn new(law: TensorLaw, steps: usize, e: f64) -> Self {
        Self {
            law,
            steps,
            e,
            atoms: default_atoms(),
            checkpoints: Vec::new(),
            trace_budget: DEFAULT_TRACE_BUDGET,
            seeds: default_seeds(),
            delta_prime: default_delta_prime(),
        }
    }

    fn lil_config(&self) -> LilConfig {
        LilConfig {
            generator: Generator::Tensor {
                law: self.law,
                steps: self.steps,
                envelope: None,
                atoms: self.atoms,
            },
            checkpoints: self.checkpoints.clone(),
            trace_budget: self.trace_budget,
            seeds: self.seeds.clone(),
            delta_prime: self.delta_prime,
        }
    }
}

/// Per-seed diagnostics of the three-way split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwSeed {
    pub seed: u64,
    /// `max_k ‖y′_k‖ / (e√k/u_k)`.
    pub envelope_max_ratio: f64,
    /// `Σ_{k≤n} ‖z_k‖₂²/(k u_k²)` at the checkpoints.
    pub l2_partial: Vec<f64>,
    pub l2_total: f64,
    /// Partial sums nondecreasing and the second half adds no more than the first.
    pub l2_trend_ok: bool,
    /// Last step with a nonzero `z` part.
    pub z_last: Option<usize>,
    /// Steps with a nonzero `w` part.
    pub w_steps: Vec<usize>,
    /// `Σ_k τ(1_(√k,∞)(|y_k|))`.
    pub w_budget: f64,
    /// `max_k τ(y_k²)`.
    pub y2: f64,
    pub resum_error: f64,
    /// Largest `‖a b‖` over distinct uncentered parts.
    pub cross_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwReport {
    pub config: HwConfig,
    pub seeds: Vec<HwSeed>,
    pub experiment: ExperimentReport,
    pub checks: Vec<Check>,
}

impl HwReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.experiment.passed()
    }
}

fn hw_seed(ts: &TensorSteps, cfg: &HwConfig, ns: &[usize], seed: u64) -> Result<HwSeed> {
    let mut env_max = 0.0f64;
    let mut l2 = 0.0;
    let mut l2_at = Vec::with_capacity(ns.len());
    let mut l2_half = 0.0;
    let mut monotone = true;
    let mut z_last = None;
    let mut w_steps = Vec::new();
    let mut w_budget = 0.0;
    let mut y2 = 0.0f64;
    let mut resum = 0.0f64;
    let mut cross = 0.0f64;
    let mut next = 0;
    for (i, y) in ts.h.iter().enumerate() {
        let k = i + 1;
        let var = y.inner(y).re;
        if var > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("‖y_{k}‖₂² = {var} > 1")));
        }
        y2 = y2.max(var);
        let parts = hw_split(y, k, cfg.e)?;
        let kf = k as f64;
        let lk = iterated_log_unchecked(kf);
        env_max = env_max.max(parts.yprime.op_norm() / (cfg.e * kf.sqrt() / lk.sqrt()));
        let inc = parts.z.inner(&parts.z).re / (kf * lk);
        if inc < 0.0 {
            monotone = false;
        }
        l2 += inc;
        if 2 * k <= ts.len() {
            l2_half = l2;
        }
        if parts.uncentered[1].op_norm() > 0.0 {
            z_last = Some(k);
        }
        if parts.uncentered[2].op_norm() > 0.0 {
            w_steps.push(k);
        }
        w_budget += y
            .modulus_spectrum()
            .indicator_trace(&Interval::above(kf.sqrt()));
        let sum = &(&parts.yprime + &parts.z) + &parts.w;
        resum = resum.max(sum.dist(y));
        let u = &parts.uncentered;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            cross = cross.max((&u[a] * &u[b]).op_norm());
        }
        if next < ns.len() && ns[next] == k {
            l2_at.push(l2);
            next += 1;
        }
    }
    Ok(HwSeed {
        seed,
        envelope_max_ratio: env_max,
        l2_partial: l2_at,
        l2_total: l2,
        l2_trend_ok: monotone && l2 - l2_half <= l2_half + 1e-15,
        z_last,
        w_steps,
        w_budget,
        y2,
        resum_error: resum,
        cross_max: cross,
    })
}

/// Three-way split diagnostics plus the ratio series of the full sum.
pub fn hw_pipeline(config: &HwConfig) -> Result<HwReport> {
    if !(config.e > 0.0) {
        return Err(Error::InvalidArgument(format!("e = {} must be positive", config.e)));
    }
    let lil = config.lil_config();
    lil.validate()?;
    let ns = lil.resolved_checkpoints()?;
    let both: Vec<(HwSeed, SeedRun)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let ts = TensorSteps::generate(config.steps, config.law, seed, None)?;
            let hw = hw_seed(&ts, config, &ns, seed)?;
            let run = run_tensor(&ts, config.atoms, &ns, &lil, seed)?;
            Ok((hw, run))
        })
        .collect::<Result<_>>()?;
    let (seeds, runs): (Vec<HwSeed>, Vec<SeedRun>) = both.into_iter().unzip();
    let experiment = assemble(lil, ns, runs);
    let env_ok = seeds.iter().all(|s| s.envelope_max_ratio <= 1.0 + 1e-12);
    let trend_ok = seeds.iter().all(|s| s.l2_trend_ok);
    let budget_ok = seeds.iter().all(|s| s.w_budget <= s.y2 * (1.0 + 1e-12) + 1e-15);
    let resum = seeds.iter().map(|s| s.resum_error).fold(0.0, f64::max);
    let cross = seeds.iter().map(|s| s.cross_max).fold(0.0, f64::max);
    let checks = vec![
        Check::new("hw_envelope", env_ok, "‖y′_k‖ ≤ e√k/u_k"),
        Check::new("hw_l2_trend", trend_ok, "second-half L2 increment within first-half total"),
        Check::new("hw_w_budget", budget_ok, "Σ τ(1_(√k,∞)(|y_k|)) ≤ τ(y²)"),
        Check::new("hw_resum", resum <= 1e-10, format!("max resum error {resum:.3e}")),
        Check::new("hw_disjoint", cross <= 1e-12, format!("max cross product {cross:.3e}")),
    ];
    Ok(HwReport {
        config: config.clone(),
        seeds,
        experiment,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::{bracket, TwoPointLaw};

    #[test]
    fn zero_config_is_flat() {
        let cfg = LilConfig::new(Generator::Zero { steps: 50 });
        let r = lil_run(&cfg).unwrap();
        assert!(r.passed());
        assert!(r
            .rows
            .iter()
            .all(|x| x.op_ratio == 0.0 && x.snum_ratio == 0.0 && x.witness_ratio == 0.0 && x.tail_witness_ratio == 0.0));
    }

    #[test]
    fn exact_tensor_paths_match_dense_operators() {
        let ts = TensorSteps::generate(6, TensorLaw::Pauli, 3, None).unwrap();
        let ns = vec![1, 3, 4, 6];
        let ta = TensorAtoms::of(&ts);
        assert_eq!(ta.joint_count(EXACT_ATOM_CAP), Some(64));
        let (paths, _) = tensor_paths(&ta, &ns, 0, 3, None);
        let s2: Vec<f64> = ns.iter().map(|&n| ta.s2[n]).collect();
        let atom_rows = rows_from_atoms(3, &ns, &s2, &paths, 0.1);

        let mart = ts.martingale().unwrap();
        let track = bracket(&mart).unwrap();
        for (&n, s) in ns.iter().zip(&s2) {
            assert!((track.s2[n] - s).abs() < 1e-12);
        }
        let xs: Vec<Operator> = ns.iter().map(|&n| mart.x(n).clone()).collect();
        let op_rows = rows_from_operators(3, &ns, &s2, &xs, 0.1).unwrap();
        for (a, o) in atom_rows.iter().zip(&op_rows) {
            assert!((a.op_ratio - o.op_ratio).abs() < 1e-9, "{a:?} {o:?}");
            assert!((a.snum_ratio - o.snum_ratio).abs() < 1e-9);
            assert!((a.witness_ratio - o.witness_ratio).abs() < 1e-9);
            assert!((a.tail_witness_ratio - o.tail_witness_ratio).abs() < 1e-6, "{a:?} {o:?}");
            assert!((a.deficit - o.deficit).abs() < 1e-9, "{a:?} {o:?}");
        }
    }

    #[test]
    fn two_point_atoms_are_weighted() {
        let law = TensorLaw::TwoPoint { p: 0.2, m: 1.0 };
        let ts = TensorSteps::generate(4, law, 0, None).unwrap();
        let ta = TensorAtoms::of(&ts);
        let (paths, _) = tensor_paths(&ta, &[4], 0, 0, None);
        let total: f64 = paths.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = paths.values[0].iter().zip(&paths.weights).map(|(v, w)| v * w).sum();
        assert!(mean.abs() < 1e-12);
        let var = TwoPointLaw::new(0.2, 1.0).unwrap().variance();
        assert!((ta.s2[4] - 4.0 * var).abs() < 1e-12);
    }

    #[test]
    fn sampled_tensor_run_orders_ratios() {
        let cfg = LilConfig::new(Generator::Tensor {
            law: TensorLaw::Pauli,
            steps: 3000,
            envelope: None,
            atoms: 512,
        })
        .with_seeds(vec![1, 2]);
        let r = lil_run(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.rows.len(), 2 * r.checkpoints.len());
        assert_eq!(r.budgets.len(), 2);
    }

    #[test]
    fn classical_small_run() {
        let cfg = LilConfig::new(Generator::Classical {
            atoms: 256,
            steps: 5000,
            window_start: 100,
        });
        let r = lil_run(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let c = &r.classical[0];
        assert!(c.median > 0.5 && c.median < 2.5);
        assert_eq!(c.maxima.len(), 256);
        let b = &r.budgets[0];
        assert!(b.budget.summable);
        let again = lil_run(&cfg).unwrap();
        assert_eq!(r.csv(), again.csv());
    }

    #[test]
    fn gue_small_run() {
        let cfg = LilConfig::new(Generator::Gue { dim: 20, steps: 200 }).with_checkpoints(vec![50, 100, 200]);
        let r = lil_run(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.rows.len(), 3);
    }

    #[test]
    fn config_errors() {
        let bad = LilConfig::new(Generator::Zero { steps: 10 }).with_checkpoints(vec![11]);
        assert!(lil_run(&bad).is_err());
        let bad = LilConfig::new(Generator::Zero { steps: 10 }).with_budget(1.5);
        assert!(lil_run(&bad).is_err());
        let big = LilConfig::new(Generator::Classical {
            atoms: 1 << 20,
            steps: 1 << 20,
            window_start: 1,
        });
        assert!(matches!(lil_run(&big), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = LilConfig::new(Generator::Tensor {
            law: TensorLaw::TwoPoint { p: 0.1, m: 2.0 },
            steps: 100,
            envelope: Some(1.0),
            atoms: 64,
        });
        let s = serde_json::to_string(&cfg).unwrap();
        let back: LilConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let parsed: LilConfig = serde_json::from_str(r#"{"generator":"gue","dim":10,"steps":20}"#).unwrap();
        assert_eq!(parsed.generator, Generator::Gue { dim: 10, steps: 20 });
        assert_eq!(parsed.trace_budget, DEFAULT_TRACE_BUDGET);
    }

    #[test]
    fn bounded_law_split() {
        let cfg = HwConfig::new(TensorLaw::Pauli, 2000, 0.5);
        let r = hw_pipeline(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let s = &r.seeds[0];
        assert!(s.w_steps.is_empty());
        let first_clear = (1..=2000).find(|&k| crate::martingale::hw_cuts(k, 0.5).0 > 1.0).unwrap();
        assert!(s.z_last.is_some_and(|z| z < first_clear));
        assert_eq!(s.w_budget, 0.0);
    }

    #[test]
    fn heavy_law_split() {
        let cfg = HwConfig::new(TensorLaw::TwoPoint { p: 0.01, m: 9.0 }, 500, 0.5);
        let r = hw_pipeline(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let s = &r.seeds[0];
        assert_eq!(s.w_steps, (1..81).collect::<Vec<_>>());
        assert!((s.w_budget - 0.80).abs() < 1e-12);
        assert!(s.w_budget <= s.y2);
        assert!(hw_pipeline(&HwConfig::new(TensorLaw::TwoPoint { p: 0.5, m: 2.0 }, 10, 0.5)).is_err());
    }
}
