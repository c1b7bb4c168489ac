//! Invariant suites for the algebra and conditional-expectation layers, plus a
//! bundle of JSON fixtures with known answers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::random::{random_hermitian, random_operator, random_positive, random_projection};
use crate::algebra::{
    mu, projection_meet, spectral_indicator, AlgebraJson, Block, Interval, Operator, OperatorJson,
    TracialAlgebra,
};
use crate::condexp::{tensor_filtration, verify_tower, FactorSpec, Filtration, FiltrationJson};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const DEFAULT_FIXTURES: &str = include_str!("../fixtures/selftest.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub id: String,
    pub passed: bool,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl InvariantResult {
    fn measured(id: &str, samples: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            id: id.to_string(),
            passed: max_error <= tolerance,
            samples,
            max_error,
            tolerance,
            detail: None,
        }
    }

    fn errored(id: &str, tolerance: f64, e: &Error) -> Self {
        Self {
            id: id.to_string(),
            passed: false,
            samples: 0,
            max_error: f64::INFINITY,
            tolerance,
            detail: Some(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub results: Vec<InvariantResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&InvariantResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }
}

/// Keeps the largest error seen; NaN counts as a failure.
#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn push(&mut self, e: f64) {
        if e.is_nan() {
            self.0 = f64::INFINITY;
        } else {
            self.0 = self.0.max(e);
        }
    }
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(f64::MIN_POSITIVE)
}

fn run(id: &str, samples: usize, tol: f64, body: impl FnOnce() -> Result<f64>) -> InvariantResult {
    match body() {
        Ok(e) => InvariantResult::measured(id, samples, e, tol),
        Err(e) => InvariantResult::errored(id, tol, &e),
    }
}

fn test_algebras() -> Vec<Arc<TracialAlgebra>> {
    let mixed = TracialAlgebra::new(vec![
        Block { dim: 1, weight: 0.3 },
        Block { dim: 2, weight: 0.3 },
        Block { dim: 3, weight: 0.4 },
    ])
    .expect("valid blocks");
    vec![
        TracialAlgebra::matrix(4),
        TracialAlgebra::diagonal(&[0.1, 0.2, 0.3, 0.4]).expect("valid weights"),
        mixed,
    ]
}

const P_GRID: [f64; 7] = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, f64::INFINITY];

fn traciality(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    for alg in algs {
        for _ in 0..n {
            let x = random_operator(alg, rng);
            let y = random_operator(alg, rng);
            let d = ((&x * &y).trace() - (&y * &x).trace()).norm();
            w.push(rel(d, x.op_norm() * y.op_norm()));
        }
    }
    Ok(w.0)
}

/// Largest relative drop `‖x‖_p − ‖x‖_q` over consecutive `p < q`.
fn lp_monotone(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    for alg in algs {
        for _ in 0..n {
            let x = random_operator(alg, rng);
            let norms = P_GRID.iter().map(|&p| x.norm_p(p)).collect::<Result<Vec<_>>>()?;
            for pair in norms.windows(2) {
                w.push(rel((pair[0] - pair[1]).max(0.0), pair[1]));
            }
        }
    }
    Ok(w.0)
}

/// `∫₀¹ μ_t(x)^p dt` evaluated on the exact step partition against `‖x‖_p^p`.
fn mu_integration(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    for alg in algs {
        for _ in 0..n {
            let x = random_operator(alg, rng);
            let mut atoms = x.singular_values();
            atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut cuts = vec![0.0];
            let mut cum = 0.0;
            for &(_, wt) in &atoms {
                cum += wt;
                cuts.push(cum.min(1.0));
            }
            for p in [1.0, 2.0, 3.0] {
                let mut integral = 0.0;
                for c in cuts.windows(2) {
                    let len = c[1] - c[0];
                    if len <= 0.0 {
                        continue;
                    }
                    let t = (0.5 * (c[0] + c[1])).clamp(1e-15, 1.0 - 1e-15);
                    integral += len * mu(alg, &x, t)?.powf(p);
                }
                let norm = x.norm_p(p)?.powf(p);
                w.push(rel((integral - norm).abs(), norm));
            }
        }
    }
    Ok(w.0)
}

fn calculus_homomorphism(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    for alg in algs {
        for _ in 0..n {
            let x = random_hermitian(alg, rng);
            let spec = x.spectrum()?;
            let fg = spec.apply(|v| v.exp() * (v.sin() + 2.0))?;
            let f = spec.apply(f64::exp)?;
            let g = spec.apply(|v| v.sin() + 2.0)?;
            let prod = &f * &g;
            w.push(rel(fg.dist(&prod), fg.op_norm()));
        }
    }
    Ok(w.0)
}

/// Projection defect of `1_I(x)` plus distance of the nonzero spectrum of `x·e` from `I`.
fn indicator_projection(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    let intervals = [Interval::closed(-0.5, 1.0), Interval::above(0.0), Interval::at_most(-0.2)];
    for alg in algs {
        for _ in 0..n {
            let x = random_hermitian(alg, rng);
            let scale = x.op_norm().max(1.0);
            for iv in &intervals {
                let e = spectral_indicator(&x, iv, false)?;
                w.push((&(&e * &e) - &e).op_norm());
                w.push(e.self_adjoint_defect());
                let xe = (&x * &e).hermitian_part();
                for (v, _) in xe.spectrum()?.atoms() {
                    if v.abs() <= 1e-10 * scale {
                        continue;
                    }
                    let miss = if iv.contains(v) {
                        0.0
                    } else {
                        interval_distance(iv, v)
                    };
                    w.push(rel(miss, scale));
                }
            }
        }
    }
    Ok(w.0)
}

fn interval_distance(iv: &Interval, v: f64) -> f64 {
    use crate::algebra::Endpoint;
    let lo = match iv.lo {
        Endpoint::Unbounded => 0.0,
        Endpoint::Closed(a) | Endpoint::Open(a) => (a - v).max(0.0),
    };
    let hi = match iv.hi {
        Endpoint::Unbounded => 0.0,
        Endpoint::Closed(b) | Endpoint::Open(b) => (v - b).max(0.0),
    };
    // An open endpoint hit exactly still misses by a positive amount.
    lo.max(hi).max(f64::EPSILON)
}

/// Meet `e` of random projections: `e ≤ p_i` and trace deficits subadditive.
fn meet_lattice(algs: &[Arc<TracialAlgebra>], rng: &mut Rng, n: usize) -> Result<f64> {
    let mut w = Worst::default();
    for alg in algs {
        let d = alg.blocks().iter().map(|b| b.dim).max().unwrap_or(1);
        for _ in 0..n {
            let ps: Vec<Operator> = (0..2).map(|_| random_projection(alg, d.div_ceil(2).max(1), rng)).collect();
            let mut with_common = ps.clone();
            with_common.push(ps[0].clone());
            let e = projection_meet(&with_common)?;
            let mut deficit = 0.0;
            for p in &ps {
                // e ≤ p  ⇔  p e = e.
                w.push((&(p * &e) - &e).op_norm());
                deficit += 1.0 - p.trace_re()?;
            }
            let lhs = 1.0 - e.trace_re()?;
            w.push((lhs - deficit).max(0.0));
        }
    }
    Ok(w.0)
}

/// Invariants of the algebra layer, `samples` random draws per algebra.
pub fn algebra_suite(seed: u64, samples: usize) -> Vec<InvariantResult> {
    let algs = test_algebras();
    let mut rng = rng::stream(seed, 0xa1);
    let n = samples;
    vec![
        run("algebra.traciality", n, 1e-12, || traciality(&algs, &mut rng, n)),
        run("algebra.lp_monotone", n, 1e-12, || lp_monotone(&algs, &mut rng, n)),
        run("algebra.mu_integration", n, 1e-10, || mu_integration(&algs, &mut rng, n)),
        run("algebra.calculus_homomorphism", n, 1e-9, || {
            calculus_homomorphism(&algs, &mut rng, n)
        }),
        run("algebra.indicator_projection", n, 1e-10, || {
            indicator_projection(&algs, &mut rng, n)
        }),
        run("algebra.meet_lattice", n, 1e-9, || meet_lattice(&algs, &mut rng, n)),
    ]
}

fn test_filtrations(seed: u64) -> Result<Vec<Filtration>> {
    let (_, a) = tensor_filtration(&[
        FactorSpec::Matrix { dim: 2 },
        FactorSpec::Diagonal { weights: vec![0.3, 0.7] },
        FactorSpec::Matrix { dim: 2 },
    ])?;
    let (_, b) = tensor_filtration(&vec![FactorSpec::Matrix { dim: 2 }; 4])?;
    let parent = TracialAlgebra::new(vec![
        Block { dim: 2, weight: 0.5 },
        Block { dim: 1, weight: 0.2 },
        Block { dim: 1, weight: 0.3 },
    ])?;
    let mut rng = rng::stream(seed, 0xf1);
    let first_block = Operator::identity(&parent).map_blocks(|i, m| if i == 0 { m.clone() } else { m.scale(0.0) });
    let h = random_hermitian(&parent, &mut rng);
    let c = Filtration::generated(&parent, &[first_block, h])?;
    Ok(vec![a, b, c])
}

fn each_level(
    fs: &[Filtration],
    rng: &mut Rng,
    n: usize,
    mut check: impl FnMut(&Filtration, usize, &mut Rng) -> Result<f64>,
) -> Result<f64> {
    let mut w = Worst::default();
    for f in fs {
        for k in 0..=f.depth() {
            for _ in 0..n {
                w.push(check(f, k, rng)?);
            }
        }
    }
    Ok(w.0)
}

/// Invariants of conditional expectations over a fixed set of towers.
pub fn condexp_suite(seed: u64, samples: usize) -> Vec<InvariantResult> {
    let fs = match test_filtrations(seed) {
        Ok(fs) => fs,
        Err(e) => return vec![InvariantResult::errored("condexp.build", 0.0, &e)],
    };
    let mut rng = rng::stream(seed, 0xc2);
    let n = samples;
    let mut out = Vec::new();
    out.push(run("condexp.tower", n, 1e-9, || {
        Ok(fs
            .iter()
            .enumerate()
            .map(|(i, f)| verify_tower(f, n.min(50), seed.wrapping_add(i as u64)).max_rel_error)
            .fold(0.0, f64::max))
    }));
    out.push(run("condexp.idempotent", n, 1e-10, || {
        each_level(&fs, &mut rng, n, |f, k, rng| {
            let x = random_operator(f.parent(), rng);
            let ex = f.expect(k, &x)?;
            Ok(rel(f.expect(k, &ex)?.dist(&ex), x.op_norm()))
        })
    }));
    out.push(run("condexp.trace", n, 1e-12, || {
        each_level(&fs, &mut rng, n, |f, k, rng| {
            let x = random_operator(f.parent(), rng);
            let d = (f.expect(k, &x)?.trace() - x.trace()).norm();
            Ok(rel(d, x.op_norm()))
        })
    }));
    out.push(run("condexp.positivity", n, 1e-10, || {
        each_level(&fs, &mut rng, n, |f, k, rng| {
            let x = random_positive(f.parent(), rng);
            let min = f.expect(k, &x)?.hermitian_part().spectrum()?.min();
            Ok(rel((-min).max(0.0), x.op_norm()))
        })
    }));
    out.push(run("condexp.bimodule", n, 1e-9, || {
        each_level(&fs, &mut rng, n, |f, k, rng| {
            let a = f.expect(k, &random_operator(f.parent(), rng))?;
            let b = f.expect(k, &random_operator(f.parent(), rng))?;
            let x = random_operator(f.parent(), rng);
            let lhs = f.expect(k, &(&(&a * &x) * &b))?;
            let rhs = &(&a * &f.expect(k, &x)?) * &b;
            Ok(rel(lhs.dist(&rhs), a.op_norm() * x.op_norm() * b.op_norm()))
        })
    }));
    out.push(run("condexp.contractive", n, 1e-9, || {
        each_level(&fs, &mut rng, n, |f, k, rng| {
            let x = random_operator(f.parent(), rng);
            let ex = f.expect(k, &x)?;
            let mut worst = 0.0_f64;
            for p in [1.0, 2.0, f64::INFINITY] {
                let (a, b) = (ex.norm_p(p)?, x.norm_p(p)?);
                worst = worst.max(rel((a - b).max(0.0), b));
            }
            Ok(worst)
        })
    }));
    out.push(run("condexp.fast_path", n, 1e-11, || {
        let tensors: Vec<Filtration> = fs.iter().filter(|f| f.is_tensor()).cloned().collect();
        let copies = tensors.iter().map(|f| f.generic_copy()).collect::<Result<Vec<_>>>()?;
        let mut w = Worst::default();
        for (f, g) in tensors.iter().zip(&copies) {
            for k in 0..=f.depth() {
                for _ in 0..n {
                    let x = random_operator(f.parent(), &mut rng);
                    w.push(rel(f.expect(k, &x)?.dist(&g.expect(k, &x)?), x.op_norm()));
                }
            }
        }
        Ok(w.0)
    }));
    out
}

fn default_tolerance() -> f64 {
    1e-9
}

/// One fixture with a known answer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureCase {
    Trace {
        id: String,
        algebra: AlgebraJson,
        x: OperatorJson,
        expected: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Mu {
        id: String,
        algebra: AlgebraJson,
        x: OperatorJson,
        t: f64,
        expected: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    LpNorm {
        id: String,
        algebra: AlgebraJson,
        x: OperatorJson,
        p: f64,
        expected: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    CondExpect {
        id: String,
        filtration: FiltrationJson,
        level: usize,
        x: OperatorJson,
        expected: OperatorJson,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Meet {
        id: String,
        algebra: AlgebraJson,
        projections: Vec<OperatorJson>,
        expected: OperatorJson,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
}

impl FixtureCase {
    pub fn id(&self) -> &str {
        match self {
            FixtureCase::Trace { id, .. }
            | FixtureCase::Mu { id, .. }
            | FixtureCase::LpNorm { id, .. }
            | FixtureCase::CondExpect { id, .. }
            | FixtureCase::Meet { id, .. } => id,
        }
    }

    fn tolerance(&self) -> f64 {
        match self {
            FixtureCase::Trace { tolerance, .. }
            | FixtureCase::Mu { tolerance, .. }
            | FixtureCase::LpNorm { tolerance, .. }
            | FixtureCase::CondExpect { tolerance, .. }
            | FixtureCase::Meet { tolerance, .. } => *tolerance,
        }
    }

    /// Absolute error against the recorded answer.
    fn error(&self) -> Result<f64> {
        match self {
            FixtureCase::Trace { algebra, x, expected, .. } => {
                let alg = algebra.to_algebra()?;
                Ok((x.to_operator(&alg)?.trace_re()? - expected).abs())
            }
            FixtureCase::Mu { algebra, x, t, expected, .. } => {
                let alg = algebra.to_algebra()?;
                Ok((mu(&alg, &x.to_operator(&alg)?, *t)? - expected).abs())
            }
            FixtureCase::LpNorm { algebra, x, p, expected, .. } => {
                let alg = algebra.to_algebra()?;
                Ok((x.to_operator(&alg)?.norm_p(*p)? - expected).abs())
            }
            FixtureCase::CondExpect { filtration, level, x, expected, .. } => {
                let (alg, f) = filtration.build()?;
                if *level > f.depth() {
                    return Err(Error::InvalidArgument(format!(
                        "level {level} beyond depth {}",
                        f.depth()
                    )));
                }
                let got = f.expect(*level, &x.to_operator(&alg)?)?;
                Ok(got.dist(&expected.to_operator(&alg)?))
            }
            FixtureCase::Meet { algebra, projections, expected, .. } => {
                let alg = algebra.to_algebra()?;
                let ps = projections
                    .iter()
                    .map(|p| p.to_operator(&alg))
                    .collect::<Result<Vec<_>>>()?;
                Ok(projection_meet(&ps)?.dist(&expected.to_operator(&alg)?))
            }
        }
    }

    pub fn check(&self) -> InvariantResult {
        let id = format!("fixture.{}", self.id());
        run(&id, 1, self.tolerance(), || self.error())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixtureBundle {
    pub version: u32,
    pub cases: Vec<FixtureCase>,
}

impl FixtureBundle {
    pub fn parse(text: &str) -> Result<Self> {
        let b: FixtureBundle = serde_json::from_str(text)?;
        if b.version != 1 {
            return Err(Error::Json(format!("unsupported fixture version {}", b.version)));
        }
        Ok(b)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_FIXTURES).expect("embedded fixtures parse")
    }

    pub fn check(&self) -> Vec<InvariantResult> {
        self.cases.iter().map(FixtureCase::check).collect()
    }
}

pub fn run_selftest(seed: u64, samples: usize, fixtures: &FixtureBundle) -> SelftestReport {
    let mut results = algebra_suite(seed, samples);
    results.extend(condexp_suite(seed, samples));
    results.extend(fixtures.check());
    SelftestReport { seed, results }
}
