//! Seeded verification batteries with explicit expected verdicts.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::expineq::{exp2_lambda_max, exp_check1, exp_check2, scalar_step, two_point_counterexample_search, two_point_exp2, Exp2Mode};
use super::report::{summarize, BatterySummary, IneqReport};
use super::scalar::scalar_g;
use super::trace_ineq::{gt_gap, igt_gap, igt_rhs, IgtMode};
use super::witness::{chebyshev_witness, poly_exp_grid};
use crate::algebra::random::{random_hermitian, random_operator};
use crate::algebra::{Block, Operator, TracialAlgebra};
use crate::error::{Error, Result};
use crate::martingale::{gen_dyadic_rademacher, Martingale, TensorLaw, TensorSteps, TwoPointLaw};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gt,
    Igt,
    Expineq,
    Scalars,
    Chebyshev,
}

impl Family {
    pub fn default_count(self) -> usize {
        match self {
            Family::Gt => 500,
            Family::Igt => 100,
            Family::Chebyshev => 200,
            Family::Expineq | Family::Scalars => 1,
        }
    }

    pub fn default_dims(self) -> [usize; 2] {
        match self {
            Family::Igt => [2, 5],
            _ => [2, 6],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Pass,
    Fail,
}

/// One asserted outcome. `held` records whether the underlying statement held.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryCheck {
    pub id: String,
    pub expected: Expectation,
    pub held: bool,
    pub detail: String,
}

impl BatteryCheck {
    fn new(id: &str, expected: Expectation, held: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            expected,
            held,
            detail: detail.into(),
        }
    }

    pub fn matched(&self) -> bool {
        self.held == (self.expected == Expectation::Pass)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub family: Family,
    #[serde(default)]
    pub dims: Option<[usize; 2]>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Exp2Mode,
}

fn default_mode() -> Exp2Mode {
    Exp2Mode::Corrected
}

impl BatteryConfig {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            dims: None,
            count: None,
            seed: 0,
            mode: Exp2Mode::Corrected,
        }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims.unwrap_or(self.family.default_dims())
    }

    pub fn count(&self) -> usize {
        self.count.unwrap_or(self.family.default_count())
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.dims();
        if lo < 1 || lo > hi || hi > 32 {
            return Err(Error::InvalidArgument(format!("dims {lo}..{hi} must satisfy 1 <= lo <= hi <= 32")));
        }
        if self.family == Family::Igt && hi > 8 {
            return Err(Error::InvalidArgument("igt dims are limited to 8".into()));
        }
        if self.count() == 0 || self.count() > 100_000 {
            return Err(Error::InvalidArgument(format!("count {} outside 1..=100000", self.count())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatteryOutcome {
    pub family: Family,
    pub config: BatteryConfig,
    pub summary: BatterySummary,
    pub checks: Vec<BatteryCheck>,
    #[serde(skip)]
    pub reports: Vec<IneqReport>,
}

impl BatteryOutcome {
    /// Every check came out as expected, expected failures included.
    pub fn matched(&self) -> bool {
        self.checks.iter().all(BatteryCheck::matched)
    }
}

pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryOutcome> {
    cfg.validate()?;
    let (reports, checks) = match cfg.family {
        Family::Gt => gt_battery(cfg)?,
        Family::Igt => igt_battery(cfg)?,
        Family::Expineq => expineq_battery(cfg)?,
        Family::Scalars => scalars_battery()?,
        Family::Chebyshev => chebyshev_battery(cfg)?,
    };
    let id = serde_json::to_value(cfg.family)?.as_str().unwrap_or("battery").to_string();
    Ok(BatteryOutcome {
        family: cfg.family,
        config: cfg.clone(),
        summary: summarize(&id, &reports),
        checks,
        reports,
    })
}

type Battery = (Vec<IneqReport>, Vec<BatteryCheck>);

fn dim_for(cfg: &BatteryConfig, i: usize) -> usize {
    let [lo, hi] = cfg.dims();
    lo + i % (hi - lo + 1)
}

fn scaled_hermitian(alg: &Arc<TracialAlgebra>, rng: &mut Rng) -> Operator {
    let h = random_hermitian(alg, rng);
    let n = h.op_norm().max(f64::MIN_POSITIVE);
    h.scale(rng.random_range(0.1..2.5) / n)
}

fn no_failures(id: &str, reports: &[IneqReport]) -> BatteryCheck {
    let s = summarize(id, reports);
    let detail = match &s.worst {
        Some(w) => format!("{} instances, worst rel slack {:.3e}", s.instances, w.rel_slack),
        None => "no instances".into(),
    };
    BatteryCheck::new(id, Expectation::Pass, s.failures == 0 && s.hypothesis_violations == 0, detail)
}

fn pauli(entries: [f64; 4]) -> Result<Operator> {
    let m2 = TracialAlgebra::matrix(2);
    Operator::from_blocks(&m2, vec![crate::algebra::real_matrix(2, &entries)])
}

fn gt_battery(cfg: &BatteryConfig) -> Result<Battery> {
    let mut rng = rng::stream(cfg.seed, 0x67);
    let mut reports = Vec::with_capacity(cfg.count());
    let mut commuting_gap = 0.0_f64;
    for i in 0..cfg.count() {
        let alg = TracialAlgebra::matrix(dim_for(cfg, i));
        let a = scaled_hermitian(&alg, &mut rng);
        let b = scaled_hermitian(&alg, &mut rng);
        reports.push(gt_gap(&a, &b)?);
        if i % 10 == 0 {
            let c = (&(&a * &a) - &a.scale(0.5)).hermitian_part();
            let r = gt_gap(&a, &c)?;
            commuting_gap = commuting_gap.max(r.rel_slack.abs());
        }
    }
    let x = pauli([0.0, 1.0, 1.0, 0.0])?;
    let z = pauli([1.0, 0.0, 0.0, -1.0])?;
    let p = gt_gap(&x, &z)?;
    let checks = vec![
        no_failures("gt.no_violation", &reports),
        BatteryCheck::new(
            "gt.commuting_equality",
            Expectation::Pass,
            commuting_gap <= 1e-12,
            format!("max |rel slack| {commuting_gap:.3e}"),
        ),
        BatteryCheck::new(
            "gt.pauli_strict",
            Expectation::Pass,
            p.passed() && p.slack > 0.1,
            format!("lhs {:.6} rhs {:.6}", p.lhs, p.rhs),
        ),
    ];
    reports.push(p);
    Ok((reports, checks))
}

fn igt_battery(cfg: &BatteryConfig) -> Result<Battery> {
    let mut rng = rng::stream(cfg.seed, 0x16);
    let mut reports = Vec::with_capacity(cfg.count());
    let mut agree = 0.0_f64;
    let mut zero_a = 0.0_f64;
    for i in 0..cfg.count() {
        let alg = TracialAlgebra::matrix(dim_for(cfg, i));
        let a = scaled_hermitian(&alg, &mut rng);
        let b = scaled_hermitian(&alg, &mut rng);
        let c = scaled_hermitian(&alg, &mut rng);
        let r = igt_gap(&a, &b, &c)?;
        let q = igt_rhs(&a, &b, &c, IgtMode::Quadrature)?;
        agree = agree.max((q - r.rhs).abs() / r.rhs.abs());
        let zero = Operator::zeros(&alg);
        let k0 = igt_rhs(&zero, &b, &c, IgtMode::Kernel)?;
        let eb = b.spectrum()?.apply(f64::exp)?;
        let ec = c.spectrum()?.apply(f64::exp)?;
        let direct = (&ec * &eb).trace().re;
        zero_a = zero_a.max((k0 - direct).abs() / direct.abs());
        reports.push(r);
    }
    let checks = vec![
        no_failures("igt.no_violation", &reports),
        BatteryCheck::new(
            "igt.kernel_quadrature",
            Expectation::Pass,
            agree <= 1e-6,
            format!("max rel difference {agree:.3e}"),
        ),
        BatteryCheck::new(
            "igt.a_zero_reduction",
            Expectation::Pass,
            zero_a <= 1e-10,
            format!("max rel difference {zero_a:.3e}"),
        ),
    ];
    Ok((reports, checks))
}

/// Self-adjoint test martingales with their `M` and `D²`.
pub fn exp_towers(seed: u64) -> Result<Vec<(String, Martingale, f64, f64)>> {
    let mut out = Vec::new();
    let rad = gen_dyadic_rademacher(12, 4096, seed)?;
    out.push(("rademacher_n12".to_string(), rad, 1.0, 12.0));
    for (p, m, n) in [(0.05, 1.0, 10), (0.2, 2.0, 8), (0.5, 1.0, 10)] {
        let law = TensorLaw::TwoPoint { p, m };
        let steps = TensorSteps::generate(n, law, seed, None)?;
        let two = TwoPointLaw::new(p, m)?;
        let d2 = (1..=n).map(|k| steps.variance(k)).sum::<f64>();
        out.push((format!("two_point_p{p}_m{m}_n{n}"), steps.martingale()?, two.op_norm(), d2));
    }
    for (dim, scale, env, n) in [(2, 1.5, 1.0, 6), (3, 1.0, 0.8, 4)] {
        let law = TensorLaw::Hermitian { dim, scale };
        let steps = TensorSteps::generate(n, law, seed, Some(env))?;
        let m = steps.h.iter().map(Operator::op_norm).fold(0.0, f64::max);
        let d2 = (1..=n).map(|k| steps.variance(k)).sum::<f64>();
        out.push((format!("hermitian_d{dim}_n{n}_env{env}"), steps.martingale()?, m, d2));
    }
    Ok(out)
}

fn grid(hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| hi * i as f64 / n as f64).collect()
}

fn expineq_battery(cfg: &BatteryConfig) -> Result<Battery> {
    let towers = exp_towers(cfg.seed)?;
    let mut part1 = Vec::new();
    for (_, mart, m, d2) in &towers {
        part1.extend(exp_check1(mart, *m, *d2, &grid(6.0 / m, 24))?);
    }
    let mut checks = vec![no_failures("exp1.battery", &part1)];
    let mut reports = part1;
    match cfg.mode {
        Exp2Mode::Corrected => {
            let mut part2 = Vec::new();
            for eps in [0.1, 0.25, 0.5, 1.0] {
                for (_, mart, m, d2) in &towers {
                    let hi = exp2_lambda_max(*m, eps, Exp2Mode::Corrected);
                    let rep = exp_check2(mart, *m, *d2, &grid(hi, 12), eps, Exp2Mode::Corrected)?;
                    part2.extend(rep.reports);
                    part2.extend(rep.scalar);
                }
                for p in [0.01, 0.05, 0.2, 0.5] {
                    let law = TwoPointLaw::new(p, 1.0)?;
                    for lam in grid(exp2_lambda_max(1.0, eps, Exp2Mode::Corrected), 12) {
                        part2.push(two_point_exp2(&law, lam, eps));
                    }
                }
            }
            checks.push(no_failures("exp2.corrected_battery", &part2));
            reports.extend(part2);
        }
        Exp2Mode::AsStated => {
            let law = TwoPointLaw::new(0.05, 1.0)?;
            let boundary = two_point_exp2(&law, 3.0, 1.0);
            checks.push(BatteryCheck::new(
                "exp2.as_stated_boundary",
                Expectation::Fail,
                boundary.passed(),
                format!("p=0.05 M=1 eps=1 lambda=3: lhs {:.5} rhs {:.5}", boundary.lhs, boundary.rhs),
            ));
            let found = two_point_counterexample_search(1.0, 1.0);
            checks.push(BatteryCheck::new(
                "exp2.as_stated_search",
                Expectation::Fail,
                found.passed(),
                format!("worst {}: lhs {:.5} rhs {:.5}", found.instance, found.lhs, found.rhs),
            ));
            reports.push(boundary);
            reports.push(found);
        }
    }
    Ok((reports, checks))
}

fn scalars_battery() -> Result<Battery> {
    let mut increasing = true;
    let mut prev = scalar_g(1e-3);
    for i in 2..=10_000 {
        let g = scalar_g(i as f64 * 1e-3);
        if g <= prev {
            increasing = false;
        }
        prev = g;
    }
    let mut bern = Vec::new();
    for eps in [0.05, 0.1, 0.25, 0.5, 1.0] {
        for s in grid(exp2_lambda_max(1.0, eps, Exp2Mode::Corrected), 200) {
            bern.push(scalar_step(s, eps));
        }
    }
    let mut poly = Vec::new();
    for p in [1.0, 2.0, 4.0, 8.0, 16.0] {
        poly.extend(poly_exp_grid(p, 60.0, 1201)?);
    }
    let boundary = scalar_step(3.0, 1.0);
    let checks = vec![
        BatteryCheck::new("scalars.g_increasing", Expectation::Pass, increasing, "grid step 1e-3 on (0, 10]"),
        no_failures("scalars.bernstein_step", &bern),
        no_failures("scalars.poly_exp", &poly),
        BatteryCheck::new(
            "scalars.as_stated_step",
            Expectation::Fail,
            boundary.passed(),
            format!("s=3 eps=1: F(s) {:.3} vs {:.3}", boundary.lhs, boundary.rhs),
        ),
    ];
    let mut reports = bern;
    reports.extend(poly);
    reports.push(boundary);
    Ok((reports, checks))
}

fn chebyshev_battery(cfg: &BatteryConfig) -> Result<Battery> {
    let mut rng = rng::stream(cfg.seed, 0xcb);
    let mut reports = Vec::with_capacity(cfg.count());
    let mut norms_ok = true;
    let mut deficit_ok = true;
    for i in 0..cfg.count() {
        let d = dim_for(cfg, i);
        let alg = if i % 3 == 2 && d >= 2 {
            TracialAlgebra::new(vec![
                Block { dim: d - 1, weight: 0.6 },
                Block { dim: 1, weight: 0.4 },
            ])?
        } else {
            TracialAlgebra::matrix(d)
        };
        let k = 1 + i % 3;
        let xs: Vec<Operator> = (0..k)
            .map(|j| {
                if j % 2 == 0 {
                    random_operator(&alg, &mut rng)
                } else {
                    random_hermitian(&alg, &mut rng)
                }
            })
            .collect();
        let top = xs.iter().map(Operator::op_norm).fold(0.0, f64::max);
        let t = top * rng.random_range(0.2..1.2);
        let p = [1.0, 2.0, 4.0][i % 3];
        let w = chebyshev_witness(&xs, t, p)?;
        let c = w.check();
        norms_ok &= c.norms_ok;
        deficit_ok &= c.deficit_ok;
        reports.push(IneqReport::new(
            "chebyshev",
            format!("dim={d};k={k};p={p}"),
            w.deficit,
            w.bound,
            0.0,
        ));
    }
    let checks = vec![
        BatteryCheck::new("chebyshev.norms", Expectation::Pass, norms_ok, "|x_i e| <= t(1+1e-9)"),
        BatteryCheck::new("chebyshev.deficit", Expectation::Pass, deficit_ok, "tau(1-e) <= bound"),
    ];
    Ok((reports, checks))
}
