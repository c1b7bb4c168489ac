//! Numerical checks of the trace and martingale inequalities.

mod battery;
mod expineq;
mod report;
mod scalar;
mod trace_ineq;
mod witness;

pub use battery::{
    exp_towers, run_battery, BatteryCheck, BatteryConfig, BatteryOutcome, Expectation, Family,
};
pub use expineq::{
    check_exp_hypotheses, exp2_lambda_max, exp_bound1, exp_bound2, exp_check1, exp_check2,
    scalar_step, two_point_counterexample_search, two_point_exp2, Exp2Mode, Exp2Report,
    ExpHypotheses,
};
pub use report::{summarize, worst, BatterySummary, IneqReport, Verdict, INEQ_TOL};
pub use scalar::{scalar_f, scalar_g};
pub use trace_ineq::{gt_gap, igt_gap, igt_rhs, IgtMode, IGT_TOL};
pub use witness::{
    chebyshev_witness, poly_exp_bound, poly_exp_grid, scaling_monotonicity_check, WitnessCheck,
    WitnessTail,
};
