//! LIL experiment harness.

pub mod blocks;
pub mod budget;
pub mod experiment;
pub mod gscan;
pub mod kronecker;
pub mod sequence;
pub mod stats;

pub use blocks::{blocks, blocks_eta2, epsilon_solver, BlockScheme, EpsilonPack};
pub use budget::{
    bc_budget, block_envelope, dyadic_block_chain, operator_block_deficits, BcBudget, BlockChain, BlockDeficit,
    DyadicChain,
};
pub use experiment::{
    default_checkpoints, hw_pipeline, lil_run, Check, EnsembleMax, ExperimentReport, Generator, HwConfig, HwReport,
    HwSeed, LilConfig, RatioRow, RatioSummary, SeedBudget, DEFAULT_TRACE_BUDGET, EXACT_ATOM_CAP,
};
pub use gscan::{g_scan, g_value, log_grid, GPoint, GScan};
pub use kronecker::{kronecker_diag, KroneckerReport};
pub use sequence::{alpha_prime, check_alpha_prime, AlphaPrime, AlphaPrimeCheck};
pub use stats::{quantile, Quantiles};
