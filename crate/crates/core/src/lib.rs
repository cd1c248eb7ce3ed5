//! Selection bias in observational estimates of algorithmic progress.
//!
//! Simulates log loss from a scaling law whose data productivity carries a
//! latent, lab-specific component, fits the usual two-regressor model that
//! omits it, and compares the Monte Carlo fits with closed-form probability
//! limits.

// `!(x > 0.0)` is used deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod dgp;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod stats;
pub mod svg;

pub use asymptotics::{
    bias_ratio_direct, check_theorem_conditions, plim_estimates, PlimReport, SignPrediction,
    TheoremConditions,
};
pub use dgp::{
    default_sigma, generate_eps, implied_corr_lnd, simulate_lnl, synth_dataset, Dataset,
    DgpParams, SynthSettings,
};
pub use error::{Error, Result};
pub use montecarlo::{
    progress_overstatement, run_replication, run_sweep, DataSource, SigmaSpec, SweepConfig,
    SweepRow,
};
pub use stats::{moments, ols_fit, residualize, FitResult, MomentSet};
