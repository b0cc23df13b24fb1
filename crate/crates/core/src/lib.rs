//! Adversarial contextual bandits with RKHS loss functions.
//!
//! The learner faces T rounds of contexts drawn i.i.d. from a known-samplable
//! distribution while an adversary picks bounded loss functions from the RKHS
//! of a Mercer kernel. The algorithm implemented here plays log-barrier FTRL
//! on cumulative loss estimates produced by Kernel Geometric Resampling: a
//! truncated-geometric-series approximation of the inverse covariance action,
//! computed purely through kernel evaluations, with an optimistic exploration
//! bonus subtracted so the estimates are never harmfully positively biased.
//!
//! Crate layout:
//!
//! * [`kernels`] — Mercer kernels with controlled eigendecay, the truncation
//!   index m(ε), and analytic tail bounds;
//! * [`oracle`] — brute-force finite-dimensional oracle (explicit feature
//!   vectors and dense operator algebra) certifying every kernel-trick
//!   computation;
//! * [`estimator`] — the O(M²) KGR recursion, the replay buffer, and Monte
//!   Carlo bias/second-moment audits;
//! * [`ftrl`] — the log-barrier simplex solver, action sampling, and the
//!   regret-inequality auditor;
//! * [`env`] — context distributions and fixed/oblivious/adaptive
//!   adversaries generating unit-ball RKHS losses;
//! * [`config`], [`sim`] — experiment configs, parameter schedules, the main
//!   loop, regret measurement, and the regret-decomposition diagnostic;
//! * [`rng`] — named deterministic random streams.

pub mod config;
pub mod env;
pub mod error;
pub mod estimator;
pub mod ftrl;
pub mod kernels;
pub mod oracle;
pub mod rng;
pub mod sim;

pub use config::{
    resolve_schedule, theorem1_params, AdversarySpec, ContextSpec, ExperimentConfig, KernelSpec,
    ResolvedParams, ScheduleSpec, SeedsSpec,
};
pub use env::{Adversary, AdversaryKind, AdversaryParams, ContextDistribution, LossFunction};
pub use error::{Error, Result};
pub use estimator::{
    bias_audit, cumulative_estimate, kgr, kgr_eval_bound, point_estimate, second_moment_audit,
    BufferEvaluator, KgrResult, ResampleBlock,
};
pub use ftrl::{log_barrier, regret_audit, sample_action, solve_policy, PolicyDistribution};
pub use kernels::{DecayKind, DecayProfile, Eigensystem, MercerKernel, Support};
pub use oracle::{
    effective_dim_trace, explicit_sigma_plus, feature_map, oracle_kgr, sigma_estimate,
    SigmaEstimate,
};
pub use rng::{round_rng, stream_rng, SeedSpec, Stream};
pub use sim::{
    checkpoints, decomposition_diagnostic, empirical_regret, run, slope_fit, write_run_outputs,
    CheckpointRow, DecompDiag, RunRecord,
};
