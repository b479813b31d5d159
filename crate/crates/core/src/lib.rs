//! Downlink power allocation for a femto base station that shares OFDMA
//! sub-channels with a macro network, under a probabilistic limit on how much
//! the femto may degrade each macro user's SINR.
//!
//! The pieces:
//!
//! - [`channel`]: path loss, shadowing, Rayleigh fading, wall loss, link
//!   gains.
//! - [`qoscap`]: the SINR-ratio constraint `Prob(psi <= gamma) <= epsilon`
//!   and its closed-form per-sub-channel transmit-power cap.
//! - [`allocator`]: capped water-filling (iterative clip-and-refill and an
//!   independent bisection solver) with KKT optimality certificates.
//! - [`scenario`]: a two-tier hexagonal network with one femtocell, random
//!   drops, and interference bookkeeping.
//! - [`montecarlo`]: the repeated-drop experiment comparing capped and
//!   unconstrained allocations.
//! - [`config`] / [`cli`]: TOML configuration and the `femtoalloc` binary
//!   (`allocate`, `cap`, `simulate`, `validate-qos`).

// Validation guards are written as negated comparisons (`!(x > 0.0)`) so
// that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod channel;
pub mod cli;
pub mod config;
pub mod montecarlo;
pub mod qoscap;
pub mod scenario;

pub use allocator::{
    check_kkt, oracle_grid_bound, oracle_grid_search, sum_rate, waterfill_capped_bisection,
    waterfill_capped_iterative, AllocationResult, ChannelState, KktCertificate, DEFAULT_KKT_TOL,
};
pub use channel::{
    compose_link_gain, db_to_linear, dbm_to_watts, linear_to_db, sample_fading, watts_to_dbm,
    LinkGain, PathLossKind, PathLossModel, WallLoss,
};
pub use config::Config;
pub use montecarlo::{
    degradation_ccdf, degradation_cdf, run_experiment, ExperimentConfig, ExperimentReport,
    QosSetting, Scheme, ViolationModel,
};
pub use qoscap::{
    empirical_violation_rate, fading_ratio_cdf, power_cap, psi_approx, psi_exact, CapParams,
    MacroSideEstimate, QosSpec,
};
pub use scenario::{
    build_drop, hex_neighbor_positions, mean_interference_field, Assignment, Drop, GainMode,
    IbarMode, InterferenceTarget, Point, Ring, ScenarioParams, StationSet, Topology,
};
