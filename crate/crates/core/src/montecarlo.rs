//! Repeated-drop experiment: per drop, solve the femto allocation with and
//! without the QoS caps, score the macro users' SINRs, and aggregate.
//!
//! Per drop the pipeline is:
//!
//! 1. build the random drop;
//! 2. compute per-sub-channel caps from *mean* quantities, in both
//!    interference-estimation modes, for every configured QoS setting;
//! 3. solve three allocations on the femto user's mean-gain floors:
//!    unconstrained (the baseline each degradation is measured against) and
//!    capped under each mode;
//! 4. score each macro user: one stored-fading SINR triple for the per-user
//!    table, then `eval_fading_draws` fresh fading draws to estimate
//!    `Prob(psi <= gamma)` per ring and scheme.
//!
//! Drop `i` draws from an independent, deterministically derived RNG stream,
//! so reports are bit-identical for a fixed `(config, seed)` regardless of
//! how many worker threads run.

use crate::allocator::{waterfill_capped_iterative, ChannelState, DEFAULT_KKT_TOL};
use crate::channel::linear_to_db;
use crate::qoscap::QosSpec;
use crate::scenario::{build_drop, Drop, GainMode, IbarMode, Ring, ScenarioParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("need at least one repetition")]
    NoReps,
    #[error("need at least one QoS setting")]
    NoQosSettings,
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// A named `(gamma, epsilon)` pair, applied uniformly across sub-channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QosSetting {
    pub name: String,
    pub spec: QosSpec,
}

/// How the interference fades when violations are scored.
///
/// The cap derivation models the aggregate interference as a single
/// unit-mean exponential; the physical scenario fades each of the 18
/// interferers independently, which concentrates the aggregate and makes
/// violations rarer. Both are measured; they answer different questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationModel {
    /// Independent fade per interfering station (the full scenario).
    PerInterferer,
    /// One fade on the aggregate mean interference (the cap-derivation
    /// model; violation rates converge to the closed form `1/(1+kappa/p)`).
    AggregateExponential,
}

/// Full experiment description. `qos[0]` is the primary setting: it drives
/// the per-user SINR table and the violation summary; the remaining settings
/// only contribute degradation curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ScenarioParams,
    pub qos: Vec<QosSetting>,
    pub reps: usize,
    pub master_seed: u64,
    /// Fresh fading draws per (drop, macro user) for violation estimation.
    pub eval_fading_draws: usize,
    /// Which interference estimate feeds the "proposed" allocation.
    pub ibar_mode: IbarMode,
    pub violation_model: ViolationModel,
    /// Diagnostic multiplier on every cap (1.0 in normal operation). Values
    /// above 1 deliberately break the QoS guarantee, which is how the
    /// validation gate is shown to fail when it should.
    pub cap_scale: f64,
}

/// Allocation scheme under which a violation was measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Unconstrained,
    ProposedApprox,
    ProposedExact,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::Unconstrained,
        Scheme::ProposedApprox,
        Scheme::ProposedExact,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Unconstrained => "unconstrained",
            Scheme::ProposedApprox => "proposed_approx",
            Scheme::ProposedExact => "proposed_exact",
        }
    }

    fn index(&self) -> usize {
        match self {
            Scheme::Unconstrained => 0,
            Scheme::ProposedApprox => 1,
            Scheme::ProposedExact => 2,
        }
    }
}

/// Violation counts for one (ring, scheme) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCell {
    pub violations: u64,
    pub samples: u64,
}

impl ViolationCell {
    pub fn rate(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.violations as f64 / self.samples as f64)
    }
}

/// Empirical `Prob(psi <= gamma)` tallies per ring and scheme, under the
/// primary QoS setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ViolationSummary {
    cells: [[ViolationCell; 3]; 4],
}

impl ViolationSummary {
    fn record(&mut self, ring: Ring, scheme: Scheme, violated: bool) {
        let cell = &mut self.cells[ring.index()][scheme.index()];
        cell.samples += 1;
        cell.violations += u64::from(violated);
    }

    fn merge(&mut self, other: &ViolationSummary) {
        for r in 0..4 {
            for s in 0..3 {
                self.cells[r][s].violations += other.cells[r][s].violations;
                self.cells[r][s].samples += other.cells[r][s].samples;
            }
        }
    }

    pub fn cell(&self, ring: Ring, scheme: Scheme) -> ViolationCell {
        self.cells[ring.index()][scheme.index()]
    }

    /// Per-ring empirical violation rates for one scheme; `None` for rings
    /// with no samples.
    pub fn rates(&self, scheme: Scheme) -> [(Ring, Option<f64>); 4] {
        Ring::ALL.map(|ring| (ring, self.cell(ring, scheme).rate()))
    }
}

/// One macro user's scored SINRs in one drop (stored-fading realisation on
/// the user's assigned sub-channel).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsRow {
    pub drop_index: usize,
    pub mms: usize,
    pub ring: Ring,
    pub sinr_no_femto_db: f64,
    pub sinr_unconstrained_db: f64,
    pub sinr_proposed_db: f64,
    /// SINR ratio (proposed over no-femto) on the same fading realisation.
    pub psi_proposed: f64,
}

/// Per-setting aggregates across drops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingStats {
    pub name: String,
    pub gamma: f64,
    pub epsilon: f64,
    pub mean_rate_proposed_approx: f64,
    pub mean_rate_proposed_exact: f64,
    /// One degradation sample per drop: `1 - rate_capped/rate_unconstrained`.
    pub degradations_approx: Vec<f64>,
    pub degradations_exact: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub master_seed: u64,
    pub reps: usize,
    pub ibar_mode: IbarMode,
    pub violation_model: ViolationModel,
    pub mean_rate_unconstrained: f64,
    pub fig2_rows: Vec<MmsRow>,
    pub settings: Vec<SettingStats>,
    pub violations: ViolationSummary,
}

struct SettingEval {
    rate_approx: f64,
    rate_exact: f64,
    degradation_approx: f64,
    degradation_exact: f64,
}

struct DropEval {
    rows: Vec<MmsRow>,
    rate_unconstrained: f64,
    per_setting: Vec<SettingEval>,
    violations: ViolationSummary,
}

/// Run the full experiment. Bit-identical output for identical inputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if cfg.reps == 0 {
        return Err(ExperimentError::NoReps);
    }
    if cfg.qos.is_empty() {
        return Err(ExperimentError::NoQosSettings);
    }
    cfg.params.validate()?;

    let evals: Vec<DropEval> = (0..cfg.reps)
        .into_par_iter()
        .map(|i| evaluate_drop(cfg, i))
        .collect();

    let mut fig2_rows = Vec::with_capacity(cfg.reps * cfg.params.num_mms);
    let mut violations = ViolationSummary::default();
    let mut rate_unc_sum = 0.0;
    let mut settings: Vec<SettingStats> = cfg
        .qos
        .iter()
        .map(|q| SettingStats {
            name: q.name.clone(),
            gamma: q.spec.gamma(),
            epsilon: q.spec.epsilon(),
            mean_rate_proposed_approx: 0.0,
            mean_rate_proposed_exact: 0.0,
            degradations_approx: Vec::with_capacity(cfg.reps),
            degradations_exact: Vec::with_capacity(cfg.reps),
        })
        .collect();

    for eval in &evals {
        fig2_rows.extend(eval.rows.iter().cloned());
        violations.merge(&eval.violations);
        rate_unc_sum += eval.rate_unconstrained;
        for (stats, s) in settings.iter_mut().zip(&eval.per_setting) {
            stats.mean_rate_proposed_approx += s.rate_approx;
            stats.mean_rate_proposed_exact += s.rate_exact;
            stats.degradations_approx.push(s.degradation_approx);
            stats.degradations_exact.push(s.degradation_exact);
        }
    }
    let reps = cfg.reps as f64;
    for stats in &mut settings {
        stats.mean_rate_proposed_approx /= reps;
        stats.mean_rate_proposed_exact /= reps;
    }

    Ok(ExperimentReport {
        master_seed: cfg.master_seed,
        reps: cfg.reps,
        ibar_mode: cfg.ibar_mode,
        violation_model: cfg.violation_model,
        mean_rate_unconstrained: rate_unc_sum / reps,
        fig2_rows,
        settings,
        violations,
    })
}

fn evaluate_drop(cfg: &ExperimentConfig, drop_index: usize) -> DropEval {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(drop_index as u64 + 1);
    let drop = build_drop(&cfg.params, &mut rng);
    let n = drop.num_subchannels();

    // Caps are set from mean quantities; the allocation and its rates use the
    // mean-gain floors as well. Fading enters only the SINR scoring below.
    let floors = drop.fms_floors(GainMode::MeanOnly);
    let budget = cfg.params.p_femto_total_w;
    let unconstrained = waterfill_capped_iterative(
        &ChannelState::uncapped(floors.clone(), budget).expect("floors are positive"),
    );
    debug_assert!(unconstrained.certificate.is_valid(DEFAULT_KKT_TOL));
    let rate_unconstrained = unconstrained.sum_rate_bps_hz;

    let mut per_setting = Vec::with_capacity(cfg.qos.len());
    let mut primary_powers: (Vec<f64>, Vec<f64>) = (vec![], vec![]); // (approx, exact)
    for (idx, setting) in cfg.qos.iter().enumerate() {
        let qos_vec = vec![setting.spec; n];
        let solve = |mode: IbarMode| {
            let caps: Vec<f64> = drop
                .power_caps(&qos_vec, mode)
                .iter()
                .map(|c| c.cap_w * cfg.cap_scale)
                .collect();
            let state =
                ChannelState::new(floors.clone(), caps, budget).expect("caps are non-negative");
            let result = waterfill_capped_iterative(&state);
            debug_assert!(result.certificate.is_valid(DEFAULT_KKT_TOL));
            result
        };
        let approx = solve(IbarMode::Approx);
        let exact = solve(IbarMode::Exact);
        if idx == 0 {
            primary_powers = (approx.powers_w.clone(), exact.powers_w.clone());
        }
        per_setting.push(SettingEval {
            rate_approx: approx.sum_rate_bps_hz,
            rate_exact: exact.sum_rate_bps_hz,
            degradation_approx: 1.0 - approx.sum_rate_bps_hz / rate_unconstrained,
            degradation_exact: 1.0 - exact.sum_rate_bps_hz / rate_unconstrained,
        });
    }
    let proposed_powers = match cfg.ibar_mode {
        IbarMode::Approx => &primary_powers.0,
        IbarMode::Exact => &primary_powers.1,
    };

    let rows = (0..drop.num_mms())
        .map(|j| {
            score_mms(
                &drop,
                drop_index,
                j,
                &unconstrained.powers_w,
                proposed_powers,
            )
        })
        .collect();

    let violations = tally_violations(
        cfg,
        &drop,
        &unconstrained.powers_w,
        &primary_powers.0,
        &primary_powers.1,
        &mut rng,
    );

    DropEval {
        rows,
        rate_unconstrained,
        per_setting,
        violations,
    }
}

fn score_mms(
    drop: &Drop,
    drop_index: usize,
    j: usize,
    unconstrained: &[f64],
    proposed: &[f64],
) -> MmsRow {
    let no_femto = drop.sinr_mms(j, None);
    let with_proposed = drop.sinr_mms(j, Some(proposed));
    MmsRow {
        drop_index,
        mms: j,
        ring: drop.ring_of(j),
        sinr_no_femto_db: linear_to_db(no_femto),
        sinr_unconstrained_db: linear_to_db(drop.sinr_mms(j, Some(unconstrained))),
        sinr_proposed_db: linear_to_db(with_proposed),
        psi_proposed: with_proposed / no_femto,
    }
}

fn tally_violations(
    cfg: &ExperimentConfig,
    drop: &Drop,
    unconstrained: &[f64],
    proposed_approx: &[f64],
    proposed_exact: &[f64],
    rng: &mut ChaCha8Rng,
) -> ViolationSummary {
    let mut summary = ViolationSummary::default();
    let gamma = cfg.qos[0].spec.gamma();
    let num_interferers = drop.topology.neighbor_positions.len();
    let mut fades = vec![0.0; num_interferers];
    for j in 0..drop.num_mms() {
        let ring = drop.ring_of(j);
        let ch = drop.assignment.subchannel_for_mms(j);
        for _ in 0..cfg.eval_fading_draws {
            let cross: f64 = rng.sample(Exp1);
            let aggregate: f64 = match cfg.violation_model {
                ViolationModel::PerInterferer => {
                    for f in fades.iter_mut() {
                        *f = rng.sample(Exp1);
                    }
                    0.0
                }
                ViolationModel::AggregateExponential => rng.sample(Exp1),
            };
            for (scheme, powers) in [
                (Scheme::Unconstrained, unconstrained),
                (Scheme::ProposedApprox, proposed_approx),
                (Scheme::ProposedExact, proposed_exact),
            ] {
                let psi = match cfg.violation_model {
                    ViolationModel::PerInterferer => {
                        drop.psi_with_fresh_fading(j, powers[ch], cross, &fades)
                    }
                    ViolationModel::AggregateExponential => {
                        drop.psi_with_aggregate_fading(j, powers[ch], cross, aggregate)
                    }
                };
                summary.record(ring, scheme, psi <= gamma);
            }
        }
    }
    summary
}

/// Empirical complementary CDF: fraction of samples `>= t` for each threshold.
pub fn degradation_ccdf(samples: &[f64], thresholds: &[f64]) -> Vec<f64> {
    assert!(!samples.is_empty(), "need at least one sample");
    thresholds
        .iter()
        .map(|&t| samples.iter().filter(|&&d| d >= t).count() as f64 / samples.len() as f64)
        .collect()
}

/// Empirical CDF: fraction of samples `<= t` for each threshold.
pub fn degradation_cdf(samples: &[f64], thresholds: &[f64]) -> Vec<f64> {
    assert!(!samples.is_empty(), "need at least one sample");
    thresholds
        .iter()
        .map(|&t| samples.iter().filter(|&&d| d <= t).count() as f64 / samples.len() as f64)
        .collect()
}

/// The default threshold grid used for degradation curves: 0 to 1 in steps
/// of 0.005.
pub fn default_degradation_thresholds() -> Vec<f64> {
    (0..=200).map(|k| k as f64 * 0.005).collect()
}
