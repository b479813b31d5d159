//! Capped water-filling power allocation with KKT optimality certificates.
//!
//! The problem: maximise `sum_n log2(1 + p_n / floor_n)` subject to
//! `0 <= p_n <= cap_n` and `sum_n p_n <= P`. It is convex, and its optimum has
//! the clipped water-filling form
//!
//! ```text
//! p_n = min(cap_n, max(0, w - floor_n))
//! ```
//!
//! for a water level `w = 1/lambda`. Two independent solvers are provided:
//!
//! - [`waterfill_capped_iterative`]: run plain water-filling, pin every
//!   channel that exceeds its cap, remove the pinned power from the budget,
//!   and repeat on the remaining channels. Each round pins at least one
//!   channel, so it terminates in at most `N` rounds.
//! - [`waterfill_capped_bisection`]: bisect on `w` until
//!   `sum_n min(cap_n, max(0, w - floor_n))` meets the spendable budget
//!   `min(P, sum caps)`.
//!
//! Every result carries a [`KktCertificate`] whose residual verifies primal
//! feasibility, dual feasibility, complementary slackness, and stationarity;
//! convexity makes a small residual a proof of global optimality.

use serde::Serialize;
use thiserror::Error;

/// Residual threshold under which a certificate counts as an optimality
/// proof.
pub const DEFAULT_KKT_TOL: f64 = 1e-8;

const BISECTION_MAX_ITERS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("floors and caps must have equal length ({floors} vs {caps})")]
    LengthMismatch { floors: usize, caps: usize },
    #[error("floor[{0}] must be positive and finite")]
    InvalidFloor(usize),
    #[error("cap[{0}] must be non-negative (infinity allowed)")]
    InvalidCap(usize),
    #[error("total power must be non-negative and finite, got {0}")]
    InvalidBudget(f64),
    #[error("grid oracle supports at most 4 channels, got {0}")]
    TooManyChannelsForOracle(usize),
    #[error("grid oracle needs at least 2 points per axis, got {0}")]
    OracleResolutionTooCoarse(usize),
}

/// One allocation instance: per-channel effective noise floors (in Watts,
/// referred to the transmitter), per-channel power caps (infinity for
/// uncapped), and the total power budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelState {
    floors_w: Vec<f64>,
    caps_w: Vec<f64>,
    total_power_w: f64,
}

impl ChannelState {
    pub fn new(
        floors_w: Vec<f64>,
        caps_w: Vec<f64>,
        total_power_w: f64,
    ) -> Result<Self, AllocError> {
        if floors_w.len() != caps_w.len() {
            return Err(AllocError::LengthMismatch {
                floors: floors_w.len(),
                caps: caps_w.len(),
            });
        }
        for (i, &f) in floors_w.iter().enumerate() {
            if !(f > 0.0 && f.is_finite()) {
                return Err(AllocError::InvalidFloor(i));
            }
        }
        for (i, &c) in caps_w.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(AllocError::InvalidCap(i));
            }
        }
        if !(total_power_w >= 0.0 && total_power_w.is_finite()) {
            return Err(AllocError::InvalidBudget(total_power_w));
        }
        Ok(Self {
            floors_w,
            caps_w,
            total_power_w,
        })
    }

    /// Convenience constructor for the uncapped problem.
    pub fn uncapped(floors_w: Vec<f64>, total_power_w: f64) -> Result<Self, AllocError> {
        let n = floors_w.len();
        Self::new(floors_w, vec![f64::INFINITY; n], total_power_w)
    }

    pub fn num_channels(&self) -> usize {
        self.floors_w.len()
    }

    pub fn floors(&self) -> &[f64] {
        &self.floors_w
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps_w
    }

    pub fn total_power(&self) -> f64 {
        self.total_power_w
    }

    /// Power the optimum actually spends: `min(P, sum caps)`.
    fn spendable_power(&self) -> f64 {
        let cap_sum: f64 = self.caps_w.iter().sum();
        self.total_power_w.min(cap_sum)
    }
}

/// Multiplier triple certifying an allocation, plus the largest violation
/// found across all optimality conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    /// Budget multiplier; zero when the budget constraint is slack.
    pub lambda: f64,
    /// Multipliers of the `p_n >= 0` constraints.
    pub mu: Vec<f64>,
    /// Multipliers of the `p_n <= cap_n` constraints.
    pub nu: Vec<f64>,
    /// Maximum absolute residual over feasibility, complementary slackness,
    /// and (floor-scaled) stationarity. Infinite for infeasible allocations.
    pub max_residual: f64,
}

impl KktCertificate {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// A solved allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    /// Per-channel transmit powers in Watts.
    pub powers_w: Vec<f64>,
    /// Water level `1/lambda` in Watts; infinite when the budget is slack.
    pub water_level_w: f64,
    /// `sum_n log2(1 + p_n/floor_n)` in bits/s/Hz.
    pub sum_rate_bps_hz: f64,
    pub certificate: KktCertificate,
}

/// Objective value of an allocation: `sum_n log2(1 + p_n/floor_n)`.
pub fn sum_rate(floors_w: &[f64], powers_w: &[f64]) -> f64 {
    assert_eq!(floors_w.len(), powers_w.len());
    floors_w
        .iter()
        .zip(powers_w)
        .map(|(&f, &p)| (1.0 + p / f).log2())
        .sum()
}

/// Plain water-filling over `active` channel indices: repeatedly compute the
/// water level over the active set and drop channels whose allocation would
/// be negative. Returns the final water level and `(index, power)` pairs.
fn waterfill_unconstrained(
    floors_w: &[f64],
    mut active: Vec<usize>,
    budget_w: f64,
) -> (f64, Vec<(usize, f64)>) {
    debug_assert!(!active.is_empty());
    loop {
        let floor_sum: f64 = active.iter().map(|&i| floors_w[i]).sum();
        let water = (budget_w + floor_sum) / active.len() as f64;
        let keep: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| water - floors_w[i] >= 0.0)
            .collect();
        if keep.len() == active.len() {
            let alloc = active.iter().map(|&i| (i, water - floors_w[i])).collect();
            return (water, alloc);
        }
        if keep.is_empty() {
            // Zero budget with distinct floors collapses here; the water sits
            // on the lowest floor and every channel gets nothing.
            let min_floor = active
                .iter()
                .map(|&i| floors_w[i])
                .fold(f64::INFINITY, f64::min);
            let alloc = active.iter().map(|&i| (i, 0.0)).collect();
            return (min_floor, alloc);
        }
        active = keep;
    }
}

/// Capped water-filling by pinning: run water-filling, clamp violators to
/// their caps, subtract the pinned power from the budget, and repeat on the
/// remaining channels until no cap is violated.
pub fn waterfill_capped_iterative(state: &ChannelState) -> AllocationResult {
    let n = state.num_channels();
    let floors = state.floors();
    let caps = state.caps();

    let mut powers = vec![0.0; n];
    let mut pinned = vec![false; n];
    // Zero-cap channels can never transmit; pin them up front.
    for i in 0..n {
        if caps[i] == 0.0 {
            pinned[i] = true;
        }
    }

    let mut budget = state.total_power();
    let mut water = f64::INFINITY;
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        if free.is_empty() {
            break;
        }
        let (w, alloc) = waterfill_unconstrained(floors, free, budget);
        let violators: Vec<(usize, f64)> = alloc
            .iter()
            .copied()
            .filter(|&(i, p)| p > caps[i])
            .collect();
        if violators.is_empty() {
            for (i, p) in alloc {
                powers[i] = p;
            }
            water = w;
            break;
        }
        for (i, _) in violators {
            powers[i] = caps[i];
            pinned[i] = true;
            budget -= caps[i];
        }
    }

    finish(state, powers, water)
}

/// Capped water-filling by bisection on the water level: find `w` with
/// `sum_n min(cap_n, max(0, w - floor_n)) = min(P, sum caps)`.
///
/// The left-hand side is continuous and nondecreasing in `w`; the bracket
/// `[min floor, max floor + P]` always contains a solution. `tol_rel` bounds
/// the accepted budget residual relative to `P`; the bracket is additionally
/// shrunk to floating-point resolution, so in practice the residual is far
/// below `tol_rel`.
pub fn waterfill_capped_bisection(state: &ChannelState, tol_rel: f64) -> AllocationResult {
    assert!(tol_rel > 0.0, "tolerance must be positive");
    let n = state.num_channels();
    let floors = state.floors();
    let caps = state.caps();
    let p_total = state.total_power();

    if n == 0 {
        return finish(state, vec![], f64::INFINITY);
    }

    let cap_sum: f64 = caps.iter().sum();
    if cap_sum <= p_total {
        // Every cap binds and part of the budget may go unspent.
        return finish(state, caps.to_vec(), f64::INFINITY);
    }

    let min_floor = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let target = state.spendable_power();
    if target <= 0.0 {
        return finish(state, vec![0.0; n], min_floor);
    }

    let allocated = |w: f64| -> f64 {
        floors
            .iter()
            .zip(caps)
            .map(|(&f, &c)| (w - f).max(0.0).min(c))
            .sum()
    };

    let max_floor = floors.iter().copied().fold(0.0, f64::max);
    let mut lo = min_floor;
    let mut hi = max_floor + p_total;
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let spent = allocated(mid);
        if (spent - target).abs() <= tol_rel * target && hi - lo <= f64::EPSILON * hi {
            break;
        }
        if spent < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    let water = 0.5 * (lo + hi);
    let powers = floors
        .iter()
        .zip(caps)
        .map(|(&f, &c)| (water - f).max(0.0).min(c))
        .collect();
    finish(state, powers, water)
}

fn finish(state: &ChannelState, powers: Vec<f64>, water_level_w: f64) -> AllocationResult {
    let certificate = check_kkt(state, &powers, water_level_w, DEFAULT_KKT_TOL);
    let sum_rate_bps_hz = sum_rate(state.floors(), &powers);
    AllocationResult {
        powers_w: powers,
        water_level_w,
        sum_rate_bps_hz,
        certificate,
    }
}

/// Verify an allocation against the optimality conditions and reconstruct
/// its multipliers.
///
/// With `lambda = 1/water_level`, the boundary-consistent duals are
/// `nu_n = max(0, 1/(p_n + floor_n) - lambda)` for finitely capped channels
/// (zero otherwise) and `mu_n = max(0, lambda - 1/(p_n + floor_n))`. The
/// reported residual is the maximum over:
///
/// - primal feasibility (infinite residual if violated beyond `tol`),
/// - complementary slackness `mu_n * p_n`, `nu_n * (p_n - cap_n)`, and
///   `lambda * (sum p - P)` when the budget multiplier is active,
/// - stationarity `|lambda + nu_n - mu_n - 1/(p_n + floor_n)|`, scaled by
///   `(p_n + floor_n)` to make it dimensionless.
///
/// Any allocation other than the optimum leaves some condition visibly
/// violated, so `max_residual <= tol` certifies global optimality.
pub fn check_kkt(
    state: &ChannelState,
    powers_w: &[f64],
    water_level_w: f64,
    tol: f64,
) -> KktCertificate {
    let n = state.num_channels();
    assert_eq!(powers_w.len(), n, "powers must match the channel count");
    let floors = state.floors();
    let caps = state.caps();
    let p_total = state.total_power();
    let scale = if p_total > 0.0 { p_total } else { 1.0 };

    let lambda = if water_level_w.is_finite() {
        1.0 / water_level_w
    } else {
        0.0
    };

    let mut mu = vec![0.0; n];
    let mut nu = vec![0.0; n];
    let mut max_residual: f64 = 0.0;
    let mut infeasible = false;

    let spent: f64 = powers_w.iter().sum();
    if spent - p_total > tol * scale {
        infeasible = true;
    }
    if lambda > 0.0 {
        max_residual = max_residual.max((lambda * (spent - p_total)).abs());
    }

    for i in 0..n {
        let p = powers_w[i];
        if p < -tol * scale || p - caps[i] > tol * scale {
            infeasible = true;
            continue;
        }
        let marginal = 1.0 / (p + floors[i]);
        nu[i] = if caps[i].is_finite() {
            (marginal - lambda).max(0.0)
        } else {
            0.0
        };
        mu[i] = (lambda - marginal).max(0.0);
        // Complementary slackness.
        max_residual = max_residual.max((mu[i] * p).abs());
        if caps[i].is_finite() {
            max_residual = max_residual.max((nu[i] * (p - caps[i])).abs());
        }
        // Stationarity, made dimensionless by the local power scale.
        let stationarity = (lambda + nu[i] - mu[i] - marginal) * (p + floors[i]);
        max_residual = max_residual.max(stationarity.abs());
    }

    if infeasible {
        max_residual = f64::INFINITY;
    }

    KktCertificate {
        lambda,
        mu,
        nu,
        max_residual,
    }
}

/// Exhaustive grid search over the feasible box-and-budget set; the
/// independent optimality oracle for small instances.
///
/// Enumerates `points_per_axis` evenly spaced powers per channel (each axis
/// truncated at `min(cap, P)`), keeps combinations with `sum p <= P`, and
/// returns the best objective found. Cost grows as `points^N`, so `N <= 4`.
pub fn oracle_grid_search(state: &ChannelState, points_per_axis: usize) -> Result<f64, AllocError> {
    let n = state.num_channels();
    if n > 4 {
        return Err(AllocError::TooManyChannelsForOracle(n));
    }
    if points_per_axis < 2 {
        return Err(AllocError::OracleResolutionTooCoarse(points_per_axis));
    }
    let p_total = state.total_power();
    let axes: Vec<Vec<f64>> = state
        .caps()
        .iter()
        .map(|&c| {
            let upper = c.min(p_total);
            if upper <= 0.0 {
                vec![0.0]
            } else {
                (0..points_per_axis)
                    .map(|k| upper * k as f64 / (points_per_axis - 1) as f64)
                    .collect()
            }
        })
        .collect();

    let floors = state.floors();
    let mut best = f64::NEG_INFINITY;
    let mut current = vec![0.0; n];

    fn recurse(
        axes: &[Vec<f64>],
        floors: &[f64],
        current: &mut Vec<f64>,
        depth: usize,
        remaining: f64,
        acc_rate: f64,
        best: &mut f64,
    ) {
        if depth == axes.len() {
            if acc_rate > *best {
                *best = acc_rate;
            }
            return;
        }
        for &p in &axes[depth] {
            if p > remaining * (1.0 + 1e-12) {
                break; // axes are ascending
            }
            current[depth] = p;
            let rate = acc_rate + (1.0 + p / floors[depth]).log2();
            recurse(axes, floors, current, depth + 1, remaining - p, rate, best);
        }
    }

    recurse(&axes, floors, &mut current, 0, p_total, 0.0, &mut best);
    Ok(best)
}

/// Upper bound on how far the grid optimum can fall below the true optimum:
/// rounding each coordinate down to the grid loses at most one step times the
/// steepest slope `1/(floor * ln 2)` per channel.
pub fn oracle_grid_bound(state: &ChannelState, points_per_axis: usize) -> f64 {
    let p_total = state.total_power();
    state
        .floors()
        .iter()
        .zip(state.caps())
        .map(|(&f, &c)| {
            let upper = c.min(p_total);
            if upper <= 0.0 {
                0.0
            } else {
                let step = upper / (points_per_axis - 1) as f64;
                step / (f * std::f64::consts::LN_2)
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BISECT_TOL: f64 = 1e-12;

    fn solve_both(state: &ChannelState) -> (AllocationResult, AllocationResult) {
        (
            waterfill_capped_iterative(state),
            waterfill_capped_bisection(state, BISECT_TOL),
        )
    }

    fn assert_powers_close(a: &[f64], b: &[f64], scale: f64) {
        assert_powers_within(a, b, 1e-9 * scale);
    }

    fn assert_powers_within(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!(
                (x - y).abs() <= tol,
                "powers differ: {x} vs {y} (tol {tol})"
            );
        }
    }

    pub(super) fn random_instance(rng: &mut ChaCha8Rng) -> ChannelState {
        let n = rng.random_range(1..=64usize);
        let floors: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.random_range(-8.0..2.0)))
            .collect();
        let p_total = 10f64.powf(rng.random_range(-2.0..2.0));
        let caps: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_range(0.0..1.0) < 0.3 {
                    f64::INFINITY
                } else {
                    p_total / n as f64 * 10f64.powf(rng.random_range(-4.0..0.5))
                }
            })
            .collect();
        ChannelState::new(floors, caps, p_total).unwrap()
    }

    #[test]
    fn single_channel_gets_everything() {
        let state = ChannelState::uncapped(vec![0.2], 1.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert!((it.powers_w[0] - 1.0).abs() < 1e-12);
        assert!((bi.powers_w[0] - 1.0).abs() < 1e-9);
        assert_powers_within(&it.powers_w, &bi.powers_w, 1e-10);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));
    }

    #[test]
    fn symmetric_split() {
        let state = ChannelState::uncapped(vec![0.3, 0.3], 1.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert!((it.powers_w[0] - 0.5).abs() < 1e-12);
        assert!((it.powers_w[1] - 0.5).abs() < 1e-12);
        assert_powers_within(&it.powers_w, &bi.powers_w, 1e-10);
    }

    #[test]
    fn binding_cap_spills_into_free_channel() {
        let state = ChannelState::new(vec![0.1, 0.1], vec![0.3, f64::INFINITY], 1.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert!((it.powers_w[0] - 0.3).abs() < 1e-12, "{:?}", it.powers_w);
        assert!((it.powers_w[1] - 0.7).abs() < 1e-12);
        assert_powers_within(&it.powers_w, &bi.powers_w, 1e-10);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));
        assert!(bi.certificate.is_valid(DEFAULT_KKT_TOL));
    }

    #[test]
    fn weak_channel_shut_off() {
        // Water level (2 + 1 + 2) / 2 = 2.5 over the two strongest channels.
        let state = ChannelState::uncapped(vec![1.0, 2.0, 4.0], 2.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert!((it.powers_w[0] - 1.5).abs() < 1e-12, "{:?}", it.powers_w);
        assert!((it.powers_w[1] - 0.5).abs() < 1e-12);
        assert_eq!(it.powers_w[2], 0.0);
        assert!((it.water_level_w - 2.5).abs() < 1e-12);
        assert_powers_within(&it.powers_w, &bi.powers_w, 1e-10);
    }

    #[test]
    fn caps_below_budget_all_bind() {
        let state = ChannelState::new(vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.05], 2.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert_eq!(it.powers_w, vec![0.1, 0.2, 0.05]);
        assert_eq!(bi.powers_w, vec![0.1, 0.2, 0.05]);
        assert_eq!(it.water_level_w, f64::INFINITY);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));
        assert!(bi.certificate.is_valid(DEFAULT_KKT_TOL));
    }

    #[test]
    fn zero_budget_allocates_nothing() {
        let state = ChannelState::uncapped(vec![0.5, 0.1], 0.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert_eq!(it.powers_w, vec![0.0, 0.0]);
        assert_eq!(bi.powers_w, vec![0.0, 0.0]);
        assert_eq!(it.sum_rate_bps_hz, 0.0);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));
        assert!(bi.certificate.is_valid(DEFAULT_KKT_TOL));
    }

    #[test]
    fn vanishing_budget_vanishing_powers() {
        let floors = vec![0.2, 0.4, 0.8];
        // The bisection bracket resolves to ~eps * max_floor absolutely, so
        // allow that much slack on top of relative agreement.
        for p in [1e-3, 1e-6, 1e-9] {
            let state = ChannelState::uncapped(floors.clone(), p).unwrap();
            let (_, bi) = solve_both(&state);
            assert!(bi.powers_w.iter().all(|&x| x <= p * (1.0 + 1e-9) + 1e-12));
            assert!(bi.powers_w.iter().sum::<f64>() <= p * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn all_caps_zero_is_valid_empty_allocation() {
        let state = ChannelState::new(vec![0.1, 0.2], vec![0.0, 0.0], 1.0).unwrap();
        let (it, bi) = solve_both(&state);
        assert_eq!(it.powers_w, vec![0.0, 0.0]);
        assert_eq!(it.sum_rate_bps_hz, 0.0);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));
        assert!(bi.certificate.is_valid(DEFAULT_KKT_TOL));
    }

    #[test]
    fn certificate_rejects_perturbed_solution() {
        let state = ChannelState::uncapped(vec![0.1, 0.2, 0.4], 1.0).unwrap();
        let it = waterfill_capped_iterative(&state);
        assert!(it.certificate.is_valid(DEFAULT_KKT_TOL));

        // Nudge one power up 1% and renormalise the total.
        let mut powers = it.powers_w.clone();
        powers[0] *= 1.01;
        let total: f64 = powers.iter().sum();
        for p in &mut powers {
            *p *= state.total_power() / total;
        }
        let cert = check_kkt(&state, &powers, it.water_level_w, DEFAULT_KKT_TOL);
        assert!(
            cert.max_residual > DEFAULT_KKT_TOL,
            "perturbation went undetected: {}",
            cert.max_residual
        );
    }

    #[test]
    fn certificate_rejects_all_zero_when_power_available() {
        let state = ChannelState::new(vec![0.1, 0.2], vec![1.0, 1.0], 1.0).unwrap();
        let cert = check_kkt(&state, &[0.0, 0.0], f64::INFINITY, DEFAULT_KKT_TOL);
        assert!(cert.max_residual > DEFAULT_KKT_TOL);
    }

    #[test]
    fn certificate_flags_infeasible_as_infinite() {
        let state = ChannelState::new(vec![0.1, 0.2], vec![0.3, 0.3], 1.0).unwrap();
        let cert = check_kkt(&state, &[0.4, 0.1], 0.5, DEFAULT_KKT_TOL);
        assert_eq!(cert.max_residual, f64::INFINITY);
        let cert = check_kkt(&state, &[-0.1, 0.2], 0.5, DEFAULT_KKT_TOL);
        assert_eq!(cert.max_residual, f64::INFINITY);
    }

    #[test]
    fn oracle_confirms_capped_instance() {
        let state = ChannelState::new(vec![0.1, 0.1], vec![0.3, f64::INFINITY], 1.0).unwrap();
        let oracle = oracle_grid_search(&state, 1001).unwrap();
        let solver = waterfill_capped_iterative(&state).sum_rate_bps_hz;
        let bound = oracle_grid_bound(&state, 1001);
        assert!(solver >= oracle - 1e-9);
        assert!(
            oracle >= solver - bound,
            "oracle {oracle} solver {solver} bound {bound}"
        );
    }

    #[test]
    fn oracle_is_exact_for_single_channels() {
        // With one channel the solver's optimum min(cap, budget) sits on the
        // grid, so the oracle reproduces it to the last bit (dyadic values
        // keep the water-level arithmetic exact).
        for (cap, budget) in [(f64::INFINITY, 1.0), (0.25, 1.0), (2.0, 0.5)] {
            let state = ChannelState::new(vec![0.25], vec![cap], budget).unwrap();
            let solver = waterfill_capped_iterative(&state).sum_rate_bps_hz;
            let oracle = oracle_grid_search(&state, 5).unwrap();
            assert_eq!(solver, oracle, "cap {cap} budget {budget}");
        }
    }

    #[test]
    fn oracle_matches_solver_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let floors = vec![
                10f64.powf(rng.random_range(-3.0..0.0)),
                10f64.powf(rng.random_range(-3.0..0.0)),
            ];
            let p_total = 10f64.powf(rng.random_range(-1.0..1.0));
            let caps = vec![
                if rng.random_range(0.0..1.0) < 0.5 {
                    f64::INFINITY
                } else {
                    p_total * rng.random_range(0.05..0.8)
                },
                f64::INFINITY,
            ];
            let state = ChannelState::new(floors, caps, p_total).unwrap();
            let solver = waterfill_capped_bisection(&state, BISECT_TOL).sum_rate_bps_hz;
            let oracle = oracle_grid_search(&state, 101).unwrap();
            let bound = oracle_grid_bound(&state, 101);
            assert!(solver >= oracle - 1e-9 * solver.abs().max(1.0));
            assert!(oracle >= solver - bound);
        }
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let state = ChannelState::uncapped(vec![1.0; 5], 1.0).unwrap();
        assert_eq!(
            oracle_grid_search(&state, 11),
            Err(AllocError::TooManyChannelsForOracle(5))
        );
    }

    #[test]
    fn solvers_agree_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..500 {
            let state = random_instance(&mut rng);
            let (it, bi) = solve_both(&state);
            assert_powers_close(&it.powers_w, &bi.powers_w, state.total_power());
            assert!(it.certificate.is_valid(DEFAULT_KKT_TOL), "{:?}", state);
            assert!(bi.certificate.is_valid(DEFAULT_KKT_TOL), "{:?}", state);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn allocation_is_feasible_and_exhausts_budget(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = random_instance(&mut rng);
            let result = waterfill_capped_bisection(&state, BISECT_TOL);
            let p_total = state.total_power();
            let mut spent = 0.0;
            for (i, &p) in result.powers_w.iter().enumerate() {
                prop_assert!(p >= 0.0);
                prop_assert!(p <= state.caps()[i] * (1.0 + 1e-12) + 1e-12 * p_total);
                spent += p;
            }
            prop_assert!(spent <= p_total * (1.0 + 1e-9));
            let target = p_total.min(state.caps().iter().sum());
            prop_assert!((spent - target).abs() <= 1e-9 * p_total.max(target),
                "spent {} target {}", spent, target);
        }

        #[test]
        fn more_budget_never_hurts_any_channel(seed in 0u64..10_000, factor in 1.01f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = random_instance(&mut rng);
            let bigger = ChannelState::new(
                state.floors().to_vec(),
                state.caps().to_vec(),
                state.total_power() * factor,
            ).unwrap();
            let small = waterfill_capped_bisection(&state, BISECT_TOL);
            let large = waterfill_capped_bisection(&bigger, BISECT_TOL);
            for (a, b) in small.powers_w.iter().zip(&large.powers_w) {
                prop_assert!(b >= &(a - 1e-9 * bigger.total_power()));
            }
        }

        #[test]
        fn tightening_one_cap_never_raises_its_power(seed in 0u64..10_000, shrink in 0.0f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = random_instance(&mut rng);
            let before = waterfill_capped_bisection(&state, BISECT_TOL);
            let idx = rng.random_range(0..state.num_channels());
            let mut caps = state.caps().to_vec();
            caps[idx] = if caps[idx].is_finite() {
                caps[idx] * shrink
            } else {
                before.powers_w[idx] * shrink
            };
            let tightened = ChannelState::new(
                state.floors().to_vec(), caps, state.total_power()).unwrap();
            let after = waterfill_capped_bisection(&tightened, BISECT_TOL);
            prop_assert!(
                after.powers_w[idx] <= before.powers_w[idx] + 1e-9 * state.total_power());
        }

        #[test]
        fn caps_never_increase_the_rate(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = random_instance(&mut rng);
            let uncapped = ChannelState::uncapped(
                state.floors().to_vec(), state.total_power()).unwrap();
            let capped_rate = waterfill_capped_iterative(&state).sum_rate_bps_hz;
            let uncapped_rate = waterfill_capped_iterative(&uncapped).sum_rate_bps_hz;
            prop_assert!(capped_rate <= uncapped_rate * (1.0 + 1e-12) + 1e-12);
        }
    }
}
