//! Probabilistic QoS power caps.
//!
//! A femto base station sharing a sub-channel with a macro user must keep
//! `Prob(psi <= gamma) <= epsilon`, where `psi` is the ratio of the macro
//! user's SINR with the femto transmitting to its SINR without. Because the
//! femto only knows sub-channel *averages* of the cross gain and the macro
//! user's interference, the constraint is enforced through a closed-form
//! per-sub-channel transmit-power cap:
//!
//! ```text
//! zeta  = 1/gamma - 1
//! delta = 1/epsilon - 1
//! kappa = (L_w / A_f) * (I_bar / H_bar) * zeta     [Watts]
//! cap   = kappa / delta                            [Watts]
//! ```
//!
//! where `L_w` is the wall loss on the femto-to-macro-user path (1 for users
//! inside the building), `A_f` the femto antenna gain, `I_bar` the mean
//! interference at the macro user from neighbouring macro cells, and `H_bar`
//! the mean femto-to-user cross gain. The cap is exact for the fading model in
//! which both the cross gain and the aggregate interference carry independent
//! unit-mean exponential fading: the ratio `x = h/i` of two such variates has
//! CDF `F(x) = x/(1+x)`, and transmitting at the cap makes the violation
//! probability exactly `epsilon`.

use crate::channel::WallLoss;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QosError {
    #[error("gamma must be in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("epsilon must be in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("fading-ratio CDF is defined for x >= 0, got {0}")]
    NegativeRatio(f64),
}

/// One sub-channel's QoS requirement: the SINR-ratio floor `gamma` and the
/// allowed probability `epsilon` of dipping below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSpec {
    gamma: f64,
    epsilon: f64,
}

impl QosSpec {
    /// Requires `0 < gamma <= 1` and `0 < epsilon < 1`. `gamma = 0` and
    /// `epsilon = 1` are rejected rather than treated as limits.
    pub fn new(gamma: f64, epsilon: f64) -> Result<Self, QosError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(QosError::InvalidGamma(gamma));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(QosError::InvalidEpsilon(epsilon));
        }
        Ok(Self { gamma, epsilon })
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Derived cap parameters for one sub-channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapParams {
    /// `1/gamma - 1`; zero when no degradation at all is allowed.
    pub zeta: f64,
    /// `1/epsilon - 1`; always positive.
    pub delta: f64,
    /// Cap numerator in Watts.
    pub kappa_w: f64,
    /// The transmit-power cap `kappa / delta`, in Watts.
    pub cap_w: f64,
}

/// What the femto side knows about one macro user, averaged over
/// sub-channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroSideEstimate {
    /// Mean interference at the user from neighbouring macro cells, in Watts.
    pub avg_interference_w: f64,
    /// Mean femto-to-user channel gain, excluding wall loss and antenna gain.
    pub avg_cross_gain: f64,
    /// Femto antenna gain as a linear ratio.
    pub femto_antenna_gain: f64,
    /// Wall loss on the femto-to-user path; [`WallLoss::NONE`] for users
    /// inside the building.
    pub wall: WallLoss,
}

impl MacroSideEstimate {
    fn assert_valid(&self) {
        assert!(
            self.avg_interference_w > 0.0
                && self.avg_cross_gain > 0.0
                && self.femto_antenna_gain > 0.0,
            "macro-side estimate fields must be positive"
        );
    }
}

/// CDF of `x = h/i` for independent unit-mean exponential `h`, `i`:
/// `F(x) = x/(1+x)`.
pub fn fading_ratio_cdf(x: f64) -> Result<f64, QosError> {
    if !(x >= 0.0) {
        return Err(QosError::NegativeRatio(x));
    }
    Ok(x / (1.0 + x))
}

/// Compute the closed-form per-sub-channel power cap.
///
/// `gamma = 1` yields `zeta = 0` and a zero cap: a femto that may never
/// degrade the user cannot transmit on that sub-channel at all.
pub fn power_cap(spec: &QosSpec, est: &MacroSideEstimate) -> CapParams {
    est.assert_valid();
    let zeta = 1.0 / spec.gamma() - 1.0;
    let delta = 1.0 / spec.epsilon() - 1.0;
    let kappa_w = (est.wall.ratio() / est.femto_antenna_gain)
        * (est.avg_interference_w / est.avg_cross_gain)
        * zeta;
    CapParams {
        zeta,
        delta,
        kappa_w,
        cap_w: kappa_w / delta,
    }
}

/// Exact SINR ratio: the macro user's SINR with the femto transmitting over
/// its SINR without, both evaluated literally.
///
/// `h_macro_to_mms` and `h_femto_to_mms` are channel gains without wall loss
/// or antenna gain; `wall` applies to the femto path only (use
/// [`WallLoss::NONE`] for inside users). Returns a value in (0, 1], exactly 1
/// when `p_femto_w = 0`.
#[allow(clippy::too_many_arguments)]
pub fn psi_exact(
    p_femto_w: f64,
    p_macro_w: f64,
    a_macro: f64,
    a_femto: f64,
    h_macro_to_mms: f64,
    h_femto_to_mms: f64,
    wall: WallLoss,
    interference_w: f64,
    noise_w: f64,
) -> f64 {
    let signal = p_macro_w * a_macro * h_macro_to_mms;
    let femto = p_femto_w * a_femto * h_femto_to_mms / wall.ratio();
    let with_femto = signal / (femto + interference_w + noise_w);
    let without_femto = signal / (interference_w + noise_w);
    with_femto / without_femto
}

/// High-interference approximation of [`psi_exact`] (noise dropped):
/// `psi = 1 / (p_f * A_f * H / (I * L_w) + 1)`.
///
/// Strictly decreasing in `p_femto_w`, equal to 1 at zero power.
pub fn psi_approx(
    p_femto_w: f64,
    a_femto: f64,
    h_femto_to_mms: f64,
    interference_w: f64,
    wall: WallLoss,
) -> f64 {
    1.0 / (p_femto_w * a_femto * h_femto_to_mms / (interference_w * wall.ratio()) + 1.0)
}

/// Monte Carlo estimate of `Prob(psi <= gamma)` at femto power `p_femto_w`,
/// drawing fresh unit-mean exponential fading for the cross gain and for the
/// aggregate interference on every trial.
///
/// Converges to `1/(1 + kappa/p_femto_w)`; at `p_femto_w = cap` that is
/// exactly `epsilon`.
pub fn empirical_violation_rate<R: Rng + ?Sized>(
    p_femto_w: f64,
    cap: &CapParams,
    trials: usize,
    rng: &mut R,
) -> f64 {
    assert!(trials >= 1, "need at least one trial");
    assert!(p_femto_w >= 0.0, "femto power must be non-negative");
    if cap.zeta == 0.0 {
        // gamma = 1: psi <= 1 holds for every realisation.
        return 1.0;
    }
    let gamma = 1.0 / (1.0 + cap.zeta);
    // p_f * A_f * H_bar / (I_bar * L_w), recovered from kappa's definition.
    let mean_term = p_femto_w * cap.zeta / cap.kappa_w;
    let mut violations = 0usize;
    for _ in 0..trials {
        let h: f64 = rng.sample(Exp1);
        let i: f64 = rng.sample(Exp1);
        let psi = 1.0 / (mean_term * h / i + 1.0);
        if psi <= gamma {
            violations += 1;
        }
    }
    violations as f64 / trials as f64
}
