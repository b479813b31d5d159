//! Link-level channel primitives: deterministic path loss, log-normal
//! shadowing, Rayleigh fast fading, wall penetration loss, and their
//! composition into per-link gains.
//!
//! Conventions:
//! - Path loss and shadowing are handled in dB, gains are handled as linear
//!   power ratios. [`db_to_linear`] / [`linear_to_db`] convert between them.
//! - Rayleigh amplitude fading is represented by its power, a unit-mean
//!   exponential variate per sub-channel.
//! - A [`LinkGain`] is the product of a static mean part (path loss,
//!   shadowing, optional antenna gain, optional wall loss) and a
//!   per-sub-channel fading part.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validity floor of the empirical path-loss models, in metres.
pub const MIN_PATH_LOSS_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance {0} m is below the {MIN_PATH_LOSS_DISTANCE_M} m validity floor of the path-loss model")]
    DistanceOutOfRange(f64),
    #[error("wall loss must be a ratio >= 1 (>= 0 dB), got {0}")]
    InvalidWallLoss(f64),
}

/// Convert a dB value to a linear power ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Convert a power in dBm to Watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a power in Watts to dBm.
#[inline]
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Empirical NLoS path-loss formulas with hexagonal-layout defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathLossKind {
    /// Indoor hotspot, non-line-of-sight:
    /// `PL = 43.3 log10(d) + 11.5 + 20 log10(fc)` (d in m, fc in GHz).
    IndoorHotspotNlos,
    /// Urban micro, non-line-of-sight:
    /// `PL = 36.7 log10(d) + 22.7 + 26 log10(fc)` (d in m, fc in GHz).
    UrbanMicroNlos,
}

/// A path-loss model instance: formula, carrier frequency, and the standard
/// deviation of its log-normal shadowing term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub kind: PathLossKind,
    /// Carrier frequency in GHz; must be positive.
    pub carrier_ghz: f64,
    /// Shadowing standard deviation in dB; must be non-negative.
    pub shadowing_db: f64,
}

impl PathLossModel {
    pub fn new(kind: PathLossKind, carrier_ghz: f64, shadowing_db: f64) -> Self {
        assert!(carrier_ghz > 0.0, "carrier frequency must be positive");
        assert!(shadowing_db >= 0.0, "shadowing stddev must be non-negative");
        Self {
            kind,
            carrier_ghz,
            shadowing_db,
        }
    }

    /// Path loss in dB at the given distance.
    ///
    /// Strictly increasing in distance; rejects distances below
    /// [`MIN_PATH_LOSS_DISTANCE_M`] (outside model validity).
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64, ChannelError> {
        if !(distance_m >= MIN_PATH_LOSS_DISTANCE_M) {
            return Err(ChannelError::DistanceOutOfRange(distance_m));
        }
        let fc_term = self.carrier_ghz.log10();
        let pl = match self.kind {
            PathLossKind::IndoorHotspotNlos => 43.3 * distance_m.log10() + 11.5 + 20.0 * fc_term,
            PathLossKind::UrbanMicroNlos => 36.7 * distance_m.log10() + 22.7 + 26.0 * fc_term,
        };
        Ok(pl)
    }

    /// Draw one log-normal shadowing realisation, in dB.
    ///
    /// Shadowing is drawn once per link per drop, not per sub-channel.
    pub fn sample_shadowing_db<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.shadowing_db * z
    }
}

/// Wall penetration loss as a linear power ratio.
///
/// A value of 1 means no wall on the path; a 3 dB wall is `~1.995`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallLoss(f64);

impl WallLoss {
    /// No wall on the path.
    pub const NONE: WallLoss = WallLoss(1.0);

    pub fn from_db(db: f64) -> Result<Self, ChannelError> {
        if !(db >= 0.0) {
            return Err(ChannelError::InvalidWallLoss(db));
        }
        Ok(Self(db_to_linear(db)))
    }

    pub fn from_ratio(ratio: f64) -> Result<Self, ChannelError> {
        if !(ratio >= 1.0) {
            return Err(ChannelError::InvalidWallLoss(ratio));
        }
        Ok(Self(ratio))
    }

    #[inline]
    pub fn ratio(&self) -> f64 {
        self.0
    }

    #[inline]
    pub fn db(&self) -> f64 {
        linear_to_db(self.0)
    }
}

/// Draw `n` independent unit-mean exponential fading powers (Rayleigh
/// amplitude fading expressed as power).
///
/// Panics if `n == 0`; fading vectors always cover at least one sub-channel.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    assert!(n >= 1, "fading vectors must cover at least one sub-channel");
    (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

/// A channel gain split into a static mean part and a per-sub-channel
/// unit-mean fading part.
///
/// `mean_gain` already folds in path loss, shadowing, any antenna gain passed
/// at composition time, and — when `wall_attenuated` is set — one wall
/// crossing. The full gain on sub-channel `n` is `mean_gain * fading[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGain {
    pub mean_gain: f64,
    pub fading: Vec<f64>,
    pub wall_attenuated: bool,
}

impl LinkGain {
    /// Full (faded) gain on the given sub-channel.
    #[inline]
    pub fn gain(&self, subchannel: usize) -> f64 {
        self.mean_gain * self.fading[subchannel]
    }

    pub fn num_subchannels(&self) -> usize {
        self.fading.len()
    }

    /// Mean gain with any wall attenuation removed.
    pub fn mean_gain_without_wall(&self, wall: WallLoss) -> f64 {
        if self.wall_attenuated {
            self.mean_gain * wall.ratio()
        } else {
            self.mean_gain
        }
    }
}

/// Assemble a [`LinkGain`] from its dB-domain parts.
///
/// `mean_gain = 10^((antenna_gain_db - path_loss_db - shadow_db)/10)`,
/// divided by the wall ratio when `wall` is `Some`.
pub fn compose_link_gain(
    path_loss_db: f64,
    shadow_db: f64,
    antenna_gain_db: f64,
    wall: Option<WallLoss>,
    fading: Vec<f64>,
) -> LinkGain {
    let mut mean_gain = db_to_linear(antenna_gain_db - path_loss_db - shadow_db);
    if let Some(w) = wall {
        mean_gain /= w.ratio();
    }
    LinkGain {
        mean_gain,
        fading,
        wall_attenuated: wall.is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inh() -> PathLossModel {
        PathLossModel::new(PathLossKind::IndoorHotspotNlos, 2.5, 4.0)
    }

    fn umi() -> PathLossModel {
        PathLossModel::new(PathLossKind::UrbanMicroNlos, 2.5, 4.0)
    }

    #[test]
    fn indoor_hotspot_reference_value() {
        // 43.3*log10(30) + 11.5 + 20*log10(2.5) = 83.4182 dB, frozen.
        let pl = inh().path_loss_db(30.0).unwrap();
        assert!((pl - 83.4182).abs() < 5e-3, "got {pl}");
    }

    #[test]
    fn urban_micro_reference_value() {
        // 36.7*log10(400) + 22.7 + 26*log10(2.5) = 128.5420 dB, frozen.
        let pl = umi().path_loss_db(400.0).unwrap();
        assert!((pl - 128.5420).abs() < 5e-3, "got {pl}");
    }

    #[test]
    fn distance_below_floor_is_rejected() {
        assert_eq!(
            inh().path_loss_db(0.5),
            Err(ChannelError::DistanceOutOfRange(0.5))
        );
        assert_eq!(
            umi().path_loss_db(0.999),
            Err(ChannelError::DistanceOutOfRange(0.999))
        );
        assert!(inh().path_loss_db(1.0).is_ok());
    }

    proptest! {
        #[test]
        fn path_loss_strictly_increasing(d1 in 1.0f64..5000.0, delta in 1e-3f64..5000.0) {
            let d2 = d1 + delta;
            for model in [inh(), umi()] {
                let p1 = model.path_loss_db(d1).unwrap();
                let p2 = model.path_loss_db(d2).unwrap();
                prop_assert!(p2 > p1, "{p2} <= {p1} for d {d1} -> {d2}");
                prop_assert!(p1.is_finite() && p1 > 0.0);
            }
        }

        #[test]
        fn db_linear_round_trip(db in -250.0f64..250.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }

        #[test]
        fn dbm_watts_round_trip(dbm in -150.0f64..80.0) {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }
    }

    #[test]
    fn fading_is_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let samples = sample_fading(&mut rng, n);
        let mean = samples.iter().sum::<f64>() / n as f64;
        // 3-sigma bound with sigma = 1 (unit exponential): 3/sqrt(n) = 0.003.
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!(samples.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn fading_median_is_ln2() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let below = sample_fading(&mut rng, n)
            .iter()
            .filter(|&&x| x <= std::f64::consts::LN_2)
            .count();
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.0015, "P(x <= ln 2) = {frac}");
    }

    #[test]
    #[should_panic(expected = "at least one sub-channel")]
    fn fading_rejects_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let _ = sample_fading(&mut rng, 0);
    }

    #[test]
    fn fading_is_deterministic_under_seed() {
        let a = sample_fading(&mut ChaCha8Rng::seed_from_u64(7), 64);
        let b = sample_fading(&mut ChaCha8Rng::seed_from_u64(7), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn compose_identity() {
        let g = compose_link_gain(0.0, 0.0, 0.0, None, vec![1.0]);
        assert_eq!(g.mean_gain, 1.0);
        assert!(!g.wall_attenuated);
    }

    #[test]
    fn compose_db_arithmetic() {
        let wall = WallLoss::from_db(3.0).unwrap();
        let g = compose_link_gain(80.0, 0.0, 2.0, Some(wall), vec![1.0]);
        // (2 - 80 - 3) dB = 10^(-8.1) as a linear ratio.
        let expected = 10f64.powf(-8.1);
        assert!(
            (g.mean_gain - expected).abs() < 1e-12 * expected,
            "got {} want {expected}",
            g.mean_gain
        );
        assert!(g.wall_attenuated);
        // Removing the wall recovers the bare dB composition.
        let bare = g.mean_gain_without_wall(wall);
        assert!((bare - db_to_linear(-78.0)).abs() < 1e-12 * bare);
    }

    #[test]
    fn compose_antenna_gain_ratio() {
        let hi = compose_link_gain(95.0, 3.0, 15.0, None, vec![1.0]);
        let lo = compose_link_gain(95.0, 3.0, 2.0, None, vec![1.0]);
        let ratio = hi.mean_gain / lo.mean_gain;
        let expected = db_to_linear(13.0);
        assert!((ratio - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn wall_loss_validation() {
        assert!(WallLoss::from_db(-0.1).is_err());
        assert!(WallLoss::from_ratio(0.99).is_err());
        assert_eq!(WallLoss::NONE.ratio(), 1.0);
        let w = WallLoss::from_db(3.0).unwrap();
        assert!((w.ratio() - 1.9952623149688795).abs() < 1e-12);
    }
}
