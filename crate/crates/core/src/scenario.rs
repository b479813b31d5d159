//! Two-tier network geometry and random drops.
//!
//! One serving macro base station sits at the origin of a disc-shaped cell,
//! surrounded by 18 co-channel interfering macro stations on the first two
//! rings of a hexagonal grid. A circular building at distance `d_f` from the
//! serving station hosts the femto base station at its centre. Macro users
//! are dropped uniformly over the cell (inside the building included, closed
//! access); one femto user is dropped uniformly inside the building.
//!
//! A [`Drop`] is one complete random realisation: station positions plus a
//! [`LinkGain`] (path loss + shadowing mean, per-sub-channel fading) for every
//! transmitter/receiver pair the evaluation needs. Antenna gains are *not*
//! folded into link gains; they are applied explicitly where powers enter.
//! Wall loss is folded into the mean gain of every link that crosses the
//! building wall (transmitter and receiver on opposite sides), and appears
//! exactly once per crossing.

use crate::allocator::ChannelState;
use crate::channel::{
    compose_link_gain, sample_fading, LinkGain, PathLossModel, WallLoss, MIN_PATH_LOSS_DISTANCE_M,
};
use crate::qoscap::{power_cap, CapParams, MacroSideEstimate, QosSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario parameter `{field}` invalid: {message}")]
    InvalidParameter {
        field: &'static str,
        message: String,
    },
}

fn param_err(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidParameter {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// All scenario parameters in internal (linear) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub macro_radius_m: f64,
    pub building_radius_m: f64,
    /// Distance from the serving macro station to the building centre.
    pub femto_distance_m: f64,
    /// Direction of the ray on which the building sits, in radians.
    pub femto_ray_angle_rad: f64,
    pub num_mms: usize,
    pub num_subchannels: usize,
    /// Macro transmit power per sub-channel, Watts (uniform across
    /// sub-channels and across all macro stations).
    pub p_macro_per_subchannel_w: f64,
    /// Total femto power budget, Watts.
    pub p_femto_total_w: f64,
    /// Macro antenna gain, linear.
    pub macro_antenna_gain: f64,
    /// Femto antenna gain, linear.
    pub femto_antenna_gain: f64,
    /// Noise power per sub-channel, Watts.
    pub noise_w: f64,
    pub wall: WallLoss,
    /// Path-loss model for links transmitted by macro stations.
    pub macro_model: PathLossModel,
    /// Path-loss model for links transmitted by the femto station.
    pub femto_model: PathLossModel,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.macro_radius_m > 0.0) {
            return Err(param_err("macro_radius_m", "must be positive"));
        }
        if !(self.building_radius_m > 0.0 && self.building_radius_m < self.macro_radius_m) {
            return Err(param_err(
                "building_radius_m",
                "must be positive and smaller than the macro radius",
            ));
        }
        if !(self.femto_distance_m >= 0.0 && self.femto_distance_m <= self.macro_radius_m) {
            return Err(param_err(
                "femto_distance_m",
                "must lie within [0, macro_radius_m]",
            ));
        }
        if self.num_mms == 0 {
            return Err(param_err("num_mms", "need at least one macro user"));
        }
        if self.num_subchannels != self.num_mms {
            return Err(param_err(
                "num_subchannels",
                "round-robin assignment requires one sub-channel per macro user",
            ));
        }
        if !(self.p_macro_per_subchannel_w >= 0.0 && self.p_macro_per_subchannel_w.is_finite()) {
            return Err(param_err(
                "p_macro_per_subchannel_w",
                "must be non-negative",
            ));
        }
        if !(self.p_femto_total_w > 0.0 && self.p_femto_total_w.is_finite()) {
            return Err(param_err("p_femto_total_w", "must be positive"));
        }
        if !(self.macro_antenna_gain > 0.0 && self.femto_antenna_gain > 0.0) {
            return Err(param_err("antenna_gain", "antenna gains must be positive"));
        }
        if !(self.noise_w > 0.0) {
            return Err(param_err("noise_w", "must be positive"));
        }
        Ok(())
    }

    pub fn femto_center(&self) -> Point {
        Point::new(
            self.femto_distance_m * self.femto_ray_angle_rad.cos(),
            self.femto_distance_m * self.femto_ray_angle_rad.sin(),
        )
    }
}

/// Positions of the 18 interfering macro stations: the first two rings of a
/// hexagonal layout with cell radius `cell_radius_m` (centre spacing
/// `sqrt(3) * R`). Ring one holds 6 stations, ring two holds 12.
pub fn hex_neighbor_positions(cell_radius_m: f64) -> Vec<Point> {
    let spacing = 3f64.sqrt() * cell_radius_m;
    let mut ring1 = Vec::new();
    let mut ring2 = Vec::new();
    for q in -2i32..=2 {
        for r in -2i32..=2 {
            let ring = (q.abs() + r.abs() + (q + r).abs()) / 2;
            if ring != 1 && ring != 2 {
                continue;
            }
            let x = spacing * (q as f64 + r as f64 / 2.0);
            let y = spacing * (r as f64 * 3f64.sqrt() / 2.0);
            let p = Point::new(x, y);
            if ring == 1 {
                ring1.push(p);
            } else {
                ring2.push(p);
            }
        }
    }
    ring1.extend(ring2);
    ring1
}

/// Static geometry of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub macro_radius_m: f64,
    pub building_radius_m: f64,
    pub femto_center: Point,
    pub neighbor_positions: Vec<Point>,
}

impl Topology {
    pub fn from_params(params: &ScenarioParams) -> Self {
        Self {
            macro_radius_m: params.macro_radius_m,
            building_radius_m: params.building_radius_m,
            femto_center: params.femto_center(),
            neighbor_positions: hex_neighbor_positions(params.macro_radius_m),
        }
    }

    pub fn is_inside_building(&self, p: &Point) -> bool {
        p.distance(&self.femto_center) < self.building_radius_m
    }
}

/// Distance-band classification of a macro user relative to the building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ring {
    /// Inside the building (`d < R_f`).
    Inside,
    /// Between `R_f` and `2 R_f`.
    RfTo2Rf,
    /// Between `2 R_f` and `3 R_f`.
    TwoRfTo3Rf,
    /// Farther than `3 R_f`.
    Beyond,
}

impl Ring {
    pub const ALL: [Ring; 4] = [Ring::Inside, Ring::RfTo2Rf, Ring::TwoRfTo3Rf, Ring::Beyond];

    pub fn classify(distance_to_femto_m: f64, building_radius_m: f64) -> Ring {
        if distance_to_femto_m < building_radius_m {
            Ring::Inside
        } else if distance_to_femto_m < 2.0 * building_radius_m {
            Ring::RfTo2Rf
        } else if distance_to_femto_m < 3.0 * building_radius_m {
            Ring::TwoRfTo3Rf
        } else {
            Ring::Beyond
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Ring::Inside => "inside",
            Ring::RfTo2Rf => "rf_2rf",
            Ring::TwoRfTo3Rf => "2rf_3rf",
            Ring::Beyond => "beyond",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Ring::Inside => 0,
            Ring::RfTo2Rf => 1,
            Ring::TwoRfTo3Rf => 2,
            Ring::Beyond => 3,
        }
    }
}

/// Random station placement for one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSet {
    pub mms_positions: Vec<Point>,
    pub fms_position: Point,
    pub inside_flags: Vec<bool>,
}

impl StationSet {
    /// Macro users uniform over the cell disc, femto user uniform inside the
    /// building. Positions closer than the path-loss validity floor (1 m) to
    /// the serving macro station or the femto station are resampled.
    pub fn sample<R: Rng + ?Sized>(topology: &Topology, num_mms: usize, rng: &mut R) -> Self {
        let mms_positions: Vec<Point> = (0..num_mms)
            .map(|_| loop {
                let p = uniform_disc(rng, Point::ORIGIN, topology.macro_radius_m);
                if p.distance(&Point::ORIGIN) >= MIN_PATH_LOSS_DISTANCE_M
                    && p.distance(&topology.femto_center) >= MIN_PATH_LOSS_DISTANCE_M
                {
                    break p;
                }
            })
            .collect();
        let fms_position = loop {
            let p = uniform_disc(rng, topology.femto_center, topology.building_radius_m);
            if p.distance(&topology.femto_center) >= MIN_PATH_LOSS_DISTANCE_M {
                break p;
            }
        };
        let inside_flags = mms_positions
            .iter()
            .map(|p| topology.is_inside_building(p))
            .collect();
        Self {
            mms_positions,
            fms_position,
            inside_flags,
        }
    }
}

fn uniform_disc<R: Rng + ?Sized>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Bijective sub-channel/macro-user map; round-robin with one sub-channel per
/// user reduces to the identity, kept explicit so the map travels with the
/// drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    mms_of_subchannel: Vec<usize>,
}

impl Assignment {
    pub fn round_robin(n: usize) -> Self {
        Self {
            mms_of_subchannel: (0..n).collect(),
        }
    }

    pub fn mms_for_subchannel(&self, subchannel: usize) -> usize {
        self.mms_of_subchannel[subchannel]
    }

    pub fn subchannel_for_mms(&self, mms: usize) -> usize {
        self.mms_of_subchannel
            .iter()
            .position(|&j| j == mms)
            .expect("assignment is bijective")
    }

    pub fn is_bijective(&self) -> bool {
        let n = self.mms_of_subchannel.len();
        let mut seen = vec![false; n];
        for &j in &self.mms_of_subchannel {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// Which mean interference estimate feeds the power caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IbarMode {
    /// Mean interference at the macro user itself (not observable by the
    /// femto in practice; the reference the approximation is judged against).
    Exact,
    /// Mean interference measured at the femto site, used as a stand-in for
    /// every macro user's.
    Approx,
}

/// Whether per-sub-channel fading multiplies the mean gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMode {
    Faded,
    MeanOnly,
}

/// Mean interference plus its per-sub-channel faded realisation, in Watts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceSample {
    pub mean_w: f64,
    pub per_subchannel_w: Vec<f64>,
}

/// One complete random realisation of the network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drop {
    pub params: ScenarioParams,
    pub topology: Topology,
    pub stations: StationSet,
    pub assignment: Assignment,
    /// Serving macro station to each macro user.
    pub serving_to_mms: Vec<LinkGain>,
    /// 18 interfering macro stations to each macro user, indexed `[user][station]`.
    pub neighbors_to_mms: Vec<Vec<LinkGain>>,
    /// Femto station to each macro user.
    pub femto_to_mms: Vec<LinkGain>,
    pub serving_to_fms: LinkGain,
    pub neighbors_to_fms: Vec<LinkGain>,
    pub femto_to_fms: LinkGain,
    /// Interferers to the femto site itself, *without* wall attenuation: the
    /// outdoor interference field at the building centre, which stands in
    /// for the macro users' own mean interference in approx mode.
    pub neighbors_to_femto_center: Vec<LinkGain>,
}

/// Build one drop: sample positions, then one shadowing draw and one fading
/// vector per link, in a fixed order so that equal seeds give equal drops.
pub fn build_drop<R: Rng + ?Sized>(params: &ScenarioParams, rng: &mut R) -> Drop {
    params
        .validate()
        .expect("scenario parameters must be valid");
    let topology = Topology::from_params(params);
    let stations = StationSet::sample(&topology, params.num_mms, rng);
    let assignment = Assignment::round_robin(params.num_subchannels);
    let n = params.num_subchannels;
    let wall = params.wall;

    let link = |model: &PathLossModel, tx: Point, rx: Point, crosses_wall: bool, rng: &mut R| {
        let pl = model
            .path_loss_db(tx.distance(&rx))
            .expect("stations are placed at least 1 m from every transmitter");
        let shadow = model.sample_shadowing_db(rng);
        let wall_arg = if crosses_wall { Some(wall) } else { None };
        compose_link_gain(pl, shadow, 0.0, wall_arg, sample_fading(rng, n))
    };

    let serving_to_mms: Vec<LinkGain> = stations
        .mms_positions
        .iter()
        .zip(&stations.inside_flags)
        .map(|(p, &inside)| link(&params.macro_model, Point::ORIGIN, *p, inside, rng))
        .collect();

    let neighbors_to_mms: Vec<Vec<LinkGain>> = stations
        .mms_positions
        .iter()
        .zip(&stations.inside_flags)
        .map(|(p, &inside)| {
            topology
                .neighbor_positions
                .iter()
                .map(|nb| link(&params.macro_model, *nb, *p, inside, rng))
                .collect()
        })
        .collect();

    let femto_to_mms: Vec<LinkGain> = stations
        .mms_positions
        .iter()
        .zip(&stations.inside_flags)
        .map(|(p, &inside)| link(&params.femto_model, topology.femto_center, *p, !inside, rng))
        .collect();

    let serving_to_fms = link(
        &params.macro_model,
        Point::ORIGIN,
        stations.fms_position,
        true,
        rng,
    );
    let neighbors_to_fms: Vec<LinkGain> = topology
        .neighbor_positions
        .iter()
        .map(|nb| link(&params.macro_model, *nb, stations.fms_position, true, rng))
        .collect();
    let femto_to_fms = link(
        &params.femto_model,
        topology.femto_center,
        stations.fms_position,
        false,
        rng,
    );
    let neighbors_to_femto_center: Vec<LinkGain> = topology
        .neighbor_positions
        .iter()
        .map(|nb| link(&params.macro_model, *nb, topology.femto_center, false, rng))
        .collect();

    Drop {
        params: params.clone(),
        topology,
        stations,
        assignment,
        serving_to_mms,
        neighbors_to_mms,
        femto_to_mms,
        serving_to_fms,
        neighbors_to_fms,
        femto_to_fms,
        neighbors_to_femto_center,
    }
}

/// Where an interference query is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceTarget {
    Mms(usize),
    Fms,
    FemtoCenter,
}

impl Drop {
    pub fn num_subchannels(&self) -> usize {
        self.params.num_subchannels
    }

    pub fn num_mms(&self) -> usize {
        self.params.num_mms
    }

    pub fn ring_of(&self, mms: usize) -> Ring {
        let d = self.stations.mms_positions[mms].distance(&self.topology.femto_center);
        Ring::classify(d, self.topology.building_radius_m)
    }

    fn neighbor_links(&self, target: InterferenceTarget) -> &[LinkGain] {
        match target {
            InterferenceTarget::Mms(j) => &self.neighbors_to_mms[j],
            InterferenceTarget::Fms => &self.neighbors_to_fms,
            InterferenceTarget::FemtoCenter => &self.neighbors_to_femto_center,
        }
    }

    /// Aggregate interference from the 18 neighbouring macro stations at the
    /// target: mean part, and the per-sub-channel faded realisation stored in
    /// the drop.
    pub fn macro_interference_at(&self, target: InterferenceTarget) -> InterferenceSample {
        let p_eff = self.params.p_macro_per_subchannel_w * self.params.macro_antenna_gain;
        let links = self.neighbor_links(target);
        let mean_w = p_eff * links.iter().map(|l| l.mean_gain).sum::<f64>();
        let per_subchannel_w = (0..self.num_subchannels())
            .map(|ch| p_eff * links.iter().map(|l| l.gain(ch)).sum::<f64>())
            .collect();
        InterferenceSample {
            mean_w,
            per_subchannel_w,
        }
    }

    /// Mean interference at macro user `j` (the exact cap input).
    pub fn ibar_exact_at_mms(&self, j: usize) -> f64 {
        let p_eff = self.params.p_macro_per_subchannel_w * self.params.macro_antenna_gain;
        p_eff
            * self.neighbors_to_mms[j]
                .iter()
                .map(|l| l.mean_gain)
                .sum::<f64>()
    }

    /// Mean interference at the femto site (the observable stand-in).
    pub fn estimate_ibar_approx(&self) -> f64 {
        let p_eff = self.params.p_macro_per_subchannel_w * self.params.macro_antenna_gain;
        p_eff
            * self
                .neighbors_to_femto_center
                .iter()
                .map(|l| l.mean_gain)
                .sum::<f64>()
    }

    /// SINR of macro user `j` on its assigned sub-channel, using the drop's
    /// stored fading. `femto_powers = None` removes the femto entirely.
    pub fn sinr_mms(&self, j: usize, femto_powers: Option<&[f64]>) -> f64 {
        let ch = self.assignment.subchannel_for_mms(j);
        let p = &self.params;
        let signal =
            p.p_macro_per_subchannel_w * p.macro_antenna_gain * self.serving_to_mms[j].gain(ch);
        let interference = self.macro_interference_subchannel(InterferenceTarget::Mms(j), ch);
        let femto = femto_powers
            .map(|powers| powers[ch] * p.femto_antenna_gain * self.femto_to_mms[j].gain(ch))
            .unwrap_or(0.0);
        signal / (femto + interference + p.noise_w)
    }

    fn macro_interference_subchannel(&self, target: InterferenceTarget, ch: usize) -> f64 {
        let p_eff = self.params.p_macro_per_subchannel_w * self.params.macro_antenna_gain;
        p_eff
            * self
                .neighbor_links(target)
                .iter()
                .map(|l| l.gain(ch))
                .sum::<f64>()
    }

    /// SINR ratio (with femto over without) for macro user `j` under a fresh
    /// fading draw: `cross_fade` on the femto-to-user link and one fade per
    /// interfering station. The serving-link fade cancels in the ratio.
    pub fn psi_with_fresh_fading(
        &self,
        j: usize,
        femto_power_w: f64,
        cross_fade: f64,
        interferer_fades: &[f64],
    ) -> f64 {
        let p = &self.params;
        let p_eff = p.p_macro_per_subchannel_w * p.macro_antenna_gain;
        let interference: f64 = self.neighbors_to_mms[j]
            .iter()
            .zip(interferer_fades)
            .map(|(l, &x)| p_eff * l.mean_gain * x)
            .sum();
        let femto =
            femto_power_w * p.femto_antenna_gain * self.femto_to_mms[j].mean_gain * cross_fade;
        (interference + p.noise_w) / (femto + interference + p.noise_w)
    }

    /// SINR ratio for macro user `j` under the cap-derivation fading model:
    /// one unit-mean exponential on the cross gain and one on the *aggregate*
    /// mean interference, instead of per-interferer fades.
    pub fn psi_with_aggregate_fading(
        &self,
        j: usize,
        femto_power_w: f64,
        cross_fade: f64,
        interference_fade: f64,
    ) -> f64 {
        let p = &self.params;
        let interference = self.ibar_exact_at_mms(j) * interference_fade;
        let femto =
            femto_power_w * p.femto_antenna_gain * self.femto_to_mms[j].mean_gain * cross_fade;
        (interference + p.noise_w) / (femto + interference + p.noise_w)
    }

    /// Effective noise floors of the femto user's sub-channels, referred to
    /// the femto transmitter: `(serving-macro term + interference + noise) /
    /// (femto link gain * femto antenna gain)`.
    pub fn fms_floors(&self, mode: GainMode) -> Vec<f64> {
        let p = &self.params;
        let p_eff = p.p_macro_per_subchannel_w * p.macro_antenna_gain;
        (0..self.num_subchannels())
            .map(|ch| {
                let fade = |l: &LinkGain| match mode {
                    GainMode::Faded => l.fading[ch],
                    GainMode::MeanOnly => 1.0,
                };
                let macro_term = p_eff * self.serving_to_fms.mean_gain * fade(&self.serving_to_fms);
                let interference: f64 = self
                    .neighbors_to_fms
                    .iter()
                    .map(|l| p_eff * l.mean_gain * fade(l))
                    .sum();
                let s = macro_term + interference + p.noise_w;
                s / (self.femto_to_fms.mean_gain * fade(&self.femto_to_fms) * p.femto_antenna_gain)
            })
            .collect()
    }

    /// Per-sub-channel cap parameters for the macro users, under the given
    /// per-sub-channel QoS and interference-estimation mode.
    pub fn power_caps(&self, qos: &[QosSpec], mode: IbarMode) -> Vec<CapParams> {
        assert_eq!(qos.len(), self.num_subchannels());
        let ibar_approx = self.estimate_ibar_approx();
        (0..self.num_subchannels())
            .map(|ch| {
                let j = self.assignment.mms_for_subchannel(ch);
                let inside = self.stations.inside_flags[j];
                let ibar = match mode {
                    IbarMode::Exact => self.ibar_exact_at_mms(j),
                    IbarMode::Approx => ibar_approx,
                };
                let est = MacroSideEstimate {
                    avg_interference_w: ibar,
                    avg_cross_gain: self.femto_to_mms[j].mean_gain_without_wall(self.params.wall),
                    femto_antenna_gain: self.params.femto_antenna_gain,
                    wall: if inside {
                        WallLoss::NONE
                    } else {
                        self.params.wall
                    },
                };
                power_cap(&qos[ch], &est)
            })
            .collect()
    }

    /// Assemble the allocator input for the femto user.
    pub fn channel_state_for_fms(
        &self,
        caps_w: Vec<f64>,
        mode: GainMode,
    ) -> Result<ChannelState, crate::allocator::AllocError> {
        ChannelState::new(self.fms_floors(mode), caps_w, self.params.p_femto_total_w)
    }

    /// Structured dump of the full drop for out-of-band recomputation.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("drops contain only finite numbers")
    }
}

/// Deterministic mean interference field: sum of neighbour contributions by
/// path loss alone, with no shadowing, fading, or wall. Used to probe how the
/// field varies across positions.
pub fn mean_interference_field(topology: &Topology, params: &ScenarioParams, point: Point) -> f64 {
    let p_eff = params.p_macro_per_subchannel_w * params.macro_antenna_gain;
    topology
        .neighbor_positions
        .iter()
        .map(|nb| {
            let pl = params
                .macro_model
                .path_loss_db(nb.distance(&point))
                .expect("field points are far from the neighbour ring");
            p_eff * crate::channel::db_to_linear(-pl)
        })
        .sum()
}
