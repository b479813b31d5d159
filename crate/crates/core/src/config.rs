//! Simulator configuration: a flat, human-editable TOML file.
//!
//! The file speaks dB/dBm where engineers do (wall loss, antenna gains,
//! transmit powers, noise); conversion to the linear units used internally
//! happens exactly once, in [`Config::experiment_config`]. Every field has a
//! default, so an empty file (or none at all) runs the stock experiment.

use crate::channel::{dbm_to_watts, PathLossKind, PathLossModel, WallLoss};
use crate::montecarlo::{ExperimentConfig, QosSetting};
use crate::qoscap::QosSpec;
use crate::scenario::{IbarMode, ScenarioParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field `{field}` invalid: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

/// One named QoS setting in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosSettingConfig {
    pub name: String,
    /// SINR-ratio floor, in (0, 1].
    pub gamma: f64,
    /// Allowed violation probability, in (0, 1).
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    // Geometry.
    pub macro_radius_m: f64,
    pub building_radius_m: f64,
    pub femto_distance_m: f64,
    pub femto_ray_angle_deg: f64,
    pub num_mms: usize,
    pub num_subchannels: usize,
    // Radio.
    pub macro_total_power_dbm: f64,
    pub femto_total_power_dbm: f64,
    pub macro_antenna_gain_dbi: f64,
    pub femto_antenna_gain_dbi: f64,
    pub noise_dbm_per_subchannel: f64,
    pub wall_loss_db: f64,
    pub carrier_ghz: f64,
    pub macro_path_loss: PathLossKind,
    pub femto_path_loss: PathLossKind,
    pub macro_shadowing_db: f64,
    pub femto_shadowing_db: f64,
    // Experiment.
    pub reps: usize,
    pub master_seed: u64,
    pub eval_fading_draws: usize,
    pub ibar_mode: IbarMode,
    pub qos: Vec<QosSettingConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            macro_radius_m: 500.0,
            building_radius_m: 30.0,
            femto_distance_m: 400.0,
            femto_ray_angle_deg: 0.0,
            num_mms: 50,
            num_subchannels: 50,
            macro_total_power_dbm: 43.0,
            femto_total_power_dbm: 20.0,
            macro_antenna_gain_dbi: 15.0,
            femto_antenna_gain_dbi: 2.0,
            // Thermal floor over a 200 kHz sub-channel plus a 9 dB noise
            // figure: -174 + 10 log10(200e3) + 9.
            noise_dbm_per_subchannel: -174.0 + 10.0 * 200_000f64.log10() + 9.0,
            wall_loss_db: 3.0,
            carrier_ghz: 2.5,
            macro_path_loss: PathLossKind::UrbanMicroNlos,
            femto_path_loss: PathLossKind::IndoorHotspotNlos,
            macro_shadowing_db: 4.0,
            femto_shadowing_db: 4.0,
            reps: 20,
            master_seed: 42,
            eval_fading_draws: 200,
            ibar_mode: IbarMode::Approx,
            // The tight pair is calibrated so that roughly one drop in ten
            // loses 8% or more of the femto sum-rate; the loose pair leaves
            // almost every drop under 3%.
            qos: vec![
                QosSettingConfig {
                    name: "tight".into(),
                    gamma: 0.95,
                    epsilon: 0.01,
                },
                QosSettingConfig {
                    name: "loose".into(),
                    gamma: 0.5,
                    epsilon: 0.10,
                },
            ],
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Hex SHA-256 of the canonical TOML serialisation; echoed by the CLI so
    /// runs can be matched to the exact configuration that produced them.
    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.macro_radius_m > 0.0) {
            return Err(field_err("macro_radius_m", "must be positive"));
        }
        if !(self.building_radius_m > 0.0 && self.building_radius_m < self.macro_radius_m) {
            return Err(field_err(
                "building_radius_m",
                "must be positive and smaller than macro_radius_m",
            ));
        }
        if !(self.femto_distance_m >= 0.0 && self.femto_distance_m <= self.macro_radius_m) {
            return Err(field_err(
                "femto_distance_m",
                format!("must lie in [0, {}]", self.macro_radius_m),
            ));
        }
        if self.num_mms == 0 {
            return Err(field_err("num_mms", "must be at least 1"));
        }
        if self.num_subchannels != self.num_mms {
            return Err(field_err(
                "num_subchannels",
                "must equal num_mms (one sub-channel per macro user)",
            ));
        }
        if !self.macro_total_power_dbm.is_finite() || !self.femto_total_power_dbm.is_finite() {
            return Err(field_err("*_total_power_dbm", "must be finite"));
        }
        if !self.noise_dbm_per_subchannel.is_finite() {
            return Err(field_err("noise_dbm_per_subchannel", "must be finite"));
        }
        if !(self.wall_loss_db >= 0.0) {
            return Err(field_err("wall_loss_db", "must be >= 0 dB"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(field_err("carrier_ghz", "must be positive"));
        }
        if !(self.macro_shadowing_db >= 0.0 && self.femto_shadowing_db >= 0.0) {
            return Err(field_err("*_shadowing_db", "must be >= 0 dB"));
        }
        if self.reps == 0 {
            return Err(field_err("reps", "must be at least 1"));
        }
        if self.qos.is_empty() {
            return Err(field_err("qos", "need at least one [[qos]] setting"));
        }
        for q in &self.qos {
            if !(q.gamma > 0.0 && q.gamma <= 1.0) {
                return Err(field_err(
                    "qos.gamma",
                    format!("must be in (0, 1], got {}", q.gamma),
                ));
            }
            if !(q.epsilon > 0.0 && q.epsilon < 1.0) {
                return Err(field_err(
                    "qos.epsilon",
                    format!("must be in (0, 1), got {}", q.epsilon),
                ));
            }
        }
        Ok(())
    }

    /// The single dB-to-linear conversion boundary.
    pub fn scenario_params(&self) -> Result<ScenarioParams, ConfigError> {
        self.validate()?;
        let wall = WallLoss::from_db(self.wall_loss_db)
            .map_err(|e| field_err("wall_loss_db", e.to_string()))?;
        Ok(ScenarioParams {
            macro_radius_m: self.macro_radius_m,
            building_radius_m: self.building_radius_m,
            femto_distance_m: self.femto_distance_m,
            femto_ray_angle_rad: self.femto_ray_angle_deg.to_radians(),
            num_mms: self.num_mms,
            num_subchannels: self.num_subchannels,
            p_macro_per_subchannel_w: dbm_to_watts(self.macro_total_power_dbm)
                / self.num_subchannels as f64,
            p_femto_total_w: dbm_to_watts(self.femto_total_power_dbm),
            macro_antenna_gain: crate::channel::db_to_linear(self.macro_antenna_gain_dbi),
            femto_antenna_gain: crate::channel::db_to_linear(self.femto_antenna_gain_dbi),
            noise_w: dbm_to_watts(self.noise_dbm_per_subchannel),
            wall,
            macro_model: PathLossModel::new(
                self.macro_path_loss,
                self.carrier_ghz,
                self.macro_shadowing_db,
            ),
            femto_model: PathLossModel::new(
                self.femto_path_loss,
                self.carrier_ghz,
                self.femto_shadowing_db,
            ),
        })
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, ConfigError> {
        let params = self.scenario_params()?;
        let qos = self
            .qos
            .iter()
            .map(|q| {
                QosSpec::new(q.gamma, q.epsilon)
                    .map(|spec| QosSetting {
                        name: q.name.clone(),
                        spec,
                    })
                    .map_err(|e| field_err("qos", e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentConfig {
            params,
            qos,
            reps: self.reps,
            master_seed: self.master_seed,
            eval_fading_draws: self.eval_fading_draws,
            ibar_mode: self.ibar_mode,
            violation_model: crate::montecarlo::ViolationModel::PerInterferer,
            cap_scale: 1.0,
        })
    }
}
