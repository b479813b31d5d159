//! Python bindings for the femtoalloc core: the cap formula, the capped
//! water-filling solvers with their KKT certificates, and the Monte Carlo
//! experiment. Imported as `femtoalloc_py`.

use femtoalloc::allocator::{
    check_kkt, waterfill_capped_bisection, waterfill_capped_iterative, ChannelState,
};
use femtoalloc::channel::{db_to_linear, PathLossKind, PathLossModel, WallLoss};
use femtoalloc::config::Config;
use femtoalloc::montecarlo::run_experiment;
use femtoalloc::qoscap::{self, MacroSideEstimate, QosSpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_model(kind: &str, carrier_ghz: f64) -> PyResult<PathLossModel> {
    let kind = match kind {
        "indoor-hotspot-nlos" => PathLossKind::IndoorHotspotNlos,
        "urban-micro-nlos" => PathLossKind::UrbanMicroNlos,
        other => {
            return Err(value_err(format!(
                "unknown path-loss model `{other}` (expected \"indoor-hotspot-nlos\" or \"urban-micro-nlos\")"
            )))
        }
    };
    Ok(PathLossModel::new(kind, carrier_ghz, 0.0))
}

/// Path loss in dB for the named model at `distance_m` metres.
#[pyfunction]
fn path_loss_db(model: &str, carrier_ghz: f64, distance_m: f64) -> PyResult<f64> {
    parse_model(model, carrier_ghz)?
        .path_loss_db(distance_m)
        .map_err(value_err)
}

/// CDF of the ratio of two independent unit-mean exponentials: `x/(1+x)`.
#[pyfunction]
fn fading_ratio_cdf(x: f64) -> PyResult<f64> {
    qoscap::fading_ratio_cdf(x).map_err(value_err)
}

/// Derived cap parameters for one sub-channel.
#[pyclass(get_all, frozen)]
struct CapParams {
    zeta: f64,
    delta: f64,
    kappa_w: f64,
    cap_w: f64,
}

#[pymethods]
impl CapParams {
    fn __repr__(&self) -> String {
        format!(
            "CapParams(zeta={}, delta={}, kappa_w={}, cap_w={})",
            self.zeta, self.delta, self.kappa_w, self.cap_w
        )
    }
}

fn build_cap(
    gamma: f64,
    epsilon: f64,
    wall_db: f64,
    antenna_dbi: f64,
    ibar_w: f64,
    hbar: f64,
) -> PyResult<qoscap::CapParams> {
    let spec = QosSpec::new(gamma, epsilon).map_err(value_err)?;
    let wall = WallLoss::from_db(wall_db).map_err(value_err)?;
    if !(ibar_w > 0.0 && hbar > 0.0) {
        return Err(value_err("ibar_w and hbar must be positive"));
    }
    let est = MacroSideEstimate {
        avg_interference_w: ibar_w,
        avg_cross_gain: hbar,
        femto_antenna_gain: db_to_linear(antenna_dbi),
        wall,
    };
    Ok(qoscap::power_cap(&spec, &est))
}

/// Closed-form per-sub-channel transmit-power cap.
#[pyfunction]
#[pyo3(signature = (gamma, epsilon, ibar_w, hbar, wall_db=0.0, antenna_dbi=0.0))]
fn power_cap(
    gamma: f64,
    epsilon: f64,
    ibar_w: f64,
    hbar: f64,
    wall_db: f64,
    antenna_dbi: f64,
) -> PyResult<CapParams> {
    let cap = build_cap(gamma, epsilon, wall_db, antenna_dbi, ibar_w, hbar)?;
    Ok(CapParams {
        zeta: cap.zeta,
        delta: cap.delta,
        kappa_w: cap.kappa_w,
        cap_w: cap.cap_w,
    })
}

/// SINR-ratio approximation `1 / (p A_f H / (I L_w) + 1)`.
#[pyfunction]
#[pyo3(signature = (p_femto_w, a_femto, h_femto_to_mms, interference_w, wall_db=0.0))]
fn psi_approx(
    p_femto_w: f64,
    a_femto: f64,
    h_femto_to_mms: f64,
    interference_w: f64,
    wall_db: f64,
) -> PyResult<f64> {
    let wall = WallLoss::from_db(wall_db).map_err(value_err)?;
    Ok(qoscap::psi_approx(
        p_femto_w,
        a_femto,
        h_femto_to_mms,
        interference_w,
        wall,
    ))
}

/// Monte Carlo estimate of `Prob(psi <= gamma)` at femto power `p_femto_w`.
#[pyfunction]
#[pyo3(signature = (p_femto_w, gamma, epsilon, ibar_w, hbar, wall_db=0.0, antenna_dbi=0.0, trials=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn empirical_violation_rate(
    p_femto_w: f64,
    gamma: f64,
    epsilon: f64,
    ibar_w: f64,
    hbar: f64,
    wall_db: f64,
    antenna_dbi: f64,
    trials: usize,
    seed: u64,
) -> PyResult<f64> {
    let cap = build_cap(gamma, epsilon, wall_db, antenna_dbi, ibar_w, hbar)?;
    if trials == 0 {
        return Err(value_err("trials must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(qoscap::empirical_violation_rate(
        p_femto_w, &cap, trials, &mut rng,
    ))
}

/// A solved power allocation with its optimality certificate.
#[pyclass(get_all, frozen)]
struct Allocation {
    powers_w: Vec<f64>,
    water_level_w: f64,
    sum_rate_bps_hz: f64,
    kkt_residual: f64,
}

#[pymethods]
impl Allocation {
    fn __repr__(&self) -> String {
        format!(
            "Allocation(sum_rate_bps_hz={}, water_level_w={}, kkt_residual={}, powers_w={:?})",
            self.sum_rate_bps_hz, self.water_level_w, self.kkt_residual, self.powers_w
        )
    }
}

/// Capped water-filling: maximise `sum log2(1 + p/floor)` subject to
/// `0 <= p <= cap` per channel and `sum p <= budget`. Caps may be
/// `float("inf")`.
#[pyfunction]
#[pyo3(signature = (floors_w, caps_w, budget_w, method="iterative"))]
fn waterfill(
    floors_w: Vec<f64>,
    caps_w: Vec<f64>,
    budget_w: f64,
    method: &str,
) -> PyResult<Allocation> {
    let state = ChannelState::new(floors_w, caps_w, budget_w).map_err(value_err)?;
    let result = match method {
        "iterative" => waterfill_capped_iterative(&state),
        "bisection" => waterfill_capped_bisection(&state, 1e-12),
        other => {
            return Err(value_err(format!(
                "unknown method `{other}` (expected \"iterative\" or \"bisection\")"
            )))
        }
    };
    Ok(Allocation {
        kkt_residual: result.certificate.max_residual,
        powers_w: result.powers_w,
        water_level_w: result.water_level_w,
        sum_rate_bps_hz: result.sum_rate_bps_hz,
    })
}

/// Re-check an allocation against the KKT conditions; returns the maximum
/// residual (infinite for infeasible allocations).
#[pyfunction]
fn kkt_residual(
    floors_w: Vec<f64>,
    caps_w: Vec<f64>,
    budget_w: f64,
    powers_w: Vec<f64>,
    water_level_w: f64,
) -> PyResult<f64> {
    let state = ChannelState::new(floors_w, caps_w, budget_w).map_err(value_err)?;
    if powers_w.len() != state.num_channels() {
        return Err(value_err("powers_w length must match floors_w"));
    }
    Ok(check_kkt(&state, &powers_w, water_level_w, 1e-8).max_residual)
}

/// The default experiment configuration as a TOML string.
#[pyfunction]
fn default_config_toml() -> String {
    Config::default().to_toml_string()
}

/// Run the Monte Carlo experiment and return the report as a JSON string.
///
/// `config_toml` uses the same keys as the CLI config file; `None` runs the
/// defaults. `seed` and `reps` override the config when given.
#[pyfunction]
#[pyo3(signature = (config_toml=None, seed=None, reps=None, eval_fading_draws=None))]
fn simulate(
    config_toml: Option<&str>,
    seed: Option<u64>,
    reps: Option<usize>,
    eval_fading_draws: Option<usize>,
) -> PyResult<String> {
    let mut cfg = match config_toml {
        Some(text) => Config::from_toml_str(text).map_err(value_err)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(d) = eval_fading_draws {
        cfg.eval_fading_draws = d;
    }
    let experiment = cfg.experiment_config().map_err(value_err)?;
    let report = run_experiment(&experiment).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

#[pymodule]
fn femtoalloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(fading_ratio_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(power_cap, m)?)?;
    m.add_function(wrap_pyfunction!(psi_approx, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_violation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_residual, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<CapParams>()?;
    m.add_class::<Allocation>()?;
    Ok(())
}
