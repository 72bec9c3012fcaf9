//! Li-ion cell model with a polarisation term, an exponential zone and
//! coulomb counting. The pack is `n_series` identical cells in series.
//!
//! Sign convention: positive current discharges the cell.

use crate::error::{ensure_finite, Result, SimError};

/// Upper margin kept between extracted capacity and `q_ah` so the
/// `Q / (Q - it)` pole is never reached.
pub const CAPACITY_MARGIN_AH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Constant voltage E0 (V).
    pub e0: f64,
    /// Polarisation constant, shared by the filtered-current and capacity terms.
    pub kappa: f64,
    /// Maximum capacity Q (Ah).
    pub q_ah: f64,
    /// Exponential zone amplitude A (V).
    pub a_exp: f64,
    /// Exponential zone inverse time constant B (1/Ah).
    pub b_exp: f64,
    /// Time constant of the low-pass filter producing the filtered current (s).
    pub filter_tau_s: f64,
    /// Ohmic drop per cell (Ω).
    pub internal_resistance: f64,
    /// Number of cells in series.
    pub n_series: u32,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            e0: 3.7,
            kappa: 0.0005,
            q_ah: 50.0,
            a_exp: 0.2,
            b_exp: 0.5,
            filter_tau_s: 30.0,
            internal_resistance: 0.0,
            n_series: 96,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("battery.e0", self.e0),
            ("battery.kappa", self.kappa),
            ("battery.q_ah", self.q_ah),
            ("battery.a_exp", self.a_exp),
            ("battery.b_exp", self.b_exp),
            ("battery.filter_tau_s", self.filter_tau_s),
            ("battery.internal_resistance", self.internal_resistance),
        ] {
            ensure_finite(name, v)?;
        }
        if self.e0 <= 0.0 {
            return Err(SimError::domain("battery.e0 must be > 0"));
        }
        if self.q_ah <= 0.0 {
            return Err(SimError::domain("battery.q_ah must be > 0"));
        }
        if self.b_exp < 0.0 {
            return Err(SimError::domain("battery.b_exp must be >= 0"));
        }
        if self.filter_tau_s <= 0.0 {
            return Err(SimError::domain("battery.filter_tau_s must be > 0"));
        }
        if self.kappa < 0.0 || self.internal_resistance < 0.0 {
            return Err(SimError::domain("battery.kappa and internal resistance must be >= 0"));
        }
        if self.n_series == 0 {
            return Err(SimError::domain("battery.n_series must be >= 1"));
        }
        Ok(())
    }

    /// Largest admissible extracted capacity.
    pub fn it_max(&self) -> f64 {
        self.q_ah - CAPACITY_MARGIN_AH
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    /// Extracted capacity i·t (Ah).
    pub it: f64,
    /// Low-frequency filtered current î (A).
    pub i_filtered: f64,
    /// Pack terminal voltage (V).
    pub v_terminal: f64,
    pub soc: f64,
    /// Set when the last update hit the capacity clamp.
    pub saturated: bool,
}

impl BatteryState {
    /// Fully charged pack at rest.
    pub fn full(params: &BatteryParams) -> Self {
        Self::from_charge(params, 0.0, 0.0, 0.0).expect("a full cell at rest is always inside the model domain")
    }

    /// Builds the state implied by an extracted capacity and filtered
    /// current, picking the discharge or charge branch by the sign of `i_hat`.
    pub fn from_charge(params: &BatteryParams, it: f64, i_hat: f64, i_load: f64) -> Result<Self> {
        let cell = cell_voltage(params, it, i_hat)? - params.internal_resistance * i_load;
        Ok(Self {
            it,
            i_filtered: i_hat,
            v_terminal: f64::from(params.n_series) * cell,
            soc: 1.0 - it / params.q_ah,
            saturated: false,
        })
    }
}

fn check_capacity(params: &BatteryParams, it: f64, i_hat: f64) -> Result<()> {
    ensure_finite("it", it)?;
    ensure_finite("i_hat", i_hat)?;
    if it >= params.q_ah {
        return Err(SimError::Saturation { it, q: params.q_ah });
    }
    if it < 0.0 {
        return Err(SimError::domain(format!("extracted capacity must be >= 0, got {it}")));
    }
    Ok(())
}

fn capacity_terms(params: &BatteryParams, it: f64) -> f64 {
    let q = params.q_ah;
    -params.kappa * (q / (q - it)) * it + params.a_exp * (-params.b_exp * it).exp()
}

/// Cell open-circuit-plus-polarisation voltage on discharge (`i_hat >= 0`).
pub fn discharge_voltage(params: &BatteryParams, it: f64, i_hat: f64) -> Result<f64> {
    check_capacity(params, it, i_hat)?;
    if i_hat < 0.0 {
        return Err(SimError::domain(format!("discharge branch requires i_hat >= 0, got {i_hat}")));
    }
    let q = params.q_ah;
    Ok(params.e0 - params.kappa * (q / (q - it)) * i_hat + capacity_terms(params, it))
}

/// Cell voltage on charge (`i_hat <= 0`). The polarisation resistance
/// uses `Q / (it + 0.1 Q)` in place of the discharge pole.
pub fn charge_voltage(params: &BatteryParams, it: f64, i_hat: f64) -> Result<f64> {
    check_capacity(params, it, i_hat)?;
    if i_hat > 0.0 {
        return Err(SimError::domain(format!("charge branch requires i_hat <= 0, got {i_hat}")));
    }
    let q = params.q_ah;
    Ok(params.e0 - params.kappa * (q / (it + 0.1 * q)) * i_hat + capacity_terms(params, it))
}

/// Branch on the sign of the filtered current.
pub fn cell_voltage(params: &BatteryParams, it: f64, i_hat: f64) -> Result<f64> {
    if i_hat > 0.0 {
        discharge_voltage(params, it, i_hat)
    } else {
        charge_voltage(params, it, i_hat)
    }
}

/// Explicit coulomb-counting and filter update over one step of `dt` seconds.
/// `dt` may not exceed the filter time constant: beyond it the explicit
/// filter update overshoots the load current.
pub fn battery_step(params: &BatteryParams, state: &BatteryState, i_load: f64, dt: f64) -> Result<BatteryState> {
    if !(dt > 0.0 && dt <= params.filter_tau_s) {
        return Err(SimError::domain(format!("dt must be in (0, filter_tau_s = {}], got {dt}", params.filter_tau_s)));
    }
    ensure_finite("i_load", i_load)?;
    let raw = state.it + i_load * dt / 3600.0;
    let it = raw.clamp(0.0, params.it_max());
    let i_hat = state.i_filtered + (dt / params.filter_tau_s) * (i_load - state.i_filtered);
    let mut next = BatteryState::from_charge(params, it, i_hat, i_load)?;
    next.saturated = raw > params.it_max();
    Ok(next)
}
