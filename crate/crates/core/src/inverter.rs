//! Averaged Z-source inverter.
//!
//! The inverter is modelled at duty-cycle level: the shoot-through duty Δ
//! sets the boost factor, the LC network carries the battery current, and
//! the bridge sees a DC link of `B(Δ)·v_s`.

use crate::engine::rk4::rk4_step;
use crate::error::{ensure_finite, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZsiParams {
    /// Inductance of each network inductor (H).
    pub l_h: f64,
    /// Capacitance of each network capacitor (F).
    pub c_f: f64,
    /// Largest admissible shoot-through duty.
    pub delta_max: f64,
    /// Standing shoot-through duty applied regardless of demand.
    pub delta_nominal: f64,
    /// Series resistance of the inductor branch (Ω); zero for a lossless network.
    pub r_l: f64,
    /// Bus boost reached at full-scale voltage command; a command of
    /// magnitude `u` asks for `u·full_scale_boost·v_s` at the bridge.
    pub full_scale_boost: f64,
}

impl Default for ZsiParams {
    fn default() -> Self {
        Self { l_h: 50e-6, c_f: 5e-3, delta_max: 0.45, delta_nominal: 0.0, r_l: 0.05, full_scale_boost: 2.0 }
    }
}

impl ZsiParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("zsi.l_h", self.l_h),
            ("zsi.c_f", self.c_f),
            ("zsi.delta_max", self.delta_max),
            ("zsi.delta_nominal", self.delta_nominal),
            ("zsi.r_l", self.r_l),
            ("zsi.full_scale_boost", self.full_scale_boost),
        ] {
            ensure_finite(name, v)?;
        }
        if self.l_h <= 0.0 || self.c_f <= 0.0 {
            return Err(SimError::domain("zsi.l_h and zsi.c_f must be > 0"));
        }
        if !(0.0..0.5).contains(&self.delta_max) {
            return Err(SimError::domain("zsi.delta_max must lie in [0, 0.5)"));
        }
        if self.delta_nominal < 0.0 || self.delta_nominal > self.delta_max {
            return Err(SimError::domain("zsi.delta_nominal must lie in [0, delta_max]"));
        }
        if self.r_l < 0.0 {
            return Err(SimError::domain("zsi.r_l must be >= 0"));
        }
        if self.full_scale_boost < 1.0 || self.full_scale_boost > boost_factor(self.delta_max)? {
            return Err(SimError::domain("zsi.full_scale_boost must lie in [1, boost at delta_max]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZsiState {
    /// Inductor current (A).
    pub i_l: f64,
    /// Capacitor voltage (V).
    pub v_c: f64,
}

impl ZsiState {
    /// Network charged to the battery voltage with no current flowing.
    pub fn charged(v_s: f64) -> Self {
        Self { i_l: 0.0, v_c: v_s }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    ensure_finite("delta", delta)?;
    if delta < 0.0 {
        return Err(SimError::domain(format!("shoot-through duty must be >= 0, got {delta}")));
    }
    if delta >= 0.5 {
        return Err(SimError::Singularity(delta));
    }
    Ok(())
}

/// `B = 1 / (1 - 2Δ)`.
pub fn boost_factor(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(1.0 / (1.0 - 2.0 * delta))
}

/// Peak DC-link voltage presented to the motor bridge.
pub fn dc_link_voltage(delta: f64, v_s: f64) -> Result<f64> {
    ensure_finite("v_s", v_s)?;
    Ok(boost_factor(delta)? * v_s)
}

/// Averaged output pair `(V_o, i_o)` for an explicit inductor voltage and current.
pub fn averaged_output_with(delta: f64, v_s: f64, v_l: f64, i_s: f64, i_l: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let v_o = (1.0 + delta) * v_s - delta * v_l;
    let i_o = (1.0 - delta) * i_s + delta * i_l;
    Ok((v_o, i_o))
}

/// Averaged output pair using the non-shoot-through inductor voltage `v_s - v_C`.
pub fn averaged_output(delta: f64, v_s: f64, i_s: f64, state: &ZsiState) -> Result<(f64, f64)> {
    ensure_finite("v_c", state.v_c)?;
    ensure_finite("i_l", state.i_l)?;
    averaged_output_with(delta, v_s, v_s - state.v_c, i_s, state.i_l)
}

/// Time derivative of the averaged LC network.
///
/// During shoot-through (fraction Δ) the inductor sees `v_C` and the
/// capacitor discharges through it; otherwise the inductor sees `v_s - v_C`
/// and the capacitor feeds the bridge current `i_o`.
pub fn zsi_derivatives(params: &ZsiParams, state: &ZsiState, v_s: f64, i_o: f64, delta: f64) -> ZsiState {
    let d = delta;
    let di = (d * state.v_c + (1.0 - d) * (v_s - state.v_c) - params.r_l * state.i_l) / params.l_h;
    let dv = ((1.0 - 2.0 * d) * state.i_l - (1.0 - d) * i_o) / params.c_f;
    ZsiState { i_l: di, v_c: dv }
}

/// Advances the network by `dt` with the shared RK4 scheme.
pub fn zsi_step(params: &ZsiParams, state: &ZsiState, v_s: f64, i_o: f64, delta: f64, dt: f64) -> Result<ZsiState> {
    check_delta(delta)?;
    if !(dt > 0.0) {
        return Err(SimError::domain(format!("dt must be > 0, got {dt}")));
    }
    let x = [state.i_l, state.v_c];
    let y = rk4_step(
        |_, x| {
            let d = zsi_derivatives(params, &ZsiState { i_l: x[0], v_c: x[1] }, v_s, i_o, delta);
            [d.i_l, d.v_c]
        },
        0.0,
        &x,
        dt,
    )?;
    Ok(ZsiState { i_l: y[0], v_c: y[1] })
}

/// Unloaded steady-state capacitor voltage `v_s (1 - Δ) / (1 - 2Δ)`.
pub fn steady_capacitor_voltage(delta: f64, v_s: f64) -> Result<f64> {
    Ok(v_s * (1.0 - delta) * boost_factor(delta)?)
}

/// Peak DC-link voltage actually presented to the bridge by the network,
/// `2·v_C - v_s`; equals `B·v_s` in steady state.
pub fn link_voltage(state: &ZsiState, v_s: f64) -> f64 {
    2.0 * state.v_c - v_s
}

/// Bridge-side current during the active (non-shoot-through) interval that
/// carries `p_bridge` watts on a link of `v_link`.
pub fn bridge_current(delta: f64, v_link: f64, p_bridge: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(v_link > 0.0) {
        return Err(SimError::domain(format!("link voltage must be positive to carry power, got {v_link}")));
    }
    Ok(p_bridge / ((1.0 - delta) * v_link))
}

/// Averaged battery current: the source conducts only outside shoot-through,
/// where it feeds both inductors less the bridge current.
pub fn source_current(delta: f64, state: &ZsiState, i_o: f64) -> f64 {
    (1.0 - delta) * (2.0 * state.i_l - i_o)
}

/// Inverse of the boost curve: the duty that yields boost `b >= 1`.
pub fn duty_for_boost(b: f64) -> f64 {
    if b <= 1.0 {
        0.0
    } else {
        0.5 * (1.0 - 1.0 / b)
    }
}

/// Shoot-through schedule: boost engages only when the required bus exceeds
/// what the battery supplies, on top of the standing duty.
pub fn schedule_shoot_through(params: &ZsiParams, required_bus: f64, v_batt: f64) -> f64 {
    let demand = if v_batt > 0.0 { duty_for_boost(required_bus / v_batt) } else { params.delta_max };
    demand.max(params.delta_nominal).clamp(0.0, params.delta_max)
}
