//! Three-phase BLDC machine with trapezoidal back-EMF.
//!
//! State is `[i_a, i_b, i_c, ω_m, θ_r]`: phase currents, mechanical speed and
//! electrical rotor angle. The star point floats, so the neutral voltage is
//! solved from the terminal voltages and back-EMFs and the phase currents
//! stay balanced.

use std::f64::consts::{FRAC_PI_3, PI, TAU};

use crate::error::{ensure_finite, Result, SimError};

/// Below this speed (rad/s) torque is computed with `ω_m` cancelled.
pub const OMEGA_EPS: f64 = 1e-3;

pub const RAD_S_TO_RPM: f64 = 60.0 / TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// Stator resistance per phase (Ω).
    pub r_sp: f64,
    /// Self inductance (H).
    pub l_s: f64,
    /// Mutual inductance (H).
    pub l_m: f64,
    /// Flux linkage amplitude (Wb).
    pub lambda_m: f64,
    /// Pole count.
    pub poles: u32,
    /// Rotor plus coupled load inertia (kg·m²).
    pub j_inertia: f64,
    /// Viscous friction (N·m·s/rad).
    pub b_fric: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self { r_sp: 0.36, l_s: 1.1e-3, l_m: 0.1e-3, lambda_m: 0.1, poles: 8, j_inertia: 0.005, b_fric: 1e-4 }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("motor.r_ohm", self.r_sp),
            ("motor.ls_h", self.l_s),
            ("motor.lm_h", self.l_m),
            ("motor.lambda_wb", self.lambda_m),
            ("motor.j_kgm2", self.j_inertia),
            ("motor.b_visc", self.b_fric),
        ] {
            ensure_finite(name, v)?;
        }
        if self.r_sp <= 0.0 {
            return Err(SimError::domain("motor.r_ohm must be > 0"));
        }
        if !(self.l_m >= 0.0 && self.l_s > self.l_m) {
            return Err(SimError::domain("motor inductances need ls_h > lm_h >= 0"));
        }
        if self.lambda_m <= 0.0 {
            return Err(SimError::domain("motor.lambda_wb must be > 0"));
        }
        if self.poles < 2 || !self.poles.is_multiple_of(2) {
            return Err(SimError::domain("motor.poles must be an even integer >= 2"));
        }
        if self.j_inertia <= 0.0 || self.b_fric < 0.0 {
            return Err(SimError::domain("motor.j_kgm2 must be > 0 and motor.b_visc >= 0"));
        }
        Ok(())
    }

    /// Effective phase inductance `L_s - L_m`.
    pub fn l_eff(&self) -> f64 {
        self.l_s - self.l_m
    }

    pub fn pole_pairs(&self) -> f64 {
        f64::from(self.poles) / 2.0
    }

    /// No-load mechanical speed (rad/s) reachable on a DC link of `v_dc`:
    /// the line-to-line back-EMF of two conducting phases equals the link.
    pub fn no_load_speed(&self, v_dc: f64) -> f64 {
        v_dc / (2.0 * self.lambda_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    pub i_a: f64,
    pub i_b: f64,
    pub i_c: f64,
    /// Mechanical speed (rad/s).
    pub omega_m: f64,
    /// Electrical rotor angle (rad), kept in `[0, 2π)`.
    pub theta_r: f64,
}

impl MotorState {
    pub fn currents(&self) -> [f64; 3] {
        [self.i_a, self.i_b, self.i_c]
    }

    pub fn rpm(&self) -> f64 {
        self.omega_m * RAD_S_TO_RPM
    }

    pub fn current_sum(&self) -> f64 {
        self.i_a + self.i_b + self.i_c
    }
}

/// Terminal voltages measured from the DC-link midpoint (V).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseVoltages {
    pub v_a: f64,
    pub v_b: f64,
    pub v_c: f64,
}

impl PhaseVoltages {
    pub fn as_array(&self) -> [f64; 3] {
        [self.v_a, self.v_b, self.v_c]
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn trapezoid(theta: f64) -> f64 {
    let t = wrap_angle(theta);
    if t < 2.0 * FRAC_PI_3 {
        1.0
    } else if t < PI {
        1.0 - 2.0 * (t - 2.0 * FRAC_PI_3) / FRAC_PI_3
    } else if t < 5.0 * FRAC_PI_3 {
        -1.0
    } else {
        -1.0 + 2.0 * (t - 5.0 * FRAC_PI_3) / FRAC_PI_3
    }
}

/// Unit trapezoidal back-EMF shapes `(F_a, F_b, F_c)`: 120° flat tops
/// joined by 60° linear ramps, phases spaced 120° apart.
pub fn emf_shape(theta: f64) -> [f64; 3] {
    [trapezoid(theta), trapezoid(theta - 2.0 * FRAC_PI_3), trapezoid(theta + 2.0 * FRAC_PI_3)]
}

pub fn back_emf(params: &MotorParams, omega_m: f64, theta_r: f64) -> [f64; 3] {
    emf_shape(theta_r).map(|f| omega_m * params.lambda_m * f)
}

/// Electromagnetic torque `Σ e_x i_x / ω_m`. Near standstill the quotient is
/// replaced by `λ_m Σ F_x i_x`, which is the same expression with `ω_m`
/// cancelled.
pub fn electromagnetic_torque(e: [f64; 3], i: [f64; 3], omega_m: f64, lambda_m: f64, shape: [f64; 3]) -> f64 {
    if omega_m.abs() > OMEGA_EPS {
        (e[0] * i[0] + e[1] * i[1] + e[2] * i[2]) / omega_m
    } else {
        lambda_m * (shape[0] * i[0] + shape[1] * i[1] + shape[2] * i[2])
    }
}

pub fn neutral_voltage(v: &PhaseVoltages, e: [f64; 3]) -> f64 {
    ((v.v_a + v.v_b + v.v_c) - (e[0] + e[1] + e[2])) / 3.0
}

/// Electrical half of the model: phase-current derivatives and the
/// electromagnetic torque at the given state.
pub fn electrical_derivatives(params: &MotorParams, state: &MotorState, v: &PhaseVoltages) -> ([f64; 3], f64) {
    let shape = emf_shape(state.theta_r);
    let e = shape.map(|f| state.omega_m * params.lambda_m * f);
    let v_no = neutral_voltage(v, e);
    let i = state.currents();
    let vt = v.as_array();
    let l = params.l_eff();
    let di = [0, 1, 2].map(|k| (vt[k] - v_no - params.r_sp * i[k] - e[k]) / l);
    let torque = electromagnetic_torque(e, i, state.omega_m, params.lambda_m, shape);
    (di, torque)
}

/// Full five-state derivative with the load torque opposing motion.
pub fn motor_derivatives(params: &MotorParams, state: &MotorState, v: &PhaseVoltages, t_load: f64) -> MotorState {
    let (di, t_e) = electrical_derivatives(params, state, v);
    MotorState {
        i_a: di[0],
        i_b: di[1],
        i_c: di[2],
        omega_m: (t_e - t_load - params.b_fric * state.omega_m) / params.j_inertia,
        theta_r: params.pole_pairs() * state.omega_m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conduction {
    Positive,
    Negative,
    Open,
}

/// Index (0..6) of the 60° electrical sector containing `theta_r`.
pub fn sector_index(theta_r: f64) -> usize {
    ((wrap_angle(theta_r) / FRAC_PI_3) as usize).min(5)
}

/// Six-step pattern for the 60° sector containing `theta_r`. The two
/// conducting phases are the ones sitting on a flat top of their EMF.
pub fn commutation_table(theta_r: f64) -> [Conduction; 3] {
    sector_pattern(sector_index(theta_r))
}

/// Six-step pattern for sector `sector` (taken modulo 6).
pub fn sector_pattern(sector: usize) -> [Conduction; 3] {
    use Conduction::*;
    match sector % 6 {
        0 => [Positive, Negative, Open],
        1 => [Positive, Open, Negative],
        2 => [Open, Positive, Negative],
        3 => [Negative, Positive, Open],
        4 => [Negative, Open, Positive],
        _ => [Open, Negative, Positive],
    }
}

/// Voltage drop per ampere across the freewheel path of the floating phase
/// (Ω); sets how fast the outgoing phase current dies after commutation.
pub const FREEWHEEL_OHM: f64 = 3.0;

/// Terminal voltages of a six-step bridge at `state` for a normalised
/// command on a DC link of `v_dc`.
///
/// Conducting phases are switched to `±u·v_dc/2`. The floating phase sits at
/// the star point plus its own back-EMF, less the freewheel drop of whatever
/// current it still carries, so that current decays into the link and no
/// drive current flows through it.
pub fn bridge_voltages(params: &MotorParams, state: &MotorState, command: f64, v_dc: f64) -> PhaseVoltages {
    bridge_voltages_in_pattern(params, state, commutation_table(state.theta_r), command, v_dc)
}

/// [`bridge_voltages`] with the conduction pattern given explicitly rather
/// than read from the rotor angle.
pub fn bridge_voltages_in_pattern(
    params: &MotorParams,
    state: &MotorState,
    table: [Conduction; 3],
    command: f64,
    v_dc: f64,
) -> PhaseVoltages {
    let half = 0.5 * command * v_dc;
    let e = back_emf(params, state.omega_m, state.theta_r);
    let i = state.currents();
    let mut v = [0.0; 3];
    let mut open = 0;
    let mut driven_sum = 0.0;
    for k in 0..3 {
        match table[k] {
            Conduction::Positive => v[k] = half,
            Conduction::Negative => v[k] = -half,
            Conduction::Open => open = k,
        }
        if table[k] != Conduction::Open {
            driven_sum += v[k] - e[k];
        }
    }
    let drop = FREEWHEEL_OHM * i[open];
    // star point from the two driven terminals and the floating one
    let v_n = 0.5 * (driven_sum - drop);
    v[open] = v_n + e[open] - drop;
    PhaseVoltages { v_a: v[0], v_b: v[1], v_c: v[2] }
}
