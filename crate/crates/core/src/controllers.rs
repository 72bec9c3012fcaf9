//! Speed controllers: open loop, discrete PID and first-order sliding mode.
//!
//! All controllers are pure step functions over value state so that many
//! simulations can run side by side.

use std::f64::consts::SQRT_2;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub output_min: f64,
    pub output_max: f64,
    /// Clamp on the accumulated error integral.
    pub integral_limit: f64,
}

impl Default for PidParams {
    fn default() -> Self {
        Self { kp: 0.02, ki: 0.1, kd: 0.0005, output_min: -1.0, output_max: 1.0, integral_limit: 10.0 }
    }
}

impl PidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kd >= 0.0) {
            return Err(SimError::domain("PID gains must be >= 0"));
        }
        if !(self.output_min < self.output_max) {
            return Err(SimError::domain("PID output_min must be < output_max"));
        }
        if !(self.integral_limit >= 0.0) {
            return Err(SimError::domain("pid.i_limit must be >= 0"));
        }
        Ok(())
    }
}

/// Which expression is used for the switching gain ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoForm {
    /// `ρ = L + α/√2`, a constant.
    #[default]
    Constant,
    /// `ρ = L + |σ|/√2`, re-evaluated every step.
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcParams {
    /// Sliding-surface slope c (1/s).
    pub c: f64,
    /// Disturbance bound L.
    pub disturbance_bound: f64,
    /// Finite-time reaching rate α.
    pub alpha: f64,
    /// Boundary-layer half-width φ; zero selects the pure sign function.
    pub boundary_layer: f64,
    pub rho_form: RhoForm,
}

impl Default for SmcParams {
    fn default() -> Self {
        Self { c: 8.0, disturbance_bound: 2.0, alpha: 2.0, boundary_layer: 0.05, rho_form: RhoForm::Constant }
    }
}

impl SmcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.disturbance_bound > 0.0 && self.alpha > 0.0) {
            return Err(SimError::domain("smc.c, smc.l_bound and smc.alpha must be > 0"));
        }
        if !(self.boundary_layer >= 0.0) {
            return Err(SimError::domain("smc.phi must be >= 0"));
        }
        Ok(())
    }

    /// Switching gain for the configured form.
    pub fn rho(&self, sigma: f64) -> f64 {
        match self.rho_form {
            RhoForm::Constant => smc_gain(self),
            RhoForm::Sigma => self.disturbance_bound + sigma.abs() / SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub integral_acc: f64,
    pub prev_error: f64,
    pub sigma_last: f64,
}

/// Controller output handed to the inverter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// Normalised phase-voltage envelope, scaled by half the DC link.
    pub voltage_norm: f64,
    /// Requested shoot-through duty.
    pub delta: f64,
}

impl ControlCommand {
    pub fn voltage(voltage_norm: f64) -> Self {
        Self { voltage_norm, delta: 0.0 }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(SimError::domain(format!("dt must be > 0, got {dt}")))
    }
}

/// Rectangle-rule integral, backward-difference derivative and conditional
/// integration: the integral is frozen while the output is saturated in the
/// direction the error is pushing.
pub fn pid_step(
    params: &PidParams,
    state: &ControllerState,
    error: f64,
    dt: f64,
) -> Result<(ControlCommand, ControllerState)> {
    check_dt(dt)?;
    let lim = params.integral_limit;
    let derivative = (error - state.prev_error) / dt;
    let candidate = (state.integral_acc + error * dt).clamp(-lim, lim);
    let raw = params.kp * error + params.ki * candidate + params.kd * derivative;

    let winding_up = (raw > params.output_max && error > 0.0) || (raw < params.output_min && error < 0.0);
    let integral = if winding_up { state.integral_acc.clamp(-lim, lim) } else { candidate };
    let u =
        (params.kp * error + params.ki * integral + params.kd * derivative).clamp(params.output_min, params.output_max);

    let next = ControllerState { integral_acc: integral, prev_error: error, sigma_last: state.sigma_last };
    Ok((ControlCommand::voltage(u), next))
}

/// `σ = x2 + c·x1`.
pub fn sliding_variable(c: f64, x1: f64, x2: f64) -> f64 {
    x2 + c * x1
}

/// Constant switching gain `ρ = L + α/√2`.
pub fn smc_gain(params: &SmcParams) -> f64 {
    params.disturbance_bound + params.alpha / SQRT_2
}

fn switching(sigma: f64, phi: f64) -> f64 {
    if phi > 0.0 {
        (sigma / phi).clamp(-1.0, 1.0)
    } else if sigma > 0.0 {
        1.0
    } else if sigma < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Unsaturated sliding-mode law `u = -c·x2 - ρ·sw(σ)`; returns `(σ, u)`.
pub fn smc_law(params: &SmcParams, x1: f64, x2: f64) -> (f64, f64) {
    let sigma = sliding_variable(params.c, x1, x2);
    let rho = params.rho(sigma);
    let u = -params.c * x2 - rho * switching(sigma, params.boundary_layer);
    (sigma, u)
}

/// Sliding-mode step; the command is saturated to `[-1, 1]`.
pub fn smc_step(params: &SmcParams, state: &ControllerState, x1: f64, x2: f64) -> (ControlCommand, ControllerState) {
    let (sigma, u) = smc_law(params, x1, x2);
    let next = ControllerState { sigma_last: sigma, ..*state };
    (ControlCommand::voltage(u.clamp(-1.0, 1.0)), next)
}

/// Fixed voltage proportional to the requested speed; no feedback.
pub fn open_loop_step(reference: f64, rating: f64) -> Result<ControlCommand> {
    if !(rating > 0.0) {
        return Err(SimError::domain(format!("open-loop rating must be > 0, got {rating}")));
    }
    Ok(ControlCommand::voltage((reference / rating).clamp(0.0, 1.0)))
}

/// How the speed error is mapped onto the sliding-mode states `(x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmcSurface {
    /// `x1 = ∫e dt`, `x2 = e`: the angle error and speed error, so that
    /// `ẋ2` is driven by the command as in the double-integrator model.
    #[default]
    ErrorIntegral,
    /// `x1 = e`, `x2 = de/dt` from a filtered differentiator.
    ErrorRate,
}

/// Turns a scaled speed error into the sliding-mode state pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcStates {
    pub surface: SmcSurface,
    integral: f64,
    rate: RateFilter,
}

impl SmcStates {
    /// `rate_tau` is the differentiator time constant for [`SmcSurface::ErrorRate`].
    pub fn new(surface: SmcSurface, rate_tau: f64) -> Self {
        Self { surface, integral: 0.0, rate: RateFilter::new(rate_tau) }
    }

    /// `(x1, x2)` for the current error. The error integral is frozen while
    /// the previous command sat on its limit in the direction the error
    /// pushes (the same conditional integration used by the PID).
    pub fn update(&mut self, error: f64, dt: f64, last_command: f64) -> (f64, f64) {
        match self.surface {
            SmcSurface::ErrorIntegral => {
                let pushing_up = error < 0.0 && last_command >= 1.0;
                let pushing_down = error > 0.0 && last_command <= -1.0;
                if !(pushing_up || pushing_down) {
                    self.integral += error * dt;
                }
                (self.integral, error)
            }
            SmcSurface::ErrorRate => (error, self.rate.update(error, dt)),
        }
    }
}

/// First-order filtered differentiator `s / (τs + 1)`, backward-Euler
/// discretised. Used to obtain the error rate for the sliding surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFilter {
    pub tau: f64,
    prev_input: Option<f64>,
    output: f64,
}

impl RateFilter {
    pub fn new(tau: f64) -> Self {
        Self { tau, prev_input: None, output: 0.0 }
    }

    pub fn update(&mut self, input: f64, dt: f64) -> f64 {
        let prev = self.prev_input.unwrap_or(input);
        self.output = (self.tau * self.output + (input - prev)) / (self.tau + dt);
        self.prev_input = Some(input);
        self.output
    }

    pub fn value(&self) -> f64 {
        self.output
    }
}
