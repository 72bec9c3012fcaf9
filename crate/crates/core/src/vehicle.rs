//! Longitudinal road-load model, per-axle normal loads and the planar
//! kinematic helpers (frame transform, slip angles).

use crate::error::{ensure_finite, Result, SimError};

pub const GRAVITY: f64 = 9.81;

/// Below this longitudinal speed slip angles are undefined.
pub const SLIP_SPEED_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub m: f64,
    pub mu: f64,
    pub rho_a: f64,
    pub a_f: f64,
    pub c_d: f64,
    pub r_wheel: f64,
    /// Rotational inertia constant used in the load-transfer term (>= 1).
    pub lambda_rot: f64,
    /// Summed rotating inertia of wheels and driveline, referred to the wheel.
    pub j_rot_sum: f64,
    pub l_a: f64,
    pub l_b: f64,
    pub hg: f64,
    pub eta_adhesion: f64,
    pub gear_ratio: f64,
    pub g: f64,
    /// Friction-brake force at full braking command, at the wheels (N).
    pub brake_force_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            m: 1200.0,
            mu: 0.013,
            rho_a: 1.2,
            a_f: 2.2,
            c_d: 0.3,
            r_wheel: 0.3,
            lambda_rot: 1.05,
            j_rot_sum: 2.0,
            l_a: 1.2,
            l_b: 1.4,
            hg: 0.55,
            eta_adhesion: 0.8,
            gear_ratio: 8.0,
            g: GRAVITY,
            brake_force_max: 4000.0,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_a + self.l_b
    }

    /// `m + ΣJ/r²`.
    pub fn effective_mass(&self) -> f64 {
        self.m + self.j_rot_sum / (self.r_wheel * self.r_wheel)
    }

    /// Vehicle speed for a motor shaft speed through the rigid driveline.
    pub fn speed_from_motor(&self, omega_m: f64) -> f64 {
        omega_m * self.r_wheel / self.gear_ratio
    }

    pub fn motor_from_speed(&self, v: f64) -> f64 {
        v * self.gear_ratio / self.r_wheel
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vehicle.mass_kg", self.m),
            ("vehicle.mu", self.mu),
            ("vehicle.rho_air", self.rho_a),
            ("vehicle.af_m2", self.a_f),
            ("vehicle.cd", self.c_d),
            ("vehicle.r_wheel_m", self.r_wheel),
            ("vehicle.la_m", self.l_a),
            ("vehicle.lb_m", self.l_b),
            ("vehicle.hg_m", self.hg),
            ("vehicle.eta", self.eta_adhesion),
            ("vehicle.gear", self.gear_ratio),
            ("g", self.g),
        ];
        for (name, v) in positive {
            ensure_finite(name, v)?;
            if v <= 0.0 {
                return Err(SimError::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.j_rot_sum >= 0.0) {
            return Err(SimError::domain("vehicle.jrot_kgm2 must be >= 0"));
        }
        if !(self.lambda_rot >= 1.0) {
            return Err(SimError::domain("vehicle.lambda_rot must be >= 1"));
        }
        if !(self.brake_force_max >= 0.0 && self.brake_force_max.is_finite()) {
            return Err(SimError::domain("vehicle.brake_n must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub v: f64,
    pub distance: f64,
    pub grade_theta: f64,
}

/// Road-load components `(F_g, F_r, F_w)` in newtons.
pub fn resistive_forces(params: &VehicleParams, v: f64, theta: f64) -> (f64, f64, f64) {
    let mg = params.m * params.g;
    let f_g = mg * theta.sin();
    let f_r = if v == 0.0 { 0.0 } else { params.mu * mg * theta.cos() };
    let f_w = 0.5 * params.rho_a * params.a_f * params.c_d * v * v;
    (f_g, f_r, f_w)
}

/// `(m + ΣJ/r²)·dv/dt`.
pub fn accel_resistance(params: &VehicleParams, dv_dt: f64) -> f64 {
    params.effective_mass() * dv_dt
}

/// Force needed at the wheels for speed `v` and acceleration `dv_dt`.
/// `rotating_mass` selects the effective mass for the inertial term.
pub fn tractive_force(params: &VehicleParams, v: f64, dv_dt: f64, theta: f64, rotating_mass: bool) -> f64 {
    let (f_g, f_r, f_w) = resistive_forces(params, v, theta);
    let inertial = if rotating_mass { accel_resistance(params, dv_dt) } else { params.m * dv_dt };
    f_g + f_r + f_w + inertial
}

/// Instantaneous power and the running energy advanced by one trapezoid.
/// `p_prev` is the power at the start of the interval.
pub fn tractive_power_energy(f_tr: f64, v: f64, p_prev: f64, running_e: f64, dt: f64) -> Result<(f64, f64)> {
    if !(dt > 0.0) {
        return Err(SimError::domain(format!("dt must be > 0, got {dt}")));
    }
    let p = f_tr * v;
    Ok((p, running_e + 0.5 * (p + p_prev) * dt))
}

pub fn wheel_torque(f_tr: f64, r_wheel: f64) -> f64 {
    f_tr * r_wheel
}

/// Front and rear normal loads: static split plus longitudinal transfer.
pub fn axle_loads(params: &VehicleParams, state: &VehicleState, f_w: f64, f_g: f64, dv_dt: f64) -> Result<(f64, f64)> {
    let l = params.wheelbase();
    if !(l > 0.0) {
        return Err(SimError::domain("wheelbase must be > 0"));
    }
    let theta = state.grade_theta;
    let normal = params.m * params.g * theta.cos();
    let (_, f_r, _) = resistive_forces(params, state.v, theta);
    let transfer = (params.hg * (f_w + f_g + params.lambda_rot * params.m * dv_dt) + f_r * params.r_wheel) / l;
    let w_f = params.l_b / l * normal - transfer;
    let w_r = params.l_a / l * normal + transfer;
    Ok((w_f, w_r))
}

pub fn max_tractive_effort(params: &VehicleParams, w_f: f64, w_r: f64) -> (f64, f64) {
    (params.eta_adhesion * w_f.max(0.0), params.eta_adhesion * w_r.max(0.0))
}

/// Limits a requested wheel force to `±f_max`; the flag is set when clamped.
pub fn clamp_traction(requested: f64, f_max: f64) -> (f64, bool) {
    let limited = requested.clamp(-f_max, f_max);
    (limited, limited != requested)
}

/// Body-frame offset `(dx, dy)` rotated by `theta` and added to `(x0, y0)`.
pub fn body_frame_transform(x0: f64, y0: f64, theta: f64, dx: f64, dy: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (x0 + c * dx - s * dy, y0 + s * dx + c * dy)
}

/// Front and rear tyre slip angles.
pub fn slip_angles(
    v_x: f64,
    v_y: f64,
    omega: f64,
    l_f: f64,
    l_r: f64,
    delta_f: f64,
    delta_r: f64,
) -> Result<(f64, f64)> {
    if !(v_x.abs() > SLIP_SPEED_GUARD) {
        return Err(SimError::LowSpeed(v_x.abs()));
    }
    let alpha_f = (v_y + omega * l_f) / v_x - delta_f;
    let alpha_r = (v_y - omega * l_r) / v_x + delta_r;
    Ok((alpha_f, alpha_r))
}
