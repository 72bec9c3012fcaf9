//! Fixed-step closed-loop simulation of battery, Z-source inverter, BLDC
//! motor and vehicle under one of three scenarios.
//!
//! Everything integrates together in one RK4 state vector at a single rate.
//! The controller runs once per control period (by default every step) and
//! its command is held in between. A step that crosses a commutation edge is
//! split at the edge so each piece integrates a smooth right-hand side.

pub mod rk4;

use std::f64::consts::{FRAC_PI_3, TAU};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::battery::{cell_voltage, BatteryParams, BatteryState};
use crate::controllers::{
    open_loop_step, pid_step, smc_step, ControlCommand, ControllerState, PidParams, SmcParams, SmcStates, SmcSurface,
};
use crate::drivecycle::DriveCycle;
use crate::error::{Result, SimError};
use crate::inverter::{
    boost_factor, bridge_current, link_voltage, schedule_shoot_through, source_current, zsi_derivatives, ZsiParams,
    ZsiState,
};
use crate::motor::{
    bridge_voltages_in_pattern, electrical_derivatives, sector_index, sector_pattern, MotorParams, MotorState,
    RAD_S_TO_RPM,
};
use crate::vehicle::{axle_loads, max_tractive_effort, resistive_forces, VehicleParams, VehicleState};

pub use rk4::rk4_step;

/// Column order of the exported log.
pub const LOG_COLUMNS: [&str; 13] = [
    "t_s",
    "ref",
    "speed_rpm",
    "v_kmph",
    "torque_nm",
    "tload_nm",
    "theta_rad",
    "soc",
    "v_batt",
    "v_dclink",
    "u_cmd",
    "sigma",
    "p_tract_w",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Fixed voltage from the reference; no feedback, no vehicle.
    OpenLoop,
    /// Speed feedback on the bare motor.
    ClosedLoop,
    /// Speed feedback with the vehicle on the shaft, following a drive cycle.
    ClosedLoopDynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    OpenLoop,
    Pid,
    Smc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub pid: PidParams,
    pub smc: SmcParams,
    /// Speed error (RPM) that maps to one unit of the sliding-mode state.
    pub smc_error_scale_rpm: f64,
    pub smc_surface: SmcSurface,
    /// Open-loop full-scale speed; `None` uses the no-load speed of the
    /// initial bus.
    pub openloop_rating_rpm: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Smc,
            pid: PidParams { kp: 0.05, ki: 0.2, kd: 3e-5, integral_limit: 5.0, ..PidParams::default() },
            smc: SmcParams { c: 1.0, boundary_layer: 0.2, ..SmcParams::default() },
            smc_error_scale_rpm: 2000.0,
            smc_surface: SmcSurface::ErrorIntegral,
            openloop_rating_rpm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub dt: f64,
    /// Controller sample period (s); a whole multiple of `dt`. The command is
    /// held between updates.
    pub control_period: f64,
    pub duration: f64,
    pub reference_rpm: f64,
    /// Optional step of the reference: `(time_s, new_rpm)`.
    pub reference_step: Option<(f64, f64)>,
    /// Constant shaft load for the scenarios without a vehicle (N·m).
    pub load_nm: f64,
    pub cycle: Option<DriveCycle>,
    pub controller: ControllerConfig,
    pub battery: BatteryParams,
    pub initial_soc: f64,
    /// Regenerative battery current limit in multiples of capacity (C-rate).
    pub regen_limit_c: f64,
    pub zsi: ZsiParams,
    pub motor: MotorParams,
    pub vehicle: VehicleParams,
    /// Keep every n-th step in the log (the last step is always kept).
    pub log_every: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::ClosedLoop,
            dt: 1e-4,
            control_period: 1e-4,
            duration: 1.0,
            reference_rpm: 1000.0,
            reference_step: None,
            load_nm: 0.0,
            cycle: None,
            controller: ControllerConfig::default(),
            battery: BatteryParams::default(),
            initial_soc: 0.9,
            regen_limit_c: 2.0,
            zsi: ZsiParams::default(),
            motor: MotorParams::default(),
            vehicle: VehicleParams::default(),
            log_every: 1,
        }
    }
}

impl ScenarioConfig {
    /// Integration steps per controller update.
    pub fn control_steps(&self) -> usize {
        ((self.control_period / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::config(format!("scenario.dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(SimError::config(format!("scenario.duration must be >= dt, got {}", self.duration)));
        }
        let ratio = self.control_period / self.dt;
        if !(ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return Err(SimError::config(format!(
                "scenario.control_period must be a whole multiple of dt, got {} for dt {}",
                self.control_period, self.dt
            )));
        }
        if self.kind == ScenarioKind::ClosedLoopDynamics && self.cycle.is_none() {
            return Err(SimError::config("the dynamics scenario needs a drive cycle"));
        }
        if self.log_every == 0 {
            return Err(SimError::config("scenario.log_every must be >= 1"));
        }
        if !(self.initial_soc > 0.0 && self.initial_soc <= 1.0) {
            return Err(SimError::config("battery.soc0 must be in (0, 1]"));
        }
        if !(self.regen_limit_c >= 0.0) {
            return Err(SimError::config("battery.regen_c must be >= 0"));
        }
        if !(self.controller.smc_error_scale_rpm > 0.0) {
            return Err(SimError::config("smc.error_scale_rpm must be > 0"));
        }
        if let Some(r) = self.controller.openloop_rating_rpm {
            if !(r > 0.0) {
                return Err(SimError::config("openloop.rating_rpm must be > 0"));
            }
        }
        if !self.reference_rpm.is_finite() || self.load_nm < 0.0 || !self.load_nm.is_finite() {
            return Err(SimError::config("scenario.ref_rpm must be finite and scenario.load_nm >= 0"));
        }
        let wrap = |e: SimError| SimError::config(e.to_string());
        self.battery.validate().map_err(wrap)?;
        self.zsi.validate().map_err(wrap)?;
        self.motor.validate().map_err(wrap)?;
        self.vehicle.validate().map_err(wrap)?;
        self.controller.pid.validate().map_err(wrap)?;
        self.controller.smc.validate().map_err(wrap)?;
        Ok(())
    }

    fn controller_kind(&self) -> ControllerKind {
        match self.kind {
            ScenarioKind::OpenLoop => ControllerKind::OpenLoop,
            _ => self.controller.kind,
        }
    }

    fn coupled(&self) -> bool {
        self.kind == ScenarioKind::ClosedLoopDynamics
    }
}

/// Vehicle speed (km/h) to motor speed (RPM) through the wheel and gear.
pub fn kmph_to_rpm(v_kmph: f64, vehicle: &VehicleParams) -> f64 {
    v_kmph * (1000.0 / 3600.0) * vehicle.gear_ratio / vehicle.r_wheel * (60.0 / TAU)
}

pub fn rpm_to_kmph(rpm: f64, vehicle: &VehicleParams) -> f64 {
    rpm / kmph_to_rpm(1.0, vehicle)
}

/// One logged time step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimRecord {
    pub t: f64,
    /// Reference in RPM, or km/h in the dynamics scenario.
    pub reference: f64,
    pub speed_rpm: f64,
    pub v_kmph: f64,
    pub torque_nm: f64,
    pub load_nm: f64,
    pub theta_r: f64,
    pub soc: f64,
    pub v_batt: f64,
    pub v_dclink: f64,
    pub u_cmd: f64,
    pub sigma: f64,
    pub p_tract_w: f64,
    /// Sum of the three phase currents.
    pub i_sum: f64,
    /// Battery terminal current, positive on discharge.
    pub i_batt: f64,
}

impl SimRecord {
    pub fn fields(&self) -> [f64; 13] {
        [
            self.t,
            self.reference,
            self.speed_rpm,
            self.v_kmph,
            self.torque_nm,
            self.load_nm,
            self.theta_r,
            self.soc,
            self.v_batt,
            self.v_dclink,
            self.u_cmd,
            self.sigma,
            self.p_tract_w,
        ]
    }
}

/// Whole-run figures that are tracked at every step, logged or not.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub steps: usize,
    /// Largest `|i_a + i_b + i_c|` seen at any step.
    pub max_current_imbalance: f64,
    /// Steps where the wheel force hit the adhesion limit.
    pub traction_limited_steps: usize,
    /// Steps where regeneration hit the battery current limit.
    pub regen_limited_steps: usize,
    pub tractive_energy_j: f64,
    pub final_soc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub dt: f64,
    /// Spacing of the logged records.
    pub log_dt: f64,
    pub records: Vec<SimRecord>,
    pub summary: RunSummary,
}

impl SimLog {
    pub fn column(&self, f: impl Fn(&SimRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    /// Records whose time is a multiple of `period` (within half a step).
    pub fn resample(&self, period: f64) -> Vec<SimRecord> {
        let stride = (period / self.log_dt).round().max(1.0) as usize;
        self.records.iter().step_by(stride).copied().collect()
    }

    /// Log as CSV text with the fixed column order.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 13 * 24);
        out.push_str(&LOG_COLUMNS.join(","));
        out.push('\n');
        for r in &self.records {
            for (k, v) in r.fields().iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

/// Writes the log CSV to `path`.
pub fn export_log(log: &SimLog, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    file.write_all(log.to_csv().as_bytes()).map_err(|e| SimError::io(path, e))
}

/// Reads an exported log back into numeric rows.
pub fn parse_log(text: &str) -> Result<Vec<[f64; 13]>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| SimError::Format { line: 1, msg: e.to_string() })?;
    if headers.iter().ne(LOG_COLUMNS.iter().copied()) {
        return Err(SimError::Format { line: 1, msg: "unexpected log header".into() });
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| SimError::Format { line, msg: e.to_string() })?;
        if rec.len() != LOG_COLUMNS.len() {
            return Err(SimError::Format {
                line,
                msg: format!("expected {} fields, got {}", LOG_COLUMNS.len(), rec.len()),
            });
        }
        let mut row = [0.0; 13];
        for (i, cell) in rec.iter().enumerate() {
            row[i] = cell.parse().map_err(|_| SimError::Format { line, msg: format!("bad number {cell:?}") })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

// composite state layout
const IA: usize = 0;
const IB: usize = 1;
const IC: usize = 2;
const OMEGA: usize = 3;
const THETA: usize = 4;
const IL: usize = 5;
const VC: usize = 6;
const DIST: usize = 7;
const CHARGE: usize = 8;
const IHAT: usize = 9;
const NX: usize = 10;

/// Inputs held constant over one step.
#[derive(Debug, Clone, Copy)]
struct Held {
    u: f64,
    delta: f64,
    grade: f64,
    /// Wheel-force limit from adhesion (N); infinite without a vehicle.
    f_max: f64,
    /// Friction-brake force at the wheels (N).
    brake: f64,
    /// Commutation sector the bridge is switching for.
    sector: usize,
}

/// Quantities computed alongside the derivative.
#[derive(Debug, Clone, Copy, Default)]
struct Aux {
    v_batt: f64,
    v_dc: f64,
    i_batt: f64,
    t_e: f64,
    t_applied: f64,
    t_load: f64,
    traction_limited: bool,
    regen_limited: bool,
}

struct Plant<'a> {
    cfg: &'a ScenarioConfig,
    coupled: bool,
    j_total: f64,
    shaft_per_wheel: f64,
    regen_limit_a: f64,
}

impl<'a> Plant<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let coupled = cfg.coupled();
        let veh = &cfg.vehicle;
        // wheel radius over gear: shaft torque per newton at the wheel
        let shaft_per_wheel = veh.r_wheel / veh.gear_ratio;
        let j_total = if coupled {
            cfg.motor.j_inertia + veh.effective_mass() * shaft_per_wheel * shaft_per_wheel
        } else {
            cfg.motor.j_inertia
        };
        Self { cfg, coupled, j_total, shaft_per_wheel, regen_limit_a: cfg.regen_limit_c * cfg.battery.q_ah }
    }

    fn derivatives(&self, held: &Held, x: &[f64; NX]) -> ([f64; NX], Aux) {
        let cfg = self.cfg;
        let bat = &cfg.battery;
        let it = x[CHARGE].clamp(0.0, bat.it_max());
        let cell = cell_voltage(bat, it, x[IHAT]).unwrap_or(f64::NAN);
        let zsi = ZsiState { i_l: x[IL], v_c: x[VC] };
        // ohmic drop at the inductor current, which is the source current in
        // steady state; this keeps the terminal voltage explicit in the state
        let v_batt = f64::from(bat.n_series) * (cell - bat.internal_resistance * x[IL]);
        let v_dc = link_voltage(&zsi, v_batt).max(0.0);

        let motor = MotorState { i_a: x[IA], i_b: x[IB], i_c: x[IC], omega_m: x[OMEGA], theta_r: x[THETA] };
        let v = bridge_voltages_in_pattern(&cfg.motor, &motor, sector_pattern(held.sector), held.u, v_dc);
        let (di, t_e) = electrical_derivatives(&cfg.motor, &motor, &v);

        let mut aux = Aux { v_batt, v_dc, t_e, ..Aux::default() };
        let speed;
        if self.coupled {
            let veh = &cfg.vehicle;
            speed = veh.speed_from_motor(motor.omega_m).max(0.0);
            let (f_g, f_r, f_w) = resistive_forces(veh, speed, held.grade);
            let wheel_force = t_e / self.shaft_per_wheel;
            let limited = wheel_force.clamp(-held.f_max, held.f_max);
            aux.traction_limited = limited != wheel_force;
            aux.t_applied = limited * self.shaft_per_wheel;
            let f_brake = if speed > 0.0 { held.brake } else { 0.0 };
            aux.t_load = (f_g + f_r + f_w + f_brake) * self.shaft_per_wheel;
        } else {
            speed = 0.0;
            aux.t_applied = t_e;
            aux.t_load = cfg.load_nm;
        }
        let d_omega = (aux.t_applied - aux.t_load - cfg.motor.b_fric * motor.omega_m) / self.j_total;

        let p_bridge = v.v_a * motor.i_a + v.v_b * motor.i_b + v.v_c * motor.i_c;
        let i_o = if p_bridge == 0.0 { 0.0 } else { bridge_current(held.delta, v_dc, p_bridge).unwrap_or(f64::NAN) };
        let i_batt = source_current(held.delta, &zsi, i_o);
        aux.i_batt = i_batt;
        let dz = zsi_derivatives(&cfg.zsi, &zsi, v_batt, i_o, held.delta);
        // once the averaged charging current passes the battery's acceptance,
        // the braking chopper shunts the surplus
        let surplus = (-self.regen_limit_a - x[IHAT]).max(0.0);
        let i_charge = i_batt + surplus;
        aux.regen_limited = surplus > 0.0;

        let mut dx = [0.0; NX];
        dx[IA] = di[0];
        dx[IB] = di[1];
        dx[IC] = di[2];
        dx[OMEGA] = d_omega;
        dx[THETA] = cfg.motor.pole_pairs() * motor.omega_m;
        dx[IL] = dz.i_l;
        dx[VC] = dz.v_c;
        dx[DIST] = speed;
        dx[CHARGE] = i_charge / 3600.0;
        dx[IHAT] = (i_charge - x[IHAT]) / bat.filter_tau_s;
        (dx, aux)
    }
}

impl Plant<'_> {
    /// Integrates over `dt`, splitting the step wherever the rotor crosses a
    /// commutation edge so each piece sees a single conduction pattern.
    fn advance(&self, mut held: Held, x: &[f64; NX], t: f64, dt: f64) -> Result<[f64; NX]> {
        let mut x = *x;
        let mut t = t;
        let mut left = dt;
        for _ in 0..MAX_EDGES_PER_STEP {
            let next = rk4_step(|_, s| self.derivatives(&held, s).0, t, &x, left)?;
            let lo = held.sector as f64 * FRAC_PI_3;
            let hi = lo + FRAC_PI_3;
            let (th0, th1) = (x[THETA], next[THETA]);
            let forward = th1 >= hi;
            if !forward && th1 >= lo {
                return Ok(next);
            }
            let edge = if forward { hi } else { lo };
            let h = left * ((edge - th0) / (th1 - th0)).clamp(0.0, 1.0);
            if h > 0.0 {
                x = rk4_step(|_, s| self.derivatives(&held, s).0, t, &x, h)?;
            }
            t += h;
            left -= h;
            held.sector = if forward { (held.sector + 1) % 6 } else { (held.sector + 5) % 6 };
            // pin the angle onto the edge of the new sector
            let new_lo = held.sector as f64 * FRAC_PI_3;
            x[THETA] = if forward { new_lo } else { new_lo + FRAC_PI_3 };
            if left <= 0.0 {
                return Ok(x);
            }
        }
        Err(SimError::NumericalBlowup { t, detail: format!("more than {MAX_EDGES_PER_STEP} commutations in one step") })
    }
}

/// Commutation edges one step may cross before the rotor is deemed runaway.
const MAX_EDGES_PER_STEP: usize = 6;

/// Command held between controller updates.
#[derive(Debug, Clone, Copy, Default)]
struct DriveCommand {
    u: f64,
    delta: f64,
    bridge_u: f64,
    brake: f64,
    sigma: f64,
}

enum Control {
    Open { rating_rpm: f64 },
    Pid(ControllerState),
    Smc { state: ControllerState, states: SmcStates, last_u: f64 },
}

impl Control {
    fn reset(&mut self, dt: f64) {
        match self {
            Control::Open { .. } => {}
            Control::Pid(state) => *state = ControllerState::default(),
            Control::Smc { state, states, last_u } => {
                *state = ControllerState::default();
                *states = SmcStates::new(states.surface, 5.0 * dt);
                *last_u = 0.0;
            }
        }
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog> {
    cfg.validate()?;
    let plant = Plant::new(cfg);
    let dt = cfg.dt;
    let ctrl_every = cfg.control_steps();
    let t_ctrl = ctrl_every as f64 * dt;
    // tolerate durations that are a float hair short of a whole step count
    let n_steps = (cfg.duration / dt * (1.0 + 1e-12)).floor() as usize;
    let veh = &cfg.vehicle;
    let bat = &cfg.battery;

    let it0 = (1.0 - cfg.initial_soc) * bat.q_ah;
    let v0 = BatteryState::from_charge(bat, it0, 0.0, 0.0)?.v_terminal;
    let mut x = [0.0; NX];
    x[VC] = v0;
    x[CHARGE] = it0;

    let mut control = match cfg.controller_kind() {
        ControllerKind::OpenLoop => {
            let rating = cfg
                .controller
                .openloop_rating_rpm
                .unwrap_or_else(|| cfg.motor.no_load_speed(cfg.zsi.full_scale_boost * v0) * RAD_S_TO_RPM);
            Control::Open { rating_rpm: rating }
        }
        ControllerKind::Pid => Control::Pid(ControllerState::default()),
        ControllerKind::Smc => Control::Smc {
            state: ControllerState::default(),
            states: SmcStates::new(cfg.controller.smc_surface, 5.0 * t_ctrl),
            last_u: 0.0,
        },
    };
    let mut drive_cmd = DriveCommand::default();

    let mut records = Vec::with_capacity(n_steps / cfg.log_every + 2);
    let mut summary = RunSummary::default();
    let mut accel_prev = 0.0;
    let mut p_prev = 0.0;
    let mut energy = 0.0;

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let omega = x[OMEGA];
        let rpm = omega * RAD_S_TO_RPM;

        let (reference, ref_rpm, grade) = match (&cfg.cycle, cfg.coupled()) {
            (Some(cycle), true) => {
                let v_ref = cycle.sample_speed(t);
                (v_ref, kmph_to_rpm(v_ref, veh), cycle.sample_grade(t))
            }
            _ => {
                let r = match cfg.reference_step {
                    Some((ts, r)) if t >= ts => r,
                    _ => cfg.reference_rpm,
                };
                (r, r, 0.0)
            }
        };

        if k % ctrl_every == 0 {
            // battery voltage at the start of the step for the duty schedule
            let cell = cell_voltage(bat, x[CHARGE].clamp(0.0, bat.it_max()), x[IHAT]).unwrap_or(f64::NAN);
            let v_batt_now = f64::from(bat.n_series) * cell;
            // parked: a stopped vehicle asked to stay stopped gets no drive and
            // the controller restarts from rest, so nothing winds up against the
            // no-rollback stop
            let parked = plant.coupled && ref_rpm <= 0.0 && omega <= 0.0;
            if parked {
                control.reset(t_ctrl);
            }

            let mut sigma = 0.0;
            let cmd = match &mut control {
                _ if parked => ControlCommand::voltage(0.0),
                Control::Open { rating_rpm } => open_loop_step(ref_rpm, *rating_rpm)?,
                Control::Pid(state) => {
                    let (cmd, next) = pid_step(&cfg.controller.pid, state, ref_rpm - rpm, t_ctrl)?;
                    *state = next;
                    cmd
                }
                Control::Smc { state, states, last_u } => {
                    let error = (rpm - ref_rpm) / cfg.controller.smc_error_scale_rpm;
                    let (x1, x2) = states.update(error, t_ctrl, *last_u);
                    let (cmd, next) = smc_step(&cfg.controller.smc, state, x1, x2);
                    *state = next;
                    *last_u = cmd.voltage_norm;
                    sigma = next.sigma_last;
                    cmd
                }
            };
            let u = cmd.voltage_norm.clamp(-1.0, 1.0);
            // the command is a fraction of the full-scale boosted bus; shoot-through
            // engages only once that envelope exceeds the battery voltage, and
            // braking commands on the traction drive never ask for boost
            let drive = if plant.coupled { u.max(0.0) } else { u.abs() };
            let required_bus = drive * cfg.zsi.full_scale_boost * v_batt_now;
            let delta = schedule_shoot_through(&cfg.zsi, required_bus, v_batt_now);
            let boost = boost_factor(delta)?;
            let mut bridge_u = (u * cfg.zsi.full_scale_boost / boost).clamp(-1.0, 1.0);
            let mut brake = 0.0;
            if plant.coupled {
                // the traction drive never reverses bridge polarity while rolling
                // forward; its voltage floor is half the line back-EMF, where the
                // motor returns the most power, and commands below zero call on
                // the friction brake on top of that
                let regen_floor = cfg.motor.lambda_m * omega.max(0.0) / (boost * v_batt_now);
                brake = (-u).max(0.0) * veh.brake_force_max;
                bridge_u = bridge_u.max(regen_floor.min(1.0));
            }

            drive_cmd = DriveCommand { u, delta, bridge_u, brake, sigma };
        }
        let DriveCommand { u, delta, bridge_u, brake, sigma } = drive_cmd;

        let f_max = if plant.coupled {
            let speed = veh.speed_from_motor(omega).max(0.0);
            let state = VehicleState { v: speed, distance: x[DIST], grade_theta: grade };
            let (f_g, _, f_w) = resistive_forces(veh, speed, grade);
            let (w_f, w_r) = axle_loads(veh, &state, f_w, f_g, accel_prev)?;
            max_tractive_effort(veh, w_f, w_r).0
        } else {
            f64::INFINITY
        };
        let held = Held { u: bridge_u, delta, grade, f_max, brake, sector: sector_index(x[THETA]) };

        let (_, aux) = plant.derivatives(&held, &x);
        let p_tract = aux.t_applied * omega;
        if k > 0 {
            energy += 0.5 * (p_tract + p_prev) * dt;
        }
        p_prev = p_tract;

        let imbalance = (x[IA] + x[IB] + x[IC]).abs();
        summary.max_current_imbalance = summary.max_current_imbalance.max(imbalance);
        summary.traction_limited_steps += usize::from(aux.traction_limited);
        summary.regen_limited_steps += usize::from(aux.regen_limited);

        if k % cfg.log_every == 0 || k == n_steps {
            let batt = BatteryState::from_charge(bat, x[CHARGE].clamp(0.0, bat.it_max()), x[IHAT], aux.i_batt)?;
            let rec = SimRecord {
                t,
                reference,
                speed_rpm: rpm,
                v_kmph: if plant.coupled { veh.speed_from_motor(omega) * 3.6 } else { 0.0 },
                torque_nm: aux.t_e,
                load_nm: aux.t_load,
                theta_r: x[THETA],
                soc: batt.soc,
                v_batt: aux.v_batt,
                v_dclink: aux.v_dc,
                u_cmd: u,
                sigma,
                p_tract_w: p_tract,
                i_sum: x[IA] + x[IB] + x[IC],
                i_batt: aux.i_batt,
            };
            if let Some(bad) = rec.fields().iter().position(|v| !v.is_finite()) {
                return Err(SimError::NumericalBlowup {
                    t,
                    detail: format!("non-finite {} in log record; state {x:?}", LOG_COLUMNS[bad]),
                });
            }
            records.push(rec);
        }
        if k == n_steps {
            break;
        }

        let v_before = veh.speed_from_motor(x[OMEGA]);
        let mut next = plant.advance(held, &x, t, dt)?;
        if plant.coupled && next[OMEGA] < 0.0 {
            // no reverse gear: the vehicle stops rather than rolls back
            next[OMEGA] = 0.0;
        }
        next[THETA] = next[THETA].rem_euclid(TAU);
        if next[CHARGE] >= bat.it_max() {
            return Err(SimError::Saturation { it: next[CHARGE], q: bat.q_ah });
        }
        next[CHARGE] = next[CHARGE].max(0.0);
        accel_prev = (veh.speed_from_motor(next[OMEGA]) - v_before) / dt;
        x = next;
    }

    summary.steps = n_steps;
    summary.tractive_energy_j = energy;
    summary.final_soc = records.last().map_or(cfg.initial_soc, |r| r.soc);
    Ok(SimLog { dt, log_dt: dt * cfg.log_every as f64, records, summary })
}

/// Runs independent scenarios on separate threads; results keep input order.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<SimLog>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_scenario(c))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|panic| std::panic::resume_unwind(panic))).collect()
    })
}
