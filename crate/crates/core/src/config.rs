//! Scenario configuration documents: TOML with dotted section keys.
//!
//! Keys may be written dotted (`pid.kp = 0.02`) or as tables
//! (`[pid]` then `kp = 0.02`); both flatten to the same key. Unknown keys
//! are rejected so typos never pass silently.

use std::path::{Path, PathBuf};

use crate::controllers::{RhoForm, SmcSurface};
use crate::drivecycle::load_cycle;
use crate::engine::{ControllerKind, ScenarioConfig, ScenarioKind};
use crate::error::{Result, SimError};

/// A parsed document: the scenario plus the cycle file it names, if any.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigDoc {
    pub scenario: ScenarioConfig,
    /// Value of `scenario.cycle`, as written.
    pub cycle_path: Option<PathBuf>,
}

enum Slot<'a> {
    Real(&'a mut f64),
    Count(&'a mut u32),
    Size(&'a mut usize),
}

/// Plain numeric keys and the fields they set.
fn numeric_slots(c: &mut ScenarioConfig) -> Vec<(&'static str, Slot<'_>)> {
    use Slot::*;
    let ctl = &mut c.controller;
    let (b, z, m, v) = (&mut c.battery, &mut c.zsi, &mut c.motor, &mut c.vehicle);
    vec![
        ("scenario.dt", Real(&mut c.dt)),
        ("scenario.control_period", Real(&mut c.control_period)),
        ("scenario.duration", Real(&mut c.duration)),
        ("scenario.ref_rpm", Real(&mut c.reference_rpm)),
        ("scenario.load_nm", Real(&mut c.load_nm)),
        ("scenario.log_every", Size(&mut c.log_every)),
        ("pid.kp", Real(&mut ctl.pid.kp)),
        ("pid.ki", Real(&mut ctl.pid.ki)),
        ("pid.kd", Real(&mut ctl.pid.kd)),
        ("pid.i_limit", Real(&mut ctl.pid.integral_limit)),
        ("pid.u_min", Real(&mut ctl.pid.output_min)),
        ("pid.u_max", Real(&mut ctl.pid.output_max)),
        ("smc.c", Real(&mut ctl.smc.c)),
        ("smc.l_bound", Real(&mut ctl.smc.disturbance_bound)),
        ("smc.alpha", Real(&mut ctl.smc.alpha)),
        ("smc.phi", Real(&mut ctl.smc.boundary_layer)),
        ("smc.error_scale_rpm", Real(&mut ctl.smc_error_scale_rpm)),
        ("battery.e0", Real(&mut b.e0)),
        ("battery.kappa", Real(&mut b.kappa)),
        ("battery.q_ah", Real(&mut b.q_ah)),
        ("battery.a_exp", Real(&mut b.a_exp)),
        ("battery.b_exp", Real(&mut b.b_exp)),
        ("battery.filter_tau_s", Real(&mut b.filter_tau_s)),
        ("battery.internal_resistance", Real(&mut b.internal_resistance)),
        ("battery.n_series", Count(&mut b.n_series)),
        ("battery.soc0", Real(&mut c.initial_soc)),
        ("battery.regen_c", Real(&mut c.regen_limit_c)),
        ("zsi.l_h", Real(&mut z.l_h)),
        ("zsi.c_f", Real(&mut z.c_f)),
        ("zsi.delta_max", Real(&mut z.delta_max)),
        ("zsi.delta_nominal", Real(&mut z.delta_nominal)),
        ("zsi.r_l", Real(&mut z.r_l)),
        ("zsi.full_scale_boost", Real(&mut z.full_scale_boost)),
        ("motor.r_ohm", Real(&mut m.r_sp)),
        ("motor.ls_h", Real(&mut m.l_s)),
        ("motor.lm_h", Real(&mut m.l_m)),
        ("motor.lambda_wb", Real(&mut m.lambda_m)),
        ("motor.poles", Count(&mut m.poles)),
        ("motor.j_kgm2", Real(&mut m.j_inertia)),
        ("motor.b_visc", Real(&mut m.b_fric)),
        ("vehicle.mass_kg", Real(&mut v.m)),
        ("vehicle.cd", Real(&mut v.c_d)),
        ("vehicle.af_m2", Real(&mut v.a_f)),
        ("vehicle.mu", Real(&mut v.mu)),
        ("vehicle.rho_air", Real(&mut v.rho_a)),
        ("vehicle.r_wheel_m", Real(&mut v.r_wheel)),
        ("vehicle.gear", Real(&mut v.gear_ratio)),
        ("vehicle.la_m", Real(&mut v.l_a)),
        ("vehicle.lb_m", Real(&mut v.l_b)),
        ("vehicle.hg_m", Real(&mut v.hg)),
        ("vehicle.eta", Real(&mut v.eta_adhesion)),
        ("vehicle.lambda_rot", Real(&mut v.lambda_rot)),
        ("vehicle.jrot_kgm2", Real(&mut v.j_rot_sum)),
        ("vehicle.g_mps2", Real(&mut v.g)),
        ("vehicle.brake_n", Real(&mut v.brake_force_max)),
    ]
}

const SCENARIO_KINDS: [(&str, ScenarioKind); 3] = [
    ("open_loop", ScenarioKind::OpenLoop),
    ("closed_loop", ScenarioKind::ClosedLoop),
    ("closed_loop_dynamics", ScenarioKind::ClosedLoopDynamics),
];
const CONTROLLER_KINDS: [(&str, ControllerKind); 3] =
    [("openloop", ControllerKind::OpenLoop), ("pid", ControllerKind::Pid), ("smc", ControllerKind::Smc)];
const RHO_FORMS: [(&str, RhoForm); 2] = [("constant", RhoForm::Constant), ("sigma", RhoForm::Sigma)];
const SURFACES: [(&str, SmcSurface); 2] =
    [("error_integral", SmcSurface::ErrorIntegral), ("error_rate", SmcSurface::ErrorRate)];

fn pick<T: Copy>(key: &str, value: &toml::Value, table: &[(&str, T)]) -> Result<T> {
    let word = value.as_str().ok_or_else(|| SimError::config(format!("{key} must be a string")))?;
    table.iter().find(|(name, _)| *name == word).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        SimError::config(format!("{key} = {word:?} is not one of {}", names.join(", ")))
    })
}

fn name_of<T: PartialEq>(value: T, table: &[(&'static str, T)]) -> &'static str {
    table.iter().find(|(_, v)| *v == value).map(|(n, _)| *n).expect("every variant is named")
}

fn real(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(SimError::config(format!("{key} must be a number, got {value}"))),
    }
}

fn whole(key: &str, value: &toml::Value) -> Result<u64> {
    value
        .as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| SimError::config(format!("{key} must be a non-negative integer, got {value}")))
}

impl ConfigDoc {
    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, value: &toml::Value) -> Result<()> {
        let c = &mut self.scenario;
        match key {
            "scenario.kind" => c.kind = pick(key, value, &SCENARIO_KINDS)?,
            "controller.kind" => c.controller.kind = pick(key, value, &CONTROLLER_KINDS)?,
            "smc.rho_form" => c.controller.smc.rho_form = pick(key, value, &RHO_FORMS)?,
            "smc.surface" => c.controller.smc_surface = pick(key, value, &SURFACES)?,
            "openloop.rating_rpm" => c.controller.openloop_rating_rpm = Some(real(key, value)?),
            "scenario.step_time_s" => {
                let rpm = c.reference_step.map_or(c.reference_rpm, |s| s.1);
                c.reference_step = Some((real(key, value)?, rpm));
            }
            "scenario.step_rpm" => {
                let at = c.reference_step.map_or(0.0, |s| s.0);
                c.reference_step = Some((at, real(key, value)?));
            }
            "scenario.cycle" => {
                let path = value.as_str().ok_or_else(|| SimError::config(format!("{key} must be a path string")))?;
                self.cycle_path = Some(PathBuf::from(path));
            }
            _ => {
                let mut slots = numeric_slots(c);
                let (_, slot) = slots
                    .iter_mut()
                    .find(|(k, _)| *k == key)
                    .ok_or_else(|| SimError::config(format!("unknown key {key}")))?;
                match slot {
                    Slot::Real(f) => **f = real(key, value)?,
                    Slot::Count(n) => {
                        **n = u32::try_from(whole(key, value)?)
                            .map_err(|_| SimError::config(format!("{key} is too large")))?
                    }
                    Slot::Size(n) => {
                        **n = usize::try_from(whole(key, value)?)
                            .map_err(|_| SimError::config(format!("{key} is too large")))?
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override; the value is read as a TOML value and
    /// falls back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| SimError::config(format!("override {assignment:?} is not key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        self.set(key, &value)
    }

    /// Effective configuration as a dotted-key document that parses back to
    /// the same scenario (the cycle itself is not embedded).
    pub fn render(&self) -> String {
        let mut c = self.scenario.clone();
        let mut lines = vec![
            format!("scenario.kind = {:?}", name_of(c.kind, &SCENARIO_KINDS)),
            format!("controller.kind = {:?}", name_of(c.controller.kind, &CONTROLLER_KINDS)),
            format!("smc.rho_form = {:?}", name_of(c.controller.smc.rho_form, &RHO_FORMS)),
            format!("smc.surface = {:?}", name_of(c.controller.smc_surface, &SURFACES)),
        ];
        if let Some(r) = c.controller.openloop_rating_rpm {
            lines.push(format!("openloop.rating_rpm = {r:?}"));
        }
        if let Some((at, rpm)) = c.reference_step {
            lines.push(format!("scenario.step_time_s = {at:?}"));
            lines.push(format!("scenario.step_rpm = {rpm:?}"));
        }
        if let Some(p) = &self.cycle_path {
            lines.push(format!("scenario.cycle = {:?}", p.display().to_string()));
        }
        for (key, slot) in numeric_slots(&mut c) {
            lines.push(match slot {
                Slot::Real(f) => format!("{key} = {:?}", *f),
                Slot::Count(n) => format!("{key} = {}", *n),
                Slot::Size(n) => format!("{key} = {}", *n),
            });
        }
        lines.sort();
        lines.join("\n") + "\n"
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

/// Parses a configuration document over the defaults.
pub fn parse_config(text: &str) -> Result<ConfigDoc> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| SimError::config(e.to_string()))?;
    let mut entries = Vec::new();
    flatten("", &table, &mut entries);
    let mut doc = ConfigDoc::default();
    for (key, value) in &entries {
        doc.set(key, value)?;
    }
    Ok(doc)
}

/// Reads a configuration file; a missing file is a config error naming it.
pub fn read_config(path: &Path) -> Result<ConfigDoc> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(SimError::config(format!("config not found: {}", path.display())))
        }
        Err(e) => return Err(SimError::io(path, e)),
    };
    parse_config(&text)
}

impl ConfigDoc {
    /// Loads the named cycle (relative paths resolve against `base_dir`),
    /// then validates the scenario.
    pub fn resolve(mut self, base_dir: &Path) -> Result<ScenarioConfig> {
        if let Some(p) = &self.cycle_path {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            if !path.exists() {
                return Err(SimError::config(format!("cycle not found: {}", path.display())));
            }
            self.scenario.cycle = Some(load_cycle(&path)?);
        }
        self.scenario.validate()?;
        Ok(self.scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_and_table_forms_agree() {
        let dotted = parse_config("pid.kp = 0.3\nmotor.poles = 8\nscenario.kind = \"open_loop\"\n").unwrap();
        let tables = parse_config("[pid]\nkp = 0.3\n[motor]\npoles = 8\n[scenario]\nkind = \"open_loop\"\n").unwrap();
        assert_eq!(dotted, tables);
        assert_eq!(dotted.scenario.controller.pid.kp, 0.3);
        assert_eq!(dotted.scenario.motor.poles, 8);
        assert_eq!(dotted.scenario.kind, ScenarioKind::OpenLoop);
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(parse_config("").unwrap(), ConfigDoc::default());
    }

    #[test]
    fn integers_are_accepted_for_reals() {
        assert_eq!(parse_config("scenario.duration = 2").unwrap().scenario.duration, 2.0);
    }

    #[test]
    fn bad_documents_are_config_errors() {
        for text in [
            "pid.kq = 1.0",
            "pid.kp = \"fast\"",
            "motor.poles = -4",
            "motor.poles = 2.5",
            "controller.kind = \"lqr\"",
            "scenario.cycle = 3",
            "not toml at all",
        ] {
            assert!(matches!(parse_config(text), Err(SimError::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides() {
        let mut doc = ConfigDoc::default();
        doc.apply_override("controller.kind=pid").unwrap();
        doc.apply_override(" smc.phi = 0.1 ").unwrap();
        doc.apply_override("scenario.cycle=cycles/a.csv").unwrap();
        doc.apply_override("scenario.step_rpm=1500").unwrap();
        assert_eq!(doc.scenario.controller.kind, ControllerKind::Pid);
        assert_eq!(doc.scenario.controller.smc.boundary_layer, 0.1);
        assert_eq!(doc.cycle_path, Some(PathBuf::from("cycles/a.csv")));
        assert_eq!(doc.scenario.reference_step, Some((0.0, 1500.0)));
        assert!(doc.apply_override("smc.phi").is_err());
        assert!(doc.apply_override("smc.nope=1").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut doc = parse_config(
            "pid.kd = 1e-5\nopenloop.rating_rpm = 3000\nscenario.step_time_s = 0.5\nscenario.step_rpm = 1200.0\n",
        )
        .unwrap();
        doc.cycle_path = Some(PathBuf::from("x.csv"));
        doc.scenario.dt = 0.1 + 0.2;
        let back = parse_config(&doc.render()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_config(Path::new("/nonexistent/evsim.toml")).unwrap_err();
        assert_eq!(err.to_string(), "config error: config not found: /nonexistent/evsim.toml");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resolve_loads_a_relative_cycle() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.csv"), "t_s,v_kmph\n0,0\n10,20\n").unwrap();
        let doc = parse_config("scenario.kind = \"closed_loop_dynamics\"\nscenario.cycle = \"c.csv\"\n").unwrap();
        let cfg = doc.resolve(dir.path()).unwrap();
        assert_eq!(cfg.cycle.unwrap().duration(), 10.0);

        let missing = parse_config("scenario.cycle = \"gone.csv\"\n").unwrap();
        assert!(matches!(missing.resolve(dir.path()), Err(SimError::Config(_))));

        let no_cycle = parse_config("scenario.kind = \"closed_loop_dynamics\"\n").unwrap();
        assert!(matches!(no_cycle.resolve(dir.path()), Err(SimError::Config(_))));
    }
}
