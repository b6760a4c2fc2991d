//! Flat `key = value` config files with dotted section prefixes.
//!
//! ```text
//! # vehicle
//! params.m = 0.25
//! params.j = 2.1e-4, 2.1e-4, 3.6e-4
//! gains.k_p = 6, 6, 8
//! trajectory = oval15
//! metric = full
//! fault.failed = 1,2
//! fault.t_fault = 1.0
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! CLI flags override file values after parsing.

use super::{HarnessError, ScenarioConfig, SWEEP_HOLD_TIME};
use crate::controller::MetricKind;
use crate::dynamics::RotorFault;
use crate::so3::{Mat3, Vec3};
use crate::trajectory::Trajectory;
use std::path::Path;

/// Parses a config file into a [`ScenarioConfig`], starting from defaults.
/// `t_total` defaults to the trajectory duration plus a 5 s hold unless the
/// file sets it explicitly.
pub fn parse_config_file(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig::default();
    let mut explicit_t_total = false;

    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected `key = value`", n + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let at = |msg: String| HarnessError::Config(format!("line {} ({key}): {msg}", n + 1));

        match key {
            "params.m" => cfg.params.mass = parse_f64(value).map_err(at)?,
            "params.j" => {
                let d = parse_vec3(value).map_err(at)?;
                cfg.params.inertia = Mat3::from_diagonal(&d);
            }
            "params.d" => cfg.params.arm_length = parse_f64(value).map_err(at)?,
            "params.k_f" => cfg.params.k_thrust = parse_f64(value).map_err(at)?,
            "params.k_m" => cfg.params.k_torque = parse_f64(value).map_err(at)?,
            "params.k_td" => cfg.params.k_drag_linear = parse_f64(value).map_err(at)?,
            "params.k_rd" => cfg.params.k_drag_angular = parse_scalar_or_vec3(value).map_err(at)?,
            "params.g" => cfg.params.gravity = parse_f64(value).map_err(at)?,
            "params.omega_max" => cfg.params.motor_speed_max = parse_f64(value).map_err(at)?,
            "gains.k_p" => cfg.gains.k_p = parse_vec3(value).map_err(at)?,
            "gains.k_v" => cfg.gains.k_v = parse_vec3(value).map_err(at)?,
            "gains.k_r" => cfg.gains.k_r = parse_vec3(value).map_err(at)?,
            "gains.k_omega" => cfg.gains.k_omega = parse_vec3(value).map_err(at)?,
            "trajectory" => {
                cfg.trajectory = Trajectory::by_name(value).ok_or_else(|| {
                    at(format!(
                        "unknown trajectory `{value}` (known: {})",
                        Trajectory::NAMES.join(", ")
                    ))
                })?;
                cfg.trajectory_name = value.to_string();
            }
            "metric" => {
                cfg.metric = MetricKind::from_name(value).ok_or_else(|| {
                    at(format!("unknown metric `{value}` (known: full, half, s2, thrust)"))
                })?;
            }
            "fault.failed" => cfg.fault.fault = parse_fault_set(value).map_err(at)?,
            "fault.t_fault" => cfg.fault.t_fault = parse_f64(value).map_err(at)?,
            "t_total" => {
                cfg.t_total = parse_f64(value).map_err(at)?;
                explicit_t_total = true;
            }
            "dt_plant" => cfg.dt_plant = parse_f64(value).map_err(at)?,
            "control_divisor" => {
                cfg.control_divisor = value
                    .parse::<u32>()
                    .map_err(|e| at(format!("invalid integer: {e}")))?;
            }
            "output" => cfg.output_path = Some(value.into()),
            other => {
                return Err(HarnessError::Config(format!(
                    "line {}: unknown key `{other}`",
                    n + 1
                )));
            }
        }
    }

    if !explicit_t_total {
        cfg.t_total = cfg.trajectory.duration().max(cfg.fault.t_fault) + SWEEP_HOLD_TIME;
    }
    Ok(cfg)
}

/// Parses fault values from the CLI/config syntax:
/// `none`, `single:<i>`, `dual:<i>,<j>`, or a bare rotor list like `1,2`.
pub fn parse_fault_spec(value: &str) -> Result<RotorFault, String> {
    let value = value.trim();
    if let Some(rest) = value.strip_prefix("single:") {
        let i = rest
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("invalid rotor index: {e}"))?;
        return RotorFault::single(i).map_err(|e| e.to_string());
    }
    if let Some(rest) = value.strip_prefix("dual:") {
        return parse_fault_set(rest);
    }
    parse_fault_set(value)
}

fn parse_fault_set(value: &str) -> Result<RotorFault, String> {
    let value = value.trim();
    if value.is_empty() || value == "none" {
        return Ok(RotorFault::None);
    }
    let rotors: Vec<usize> = value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| format!("invalid rotor index `{s}`: {e}"))
        })
        .collect::<Result<_, _>>()?;
    match rotors.as_slice() {
        [i] => RotorFault::single(*i).map_err(|e| e.to_string()),
        [a, b] => RotorFault::dual(*a, *b).map_err(|e| e.to_string()),
        _ => Err(format!(
            "expected 0, 1, or 2 failed rotors, got {}",
            rotors.len()
        )),
    }
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|e| format!("invalid number `{value}`: {e}"))
}

fn parse_vec3(value: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected 3 comma-separated values, got {}", parts.len()));
    }
    Ok(Vec3::new(
        parse_f64(parts[0])?,
        parse_f64(parts[1])?,
        parse_f64(parts[2])?,
    ))
}

fn parse_scalar_or_vec3(value: &str) -> Result<Vec3, String> {
    if value.contains(',') {
        parse_vec3(value)
    } else {
        let v = parse_f64(value)?;
        Ok(Vec3::new(v, v, v))
    }
}
