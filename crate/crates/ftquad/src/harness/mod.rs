//! Scenario orchestration and reporting: the closed-loop runner with fault
//! injection, per-axis RMSE reports, metric/trajectory/fault sweeps, and
//! CSV emission.
//!
//! A scenario is fully described by a [`ScenarioConfig`]; running it is
//! deterministic, so the same config always produces a byte-identical log.
//! Runs that leave the controllable envelope are recorded as
//! [`TerminationStatus::Diverged`] rather than errors — a crashed run is a
//! result, and sweeps render it as `-` in the output table.

pub mod config;

pub use config::parse_config_file;

use crate::controller::{ControlCommand, Controller, MetricKind, Setpoint};
use crate::dynamics::{
    apply_fault, step, DynamicsError, FaultConfig, MotorSpeeds, QuadParams, QuadState,
};
use crate::so3::Vec3;
use crate::trajectory::Trajectory;
use rayon::prelude::*;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// The run is declared diverged when the thrust axis comes within this
/// distance of the inverted attitude (`b3z = -1`).
pub const TILT_DIVERGENCE_MARGIN: f64 = 1e-3;
/// Commanded moment norms beyond this are treated as a controller blow-up.
pub const MOMENT_DIVERGENCE_LIMIT: f64 = 1e3;
/// Seconds of endpoint hold appended after the trajectory in sweeps.
pub const SWEEP_HOLD_TIME: f64 = 5.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error: {0}")]
    CsvParse(String),
    #[error("rmse window is empty (need at least 2 samples after t_start)")]
    EmptyWindow,
}

/// Everything needed to run one closed-loop scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: QuadParams,
    pub gains: crate::controller::Gains,
    pub trajectory: Trajectory,
    /// Name the trajectory was resolved from, for reports.
    pub trajectory_name: String,
    pub metric: MetricKind,
    pub fault: FaultConfig,
    /// Total simulated time, s.
    pub t_total: f64,
    /// Plant integration step, s.
    pub dt_plant: f64,
    /// Plant steps per control tick.
    pub control_divisor: u32,
    /// Starting state; defaults to hover at the trajectory start point.
    pub initial_state: Option<QuadState>,
    /// Where `run` writes its CSV, if anywhere.
    pub output_path: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let trajectory = Trajectory::by_name("oval15").unwrap();
        let t_total = trajectory.duration() + SWEEP_HOLD_TIME;
        ScenarioConfig {
            params: QuadParams::default(),
            gains: crate::controller::Gains::default(),
            trajectory,
            trajectory_name: "oval15".into(),
            metric: MetricKind::FullAttitude,
            fault: FaultConfig::none(),
            t_total,
            dt_plant: 1e-3,
            control_divisor: 2,
            initial_state: None,
            output_path: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.params.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.gains.validate().map_err(HarnessError::Config)?;
        self.trajectory.validate().map_err(HarnessError::Config)?;
        if !(self.dt_plant > 0.0 && self.dt_plant <= crate::dynamics::MAX_STEP) {
            return Err(HarnessError::Config(format!(
                "dt_plant must be in (0, {}], got {}",
                crate::dynamics::MAX_STEP,
                self.dt_plant
            )));
        }
        if self.control_divisor == 0 {
            return Err(HarnessError::Config("control_divisor must be >= 1".into()));
        }
        if !(self.t_total > 0.0) {
            return Err(HarnessError::Config(format!(
                "t_total must be positive, got {}",
                self.t_total
            )));
        }
        if !self.fault.fault.is_none() && self.t_total < self.fault.t_fault {
            return Err(HarnessError::Config(format!(
                "t_total ({}) must reach the fault time ({})",
                self.t_total, self.fault.t_fault
            )));
        }
        Ok(())
    }

    /// Control period, s.
    pub fn dt_control(&self) -> f64 {
        self.dt_plant * self.control_divisor as f64
    }

    /// RMSE window start: the fault time for fault runs, zero otherwise.
    pub fn rmse_window_start(&self) -> f64 {
        if self.fault.fault.is_none() {
            0.0
        } else {
            self.fault.t_fault
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminationStatus {
    /// Reached `t_total`.
    Completed,
    /// Left the controllable envelope (inverted tilt, state blow-up, or
    /// moment spike) at the given time.
    Diverged { t: f64 },
    /// The controller reported a singularity at the given time.
    Error { t: f64, message: String },
}

impl TerminationStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TerminationStatus::Completed)
    }
}

/// One control-rate log record.
#[derive(Debug, Clone)]
pub struct LogSample {
    pub t: f64,
    pub state: QuadState,
    pub setpoint: Setpoint,
    pub command: ControlCommand,
    pub speeds: MotorSpeeds,
    pub attitude_err: Vec3,
    pub rate_err: Vec3,
}

/// Control-rate time series plus how the run ended.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub samples: Vec<LogSample>,
    pub status: TerminationStatus,
    /// Sample spacing, s.
    pub dt: f64,
}

/// Runs one scenario to completion, divergence, or controller error.
///
/// The loop is: every `control_divisor` plant steps evaluate the reference,
/// run outer loop / inner loop / allocation (with the fault active for
/// `t >= t_fault`), then hold the rotor commands while stepping the plant,
/// re-applying the fault mask at every plant step. Logging happens at the
/// control rate. Deterministic: same config, same bits.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog, HarnessError> {
    cfg.validate()?;

    let mut controller = Controller::new(cfg.gains.clone(), cfg.metric);
    let mut state = cfg
        .initial_state
        .unwrap_or_else(|| QuadState::hover_at(cfg.trajectory.eval(0.0).position));
    let mut speeds_cmd = MotorSpeeds::zero();
    let dt = cfg.dt_plant;
    let n_steps = (cfg.t_total / dt).round() as u64;
    let mut samples = Vec::with_capacity((n_steps / cfg.control_divisor as u64 + 1) as usize);
    let mut status = TerminationStatus::Completed;

    for i in 0..n_steps {
        let t = i as f64 * dt;

        if state.attitude.third_axis().z <= -1.0 + TILT_DIVERGENCE_MARGIN {
            status = TerminationStatus::Diverged { t };
            break;
        }

        if i % cfg.control_divisor as u64 == 0 {
            let setpoint = cfg.trajectory.eval(t);
            let tick = match controller.tick(
                &state,
                &setpoint,
                &cfg.params,
                &cfg.fault,
                t,
                cfg.dt_control(),
            ) {
                Ok(tick) => tick,
                Err(e) => {
                    status = TerminationStatus::Error {
                        t,
                        message: e.to_string(),
                    };
                    break;
                }
            };
            if tick.command.moment.norm() > MOMENT_DIVERGENCE_LIMIT {
                status = TerminationStatus::Diverged { t };
                break;
            }
            speeds_cmd = tick.speeds;
            samples.push(LogSample {
                t,
                state,
                setpoint,
                command: tick.command,
                speeds: apply_fault(&speeds_cmd, &cfg.fault, t),
                attitude_err: tick.attitude_err,
                rate_err: tick.rate_err,
            });
        }

        let applied = apply_fault(&speeds_cmd, &cfg.fault, t);
        state = match step(&state, &applied, &cfg.params, dt) {
            Ok(next) => next,
            Err(DynamicsError::NumericalDivergence) => {
                status = TerminationStatus::Diverged { t };
                break;
            }
            Err(e) => {
                status = TerminationStatus::Error {
                    t,
                    message: e.to_string(),
                };
                break;
            }
        };
    }

    Ok(RunLog {
        samples,
        status,
        dt: cfg.dt_control(),
    })
}

/// Per-axis tracking RMSE plus spin and tilt statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    /// Mean body yaw rate over the final 20% of the log, rad/s.
    pub yaw_rate_ss: f64,
    /// Largest tilt angle (angle between thrust axis and vertical), rad.
    pub max_tilt: f64,
    pub completed: bool,
}

/// Per-axis RMS of `p - p_d` over samples with `t >= t_start`.
pub fn rmse(log: &RunLog, t_start: f64) -> Result<RmseReport, HarnessError> {
    let window: Vec<&LogSample> = log.samples.iter().filter(|s| s.t >= t_start).collect();
    if window.len() < 2 {
        return Err(HarnessError::EmptyWindow);
    }
    let mut sq = Vec3::zeros();
    for s in &window {
        let e = s.state.position - s.setpoint.position;
        sq += e.component_mul(&e);
    }
    sq /= window.len() as f64;

    let tail_start = log.samples.len() - (log.samples.len() / 5).max(1);
    let tail = &log.samples[tail_start..];
    let yaw_rate_ss =
        tail.iter().map(|s| s.state.angular_velocity.z).sum::<f64>() / tail.len() as f64;

    let max_tilt = log
        .samples
        .iter()
        .map(|s| s.state.attitude.third_axis().z.clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);

    Ok(RmseReport {
        rmse_x: sq.x.sqrt(),
        rmse_y: sq.y.sqrt(),
        rmse_z: sq.z.sqrt(),
        yaw_rate_ss,
        max_tilt,
        completed: log.status.is_completed(),
    })
}

/// One cell of a sweep: the scenario coordinates, how the run ended, and
/// the RMSE report when the run completed.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub metric: MetricKind,
    pub trajectory: String,
    pub fault: crate::dynamics::RotorFault,
    pub status: TerminationStatus,
    /// `None` for runs that did not complete; rendered as `-` in tables.
    pub report: Option<RmseReport>,
}

/// Cartesian-product batch over metrics, trajectories, and faults.
///
/// Each cell runs the base scenario with those three coordinates replaced
/// and `t_total` set to the trajectory duration plus a hold tail. Cells run
/// in parallel (they share no state) and failures stay local to their cell.
pub fn sweep(
    base: &ScenarioConfig,
    metrics: &[MetricKind],
    trajectories: &[&str],
    faults: &[crate::dynamics::RotorFault],
) -> Result<Vec<SweepCell>, HarnessError> {
    if metrics.is_empty() || trajectories.is_empty() || faults.is_empty() {
        return Err(HarnessError::Config(
            "sweep lists must be non-empty".into(),
        ));
    }
    let mut coords = Vec::new();
    for &metric in metrics {
        for &traj in trajectories {
            for &fault in faults {
                coords.push((metric, traj, fault));
            }
        }
    }
    for (_, name, _) in &coords {
        if Trajectory::by_name(name).is_none() {
            return Err(HarnessError::Config(format!("unknown trajectory {name}")));
        }
    }

    let cells: Vec<SweepCell> = coords
        .par_iter()
        .map(|&(metric, traj_name, fault)| {
            let trajectory = Trajectory::by_name(traj_name).unwrap();
            let mut cfg = base.clone();
            cfg.metric = metric;
            cfg.trajectory_name = traj_name.to_string();
            cfg.t_total = trajectory.duration().max(base.fault.t_fault) + SWEEP_HOLD_TIME;
            cfg.trajectory = trajectory;
            cfg.fault = FaultConfig {
                fault,
                t_fault: base.fault.t_fault,
            };
            cfg.output_path = None;
            match run_scenario(&cfg) {
                Ok(log) => {
                    let report = if log.status.is_completed() {
                        rmse(&log, cfg.rmse_window_start()).ok()
                    } else {
                        None
                    };
                    SweepCell {
                        metric,
                        trajectory: traj_name.to_string(),
                        fault,
                        status: log.status,
                        report,
                    }
                }
                Err(e) => SweepCell {
                    metric,
                    trajectory: traj_name.to_string(),
                    fault,
                    status: TerminationStatus::Error {
                        t: 0.0,
                        message: e.to_string(),
                    },
                    report: None,
                },
            }
        })
        .collect();
    Ok(cells)
}

/// Writes the sweep table: one row per cell with `-` for unavailable values.
pub fn write_sweep_csv(cells: &[SweepCell], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "metric,trajectory,fault,rmse_x,rmse_y,rmse_z,yaw_rate_ss,completed"
    )?;
    for cell in cells {
        match &cell.report {
            Some(r) => writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                cell.metric,
                cell.trajectory,
                cell.fault,
                r.rmse_x,
                r.rmse_y,
                r.rmse_z,
                r.yaw_rate_ss,
                r.completed
            )?,
            None => writeln!(
                w,
                "{},{},{},-,-,-,-,false",
                cell.metric, cell.trajectory, cell.fault
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Run-log CSV header. The attitude is row-major; `alt` is `-z` for
/// plotting with altitude up.
pub const RUN_CSV_HEADER: &str = "t,x,y,z,xd,yd,zd,vx,vy,vz,\
r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz,f,m1,m2,m3,w1,w2,w3,w4,erx,ery,erz,alt";

/// Number of columns in the run CSV.
pub const RUN_CSV_COLUMNS: usize = 34;

/// Writes the control-rate log: header plus one row per tick, floats in
/// full round-trip precision.
pub fn export_csv(log: &RunLog, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{RUN_CSV_HEADER}")?;
    for s in &log.samples {
        let r = s.state.attitude.matrix();
        let row = [
            s.t,
            s.state.position.x,
            s.state.position.y,
            s.state.position.z,
            s.setpoint.position.x,
            s.setpoint.position.y,
            s.setpoint.position.z,
            s.state.velocity.x,
            s.state.velocity.y,
            s.state.velocity.z,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            s.state.angular_velocity.x,
            s.state.angular_velocity.y,
            s.state.angular_velocity.z,
            s.command.thrust,
            s.command.moment.x,
            s.command.moment.y,
            s.command.moment.z,
            s.speeds.0[0],
            s.speeds.0[1],
            s.speeds.0[2],
            s.speeds.0[3],
            s.attitude_err.x,
            s.attitude_err.y,
            s.attitude_err.z,
            -s.state.position.z,
        ];
        let mut line = String::with_capacity(512);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a run CSV back into rows of numbers. Validates the header and the
/// column count of every row.
pub fn parse_run_csv(path: &Path) -> Result<Vec<Vec<f64>>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::CsvParse("empty file".into()))?;
    if header != RUN_CSV_HEADER {
        return Err(HarnessError::CsvParse("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != RUN_CSV_COLUMNS {
            return Err(HarnessError::CsvParse(format!(
                "row {} has {} columns, expected {}",
                n + 2,
                fields.len(),
                RUN_CSV_COLUMNS
            )));
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| HarnessError::CsvParse(format!("row {}: {e}", n + 2)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::allocation;
    use crate::dynamics::RotorFault;
    use approx::assert_relative_eq;

    fn hover_config(t_total: f64) -> ScenarioConfig {
        ScenarioConfig {
            trajectory: Trajectory::by_name("hover").unwrap(),
            trajectory_name: "hover".into(),
            t_total,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn hover_scenario_regulates_tightly() {
        let cfg = hover_config(5.0);
        let log = run_scenario(&cfg).unwrap();
        assert!(log.status.is_completed());
        for s in &log.samples {
            let err = (s.state.position - s.setpoint.position).norm();
            assert!(err < 1e-3, "position error {err} at t={}", s.t);
        }
    }

    #[test]
    fn single_failure_hover_reaches_steady_spin() {
        let mut cfg = hover_config(8.0);
        cfg.metric = MetricKind::ThrustVector;
        cfg.fault = FaultConfig {
            fault: RotorFault::single(1).unwrap(),
            t_fault: 1.0,
        };
        let log = run_scenario(&cfg).unwrap();
        assert!(log.status.is_completed(), "status {:?}", log.status);
        let report = rmse(&log, 1.0).unwrap();
        // Steady spin is negative and matches the residual-moment drag
        // balance within 5%.
        assert!(report.yaw_rate_ss < -1.0, "no spin: {}", report.yaw_rate_ss);
        let tail_start = log.samples.len() - log.samples.len() / 5;
        let residual: f64 = log.samples[tail_start..]
            .iter()
            .map(|s| allocation::residual_yaw_moment(&s.speeds, &cfg.params))
            .sum::<f64>()
            / (log.samples.len() - tail_start) as f64;
        let predicted = residual / cfg.params.k_drag_angular.z;
        assert_relative_eq!(report.yaw_rate_ss, predicted, max_relative = 0.05);
    }

    #[test]
    fn rmse_of_perfect_tracking_is_zero() {
        let cfg = hover_config(2.0);
        let log = run_scenario(&cfg).unwrap();
        let report = rmse(&log, 0.0).unwrap();
        assert!(report.rmse_x < 1e-6);
        assert!(report.rmse_y < 1e-6);
        assert!(report.rmse_z < 1e-6);
        assert!(report.completed);
    }

    #[test]
    fn rmse_of_constant_offset() {
        // Synthetic log: constant error of 0.1 on x.
        let cfg = hover_config(2.0);
        let mut log = run_scenario(&cfg).unwrap();
        for s in &mut log.samples {
            s.state.position = s.setpoint.position + Vec3::new(0.1, 0.0, 0.0);
        }
        let report = rmse(&log, 0.0).unwrap();
        assert_relative_eq!(report.rmse_x, 0.1, max_relative = 1e-12);
        assert_eq!(report.rmse_y, 0.0);
    }

    #[test]
    fn rmse_of_sinusoid_is_amplitude_over_sqrt2() {
        let cfg = hover_config(4.0);
        let mut log = run_scenario(&cfg).unwrap();
        let amplitude = 0.2;
        // Whole number of periods over the window keeps the RMS exact.
        let period = 1.0;
        for s in &mut log.samples {
            let y = amplitude * (std::f64::consts::TAU * s.t / period).sin();
            s.state.position = s.setpoint.position + Vec3::new(0.0, y, 0.0);
        }
        let report = rmse(&log, 0.0).unwrap();
        assert_relative_eq!(
            report.rmse_y,
            amplitude / 2.0_f64.sqrt(),
            max_relative = 0.01
        );
    }

    #[test]
    fn rmse_rejects_empty_window() {
        let cfg = hover_config(2.0);
        let log = run_scenario(&cfg).unwrap();
        assert!(matches!(
            rmse(&log, 100.0),
            Err(HarnessError::EmptyWindow)
        ));
    }

    #[test]
    fn sweep_rejects_empty_lists() {
        let base = ScenarioConfig::default();
        assert!(sweep(&base, &[], &["hover"], &[RotorFault::None]).is_err());
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = ScenarioConfig::default();
        cfg.dt_plant = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.control_divisor = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.fault = FaultConfig {
            fault: RotorFault::single(2).unwrap(),
            t_fault: 100.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = hover_config(3.0);
        cfg.fault = FaultConfig {
            fault: RotorFault::single(3).unwrap(),
            t_fault: 1.0,
        };
        cfg.metric = MetricKind::S2Tilt;
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.state.position, y.state.position);
            assert_eq!(x.state.angular_velocity, y.state.angular_velocity);
            assert_eq!(x.speeds, y.speeds);
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let mut cfg = hover_config(1.0);
        cfg.fault = FaultConfig {
            fault: RotorFault::single(1).unwrap(),
            t_fault: 0.5,
        };
        cfg.metric = MetricKind::S2Tilt;
        let log = run_scenario(&cfg).unwrap();
        export_csv(&log, &path).unwrap();
        let rows = parse_run_csv(&path).unwrap();
        assert_eq!(rows.len(), log.samples.len());
        for (row, s) in rows.iter().zip(&log.samples) {
            assert_eq!(row.len(), RUN_CSV_COLUMNS);
            assert_eq!(row[0], s.t);
            assert_eq!(row[1], s.state.position.x);
            assert_eq!(row[9], s.state.velocity.z);
            assert_eq!(row[18], s.state.attitude.matrix()[(2, 2)]);
            assert_eq!(row[22], s.command.thrust);
            assert_eq!(row[26], s.speeds.0[0]);
            assert_eq!(row[33], -s.state.position.z);
        }
    }

    #[test]
    fn csv_has_header_plus_one_row_per_tick() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        let cfg = hover_config(1.0);
        let mut log = run_scenario(&cfg).unwrap();
        log.samples.truncate(2);
        export_csv(&log, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
