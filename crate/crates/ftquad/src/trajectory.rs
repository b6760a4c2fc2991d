//! Reference trajectories: ramped single-lap ovals at four speeds, plus
//! hover and straight-line segments for testing.
//!
//! The oval is parameterized by a phase angle that rises from 0 to
//! `2 pi laps` over the duration. The phase rate follows a plateau with
//! quintic smoothstep ramps at both ends, so position, velocity, and
//! acceleration are all continuous and the reference starts and ends at
//! rest. Velocity and acceleration are exact analytic derivatives, not
//! finite differences. After the duration the final point is held with
//! zero derivatives.

use crate::controller::Setpoint;
use crate::so3::Vec3;
use std::f64::consts::TAU;

/// A closed oval reference, one or more laps over `duration` seconds.
///
/// Position relative to `center`:
/// `[a_x sin(theta), a_y (1 - cos(theta)), (a_z / 2) (1 - cos(2 theta))]`,
/// so the x/y excursions have semi-axes `a_x`/`a_y` and the z excursion
/// completes within each lap.
#[derive(Debug, Clone, PartialEq)]
pub struct OvalSpec {
    /// Per-axis amplitudes `(a_x, a_y, a_z)`, m.
    pub amplitude: Vec3,
    /// Total duration, s.
    pub duration: f64,
    /// Ramp length at each end of the phase-rate plateau, s.
    pub ramp_time: f64,
    /// Start point of the oval, m.
    pub center: Vec3,
    /// Number of laps completed over the duration.
    pub laps: u32,
}

impl OvalSpec {
    /// Canonical oval (semi-axes 2 m, 1.5 m, 0.5 m) with the given duration.
    /// The ramp is duration/14, which keeps the peak speed within 15% of the
    /// nominal `12/duration` m/s while still starting and ending at rest.
    pub fn canonical(duration: f64) -> Self {
        OvalSpec {
            amplitude: Vec3::new(2.0, 1.5, 0.5),
            duration,
            ramp_time: duration / 14.0,
            center: Vec3::zeros(),
            laps: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0) {
            return Err(format!("duration must be positive, got {}", self.duration));
        }
        if self.amplitude.min() < 0.0 {
            return Err("amplitudes must be non-negative".into());
        }
        if !(0.0..self.duration).contains(&self.ramp_time) {
            return Err(format!(
                "ramp_time must satisfy 0 <= ramp_time < duration, got {}",
                self.ramp_time
            ));
        }
        if self.laps == 0 {
            return Err("laps must be at least 1".into());
        }
        Ok(())
    }

    /// Phase and its first two time derivatives at `t`.
    fn phase(&self, t: f64) -> (f64, f64, f64) {
        let total = TAU * self.laps as f64;
        let t = t.clamp(0.0, self.duration);
        let r = self.ramp_time;
        if r == 0.0 {
            return (total * t / self.duration, total / self.duration, 0.0);
        }
        // Phase-rate shape s(t): quintic smoothstep up over [0, r], plateau,
        // mirrored ramp down over [T - r, T]. Each ramp integrates to r/2,
        // so the normalization constant is T - r.
        let norm = self.duration - r;
        let (integral, shape, shape_rate) = if t < r {
            let x = t / r;
            (r * smootherstep_integral(x), smootherstep(x), smootherstep_rate(x) / r)
        } else if t <= self.duration - r {
            (r / 2.0 + (t - r), 1.0, 0.0)
        } else {
            let x = (self.duration - t) / r;
            (
                norm - r * smootherstep_integral(x),
                smootherstep(x),
                -smootherstep_rate(x) / r,
            )
        };
        (
            total * integral / norm,
            total * shape / norm,
            total * shape_rate / norm,
        )
    }

    fn eval(&self, t: f64) -> Setpoint {
        if t >= self.duration {
            // Hold the endpoint with zero derivatives.
            let total = TAU * self.laps as f64;
            return Setpoint::hold(self.center + self.offset(total));
        }
        let (theta, theta_dot, theta_ddot) = self.phase(t);
        let p = self.offset(theta);
        let dp = self.offset_derivative(theta);
        let ddp = self.offset_second_derivative(theta);
        Setpoint {
            position: self.center + p,
            velocity: dp * theta_dot,
            acceleration: ddp * theta_dot * theta_dot + dp * theta_ddot,
            yaw: 0.0,
            yaw_rate: 0.0,
        }
    }

    fn offset(&self, theta: f64) -> Vec3 {
        Vec3::new(
            self.amplitude.x * theta.sin(),
            self.amplitude.y * (1.0 - theta.cos()),
            self.amplitude.z / 2.0 * (1.0 - (2.0 * theta).cos()),
        )
    }

    fn offset_derivative(&self, theta: f64) -> Vec3 {
        Vec3::new(
            self.amplitude.x * theta.cos(),
            self.amplitude.y * theta.sin(),
            self.amplitude.z * (2.0 * theta).sin(),
        )
    }

    fn offset_second_derivative(&self, theta: f64) -> Vec3 {
        Vec3::new(
            -self.amplitude.x * theta.sin(),
            self.amplitude.y * theta.cos(),
            2.0 * self.amplitude.z * (2.0 * theta).cos(),
        )
    }
}

fn smootherstep(x: f64) -> f64 {
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

fn smootherstep_rate(x: f64) -> f64 {
    30.0 * x * x * (1.0 + x * (-2.0 + x))
}

fn smootherstep_integral(x: f64) -> f64 {
    x * x * x * x * (2.5 + x * (-3.0 + x))
}

/// A reference trajectory the harness can follow.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Hold a fixed point.
    Hover { point: Vec3 },
    /// Ramped oval.
    Oval(OvalSpec),
    /// Straight line from `from` to `to` with a smoothstep time profile.
    Line { from: Vec3, to: Vec3, duration: f64 },
}

impl Trajectory {
    /// Canonical trajectories addressable from configs and the CLI:
    /// `oval15`, `oval12`, `oval8`, `oval5`, `hover`.
    pub fn by_name(name: &str) -> Option<Trajectory> {
        match name {
            "oval15" => Some(Trajectory::Oval(OvalSpec::canonical(15.0))),
            "oval12" => Some(Trajectory::Oval(OvalSpec::canonical(12.0))),
            "oval8" => Some(Trajectory::Oval(OvalSpec::canonical(8.0))),
            "oval5" => Some(Trajectory::Oval(OvalSpec::canonical(5.0))),
            "hover" => Some(Trajectory::Hover {
                point: Vec3::zeros(),
            }),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 5] = ["oval15", "oval12", "oval8", "oval5", "hover"];

    /// Reference sample at time `t >= 0`. Past the duration the final
    /// setpoint is held with zero derivatives.
    pub fn eval(&self, t: f64) -> Setpoint {
        let t = t.max(0.0);
        match self {
            Trajectory::Hover { point } => Setpoint::hold(*point),
            Trajectory::Oval(spec) => spec.eval(t),
            Trajectory::Line { from, to, duration } => {
                if t >= *duration {
                    return Setpoint::hold(*to);
                }
                let x = t / duration;
                let s = smootherstep(x);
                let s_dot = smootherstep_rate(x) / duration;
                // Second derivative of the quintic profile.
                let s_ddot = 60.0 * x * (1.0 + x * (-3.0 + 2.0 * x)) / (duration * duration);
                let delta = to - from;
                Setpoint {
                    position: from + s * delta,
                    velocity: s_dot * delta,
                    acceleration: s_ddot * delta,
                    yaw: 0.0,
                    yaw_rate: 0.0,
                }
            }
        }
    }

    /// Time after which the reference holds still.
    pub fn duration(&self) -> f64 {
        match self {
            Trajectory::Hover { .. } => 0.0,
            Trajectory::Oval(spec) => spec.duration,
            Trajectory::Line { duration, .. } => *duration,
        }
    }

    /// Peak reference speed, from dense sampling on a 1 ms grid.
    pub fn max_speed(&self) -> f64 {
        let duration = self.duration();
        if duration == 0.0 {
            return 0.0;
        }
        let steps = (duration / 1e-3).ceil() as usize;
        (0..=steps)
            .map(|i| self.eval(i as f64 * duration / steps as f64).velocity.norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Trajectory::Oval(spec) => spec.validate(),
            Trajectory::Line { duration, .. } if !(*duration > 0.0) => {
                Err("line duration must be positive".into())
            }
            _ => Ok(()),
        }
    }
}
