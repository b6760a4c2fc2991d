//! Gain-tuning probe: run the acceptance-critical cells for a gain set
//! passed on the command line. Temporary tooling.
//!
//! cargo run --release --example probe_tune -- kr_xy kr_z kw_xy kw_z [kp_xy kp_z kv_xy kv_z]

use ftquad::harness::{rmse, run_scenario, ScenarioConfig};
use ftquad::{FaultConfig, Gains, MetricKind, RotorFault, Trajectory, Vec3};

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric args"))
        .collect();
    let mut gains = Gains::default();
    if args.len() >= 4 {
        gains.k_r = Vec3::new(args[0], args[0], args[1]);
        gains.k_omega = Vec3::new(args[2], args[2], args[3]);
    }
    if args.len() >= 8 {
        gains.k_p = Vec3::new(args[4], args[4], args[5]);
        gains.k_v = Vec3::new(args[6], args[6], args[7]);
    }
    println!("gains: k_r={:?} k_omega={:?} k_p={:?} k_v={:?}", gains.k_r, gains.k_omega, gains.k_p, gains.k_v);

    let cells: Vec<(MetricKind, &str, RotorFault)> = vec![
        (MetricKind::FullAttitude, "oval15", RotorFault::None),
        (MetricKind::FullAttitude, "oval15", RotorFault::Single(1)),
        (MetricKind::HalfAngle, "oval15", RotorFault::Single(1)),
        (MetricKind::S2Tilt, "oval15", RotorFault::Single(1)),
        (MetricKind::ThrustVector, "oval15", RotorFault::Single(1)),
        (MetricKind::S2Tilt, "oval15", RotorFault::DualOpposing(1, 2)),
        (MetricKind::ThrustVector, "oval15", RotorFault::DualOpposing(1, 2)),
        (MetricKind::FullAttitude, "oval5", RotorFault::Single(1)),
        (MetricKind::HalfAngle, "oval5", RotorFault::Single(1)),
        (MetricKind::FullAttitude, "oval5", RotorFault::DualOpposing(1, 2)),
        (MetricKind::HalfAngle, "oval5", RotorFault::DualOpposing(1, 2)),
        (MetricKind::S2Tilt, "oval5", RotorFault::Single(1)),
        (MetricKind::ThrustVector, "oval5", RotorFault::Single(1)),
        (MetricKind::S2Tilt, "oval5", RotorFault::DualOpposing(1, 2)),
        (MetricKind::ThrustVector, "oval5", RotorFault::DualOpposing(1, 2)),
        (MetricKind::S2Tilt, "oval8", RotorFault::DualOpposing(1, 2)),
        (MetricKind::FullAttitude, "oval8", RotorFault::Single(1)),
        (MetricKind::HalfAngle, "oval8", RotorFault::Single(1)),
    ];

    for (metric, traj, fault) in cells {
        let trajectory = Trajectory::by_name(traj).unwrap();
        let mut cfg = ScenarioConfig::default();
        cfg.gains = gains.clone();
        cfg.metric = metric;
        cfg.t_total = trajectory.duration() + 5.0;
        cfg.trajectory = trajectory;
        cfg.trajectory_name = traj.into();
        cfg.fault = FaultConfig { fault, t_fault: 1.0 };
        let log = run_scenario(&cfg).unwrap();
        let start = cfg.rmse_window_start();
        match (log.status.is_completed(), rmse(&log, start)) {
            (true, Ok(r)) => println!(
                "{:<7} {:<7} {:<10} rmse=({:.3},{:.3},{:.3}) yaw={:+.1} tilt_max={:.0}deg",
                metric.name(),
                traj,
                fault.to_string(),
                r.rmse_x,
                r.rmse_y,
                r.rmse_z,
                r.yaw_rate_ss,
                r.max_tilt.to_degrees()
            ),
            _ => println!(
                "{:<7} {:<7} {:<10} {:?}",
                metric.name(),
                traj,
                fault.to_string(),
                log.status
            ),
        }
    }
}
