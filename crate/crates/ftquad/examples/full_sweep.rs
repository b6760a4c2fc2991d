//! Full evaluation sweep: every metric, every canonical oval, and the three
//! fault modes (healthy, one rotor out, two opposing rotors out).
//!
//! Prints a per-axis RMSE table and writes `sweep.csv` next to the binary's
//! working directory. Diverged runs show as `-`, matching how the table
//! treats uncontrollable configurations.
//!
//! Run with: `cargo run --release --example full_sweep`

use ftquad::harness::{sweep, write_sweep_csv, ScenarioConfig};
use ftquad::{FaultConfig, MetricKind, RotorFault};
use std::path::Path;

fn main() {
    let mut base = ScenarioConfig::default();
    base.fault = FaultConfig {
        fault: RotorFault::None,
        t_fault: 1.0,
    };

    let metrics = MetricKind::ALL;
    let trajectories = ["oval15", "oval12", "oval8", "oval5"];
    let faults = [
        RotorFault::None,
        RotorFault::single(1).expect("rotor 1 is a valid index"),
        RotorFault::dual(1, 2).expect("{1,2} is an opposing pair"),
    ];

    let start = std::time::Instant::now();
    let cells = sweep(&base, &metrics, &trajectories, &faults).expect("sweep lists are non-empty");
    let elapsed = start.elapsed();

    println!(
        "{:<8} {:<8} {:<10} {:>9} {:>9} {:>9} {:>10} {:>10}",
        "metric", "traj", "fault", "rmse_x", "rmse_y", "rmse_z", "yaw_ss", "status"
    );
    for cell in &cells {
        match &cell.report {
            Some(r) => println!(
                "{:<8} {:<8} {:<10} {:>9.3} {:>9.3} {:>9.3} {:>10.2} {:>10}",
                cell.metric.name(),
                cell.trajectory,
                cell.fault.to_string(),
                r.rmse_x,
                r.rmse_y,
                r.rmse_z,
                r.yaw_rate_ss,
                "ok"
            ),
            None => println!(
                "{:<8} {:<8} {:<10} {:>9} {:>9} {:>9} {:>10} {:>10}",
                cell.metric.name(),
                cell.trajectory,
                cell.fault.to_string(),
                "-",
                "-",
                "-",
                "-",
                format!("{:?}", cell.status).split(' ').next().unwrap_or("?")
            ),
        }
    }
    println!("\n{} cells in {:.1} s", cells.len(), elapsed.as_secs_f64());

    let out = Path::new("sweep.csv");
    write_sweep_csv(&cells, out).expect("write sweep.csv");
    println!("table written to {}", out.display());
}
