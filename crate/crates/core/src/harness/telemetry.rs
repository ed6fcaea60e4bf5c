use std::fmt::Write as _;
use std::io::{self, Write};

use nalgebra::Vector3;

use crate::allocation::SolverStatus;

/// Schema line opening every telemetry file.
pub const SCHEMA: &str = "#lattice-flight v1";

/// One control tick. Fields appear in the CSV in declaration order;
/// per-agent vectors expand to one column per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub time: f64,
    pub position: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub reference: Vector3<f64>,
    pub thrusts: Vec<f64>,
    pub moments: Vec<f64>,
    pub gammas: Vec<f64>,
    pub deflections: Vec<f64>,
    pub batteries: Vec<f64>,
    pub mass_estimate: f64,
    pub inertia_estimate: Vector3<f64>,
    pub torque_estimate: Vector3<f64>,
    pub v_z: f64,
    pub v_attitude: f64,
    pub status: SolverStatus,
}

pub fn header(n: usize) -> String {
    let mut cols: Vec<String> = ["time", "x", "y", "z", "phi", "theta", "psi", "ref_x", "ref_y", "ref_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["thrust", "moment", "gamma", "delta_z", "battery"] {
        cols.extend((0..n).map(|i| format!("{prefix}_{i}")));
    }
    cols.extend(
        [
            "m_hat", "j_xx", "j_yy", "j_zz", "tau_s_x", "tau_s_y", "tau_s_z", "v_z", "v_att", "status",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.join(",")
}

impl TelemetryRecord {
    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        let mut push = |v: f64| {
            if !row.is_empty() {
                row.push(',');
            }
            let _ = write!(row, "{v}");
        };
        push(self.time);
        self.position
            .iter()
            .chain(self.attitude.iter())
            .chain(self.reference.iter())
            .for_each(|v| push(*v));
        for group in [
            &self.thrusts,
            &self.moments,
            &self.gammas,
            &self.deflections,
            &self.batteries,
        ] {
            group.iter().for_each(|v| push(*v));
        }
        push(self.mass_estimate);
        self.inertia_estimate
            .iter()
            .chain(self.torque_estimate.iter())
            .for_each(|v| push(*v));
        push(self.v_z);
        push(self.v_attitude);
        let _ = write!(row, ",{}", self.status);
        row
    }
}

/// Writes the schema line, the header and one row per record.
pub fn write_csv<W: Write>(out: &mut W, records: &[TelemetryRecord]) -> io::Result<()> {
    let n = records.first().map_or(0, |r| r.thrusts.len());
    writeln!(out, "{SCHEMA}")?;
    writeln!(out, "{}", header(n))?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}
