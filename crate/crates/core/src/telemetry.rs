//! Per-step run records, CSV export/import, and summary metrics. Metrics are
//! a pure function of the rows, so a re-imported CSV reproduces them exactly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{wrap_angle, MultirotorConfig};

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One control step of a run. Actuator entries hold `(alpha, beta, omega)`
/// per motor; the mounting angle is constant and not logged.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub time: f64,
    pub pos_ref: [f64; 3],
    pub pos: [f64; 3],
    pub att_ref: [f64; 3],
    pub att_cmd: [f64; 3],
    pub att: [f64; 3],
    pub actuator_cmd: Vec<[f64; 3]>,
    pub actuator: Vec<[f64; 3]>,
    pub delta_force: [f64; 3],
    pub force_ref: [f64; 3],
    pub solve_time_us: f64,
    pub qp_iterations: u32,
    pub qp_active: u32,
    pub disturbance: [f64; 3],
}

/// Column names in declared order for `n` motors.
pub fn column_names(n: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "time", "ref_x", "ref_y", "ref_z", "pos_x", "pos_y", "pos_z", "att_ref_roll",
        "att_ref_pitch", "att_ref_yaw", "att_cmd_roll", "att_cmd_pitch", "att_cmd_yaw",
        "att_roll", "att_pitch", "att_yaw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=n {
        cols.push(format!("alpha_cmd_{i}"));
        cols.push(format!("beta_cmd_{i}"));
        cols.push(format!("omega_cmd_{i}"));
    }
    for i in 1..=n {
        cols.push(format!("alpha_{i}"));
        cols.push(format!("beta_{i}"));
        cols.push(format!("omega_{i}"));
    }
    for name in [
        "dfb_x", "dfb_y", "dfb_z", "fbref_x", "fbref_y", "fbref_z", "solve_us", "qp_iters",
        "qp_active", "dist_x", "dist_y", "dist_z",
    ] {
        cols.push(name.to_string());
    }
    cols
}

fn push_f64(out: &mut String, v: f64) {
    // `{}` prints the shortest representation that parses back bit-identically.
    write!(out, ",{v}").unwrap();
}

/// Renders rows as CSV text: one header line, then one line per row.
pub fn to_csv(rows: &[TelemetryRow], n_motors: usize) -> String {
    let mut out = String::new();
    out.push_str(&column_names(n_motors).join(","));
    out.push('\n');
    for row in rows {
        let mut line = String::new();
        write!(line, "{}", row.time).unwrap();
        for block in [&row.pos_ref, &row.pos, &row.att_ref, &row.att_cmd, &row.att] {
            for &v in block.iter() {
                push_f64(&mut line, v);
            }
        }
        for set in [&row.actuator_cmd, &row.actuator] {
            assert_eq!(set.len(), n_motors, "row actuator count mismatch");
            for motor in set.iter() {
                for &v in motor.iter() {
                    push_f64(&mut line, v);
                }
            }
        }
        for block in [&row.delta_force, &row.force_ref] {
            for &v in block.iter() {
                push_f64(&mut line, v);
            }
        }
        push_f64(&mut line, row.solve_time_us);
        write!(line, ",{},{}", row.qp_iterations, row.qp_active).unwrap();
        for &v in row.disturbance.iter() {
            push_f64(&mut line, v);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_csv(
    rows: &[TelemetryRow],
    n_motors: usize,
    path: impl AsRef<Path>,
) -> Result<(), TelemetryError> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(rows, n_motors)).map_err(|source| TelemetryError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses CSV text produced by [`to_csv`] back into rows.
pub fn from_csv(text: &str) -> Result<Vec<TelemetryRow>, TelemetryError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(TelemetryError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let cols = header.split(',').count();
    // Fixed columns: 16 leading + 12 trailing; 6 per motor in between.
    if cols < 28 || (cols - 28) % 6 != 0 {
        return Err(TelemetryError::Parse {
            line: 1,
            reason: format!("unexpected column count {cols}"),
        });
    }
    let n = (cols - 28) / 6;
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(TelemetryError::Parse {
                line: idx + 1,
                reason: format!("expected {cols} fields, got {}", fields.len()),
            });
        }
        let f = |k: usize| -> Result<f64, TelemetryError> {
            fields[k].parse().map_err(|_| TelemetryError::Parse {
                line: idx + 1,
                reason: format!("bad float `{}` in column {k}", fields[k]),
            })
        };
        let triple = |k: usize| -> Result<[f64; 3], TelemetryError> {
            Ok([f(k)?, f(k + 1)?, f(k + 2)?])
        };
        let mut actuator_cmd = Vec::with_capacity(n);
        let mut actuator = Vec::with_capacity(n);
        for i in 0..n {
            actuator_cmd.push(triple(16 + 3 * i)?);
        }
        for i in 0..n {
            actuator.push(triple(16 + 3 * n + 3 * i)?);
        }
        let tail = 16 + 6 * n;
        let int = |k: usize| -> Result<u32, TelemetryError> {
            fields[k].parse().map_err(|_| TelemetryError::Parse {
                line: idx + 1,
                reason: format!("bad integer `{}` in column {k}", fields[k]),
            })
        };
        rows.push(TelemetryRow {
            time: f(0)?,
            pos_ref: triple(1)?,
            pos: triple(4)?,
            att_ref: triple(7)?,
            att_cmd: triple(10)?,
            att: triple(13)?,
            actuator_cmd,
            actuator,
            delta_force: triple(tail)?,
            force_ref: triple(tail + 3)?,
            solve_time_us: f(tail + 6)?,
            qp_iterations: int(tail + 7)?,
            qp_active: int(tail + 8)?,
            disturbance: triple(tail + 9)?,
        });
    }
    Ok(rows)
}

/// Summary statistics over a run. All fields derive from telemetry rows plus
/// the actuator limit box, never from internal solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub rows: usize,
    /// Max Euclidean position error vs reference.
    pub max_position_error: f64,
    pub rms_position_error: f64,
    /// Max per-axis |measured - commanded| attitude, wrapped.
    pub max_attitude_cmd_error: f64,
    /// Max per-axis |measured - reference| attitude, wrapped.
    pub max_attitude_ref_error: f64,
    /// Per-motor fraction of steps with any commanded channel at its limit.
    pub saturation_fraction: Vec<f64>,
    pub max_solve_time_us: f64,
    pub max_qp_iterations: u32,
}

impl Metrics {
    pub fn from_rows(rows: &[TelemetryRow], config: &MultirotorConfig) -> Self {
        let n = config.n();
        let mut max_pos = 0.0_f64;
        let mut sum_sq = 0.0_f64;
        let mut max_att_cmd = 0.0_f64;
        let mut max_att_ref = 0.0_f64;
        let mut sat_counts = vec![0usize; n];
        let mut max_solve = 0.0_f64;
        let mut max_iters = 0u32;
        let tol = 1e-6;
        for row in rows {
            let e2 = (0..3)
                .map(|k| (row.pos[k] - row.pos_ref[k]).powi(2))
                .sum::<f64>();
            sum_sq += e2;
            max_pos = max_pos.max(e2.sqrt());
            for k in 0..3 {
                max_att_cmd = max_att_cmd.max(wrap_angle(row.att[k] - row.att_cmd[k]).abs());
                max_att_ref = max_att_ref.max(wrap_angle(row.att[k] - row.att_ref[k]).abs());
            }
            for (i, cmd) in row.actuator_cmd.iter().enumerate() {
                let saturated = cmd[0].abs() >= config.alpha_limit - tol
                    || cmd[1].abs() >= config.beta_limit - tol
                    || cmd[2] <= config.omega_min + tol
                    || cmd[2] >= config.omega_max - tol;
                if saturated {
                    sat_counts[i] += 1;
                }
            }
            max_solve = max_solve.max(row.solve_time_us);
            max_iters = max_iters.max(row.qp_iterations);
        }
        let rows_n = rows.len();
        Metrics {
            rows: rows_n,
            max_position_error: max_pos,
            rms_position_error: if rows_n == 0 {
                0.0
            } else {
                (sum_sq / rows_n as f64).sqrt()
            },
            max_attitude_cmd_error: max_att_cmd,
            max_attitude_ref_error: max_att_ref,
            saturation_fraction: sat_counts
                .into_iter()
                .map(|c| if rows_n == 0 { 0.0 } else { c as f64 / rows_n as f64 })
                .collect(),
            max_solve_time_us: max_solve,
            max_qp_iterations: max_iters,
        }
    }
}
