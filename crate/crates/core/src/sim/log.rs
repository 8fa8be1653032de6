//! Per-tick telemetry and its CSV form.
//!
//! Floats are written in scientific notation with 17 fractional digits, which
//! parses back to the identical `f64`.

use nalgebra::Vector3;
use std::fmt::Write as _;
use thiserror::Error;

use super::mission::PhaseKind;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub phase: String,
    pub phase_kind: PhaseKind,
    pub desired_position: Vector3<f64>,
    pub position: Vector3<f64>,
    /// `(roll, pitch, yaw)` setpoint handed to the attitude loop.
    pub desired_attitude: Vector3<f64>,
    pub attitude: Vector3<f64>,
    /// Applied `u1`.
    pub thrust: f64,
    /// Applied `(u2, u3, u4)`.
    pub torques: Vector3<f64>,
    /// True disturbance torques.
    pub disturbance: Vector3<f64>,
    /// Estimated disturbance torques; NaN for the baseline controller.
    pub estimate: Vector3<f64>,
    /// `(V_roll, V_pitch, V_yaw)`; NaN for the baseline controller.
    pub lyapunov: Vector3<f64>,
    pub rotor_saturated: bool,
    pub tilt_clamped: bool,
    pub thrust_clamped: bool,
    pub estimate_clamped: bool,
}

pub const COLUMNS: [&str; 32] = [
    "time",
    "phase",
    "phase_kind",
    "x_d",
    "y_d",
    "z_d",
    "x",
    "y",
    "z",
    "roll_d",
    "pitch_d",
    "yaw_d",
    "roll",
    "pitch",
    "yaw",
    "u1",
    "u2",
    "u3",
    "u4",
    "d_roll",
    "d_pitch",
    "d_yaw",
    "d_hat_roll",
    "d_hat_pitch",
    "d_hat_yaw",
    "v_roll",
    "v_pitch",
    "v_yaw",
    "rotor_saturated",
    "tilt_clamped",
    "thrust_clamped",
    "estimate_clamped",
];

#[derive(Debug, Error, PartialEq)]
pub enum LogParseError {
    #[error("log is empty")]
    Empty,
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column '{column}': cannot parse '{value}'")]
    Field {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: timestamps must increase")]
    NonMonotone { line: usize },
}

/// Uniformly sampled telemetry, one row per attitude-loop tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioLog {
    pub rows: Vec<LogRow>,
}

/// Contiguous block of rows belonging to one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpan {
    pub name: String,
    pub kind: PhaseKind,
    /// Row range `[start, end)`.
    pub start: usize,
    pub end: usize,
}

impl ScenarioLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    /// Values of one channel by CSV column name. Boolean flags map to 0/1.
    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let index = COLUMNS.iter().position(|c| *c == name)?;
        if index < 3 {
            return (index == 0).then(|| self.times());
        }
        Some(
            self.rows
                .iter()
                .map(|r| numeric_fields(r)[index - 3])
                .collect(),
        )
    }

    /// Maximal runs of rows sharing a phase name, in log order.
    pub fn phase_spans(&self) -> Vec<PhaseSpan> {
        let mut spans: Vec<PhaseSpan> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match spans.last_mut() {
                Some(span) if span.name == row.phase => span.end = i + 1,
                _ => spans.push(PhaseSpan {
                    name: row.phase.clone(),
                    kind: row.phase_kind,
                    start: i,
                    end: i + 1,
                }),
            }
        }
        spans
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 32 * 26);
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:>25.17e},{},{}", row.time, row.phase, row.phase_kind).unwrap();
            for v in &numeric_fields(row)[..FLOAT_FIELDS] {
                write!(out, ",{v:>25.17e}").unwrap();
            }
            for flag in flags(row) {
                out.push_str(if flag { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LogParseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(LogParseError::Empty)?;
        if header.trim() != COLUMNS.join(",") {
            return Err(LogParseError::Header(header.to_string()));
        }
        let mut rows: Vec<LogRow> = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != COLUMNS.len() {
                return Err(LogParseError::FieldCount {
                    line: line_no,
                    expected: COLUMNS.len(),
                    found: fields.len(),
                });
            }
            let bad = |col: usize| LogParseError::Field {
                line: line_no,
                column: COLUMNS[col],
                value: fields[col].to_string(),
            };
            let float = |col: usize| fields[col].parse::<f64>().map_err(|_| bad(col));
            let vec3 = |col: usize| -> Result<Vector3<f64>, LogParseError> {
                Ok(Vector3::new(float(col)?, float(col + 1)?, float(col + 2)?))
            };
            let flag = |col: usize| match fields[col] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(col)),
            };
            let row = LogRow {
                time: float(0)?,
                phase: fields[1].to_string(),
                phase_kind: fields[2].parse().map_err(|_| bad(2))?,
                desired_position: vec3(3)?,
                position: vec3(6)?,
                desired_attitude: vec3(9)?,
                attitude: vec3(12)?,
                thrust: float(15)?,
                torques: vec3(16)?,
                disturbance: vec3(19)?,
                estimate: vec3(22)?,
                lyapunov: vec3(25)?,
                rotor_saturated: flag(28)?,
                tilt_clamped: flag(29)?,
                thrust_clamped: flag(30)?,
                estimate_clamped: flag(31)?,
            };
            if rows
                .last()
                .is_some_and(|prev| row.time.is_nan() || row.time <= prev.time)
            {
                return Err(LogParseError::NonMonotone { line: line_no });
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Number of float columns after `phase_kind`.
const FLOAT_FIELDS: usize = 25;

/// Columns 3.. of the CSV, flags as 0/1.
fn numeric_fields(r: &LogRow) -> [f64; 29] {
    let mut out = [0.0; 29];
    let vectors = [
        &r.desired_position,
        &r.position,
        &r.desired_attitude,
        &r.attitude,
    ];
    for (k, v) in vectors.iter().enumerate() {
        out[3 * k..3 * k + 3].copy_from_slice(v.as_slice());
    }
    out[12] = r.thrust;
    out[13..16].copy_from_slice(r.torques.as_slice());
    out[16..19].copy_from_slice(r.disturbance.as_slice());
    out[19..22].copy_from_slice(r.estimate.as_slice());
    out[22..25].copy_from_slice(r.lyapunov.as_slice());
    for (k, f) in flags(r).into_iter().enumerate() {
        out[25 + k] = if f { 1.0 } else { 0.0 };
    }
    out
}

fn flags(r: &LogRow) -> [bool; 4] {
    [
        r.rotor_saturated,
        r.tilt_clamped,
        r.thrust_clamped,
        r.estimate_clamped,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(time: f64, phase: &str) -> LogRow {
        LogRow {
            time,
            phase: phase.into(),
            phase_kind: PhaseKind::Flight,
            desired_position: Vector3::new(0.1, -2.0 / 3.0, 9.0),
            position: Vector3::new(1e-300, f64::MIN_POSITIVE, -0.0),
            desired_attitude: Vector3::new(0.0, 0.1, std::f64::consts::PI),
            attitude: Vector3::new(1.0 / 7.0, 2.0, 3.0),
            thrust: 14.715,
            torques: Vector3::new(1e-17, -1e17, 0.3),
            disturbance: Vector3::zeros(),
            estimate: Vector3::repeat(f64::NAN),
            lyapunov: Vector3::new(0.5, 0.25, 0.125),
            rotor_saturated: true,
            tilt_clamped: false,
            thrust_clamped: true,
            estimate_clamped: false,
        }
    }

    fn same_bits(a: &ScenarioLog, b: &ScenarioLog) -> bool {
        a.rows.len() == b.rows.len()
            && a.rows.iter().zip(&b.rows).all(|(x, y)| {
                x.phase == y.phase
                    && x.time.to_bits() == y.time.to_bits()
                    && numeric_fields(x)
                        .iter()
                        .zip(numeric_fields(y).iter())
                        .all(|(p, q)| p.to_bits() == q.to_bits() || (p.is_nan() && q.is_nan()))
            })
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = ScenarioLog {
            rows: vec![row(0.0, "a"), row(0.002, "a"), row(0.004, "b")],
        };
        let text = log.to_csv();
        let back = ScenarioLog::from_csv(&text).unwrap();
        assert!(same_bits(&log, &back));
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn rows_are_fixed_width() {
        let log = ScenarioLog {
            rows: vec![row(0.0, "a"), row(123.5, "a")],
        };
        let text = log.to_csv();
        let lengths: Vec<usize> = text.lines().skip(1).map(str::len).collect();
        assert_eq!(lengths[0], lengths[1]);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn phase_spans_partition_rows() {
        let log = ScenarioLog {
            rows: vec![row(0.0, "a"), row(1.0, "a"), row(2.0, "b"), row(3.0, "c")],
        };
        let spans = log.phase_spans();
        assert_eq!(spans.len(), 3);
        assert_eq!((spans[0].start, spans[0].end), (0, 2));
        assert_eq!((spans[2].start, spans[2].end), (3, 4));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(ScenarioLog::from_csv(""), Err(LogParseError::Empty));
        assert!(matches!(
            ScenarioLog::from_csv("a,b\n"),
            Err(LogParseError::Header(_))
        ));
        let log = ScenarioLog {
            rows: vec![row(1.0, "a"), row(0.5, "a")],
        };
        assert_eq!(
            ScenarioLog::from_csv(&log.to_csv()),
            Err(LogParseError::NonMonotone { line: 3 })
        );
        let text = format!("{}\n1.0,a\n", COLUMNS.join(","));
        assert!(matches!(
            ScenarioLog::from_csv(&text),
            Err(LogParseError::FieldCount { line: 2, .. })
        ));
    }

    #[test]
    fn channel_lookup() {
        let log = ScenarioLog {
            rows: vec![row(0.0, "a"), row(1.0, "a")],
        };
        assert_eq!(log.channel("time").unwrap(), vec![0.0, 1.0]);
        assert_eq!(log.channel("z_d").unwrap(), vec![9.0, 9.0]);
        assert_eq!(log.channel("thrust_clamped").unwrap(), vec![1.0, 1.0]);
        assert!(log.channel("phase").is_none());
        assert!(log.channel("nope").is_none());
    }
}
