//! Tracking-error statistics per flight phase.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use thiserror::Error;

use crate::sim::{PhaseKind, PhaseSpan, ScenarioLog};

/// Below this mean `|actual|` the percentage is not reported.
pub const PERCENTAGE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series lengths differ: desired {desired}, actual {actual}")]
    LengthMismatch { desired: usize, actual: usize },
}

/// Mean absolute error, population standard deviation of the signed error,
/// and mean error relative to mean `|actual|` in percent. `percentage` is
/// `None` (not applicable) when the denominator is below [`PERCENTAGE_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub mean: f64,
    pub std: f64,
    pub percentage: Option<f64>,
}

pub fn tracking_metrics(desired: &[f64], actual: &[f64]) -> Result<TrackingMetrics, MetricsError> {
    tracking_metrics_with(desired, actual, |d, a| d - a)
}

/// Same statistics on yaw-like angles, with the error wrapped to `(-pi, pi]`.
pub fn angular_tracking_metrics(
    desired: &[f64],
    actual: &[f64],
) -> Result<TrackingMetrics, MetricsError> {
    tracking_metrics_with(desired, actual, |d, a| wrap_angle(d - a))
}

fn tracking_metrics_with(
    desired: &[f64],
    actual: &[f64],
    error: impl Fn(f64, f64) -> f64,
) -> Result<TrackingMetrics, MetricsError> {
    if desired.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            desired: desired.len(),
            actual: actual.len(),
        });
    }
    if desired.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let n = desired.len() as f64;
    let errors: Vec<f64> = desired
        .iter()
        .zip(actual)
        .map(|(d, a)| error(*d, *a))
        .collect();
    let mean = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    let signed_mean = errors.iter().sum::<f64>() / n;
    let std = (errors
        .iter()
        .map(|e| (e - signed_mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let magnitude = actual.iter().map(|a| a.abs()).sum::<f64>() / n;
    let percentage = (magnitude >= PERCENTAGE_FLOOR).then(|| mean / magnitude * 100.0);
    Ok(TrackingMetrics {
        mean,
        std,
        percentage,
    })
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// Report channels in table order. Positions are in metres, angles in degrees.
pub const CHANNELS: [&str; 6] = ["x", "y", "z", "pitch", "roll", "yaw"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: String,
    pub kind: PhaseKind,
    pub start_time: f64,
    pub end_time: f64,
    pub samples: usize,
    pub channels: BTreeMap<String, TrackingMetrics>,
}

impl PhaseReport {
    pub fn channel(&self, name: &str) -> Option<&TrackingMetrics> {
        self.channels.get(name)
    }
}

/// One report per phase span found in the log.
pub fn phase_reports(log: &ScenarioLog) -> Result<Vec<PhaseReport>, MetricsError> {
    phase_reports_for(log, &log.phase_spans())
}

/// Reports over explicit row spans.
pub fn phase_reports_for(
    log: &ScenarioLog,
    spans: &[PhaseSpan],
) -> Result<Vec<PhaseReport>, MetricsError> {
    spans.iter().map(|span| span_report(log, span)).collect()
}

fn span_report(log: &ScenarioLog, span: &PhaseSpan) -> Result<PhaseReport, MetricsError> {
    let rows = log
        .rows
        .get(span.start..span.end)
        .ok_or(MetricsError::EmptySeries)?;
    if rows.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let series = |f: &dyn Fn(&crate::sim::LogRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let mut channels = BTreeMap::new();
    for (i, name) in ["x", "y", "z"].into_iter().enumerate() {
        let m = tracking_metrics(
            &series(&|r| r.desired_position[i]),
            &series(&|r| r.position[i]),
        )?;
        channels.insert(name.to_string(), m);
    }
    for (i, name) in ["roll", "pitch"].into_iter().enumerate() {
        let m = tracking_metrics(
            &series(&|r| r.desired_attitude[i].to_degrees()),
            &series(&|r| r.attitude[i].to_degrees()),
        )?;
        channels.insert(name.to_string(), m);
    }
    let yaw = angular_tracking_metrics(
        &series(&|r| r.desired_attitude[2]),
        &series(&|r| r.attitude[2]),
    )?;
    channels.insert(
        "yaw".to_string(),
        TrackingMetrics {
            mean: yaw.mean.to_degrees(),
            std: yaw.std.to_degrees(),
            percentage: yaw.percentage,
        },
    );
    Ok(PhaseReport {
        phase: span.name.clone(),
        kind: span.kind,
        start_time: rows[0].time,
        end_time: rows[rows.len() - 1].time,
        samples: rows.len(),
        channels,
    })
}

/// Fixed-width table, one row per phase and channel.
pub fn format_table(reports: &[PhaseReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<10} {:<8} {:>14} {:>14} {:>12}",
        "phase", "channel", "mean error", "std error", "error %"
    )
    .unwrap();
    for report in reports {
        for name in CHANNELS {
            let Some(m) = report.channels.get(name) else {
                continue;
            };
            let percentage = match m.percentage {
                Some(p) => format!("{p:.2}%"),
                None => "n/a".to_string(),
            };
            writeln!(
                out,
                "{:<10} {:<8} {:>14.6e} {:>14.6e} {:>12}",
                report.phase, name, m.mean, m.std, percentage
            )
            .unwrap();
        }
    }
    out
}

/// One CSV line per phase and channel. A missing percentage is an empty field.
pub fn to_csv(reports: &[PhaseReport]) -> String {
    let mut out = String::from("phase,kind,channel,mean,std,percentage\n");
    for report in reports {
        for name in CHANNELS {
            let Some(m) = report.channels.get(name) else {
                continue;
            };
            let percentage = m
                .percentage
                .map(|p| format!("{p:.17e}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{name},{:.17e},{:.17e},{percentage}",
                report.phase, report.kind, m.mean, m.std
            )
            .unwrap();
        }
    }
    out
}

/// Pretty JSON: one object per phase, metrics keyed by channel.
pub fn to_json(reports: &[PhaseReport]) -> String {
    let mut text = serde_json::to_string_pretty(reports).expect("reports serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_tracking() {
        let s = [1.0, 2.0, 3.0];
        let m = tracking_metrics(&s, &s).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.std, 0.0);
        assert_eq!(m.percentage, Some(0.0));
    }

    #[test]
    fn hand_computed_example() {
        let m = tracking_metrics(&[1.0; 4], &[0.9, 1.1, 0.9, 1.1]).unwrap();
        assert_abs_diff_eq!(m.mean, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.std, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.percentage.unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_actual_is_not_applicable() {
        let m = tracking_metrics(&[1.0, -2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(m.percentage, None);
        assert_eq!(m.mean, 1.5);
    }

    #[test]
    fn input_errors() {
        assert_eq!(tracking_metrics(&[], &[]), Err(MetricsError::EmptySeries));
        assert_eq!(
            tracking_metrics(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch {
                desired: 1,
                actual: 2
            })
        );
    }

    #[test]
    fn wrapping() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(0.25), 0.25);
        let m = angular_tracking_metrics(&[PI - 0.01], &[-PI + 0.01]).unwrap();
        assert_abs_diff_eq!(m.mean, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn json_null_for_missing_percentage() {
        let m = TrackingMetrics {
            mean: 1.0,
            std: 0.0,
            percentage: None,
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"mean":1.0,"std":0.0,"percentage":null}"#);
    }

    #[test]
    fn csv_rows_follow_channel_order() {
        let m = |mean: f64, percentage| TrackingMetrics {
            mean,
            std: 0.0,
            percentage,
        };
        let report = PhaseReport {
            phase: "up".into(),
            kind: PhaseKind::Takeoff,
            start_time: 0.0,
            end_time: 1.0,
            samples: 2,
            channels: [
                ("z".to_string(), m(0.5, Some(10.0))),
                ("x".to_string(), m(0.25, None)),
            ]
            .into_iter()
            .collect(),
        };
        let text = to_csv(&[report]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[1],
            "up,takeoff,x,2.50000000000000000e-1,0.00000000000000000e0,"
        );
        assert!(lines[2].starts_with("up,takeoff,z,5.0"));
        assert!(lines[2].ends_with(",1.00000000000000000e1"));
    }
}
