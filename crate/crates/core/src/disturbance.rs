//! Confined-space disturbance generators.
//!
//! Attitude torques come from one bounded model per axis (constant, sinusoid
//! or band-limited noise), each hard-clipped to its configured bound. The
//! ambient air velocity is a constant wind plus a chimney updraft flowing along
//! the pipe axis with a piecewise-linear speed profile.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Torque model for a single attitude axis. `std` of the noise model defaults
/// to a third of the axis bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TorqueModel {
    Constant {
        value: f64,
    },
    Sinusoid {
        amplitude: f64,
        /// Hz.
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    BandLimitedNoise {
        #[serde(default)]
        std: Option<f64>,
        /// First-order filter corner (Hz).
        cutoff: f64,
    },
}

impl Default for TorqueModel {
    fn default() -> Self {
        TorqueModel::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceConfig {
    /// Per-axis torque bounds `(roll, pitch, yaw)` (N m).
    pub bounds: [f64; 3],
    pub roll: TorqueModel,
    pub pitch: TorqueModel,
    pub yaw: TorqueModel,
    /// Ambient wind in the geographic frame (m/s).
    pub wind: [f64; 3],
    /// Direction of the pipe centreline; normalised on use.
    pub chimney_axis: [f64; 3],
    /// `(distance along axis (m), axial speed (m/s))`, sorted by distance.
    pub chimney_profile: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            bounds: [0.1, 0.1, 0.05],
            roll: TorqueModel::default(),
            pitch: TorqueModel::default(),
            yaw: TorqueModel::default(),
            wind: [0.0; 3],
            chimney_axis: [0.0, 0.0, 1.0],
            chimney_profile: Vec::new(),
            seed: 0,
        }
    }
}

impl DisturbanceConfig {
    /// No torques and still air.
    pub fn calm() -> Self {
        Self::default()
    }

    /// The same constant torque on every axis is clipped per axis.
    pub fn constant(torque: [f64; 3], bounds: [f64; 3]) -> Self {
        Self {
            bounds,
            roll: TorqueModel::Constant { value: torque[0] },
            pitch: TorqueModel::Constant { value: torque[1] },
            yaw: TorqueModel::Constant { value: torque[2] },
            ..Self::default()
        }
    }

    pub fn models(&self) -> [&TorqueModel; 3] {
        [&self.roll, &self.pitch, &self.yaw]
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(i) = self
            .bounds
            .iter()
            .position(|b| !(b.is_finite() && *b > 0.0))
        {
            return Err(format!("disturbance bound {i} must be finite and > 0"));
        }
        for (axis, model) in ["roll", "pitch", "yaw"].iter().zip(self.models()) {
            match *model {
                TorqueModel::Constant { value } if !value.is_finite() => {
                    return Err(format!("{axis}: constant torque must be finite"));
                }
                TorqueModel::Sinusoid {
                    amplitude,
                    frequency,
                    phase,
                } if !(amplitude.is_finite() && frequency.is_finite() && phase.is_finite()) => {
                    return Err(format!("{axis}: sinusoid parameters must be finite"));
                }
                TorqueModel::BandLimitedNoise { std, cutoff } => {
                    if !(cutoff.is_finite() && cutoff > 0.0) {
                        return Err(format!("{axis}: noise cutoff must be > 0"));
                    }
                    if std.is_some_and(|s| !(s.is_finite() && s >= 0.0)) {
                        return Err(format!("{axis}: noise std must be >= 0"));
                    }
                }
                _ => {}
            }
        }
        if self.chimney_axis.iter().all(|c| *c == 0.0) && !self.chimney_profile.is_empty() {
            return Err("chimney_axis must be non-zero".into());
        }
        if self
            .chimney_profile
            .windows(2)
            .any(|w| w[1][0].is_nan() || w[1][0] <= w[0][0])
        {
            return Err("chimney_profile distances must be strictly increasing".into());
        }
        Ok(())
    }

    /// Axial updraft speed at `distance` along the pipe axis. Constant
    /// extrapolation beyond the table ends.
    pub fn chimney_speed(&self, distance: f64) -> f64 {
        let table = &self.chimney_profile;
        let (Some(first), Some(last)) = (table.first(), table.last()) else {
            return 0.0;
        };
        if distance <= first[0] {
            return first[1];
        }
        if distance >= last[0] {
            return last[1];
        }
        let i = table.partition_point(|p| p[0] <= distance);
        let (lo, hi) = (table[i - 1], table[i]);
        let s = (distance - lo[0]) / (hi[0] - lo[0]);
        lo[1] + s * (hi[1] - lo[1])
    }

    pub fn air_velocity(&self, position: &Vector3<f64>) -> Vector3<f64> {
        let wind = Vector3::from(self.wind);
        let axis = Vector3::from(self.chimney_axis);
        if self.chimney_profile.is_empty() || axis.norm() == 0.0 {
            return wind;
        }
        let axis = axis.normalize();
        wind + axis * self.chimney_speed(position.dot(&axis))
    }
}

/// One disturbance draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSample {
    /// `(d_roll, d_pitch, d_yaw)` (N m).
    pub torque: Vector3<f64>,
    /// Ambient air velocity at the vehicle (m/s).
    pub air_velocity: Vector3<f64>,
}

#[derive(Debug, Clone)]
struct NoiseChannel {
    rng: ChaCha8Rng,
    value: f64,
    last_t: Option<f64>,
}

/// Random state of the three noise channels. Each axis draws from its own
/// ChaCha stream of the configured seed.
#[derive(Debug, Clone)]
pub struct DisturbanceState {
    channels: [NoiseChannel; 3],
}

impl DisturbanceState {
    pub fn new(seed: u64) -> Self {
        let channel = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            NoiseChannel {
                rng,
                value: 0.0,
                last_t: None,
            }
        };
        Self {
            channels: [channel(0), channel(1), channel(2)],
        }
    }
}

impl NoiseChannel {
    /// Ornstein-Uhlenbeck step: exact discretisation of first-order filtered
    /// white noise, stationary standard deviation `std` for any sample spacing.
    fn advance(&mut self, t: f64, std: f64, cutoff: f64) -> f64 {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        self.value = match self.last_t {
            None => std * n,
            Some(prev) => {
                let a = (-TAU * cutoff * (t - prev).max(0.0)).exp();
                a * self.value + std * (1.0 - a * a).sqrt() * n
            }
        };
        self.last_t = Some(t);
        self.value
    }
}

/// Draws the disturbance at time `t` and `position`. Torques are clipped to
/// the configured bounds.
pub fn sample(
    config: &DisturbanceConfig,
    t: f64,
    position: &Vector3<f64>,
    state: &mut DisturbanceState,
) -> WindSample {
    let mut torque = Vector3::zeros();
    for (axis, model) in config.models().into_iter().enumerate() {
        let bound = config.bounds[axis];
        let raw = match *model {
            TorqueModel::Constant { value } => value,
            TorqueModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (TAU * frequency * t + phase).sin(),
            TorqueModel::BandLimitedNoise { std, cutoff } => {
                state.channels[axis].advance(t, std.unwrap_or(bound / 3.0), cutoff)
            }
        };
        torque[axis] = raw.clamp(-bound, bound);
    }
    WindSample {
        torque,
        air_velocity: config.air_velocity(position),
    }
}

/// Convenience wrapper owning its config and random state.
#[derive(Debug, Clone)]
pub struct DisturbanceGenerator {
    config: DisturbanceConfig,
    state: DisturbanceState,
}

impl DisturbanceGenerator {
    pub fn new(config: DisturbanceConfig) -> Self {
        let state = DisturbanceState::new(config.seed);
        Self { config, state }
    }

    pub fn config(&self) -> &DisturbanceConfig {
        &self.config
    }

    pub fn sample(&mut self, t: f64, position: &Vector3<f64>) -> WindSample {
        sample(&self.config, t, position, &mut self.state)
    }
}

/// Linear drag on the air-relative velocity `v_vehicle - v_air`.
pub fn drag_force(relative_velocity: &Vector3<f64>, drag_coefficient: f64) -> Vector3<f64> {
    -relative_velocity * drag_coefficient
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noise_config(seed: u64) -> DisturbanceConfig {
        DisturbanceConfig {
            roll: TorqueModel::BandLimitedNoise {
                std: None,
                cutoff: 5.0,
            },
            pitch: TorqueModel::BandLimitedNoise {
                std: Some(0.2),
                cutoff: 1.0,
            },
            seed,
            ..DisturbanceConfig::default()
        }
    }

    #[test]
    fn calm_config_is_zero() {
        let cfg = DisturbanceConfig::calm();
        let mut state = DisturbanceState::new(0);
        let s = sample(&cfg, 1.0, &Vector3::new(1.0, 2.0, 3.0), &mut state);
        assert_eq!(s.torque, Vector3::zeros());
        assert_eq!(s.air_velocity, Vector3::zeros());
    }

    #[test]
    fn sinusoid_is_clipped_to_bound() {
        let cfg = DisturbanceConfig {
            bounds: [0.1, 0.1, 0.1],
            pitch: TorqueModel::Sinusoid {
                amplitude: 0.2,
                frequency: 0.7,
                phase: 0.3,
            },
            ..DisturbanceConfig::default()
        };
        let mut state = DisturbanceState::new(1);
        let mut peak: f64 = 0.0;
        for k in 0..10_000 {
            let t = k as f64 * 1e-3;
            let d = sample(&cfg, t, &Vector3::zeros(), &mut state).torque[1];
            assert!(d.abs() <= 0.1);
            peak = peak.max(d.abs());
        }
        assert_eq!(peak, 0.1, "clipping should be active");
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let draw = |seed| {
            let cfg = noise_config(seed);
            let mut state = DisturbanceState::new(seed);
            (0..1000)
                .map(|k| sample(&cfg, k as f64 * 0.002, &Vector3::zeros(), &mut state).torque)
                .collect::<Vec<_>>()
        };
        let a = draw(11);
        let b = draw(11);
        let c = draw(12);
        assert_eq!(a, b);
        assert!(a.iter().zip(&c).any(|(x, y)| x != y));
    }

    #[test]
    fn noise_channels_are_independent_streams() {
        let cfg = DisturbanceConfig {
            roll: TorqueModel::BandLimitedNoise {
                std: Some(0.01),
                cutoff: 2.0,
            },
            pitch: TorqueModel::BandLimitedNoise {
                std: Some(0.01),
                cutoff: 2.0,
            },
            ..DisturbanceConfig::default()
        };
        let mut state = DisturbanceState::new(3);
        let s = sample(&cfg, 0.0, &Vector3::zeros(), &mut state);
        assert_ne!(s.torque[0], s.torque[1]);
    }

    #[test]
    fn noise_std_defaults_to_third_of_bound() {
        let cfg = DisturbanceConfig {
            bounds: [0.3, 0.1, 0.1],
            roll: TorqueModel::BandLimitedNoise {
                std: None,
                cutoff: 50.0,
            },
            ..DisturbanceConfig::default()
        };
        let mut state = DisturbanceState::new(5);
        let n = 40_000;
        let xs: Vec<f64> = (0..n)
            .map(|k| sample(&cfg, k as f64 * 0.05, &Vector3::zeros(), &mut state).torque[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // clipping at 3 sigma trims about 1% of the variance
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn chimney_profile_interpolates() {
        let cfg = DisturbanceConfig {
            chimney_axis: [0.0, 0.0, 2.0],
            chimney_profile: vec![[0.0, 1.0], [10.0, 3.0]],
            wind: [8.0, 0.0, 0.0],
            ..DisturbanceConfig::default()
        };
        assert_eq!(cfg.chimney_speed(-1.0), 1.0);
        assert_eq!(cfg.chimney_speed(5.0), 2.0);
        assert_eq!(cfg.chimney_speed(20.0), 3.0);
        let v = cfg.air_velocity(&Vector3::new(0.0, 0.0, 2.5));
        assert_abs_diff_eq!(v, Vector3::new(8.0, 0.0, 1.5), epsilon = 1e-12);
    }

    #[test]
    fn drag_sign_and_symmetry() {
        assert_eq!(drag_force(&Vector3::zeros(), 0.1), Vector3::zeros());
        let rest_in_wind = Vector3::zeros() - Vector3::new(8.0, 0.0, 0.0);
        assert_abs_diff_eq!(drag_force(&rest_in_wind, 0.1).x, 0.8, epsilon = 1e-12);
        let v = Vector3::new(1.0, -2.0, 0.5);
        assert_eq!(drag_force(&v, 0.3), -drag_force(&-v, 0.3));
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let mut cfg = DisturbanceConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.bounds[1] = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = DisturbanceConfig {
            chimney_profile: vec![[1.0, 0.0], [1.0, 2.0]],
            ..DisturbanceConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_from_toml_section() {
        let text = r#"
            bounds = [0.05, 0.05, 0.02]
            wind = [8.0, 0.0, 0.0]
            chimney_profile = [[0.0, 0.5], [12.0, 2.5]]
            seed = 9
            [roll]
            kind = "band-limited-noise"
            cutoff = 2.0
            [pitch]
            kind = "sinusoid"
            amplitude = 0.03
            frequency = 0.5
        "#;
        let cfg: DisturbanceConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(matches!(
            cfg.roll,
            TorqueModel::BandLimitedNoise { std: None, .. }
        ));
        assert!(matches!(cfg.pitch, TorqueModel::Sinusoid { phase, .. } if phase == 0.0));
        assert_eq!(cfg.yaw, TorqueModel::Constant { value: 0.0 });
        cfg.validate().unwrap();
    }
}
