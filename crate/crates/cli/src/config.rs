//! `key = value` run configuration with full-parameter defaults.
//!
//! Lines are `key = value` pairs; `#` starts a comment; blank lines are
//! ignored. Unknown keys are rejected. Values repeated later in the file win.

use std::path::Path;
use std::time::Duration;

use thiserror::Error;
use twip_core::{
    Disturbance, DisturbanceInjection, MotorParams, PlantModelKind, RobotParams, ScenarioConfig,
    ScenarioKind, SessionConfig,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{text}`")]
    Parse { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

/// Fully-resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub robot: RobotParams,
    pub motor: MotorParams,
    pub plant_model: PlantModelKind,
    pub injection: DisturbanceInjection,
    pub disturbance: Disturbance,
    pub duration: f64,
    pub substeps: u32,
    pub realtime: bool,
    pub timeout_ms: u64,
    pub speed_threshold: f64,
    pub phase_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let session = SessionConfig::default();
        Self {
            robot: RobotParams::default(),
            motor: MotorParams::default(),
            plant_model: PlantModelKind::default(),
            injection: DisturbanceInjection::default(),
            disturbance: Disturbance::default(),
            duration: 10.0,
            substeps: 1,
            realtime: false,
            timeout_ms: session.timeout.as_millis() as u64,
            speed_threshold: session.speed_threshold,
            phase_threshold: session.phase_threshold,
        }
    }
}

impl RunConfig {
    /// Scenario configuration for a given ladder rung.
    pub fn scenario(&self, kind: ScenarioKind) -> ScenarioConfig {
        ScenarioConfig {
            kind,
            duration: self.duration,
            robot: self.robot,
            motor: self.motor,
            plant_model: self.plant_model,
            injection: self.injection,
            disturbance: self.disturbance,
            substeps: self.substeps,
        }
    }

    /// Session settings for the lockstep processes.
    pub fn session(&self, endpoint: String) -> SessionConfig {
        SessionConfig {
            endpoint,
            realtime: self.realtime,
            timeout: Duration::from_millis(self.timeout_ms),
            speed_threshold: self.speed_threshold,
            phase_threshold: self.phase_threshold,
        }
    }

    fn validate(self) -> Result<Self, ConfigError> {
        self.scenario(ScenarioKind::Uncontrolled)
            .validate()
            .map_err(|e| match e {
                twip_core::Error::InvalidParameter { name, reason } => ConfigError::Validation {
                    key: name.to_owned(),
                    reason,
                },
                other => ConfigError::Validation {
                    key: "config".into(),
                    reason: other.to_string(),
                },
            })?;
        for (key, v) in [
            ("speed_threshold", self.speed_threshold),
            ("phase_threshold", self.phase_threshold),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Validation {
                    key: key.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(self)
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Parses configuration text (exposed for tests).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                text: raw.to_owned(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        apply(&mut cfg, key, value, line_no, raw)?;
    }
    cfg.validate()
}

fn apply(
    cfg: &mut RunConfig,
    key: &str,
    value: &str,
    line: usize,
    raw: &str,
) -> Result<(), ConfigError> {
    let parse_err = || ConfigError::Parse {
        line,
        text: raw.to_owned(),
    };
    let float = |v: &str| -> Result<f64, ConfigError> {
        v.parse::<f64>().map_err(|_| parse_err())
    };
    match key {
        "r" => cfg.robot.r = float(value)?,
        "l" => cfg.robot.l = float(value)?,
        "m" => cfg.robot.m = float(value)?,
        "M" => cfg.robot.big_m = float(value)?,
        "I_w" => cfg.robot.i_w = float(value)?,
        "I_p" => cfg.robot.i_p = float(value)?,
        "g" => cfg.robot.g = float(value)?,
        "b_pw" => cfg.robot.b_pw = float(value)?,
        "Ts" => cfg.robot.ts = float(value)?,
        "motor_K" => cfg.motor.k = float(value)?,
        "motor_R" => cfg.motor.r = float(value)?,
        "motor_L" => cfg.motor.l = float(value)?,
        "motor_b_m" => cfg.motor.b_m = float(value)?,
        "motor_I_w" => cfg.motor.i_w = float(value)?,
        "delay_samples" => {
            cfg.motor.delay_samples = value.parse::<usize>().map_err(|_| parse_err())?
        }
        "duration" => cfg.duration = float(value)?,
        "substeps" => cfg.substeps = value.parse::<u32>().map_err(|_| parse_err())?,
        "plant_model" => {
            cfg.plant_model = match value {
                "corrected" => PlantModelKind::Corrected,
                "as-printed" => PlantModelKind::AsPrinted,
                _ => {
                    return Err(ConfigError::Validation {
                        key: key.into(),
                        reason: format!("expected `corrected` or `as-printed`, got `{value}`"),
                    })
                }
            }
        }
        "injection" => {
            cfg.injection = match value {
                "measurement" => DisturbanceInjection::Measurement,
                "state" => DisturbanceInjection::State,
                _ => {
                    return Err(ConfigError::Validation {
                        key: key.into(),
                        reason: format!("expected `measurement` or `state`, got `{value}`"),
                    })
                }
            }
        }
        "dist_a1" => cfg.disturbance.a1 = float(value)?,
        "dist_w1" => cfg.disturbance.w1 = float(value)?,
        "dist_a2" => cfg.disturbance.a2 = float(value)?,
        "dist_w2" => cfg.disturbance.w2 = float(value)?,
        "realtime" => {
            cfg.realtime = match value {
                "true" => true,
                "false" => false,
                _ => return Err(parse_err()),
            }
        }
        "timeout_ms" => cfg.timeout_ms = value.parse::<u64>().map_err(|_| parse_err())?,
        "speed_threshold" => cfg.speed_threshold = float(value)?,
        "phase_threshold" => cfg.phase_threshold = float(value)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_owned(),
            })
        }
    }
    Ok(())
}
