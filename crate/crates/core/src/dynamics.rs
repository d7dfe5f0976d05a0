//! Rigid-body relations of the two-wheeled vehicle.
//!
//! Pure functions of their arguments: torque balances, center-of-gravity
//! kinematics, and the chassis-acceleration quotient that couples pendulum
//! motion to wheel translation. No time stepping or control logic lives here.

use crate::error::{Error, Result};

/// Guard below which the chassis-acceleration denominator counts as singular.
pub const DENOMINATOR_GUARD: f64 = 1e-9;

/// Physical constants of the vehicle.
///
/// Defaults are the reference parameter set used throughout the scenario
/// suite: 0.2 m wheels, 1 m COG height, 4 kg per wheel, 100 kg body,
/// wheel moment 0.07 kg·m², body moment 86.67 kg·m², g = 10 m/s²,
/// no wheel-pendulum friction, 100 Hz sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    /// Wheel radius (m).
    pub r: f64,
    /// Distance of the center of gravity along the pendulum (m).
    pub l: f64,
    /// Mass of each wheel (kg).
    pub m: f64,
    /// Mass of the body without the wheels (kg).
    pub big_m: f64,
    /// Moment of each wheel about its axle (kg·m²).
    pub i_w: f64,
    /// Moment of the pendulum body (kg·m²).
    pub i_p: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Viscous friction coefficient between wheel shaft and pendulum
    /// (N·m·s/rad).
    pub b_pw: f64,
    /// Sample period of the control loop (s).
    pub ts: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            r: 0.2,
            l: 1.0,
            m: 4.0,
            big_m: 100.0,
            i_w: 0.07,
            i_p: 86.67,
            g: 10.0,
            b_pw: 0.0,
            ts: 0.01,
        }
    }
}

impl RobotParams {
    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 8] = [
            ("r", self.r),
            ("l", self.l),
            ("m", self.m),
            ("M", self.big_m),
            ("I_w", self.i_w),
            ("I_p", self.i_p),
            ("g", self.g),
            ("Ts", self.ts),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !(self.b_pw >= 0.0) || !self.b_pw.is_finite() {
            return Err(Error::InvalidParameter {
                name: "b_pw",
                reason: format!("must be non-negative and finite, got {}", self.b_pw),
            });
        }
        Ok(())
    }

    /// `I_w/r + r·m − r·M/2`, the coefficient of the chassis acceleration in
    /// the wheel torque balance.
    pub fn wheel_accel_coeff(&self) -> f64 {
        self.i_w / self.r + self.r * self.m - self.r * self.big_m / 2.0
    }
}

/// Pitch angle of the pendulum with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumKinematics {
    /// Pitch angle (rad).
    pub phi: f64,
    /// Pitch rate (rad/s).
    pub phi_dot: f64,
    /// Pitch acceleration (rad/s²).
    pub phi_ddot: f64,
}

impl PendulumKinematics {
    pub fn new(phi: f64, phi_dot: f64, phi_ddot: f64) -> Self {
        Self { phi, phi_dot, phi_ddot }
    }
}

/// Simulated ground-truth state of the vehicle.
///
/// The wheel coordinates are derived from the chassis translation through
/// the rolling constraint `x = r·wheel_angle`, so the constraint holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Pendulum pitch angle (rad).
    pub phi: f64,
    /// Pendulum pitch rate (rad/s).
    pub phi_dot: f64,
    /// Chassis translation (m).
    pub x: f64,
    /// Chassis velocity (m/s).
    pub x_dot: f64,
    /// Wheel rotation angle (rad).
    pub wheel_angle: f64,
    /// Wheel rotation rate (rad/s).
    pub wheel_rate: f64,
    /// Simulation time (s).
    pub t: f64,
}

impl PlantState {
    /// Builds a state from the independent coordinates, deriving the wheel
    /// angle and rate from the rolling constraint.
    pub fn from_chassis(phi: f64, phi_dot: f64, x: f64, x_dot: f64, r: f64, t: f64) -> Self {
        Self {
            phi,
            phi_dot,
            x,
            x_dot,
            wheel_angle: x / r,
            wheel_rate: x_dot / r,
            t,
        }
    }

    /// Residual of the rolling constraint; zero for states built through
    /// [`PlantState::from_chassis`].
    pub fn rolling_residual(&self, r: f64) -> f64 {
        self.x - r * self.wheel_angle
    }
}

/// Which pendulum model the plant integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlantModelKind {
    /// The torque balances exactly as published, including the negative
    /// composite inertia they imply for the reference parameters. The
    /// chassis acceleration is evaluated from the held pitch acceleration.
    AsPrinted,
    /// Textbook planar wheeled-inverted-pendulum physics: positive composite
    /// inertia `I_p + M·l²`, gravity toppling term, and a simultaneous
    /// solve of the pendulum/chassis mass matrix.
    #[default]
    Corrected,
}

/// Time derivative of a [`PlantState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantDerivative {
    pub phi_dot: f64,
    pub phi_ddot: f64,
    pub x_dot: f64,
    pub x_ddot: f64,
    pub wheel_rate: f64,
    pub wheel_accel: f64,
}

/// Viscous friction torque between the wheel shaft and the pendulum.
pub fn friction_torque(params: &RobotParams, wheel_rate: f64, pendulum_rate: f64) -> f64 {
    params.b_pw * (wheel_rate - pendulum_rate)
}

/// Center-of-gravity position in the ground frame: `(l·sinφ + x, l·cosφ)`.
pub fn cog_kinematics(params: &RobotParams, phi: f64, x: f64) -> (f64, f64) {
    (params.l * phi.sin() + x, params.l * phi.cos())
}

/// Center-of-gravity acceleration in the ground frame.
pub fn cog_acceleration(
    params: &RobotParams,
    kin: &PendulumKinematics,
    x_ddot: f64,
) -> (f64, f64) {
    let (s, c) = kin.phi.sin_cos();
    let ax = kin.phi_ddot * params.l * c - kin.phi_dot * kin.phi_dot * params.l * s + x_ddot;
    let az = -kin.phi_dot * kin.phi_dot * params.l * c - kin.phi_ddot * params.l * s;
    (ax, az)
}

/// Pendulum torque balance, exactly as published:
/// `(I_p − M·l²)·φ̈ − 2·τ_f − M·l·cosφ·ẍ`.
pub fn pendulum_torque(
    params: &RobotParams,
    phi: f64,
    phi_ddot: f64,
    x_ddot: f64,
    tau_f: f64,
) -> f64 {
    (params.i_p - params.big_m * params.l * params.l) * phi_ddot
        - 2.0 * tau_f
        - params.big_m * params.l * phi.cos() * x_ddot
}

/// Wheel torque balance:
/// `(I_w/r + r·m − r·M/2)·ẍ + τ_f + (r·M/2)·(−φ̈·l·cosφ + φ̇²·l·sinφ)`.
pub fn wheel_torque(
    params: &RobotParams,
    x_ddot: f64,
    kin: &PendulumKinematics,
    tau_f: f64,
) -> f64 {
    let (s, c) = kin.phi.sin_cos();
    params.wheel_accel_coeff() * x_ddot
        + tau_f
        + (params.r * params.big_m / 2.0)
            * (-kin.phi_ddot * params.l * c + kin.phi_dot * kin.phi_dot * params.l * s)
}

/// Chassis acceleration implied by the pendulum motion (the torque-eliminated
/// quotient). Errors when the denominator degenerates.
pub fn chassis_acceleration(params: &RobotParams, kin: &PendulumKinematics) -> Result<f64> {
    let (s, c) = kin.phi.sin_cos();
    let half_ml = params.big_m * params.l / 2.0;
    let num = (-params.i_p / 2.0 + params.big_m * params.l * params.l / 2.0
        + params.r * half_ml * c)
        * kin.phi_ddot
        - params.r * half_ml * s * kin.phi_dot * kin.phi_dot;
    let den = params.wheel_accel_coeff() - half_ml * c;
    if den.abs() < DENOMINATOR_GUARD {
        return Err(Error::SingularDenominator {
            denominator: den,
            guard: DENOMINATOR_GUARD,
        });
    }
    Ok(num / den)
}

/// Sensitivity of the commanded wheel torque to the held pitch acceleration:
/// the derivative of `wheel_torque(chassis_acceleration(·))` in `φ̈` at a
/// given angle. Used by the closed loop to convert torque deviations back
/// into pitch-acceleration deviations.
pub fn torque_per_alpha(params: &RobotParams, phi: f64) -> Result<f64> {
    let c = phi.cos();
    let half_ml = params.big_m * params.l / 2.0;
    let n1 = -params.i_p / 2.0 + params.big_m * params.l * params.l / 2.0
        + params.r * half_ml * c;
    let den = params.wheel_accel_coeff() - half_ml * c;
    if den.abs() < DENOMINATOR_GUARD {
        return Err(Error::SingularDenominator {
            denominator: den,
            guard: DENOMINATOR_GUARD,
        });
    }
    Ok(params.wheel_accel_coeff() * n1 / den - (params.r * params.big_m / 2.0) * params.l * c)
}

/// Re-derives the chassis acceleration by equating the two torque balances
/// and solving for the acceleration that zeroes the residual. Kept as a
/// numeric diagnostic; it does not agree with [`chassis_acceleration`].
pub fn rederive_chassis_acceleration(
    params: &RobotParams,
    kin: &PendulumKinematics,
    tau_f: f64,
) -> Result<f64> {
    let residual = |a: f64| {
        pendulum_torque(params, kin.phi, kin.phi_ddot, a, tau_f)
            - wheel_torque(params, a, kin, tau_f)
    };
    let f0 = residual(0.0);
    let slope = residual(1.0) - f0;
    if slope.abs() < 1e-12 {
        return Err(Error::DegenerateElimination { slope });
    }
    Ok(-f0 / slope)
}

/// Right-hand side of the plant ordinary differential equation.
///
/// `phi_ddot_held` is the pitch acceleration carried over from the previous
/// step; only the as-printed model consumes it (its chassis acceleration is
/// evaluated at the held value, a depth-one fixed point).
pub fn plant_derivative(
    params: &RobotParams,
    state: &PlantState,
    applied_wheel_torque: f64,
    model: PlantModelKind,
    phi_ddot_held: f64,
) -> Result<PlantDerivative> {
    let tau_f = friction_torque(params, state.wheel_rate, state.phi_dot);
    let (s, c) = state.phi.sin_cos();
    let ml = params.big_m * params.l;
    let (phi_ddot, x_ddot) = match model {
        PlantModelKind::AsPrinted => {
            let kin = PendulumKinematics::new(state.phi, state.phi_dot, phi_ddot_held);
            let x_ddot = chassis_acceleration(params, &kin)?;
            let inertia = params.i_p - ml * params.l;
            if inertia.abs() < DENOMINATOR_GUARD {
                return Err(Error::SingularDenominator {
                    denominator: inertia,
                    guard: DENOMINATOR_GUARD,
                });
            }
            let phi_ddot = (applied_wheel_torque + 2.0 * tau_f + ml * c * x_ddot) / inertia;
            (phi_ddot, x_ddot)
        }
        PlantModelKind::Corrected => {
            // Planar wheeled-inverted-pendulum mass matrix, solved directly.
            let m11 = params.big_m + 2.0 * params.m + 2.0 * params.i_w / (params.r * params.r);
            let m12 = ml * c;
            let m22 = params.i_p + ml * params.l;
            let b1 = (applied_wheel_torque - 2.0 * tau_f) / params.r
                + ml * s * state.phi_dot * state.phi_dot;
            let b2 = -applied_wheel_torque + 2.0 * tau_f + params.big_m * params.g * params.l * s;
            let det = m11 * m22 - m12 * m12;
            if det.abs() < DENOMINATOR_GUARD {
                return Err(Error::SingularDenominator {
                    denominator: det,
                    guard: DENOMINATOR_GUARD,
                });
            }
            let x_ddot = (m22 * b1 - m12 * b2) / det;
            let phi_ddot = (m11 * b2 - m12 * b1) / det;
            (phi_ddot, x_ddot)
        }
    };
    Ok(PlantDerivative {
        phi_dot: state.phi_dot,
        phi_ddot,
        x_dot: state.x_dot,
        x_ddot,
        wheel_rate: state.wheel_rate,
        wheel_accel: x_ddot / params.r,
    })
}
