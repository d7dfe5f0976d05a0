//! Inner control layer: series-wound DC motor model, the torque→current
//! inverse, the time-delay voltage law, and the actuator delay line.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Torque floor used inside the voltage law to keep it total at zero torque.
pub const TORQUE_EPSILON: f64 = 1e-9;

/// Electrical and mechanical constants of one wheel motor.
///
/// The composite constant couples torque to the squared current; its default
/// keeps the back-EMF coefficient `R + K·θ̇` positive across the wheel-speed
/// range seen in the scenario suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// Composite motor constant (N·m/A²).
    pub k: f64,
    /// Winding resistance (Ω).
    pub r: f64,
    /// Winding inductance (H).
    pub l: f64,
    /// Shaft viscous friction (N·m·s/rad).
    pub b_m: f64,
    /// Rotor plus wheel inertia (kg·m²).
    pub i_w: f64,
    /// Actuator lag in whole samples.
    pub delay_samples: usize,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            k: 0.002,
            r: 1.0,
            l: 0.5,
            b_m: 0.01,
            i_w: 0.07,
            delay_samples: 2,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 5] = [
            ("motor_K", self.k, self.k > 0.0),
            ("motor_R", self.r, self.r >= 0.0),
            ("motor_L", self.l, self.l > 0.0),
            ("motor_b_m", self.b_m, self.b_m >= 0.0),
            ("motor_I_w", self.i_w, self.i_w > 0.0),
        ];
        for (name, v, ok) in checks {
            if !ok || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("out of range: {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Motor state evolved by [`motor_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    /// Winding current (A).
    pub current: f64,
    /// Shaft rate (rad/s).
    pub theta_dot: f64,
    /// Shaft angle (rad).
    pub theta: f64,
    /// Previous commanded torque, kept for rate estimation (N·m).
    pub tau_prev: f64,
}

/// First-in-first-out command buffer modelling whole-sample actuator lag.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buffer: VecDeque<f64>,
}

impl DelayLine {
    /// Zero-initialized line of the given depth.
    pub fn new(depth: usize) -> Self {
        Self {
            buffer: std::iter::repeat(0.0).take(depth).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.buffer.len()
    }

    /// Pushes a command and returns the one issued `depth` samples earlier
    /// (zero during warm-up). Depth zero passes the command through.
    pub fn push(&mut self, cmd: f64) -> f64 {
        if self.buffer.is_empty() {
            return cmd;
        }
        self.buffer.push_back(cmd);
        self.buffer.pop_front().expect("non-empty delay line")
    }

    /// The entry that the next push will return.
    pub fn peek(&self) -> Option<f64> {
        self.buffer.front().copied()
    }

    /// Entry `i` positions from the oldest.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.buffer.get(i).copied()
    }
}

/// Induced voltage of the series-wound machine: `K·i·θ̇`.
pub fn back_emf(motor: &MotorParams, current: f64, theta_dot: f64) -> f64 {
    motor.k * current * theta_dot
}

/// Current magnitude required for a torque, signed by the pendulum angle.
pub fn required_current(motor: &MotorParams, tau: f64, phi_sign: f64) -> f64 {
    if tau.abs() < 1e-12 {
        return 0.0;
    }
    sign_of(phi_sign) * (tau.abs() / motor.k).sqrt()
}

/// Torque produced by a current, signed so it inverts [`required_current`].
pub fn motor_torque(motor: &MotorParams, current: f64) -> f64 {
    motor.k * current * current.abs()
}

/// Voltage that drives the winding current along the commanded torque
/// trajectory: rate feedforward plus the resistive and back-EMF terms,
/// signed by the caller-supplied sign.
pub fn tdc_voltage(
    motor: &MotorParams,
    tau: f64,
    tau_prev: f64,
    ts: f64,
    theta_dot: f64,
    phi_sign: f64,
) -> f64 {
    let tau_dot = (tau - tau_prev) / ts;
    let tau_plus = tau.abs().max(TORQUE_EPSILON);
    let v = motor.l * tau_dot / (2.0 * (motor.k * tau_plus).sqrt())
        + (motor.r + motor.k * theta_dot) * (tau_plus / motor.k).sqrt();
    sign_of(phi_sign) * v
}

/// One RK4 step of the coupled electrical/mechanical motor equations.
pub fn motor_step(motor: &MotorParams, state: &MotorState, v: f64, h: f64) -> Result<MotorState> {
    let y0 = [state.current, state.theta_dot, state.theta];
    let y = rk4_step(
        |_, y: &[f64; 3]| {
            let (i, theta_dot) = (y[0], y[1]);
            let di = (v - motor.r * i - motor.k * i * theta_dot) / motor.l;
            let dtheta_dot = (motor.k * i * i.abs() - motor.b_m * theta_dot) / motor.i_w;
            Ok([di, dtheta_dot, theta_dot])
        },
        0.0,
        &y0,
        h,
    )?;
    Ok(MotorState {
        current: y[0],
        theta_dot: y[1],
        theta: y[2],
        tau_prev: state.tau_prev,
    })
}

/// First-order extrapolation weight of the winding when reconstructing the
/// delivered torque from a delayed command stream: `(L/2Ts)/(L/2Ts + R + Kθ̇)`
/// clamped to [0, 1].
pub fn command_lead_weight(motor: &MotorParams, ts: f64, theta_dot: f64) -> f64 {
    let a = motor.l / (2.0 * ts);
    let den = a + motor.r + motor.k * theta_dot;
    if den <= 0.0 {
        return 1.0;
    }
    (a / den).clamp(0.0, 1.0)
}

/// Discrete pole of the winding over one sample: `exp(−R·Ts/L)`. Governs how
/// fast torque-tracking deviations transmit to the drive train.
pub fn winding_pole(motor: &MotorParams, ts: f64) -> f64 {
    (-motor.r * ts / motor.l).exp()
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_motor() -> MotorParams {
        MotorParams {
            k: 1.0,
            r: 1.0,
            l: 0.5,
            b_m: 0.01,
            i_w: 0.07,
            delay_samples: 2,
        }
    }

    #[test]
    fn back_emf_is_a_product() {
        let m = unit_motor();
        assert_eq!(back_emf(&m, 0.0, 5.0), 0.0);
        assert_eq!(back_emf(&m, 2.0, 3.0), 6.0);
        let half = MotorParams { k: 0.5, ..m };
        assert_eq!(back_emf(&half, -2.0, 3.0), -3.0);
    }

    #[test]
    fn required_current_reference_values() {
        let m = unit_motor();
        assert_eq!(required_current(&m, 4.0, 1.0), 2.0);
        assert_eq!(required_current(&m, 0.0, -1.0), 0.0);
        let quarter = MotorParams { k: 0.25, ..m };
        assert_eq!(required_current(&quarter, 1.0, -1.0), -2.0);
    }

    #[test]
    fn motor_torque_inverts_required_current() {
        let m = unit_motor();
        assert_eq!(motor_torque(&m, 2.0), 4.0);
        assert_eq!(motor_torque(&m, 0.0), 0.0);
        let quarter = MotorParams { k: 0.25, ..m };
        let i = required_current(&quarter, 1.0, -1.0);
        assert!((motor_torque(&quarter, i) - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn voltage_law_reference_values() {
        let m = unit_motor();
        // Steady state: V = R sqrt(tau/K).
        let v = tdc_voltage(&m, 4.0, 4.0, 0.01, 0.0, 1.0);
        assert!((v - 2.0).abs() < 1e-12);
        // Back-EMF term: (R + K*theta_dot) sqrt(tau/K).
        let v = tdc_voltage(&m, 1.0, 1.0, 0.01, 3.0, 1.0);
        assert!((v - 4.0).abs() < 1e-12);
        // Rate feedforward alone.
        let m0 = MotorParams { r: 0.0, ..m };
        let v = tdc_voltage(&m0, 1.0, 0.98, 0.01, 0.0, 1.0);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn voltage_law_is_total_at_zero_torque() {
        let m = unit_motor();
        let v = tdc_voltage(&m, 0.0, 0.0, 0.01, 2.0, 1.0);
        assert!(v.is_finite());
    }

    #[test]
    fn motor_step_equilibrium() {
        let m = unit_motor();
        let s = motor_step(&m, &MotorState::default(), 0.0, 0.01).unwrap();
        assert_eq!(s, MotorState::default());
    }

    #[test]
    fn motor_step_matches_fine_reference() {
        // Independent oracle: the same equations at h = 1e-6.
        let m = unit_motor();
        let coarse = motor_step(&m, &MotorState::default(), 1.0, 0.01).unwrap();
        let mut fine = MotorState::default();
        for _ in 0..10_000 {
            fine = motor_step(&m, &fine, 1.0, 1e-6).unwrap();
        }
        assert!((coarse.current - fine.current).abs() < 1e-8);
        assert!((coarse.theta_dot - fine.theta_dot).abs() < 1e-8);
        assert!((coarse.theta - fine.theta).abs() < 1e-8);
    }

    #[test]
    fn locked_rotor_settles_at_ohmic_current() {
        // Pin the shaft by zeroing its acceleration path: huge inertia.
        let m = MotorParams {
            i_w: 1e12,
            ..unit_motor()
        };
        let mut s = MotorState::default();
        for _ in 0..4_000 {
            s = motor_step(&m, &s, 1.0, 0.01).unwrap();
        }
        assert!((s.current - 1.0).abs() < 1e-9, "i = {}", s.current);
    }

    #[test]
    fn delay_line_reference_behaviour() {
        let mut line = DelayLine::new(0);
        assert_eq!(line.push(5.0), 5.0);

        let mut line = DelayLine::new(2);
        assert_eq!(line.push(1.0), 0.0);
        assert_eq!(line.push(2.0), 0.0);
        assert_eq!(line.push(3.0), 1.0);

        let mut line = DelayLine::new(1);
        assert_eq!(line.push(10.0), 0.0);
        assert_eq!(line.push(20.0), 10.0);
    }

    #[test]
    fn lead_weight_stays_in_unit_interval() {
        let m = MotorParams::default();
        for theta_dot in [-500.0, -1.0, 0.0, 3.0, 400.0] {
            let w = command_lead_weight(&m, 0.01, theta_dot);
            assert!((0.0..=1.0).contains(&w));
        }
    }
}
