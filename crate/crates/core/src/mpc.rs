//! Outer control layer: one-step prediction of the pendulum state from gyro
//! rate samples and the wheel torque required to hold balance.
//!
//! The angle is estimated by trapezoidal integration of the measured rate,
//! the pitch acceleration by a backward difference, and the acceleration used
//! at step `k` is the one estimated at step `k−1`.

use crate::dynamics::{
    chassis_acceleration, friction_torque, wheel_torque, PendulumKinematics, RobotParams,
};
use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// A single gyro rate measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroSample {
    /// Sample index, consecutive from zero within a session.
    pub seq: u64,
    /// Sample time (s).
    pub t: f64,
    /// Measured pendulum pitch rate (rad/s).
    pub omega: f64,
}

/// Controller memory between samples. All fields are zero at session start.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Integrated pitch-angle estimate (rad).
    pub phi_est: f64,
    /// Previous measured rate (rad/s).
    pub omega_prev: f64,
    /// Pitch-acceleration estimate from the previous step (rad/s²).
    pub alpha_prev: f64,
    /// Previous torque command (N·m).
    pub tau_prev: f64,
    /// Next expected sample index (session bookkeeping).
    pub next_seq: u64,
}

/// Output of one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Predicted pitch angle at the next sample (rad).
    pub phi_next: f64,
    /// Predicted pitch rate at the next sample (rad/s). Logged only; it does
    /// not feed the command path.
    pub phi_dot_next: f64,
    /// Predicted chassis acceleration at the next sample (m/s²).
    pub x_ddot_next: f64,
    /// Wheel torque command (N·m).
    pub tau_cmd: f64,
}

/// Trapezoidal angle update from the previous and current rate samples.
pub fn estimate_angle(state: &ControllerState, sample: &GyroSample, ts: f64) -> Result<f64> {
    if sample.seq != state.next_seq {
        return Err(Error::SequenceGap {
            expected: state.next_seq,
            got: sample.seq,
        });
    }
    Ok(state.phi_est + ts * (state.omega_prev + sample.omega) / 2.0)
}

/// Backward-difference pitch acceleration.
pub fn estimate_angular_accel(omega_now: f64, omega_prev: f64, ts: f64) -> f64 {
    (omega_now - omega_prev) / ts
}

/// One full controller step: angle update, one-step prediction, torque
/// command, and state advance.
pub fn mpc_step(
    params: &RobotParams,
    state: &ControllerState,
    sample: &GyroSample,
) -> Result<(Prediction, ControllerState)> {
    let ts = params.ts;
    let alpha_k = state.alpha_prev;
    let phi_now = estimate_angle(state, sample, ts)?;

    // Predict the kinematic pair one sample ahead with the acceleration held.
    let predicted = rk4_step(
        |_, y: &[f64; 2]| Ok([y[1], alpha_k]),
        sample.t,
        &[phi_now, sample.omega],
        ts,
    )?;
    let (phi_next, phi_dot_next) = (predicted[0], predicted[1]);

    let kin = PendulumKinematics::new(phi_next, sample.omega, alpha_k);
    let x_ddot_next = chassis_acceleration(params, &kin)?;
    // The command path has no wheel-rate measurement; the friction estimate
    // uses a zero wheel rate (exact for the default zero coefficient).
    let tau_f = friction_torque(params, 0.0, sample.omega);
    let tau_cmd = wheel_torque(params, x_ddot_next, &kin, tau_f);

    let next = ControllerState {
        phi_est: phi_now,
        omega_prev: sample.omega,
        alpha_prev: estimate_angular_accel(sample.omega, state.omega_prev, ts),
        tau_prev: tau_cmd,
        next_seq: state.next_seq + 1,
    };
    Ok((
        Prediction {
            phi_next,
            phi_dot_next,
            x_ddot_next,
            tau_cmd,
        },
        next,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seq: u64, omega: f64, ts: f64) -> GyroSample {
        GyroSample {
            seq,
            t: seq as f64 * ts,
            omega,
        }
    }

    #[test]
    fn angle_estimate_is_trapezoidal() {
        let s = ControllerState::default();
        assert_eq!(estimate_angle(&s, &sample(0, 0.0, 0.01), 0.01).unwrap(), 0.0);

        let s = ControllerState {
            omega_prev: 2.0,
            next_seq: 3,
            ..Default::default()
        };
        let got = estimate_angle(&s, &sample(3, 2.0, 0.01), 0.01).unwrap();
        assert!((got - 0.02).abs() < 1e-18);

        let s = ControllerState {
            phi_est: 0.1,
            omega_prev: 1.0,
            next_seq: 7,
            ..Default::default()
        };
        let got = estimate_angle(&s, &sample(7, 3.0, 0.01), 0.01).unwrap();
        assert!((got - 0.12).abs() < 1e-15);
    }

    #[test]
    fn angle_estimate_rejects_gaps() {
        let s = ControllerState::default();
        assert!(matches!(
            estimate_angle(&s, &sample(1, 0.0, 0.01), 0.01),
            Err(Error::SequenceGap { expected: 0, got: 1 })
        ));
    }

    #[test]
    fn accel_estimate_is_difference_quotient() {
        assert_eq!(estimate_angular_accel(2.0, 2.0, 0.01), 0.0);
        assert_eq!(estimate_angular_accel(2.0, 1.0, 0.01), 100.0);
        assert_eq!(estimate_angular_accel(-1.0, 1.0, 0.01), -200.0);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = RobotParams::default();
        let mut state = ControllerState::default();
        for k in 0..20 {
            let (pred, next) = mpc_step(&p, &state, &sample(k, 0.0, p.ts)).unwrap();
            assert_eq!(pred.tau_cmd, 0.0);
            assert_eq!(pred.phi_next, 0.0);
            state = next;
        }
    }

    #[test]
    fn first_step_matches_hand_computed_oracle() {
        // Hand-stepped oracle for the first sample with omega = 4.
        let p = RobotParams::default();
        let state = ControllerState::default();
        let (pred, next) = mpc_step(&p, &state, &sample(0, 4.0, p.ts)).unwrap();

        let phi_now = 0.01 * (0.0 + 4.0) / 2.0;
        let phi_next = phi_now + 0.01 * 4.0; // alpha held at zero
        assert!((pred.phi_next - phi_next).abs() < 1e-15);

        let kin = PendulumKinematics::new(phi_next, 4.0, 0.0);
        let xdd = chassis_acceleration(&p, &kin).unwrap();
        assert!((pred.x_ddot_next - xdd).abs() < 1e-15);
        let tau = wheel_torque(&p, xdd, &kin, 0.0);
        assert!((pred.tau_cmd - tau).abs() < 1e-15);
        // Direct substitution puts the command near 8.15 N·m.
        assert!((pred.tau_cmd - 8.1498).abs() < 1e-3);

        assert_eq!(next.alpha_prev, 400.0);
        assert_eq!(next.omega_prev, 4.0);
        assert_eq!(next.next_seq, 1);
    }

    #[test]
    fn constant_rate_zeroes_the_acceleration_estimate() {
        let p = RobotParams::default();
        let state = ControllerState::default();
        let (_, s1) = mpc_step(&p, &state, &sample(0, 4.0, p.ts)).unwrap();
        let (_, s2) = mpc_step(&p, &s1, &sample(1, 4.0, p.ts)).unwrap();
        assert_eq!(s2.alpha_prev, 0.0);
    }

    #[test]
    fn prediction_logs_rate_without_feeding_commands() {
        let p = RobotParams::default();
        let state = ControllerState {
            alpha_prev: 2.0,
            next_seq: 0,
            ..Default::default()
        };
        let (pred, _) = mpc_step(&p, &state, &sample(0, 1.0, p.ts)).unwrap();
        assert!((pred.phi_dot_next - (1.0 + p.ts * 2.0)).abs() < 1e-15);
    }
}
