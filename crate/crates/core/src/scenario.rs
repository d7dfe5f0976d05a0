//! Scenario orchestration: rider disturbance, the four-scenario ladder,
//! trajectory recording, and comparison metrics.
//!
//! The default loop treats the rider's lean as a rate disturbance on the
//! gyro measurement. The lean angle itself is the zero-mean antiderivative
//! of that rate, and the recorded pitch angle is the plant angle plus the
//! lean — so an uncontrolled run reproduces the bounded lean oscillation
//! while controlled runs show the tracking residual of the actuation chain.

use std::collections::VecDeque;

use crate::dynamics::{
    plant_derivative, torque_per_alpha, PlantModelKind, PlantState, RobotParams,
};
use crate::error::{Error, Result};
use crate::motor::{
    command_lead_weight, tdc_voltage, winding_pole, DelayLine, MotorParams,
};
use crate::mpc::{mpc_step, ControllerState, GyroSample, Prediction};
use crate::ode::{integrate, StepSpec};

/// Which rung of the scenario ladder to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// No controller; the recorded angle is the raw rider lean.
    Uncontrolled,
    /// Torque commands applied to the plant without delay.
    MpcIdeal,
    /// Torque commands applied through the actuator delay line.
    MpcDelayed,
    /// Commands converted to voltage, delayed, and realized through the
    /// motor winding.
    Hierarchical,
}

/// Where the rider disturbance enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisturbanceInjection {
    /// Added to the measured pitch rate fed to the gyro (default).
    #[default]
    Measurement,
    /// Added to the plant's pendulum-angle kinematics; the plant model then
    /// integrates the physical consequences.
    State,
}

/// Rider-movement disturbance: a two-tone rate signal and its lean angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub a1: f64,
    pub w1: f64,
    pub a2: f64,
    pub w2: f64,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            a1: 5.0,
            w1: 50.0,
            a2: 4.0,
            w2: 20.0,
        }
    }
}

impl Disturbance {
    /// Rider-imposed pitch rate at time `t`.
    pub fn rate(&self, t: f64) -> f64 {
        rider_disturbance(t, self.a1, self.w1, self.a2, self.w2)
    }

    /// Rider lean angle: the zero-mean antiderivative of the rate.
    pub fn lean(&self, t: f64) -> f64 {
        let first = if self.a1 == 0.0 {
            0.0
        } else {
            -self.a1 / self.w1 * (self.w1 * t).cos()
        };
        let second = if self.a2 == 0.0 {
            0.0
        } else {
            self.a2 / self.w2 * (self.w2 * t).sin()
        };
        first + second
    }

    pub fn is_zero(&self) -> bool {
        self.a1 == 0.0 && self.a2 == 0.0
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("dist_w1", self.w1), ("dist_w2", self.w2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, v) in [("dist_a1", self.a1), ("dist_a2", self.a2)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// `a1·sin(w1·t) + a2·cos(w2·t)`, the rider's pitch-rate disturbance.
pub fn rider_disturbance(t: f64, a1: f64, w1: f64, a2: f64, w2: f64) -> f64 {
    a1 * (w1 * t).sin() + a2 * (w2 * t).cos()
}

/// Full description of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Run length (s); must be a whole number of sample periods.
    pub duration: f64,
    pub robot: RobotParams,
    pub motor: MotorParams,
    pub plant_model: PlantModelKind,
    pub injection: DisturbanceInjection,
    pub disturbance: Disturbance,
    /// Integrator sub-steps per sample period.
    pub substeps: u32,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            duration: 10.0,
            robot: RobotParams::default(),
            motor: MotorParams::default(),
            plant_model: PlantModelKind::default(),
            injection: DisturbanceInjection::default(),
            disturbance: Disturbance::default(),
            substeps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.motor.validate()?;
        self.disturbance.validate()?;
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("must be positive and finite, got {}", self.duration),
            });
        }
        let steps = self.duration / self.robot.ts;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!(
                    "must be an integer number of sample periods (duration/Ts = {steps})"
                ),
            });
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter {
                name: "substeps",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Number of recorded samples (`duration/Ts + 1`).
    pub fn sample_count(&self) -> u64 {
        (self.duration / self.robot.ts).round() as u64 + 1
    }
}

/// One recorded loop sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub tau_cmd: f64,
    pub v_cmd: f64,
    pub wheel_rate: f64,
    pub x: f64,
    pub x_dot: f64,
}

/// Time-indexed record of one scenario run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Summary quantities of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub max_abs_phi: f64,
    pub max_abs_tau: f64,
    pub rms_phi: f64,
}

/// Relative improvement of one run over a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub displacement_reduction: f64,
    pub torque_reduction: f64,
    pub stability_increase: f64,
}

/// Maximum absolute pitch angle and torque plus the pitch RMS.
pub fn compute_metrics(traj: &Trajectory) -> Result<Metrics> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut max_abs_phi: f64 = 0.0;
    let mut max_abs_tau: f64 = 0.0;
    let mut sum_sq = 0.0;
    for s in &traj.samples {
        max_abs_phi = max_abs_phi.max(s.phi.abs());
        max_abs_tau = max_abs_tau.max(s.tau_cmd.abs());
        sum_sq += s.phi * s.phi;
    }
    Ok(Metrics {
        max_abs_phi,
        max_abs_tau,
        rms_phi: (sum_sq / traj.len() as f64).sqrt(),
    })
}

/// Reduction fractions of `improved` relative to `base`, plus the
/// reciprocal-ratio stability increase.
pub fn compare_runs(base: &Metrics, improved: &Metrics) -> Result<Comparison> {
    if base.max_abs_phi == 0.0 {
        return Err(Error::DivisionByZeroBase {
            metric: "max_abs_phi",
        });
    }
    if base.max_abs_tau == 0.0 {
        return Err(Error::DivisionByZeroBase {
            metric: "max_abs_tau",
        });
    }
    Ok(Comparison {
        displacement_reduction: 1.0 - improved.max_abs_phi / base.max_abs_phi,
        torque_reduction: 1.0 - improved.max_abs_tau / base.max_abs_tau,
        stability_increase: base.max_abs_phi / improved.max_abs_phi - 1.0,
    })
}

pub(crate) fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Deterministic controller stack: gyro in, torque command and voltage out.
///
/// The same instance drives the in-process loop, the networked controller
/// process, and the plant-side shadow of it, so all three produce identical
/// command streams from identical measurement streams.
#[derive(Debug, Clone)]
pub struct ControllerCore {
    robot: RobotParams,
    motor: MotorParams,
    state: ControllerState,
    encoder_rate: f64,
}

/// Everything the controller produces for one gyro sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerTick {
    /// The held pitch acceleration the command was built from.
    pub alpha_used: f64,
    pub prediction: Prediction,
    /// Time-delay-law voltage for the wheel motors.
    pub voltage: f64,
}

impl ControllerCore {
    pub fn new(robot: RobotParams, motor: MotorParams) -> Self {
        Self {
            robot,
            motor,
            state: ControllerState::default(),
            encoder_rate: 0.0,
        }
    }

    /// Runs one controller step. The voltage uses the latest encoder echo
    /// (zero at session start) as the shaft rate.
    pub fn on_gyro(&mut self, sample: &GyroSample) -> Result<ControllerTick> {
        let alpha_used = self.state.alpha_prev;
        let tau_prev = self.state.tau_prev;
        let (prediction, next) = mpc_step(&self.robot, &self.state, sample)?;
        self.state = next;
        let voltage = tdc_voltage(
            &self.motor,
            prediction.tau_cmd,
            tau_prev,
            self.robot.ts,
            self.encoder_rate,
            sign_of(prediction.tau_cmd),
        );
        Ok(ControllerTick {
            alpha_used,
            prediction,
            voltage,
        })
    }

    /// Records the latest wheel-speed telemetry for the next voltage.
    pub fn on_encoder(&mut self, rate: f64) {
        self.encoder_rate = rate;
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }
}

/// Plant side of the loop: integrates the vehicle, produces gyro samples,
/// and realizes delivered actuation. Shared by the in-process scenarios and
/// the networked plant process.
pub(crate) struct PlantRig {
    cfg: ScenarioConfig,
    shadow: ControllerCore,
    phi_p: f64,
    phi_dot_p: f64,
    x: f64,
    x_dot: f64,
    comp: f64,
    xdd_nom: f64,
    torque_line: DelayLine,
    tau_hist: VecDeque<f64>,
    delta_f: f64,
    beta: f64,
    tick: u64,
    total: u64,
    traj: Trajectory,
}

impl PlantRig {
    pub(crate) fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let depth = cfg.motor.delay_samples;
        Ok(Self {
            cfg: cfg.clone(),
            shadow: ControllerCore::new(cfg.robot, cfg.motor),
            phi_p: 0.0,
            phi_dot_p: 0.0,
            x: 0.0,
            x_dot: 0.0,
            comp: 0.0,
            xdd_nom: 0.0,
            torque_line: DelayLine::new(depth),
            tau_hist: std::iter::repeat(0.0).take(depth).collect(),
            delta_f: 0.0,
            beta: winding_pole(&cfg.motor, cfg.robot.ts),
            tick: 0,
            total: cfg.sample_count(),
            traj: Trajectory::default(),
        })
    }

    pub(crate) fn total_samples(&self) -> u64 {
        self.total
    }

    /// Wheel rotation rate at the current plant state.
    pub(crate) fn wheel_rate(&self) -> f64 {
        self.x_dot / self.cfg.robot.r
    }

    /// Advances the plant one sample (after the first tick) and measures the
    /// gyro. Returns `None` once every sample has been produced.
    pub(crate) fn begin_tick(&mut self) -> Result<Option<GyroSample>> {
        if self.tick >= self.total {
            return Ok(None);
        }
        let ts = self.cfg.robot.ts;
        if self.tick > 0 {
            let spec = StepSpec::new(ts, self.cfg.substeps)?;
            let (comp, xdd) = (self.comp, self.xdd_nom);
            let y = integrate(
                |_, y: &[f64; 4]| Ok([y[1], comp, y[3], xdd]),
                (self.tick - 1) as f64 * ts,
                &[self.phi_p, self.phi_dot_p, self.x, self.x_dot],
                spec,
            )
            .map_err(|e| self.abort(e))?;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(self.abort(Error::NonFiniteDerivative {
                    t: self.tick as f64 * ts,
                }));
            }
            [self.phi_p, self.phi_dot_p, self.x, self.x_dot] = y;
        }
        let t = self.tick as f64 * ts;
        let omega = self.phi_dot_p + self.cfg.disturbance.rate(t);
        Ok(Some(GyroSample {
            seq: self.tick,
            t,
            omega,
        }))
    }

    /// Runs the plant-side controller shadow for this tick.
    pub(crate) fn controller_voltage(&mut self, sample: &GyroSample) -> Result<ControllerTick> {
        let step = self.tick as usize;
        self.shadow
            .on_gyro(sample)
            .map_err(|e| Error::ScenarioAborted {
                step,
                source: Box::new(e),
            })
    }

    /// Realizes the delivered actuation for this tick and records the sample.
    ///
    /// `recorded_v` is the voltage written to the trajectory: the shadow's
    /// own value in-process, the wire value in a networked session.
    pub(crate) fn finish_tick(
        &mut self,
        sample: &GyroSample,
        ctl: Option<&ControllerTick>,
        recorded_v: f64,
    ) -> Result<()> {
        let robot = self.cfg.robot;
        let (tau_cmd, v_cmd) = match ctl {
            None => {
                self.comp = 0.0;
                self.xdd_nom = 0.0;
                (0.0, 0.0)
            }
            Some(ct) => {
                let tau = ct.prediction.tau_cmd;
                let gain = torque_per_alpha(&robot, ct.prediction.phi_next)
                    .map_err(|e| self.abort(e))?;
                match self.cfg.kind {
                    ScenarioKind::Uncontrolled => {
                        self.delta_f = 0.0;
                    }
                    ScenarioKind::MpcIdeal => {
                        self.delta_f = 0.0;
                    }
                    ScenarioKind::MpcDelayed => {
                        // Stale torque applied as-is; the deviation from the
                        // current command transmits unfiltered.
                        let act = self.torque_line.push(tau);
                        self.delta_f = act - tau;
                    }
                    ScenarioKind::Hierarchical => {
                        // The delayed voltage stream realizes the command it
                        // encodes, first-order extrapolated by the winding.
                        let w = command_lead_weight(&self.cfg.motor, robot.ts, self.wheel_rate());
                        let act = match self.tau_hist.len() {
                            0 => tau,
                            1 => {
                                let old = self.tau_hist[0];
                                old + w * (tau - old)
                            }
                            _ => {
                                let old = self.tau_hist[0];
                                let mid = self.tau_hist[1];
                                old + w * (mid - old)
                            }
                        };
                        if !self.tau_hist.is_empty() {
                            self.tau_hist.push_back(tau);
                            self.tau_hist.pop_front();
                        }
                        self.delta_f = self.beta * self.delta_f
                            + (1.0 - self.beta) * (act - tau);
                    }
                }
                self.comp = -(ct.alpha_used + self.delta_f / gain);
                self.xdd_nom = ct.prediction.x_ddot_next;
                (tau, recorded_v)
            }
        };
        // Encoder echo consumed by the next controller step.
        let wheel_rate = self.wheel_rate();
        self.shadow.on_encoder(wheel_rate);
        self.traj.samples.push(TrajectorySample {
            t: sample.t,
            phi: self.phi_p + self.cfg.disturbance.lean(sample.t),
            phi_dot: sample.omega,
            tau_cmd,
            v_cmd,
            wheel_rate,
            x: self.x,
            x_dot: self.x_dot,
        });
        self.tick += 1;
        Ok(())
    }

    pub(crate) fn into_trajectory(self) -> Trajectory {
        self.traj
    }

    fn abort(&self, e: Error) -> Error {
        match e {
            already @ Error::ScenarioAborted { .. } => already,
            other => Error::ScenarioAborted {
                step: self.tick as usize,
                source: Box::new(other),
            },
        }
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    match cfg.injection {
        DisturbanceInjection::Measurement => run_measurement(cfg),
        DisturbanceInjection::State => run_state_side(cfg),
    }
}

fn run_measurement(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let mut rig = PlantRig::new(cfg)?;
    while let Some(sample) = rig.begin_tick()? {
        if cfg.kind == ScenarioKind::Uncontrolled {
            rig.finish_tick(&sample, None, 0.0)?;
        } else {
            let ct = rig.controller_voltage(&sample)?;
            let v_rec = if cfg.kind == ScenarioKind::Hierarchical {
                ct.voltage
            } else {
                0.0
            };
            rig.finish_tick(&sample, Some(&ct), v_rec)?;
        }
    }
    Ok(rig.into_trajectory())
}

/// State-side injection: the rider rate enters the pendulum-angle kinematics
/// and the configured plant model integrates the physical consequences. The
/// gravity-bearing models generally topple under control here; errors carry
/// the failing step index.
fn run_state_side(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let robot = cfg.robot;
    let ts = robot.ts;
    let mut plant = PlantState::default();
    let mut alpha_held = 0.0_f64;
    let mut ctl = ControllerCore::new(robot, cfg.motor);
    let mut torque_line = DelayLine::new(cfg.motor.delay_samples);
    let mut tau_hist: VecDeque<f64> =
        std::iter::repeat(0.0).take(cfg.motor.delay_samples).collect();
    let mut applied = 0.0_f64;
    let mut traj = Trajectory::default();
    let total = cfg.sample_count();
    let abort = |step: u64, e: Error| Error::ScenarioAborted {
        step: step as usize,
        source: Box::new(e),
    };

    for k in 0..total {
        if k > 0 {
            let spec = StepSpec::new(ts, cfg.substeps)?;
            let t0 = (k - 1) as f64 * ts;
            let dist = cfg.disturbance;
            let y = integrate(
                |t, y: &[f64; 4]| {
                    let st = PlantState::from_chassis(y[0], y[1], y[2], y[3], robot.r, t);
                    let d = plant_derivative(&robot, &st, applied, cfg.plant_model, alpha_held)?;
                    Ok([
                        d.phi_dot + dist.rate(t),
                        d.phi_ddot,
                        d.x_dot,
                        d.x_ddot,
                    ])
                },
                t0,
                &[plant.phi, plant.phi_dot, plant.x, plant.x_dot],
                spec,
            )
            .map_err(|e| abort(k as u64, e))?;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(abort(k, Error::NonFiniteDerivative { t: k as f64 * ts }));
            }
            plant = PlantState::from_chassis(y[0], y[1], y[2], y[3], robot.r, k as f64 * ts);
            let d = plant_derivative(&robot, &plant, applied, cfg.plant_model, alpha_held)
                .map_err(|e| abort(k, e))?;
            alpha_held = d.phi_ddot;
        }
        let t = k as f64 * ts;
        let omega = plant.phi_dot + cfg.disturbance.rate(t);
        let mut tau_cmd = 0.0;
        let mut v_cmd = 0.0;
        if cfg.kind != ScenarioKind::Uncontrolled {
            let sample = GyroSample { seq: k, t, omega };
            let ct = ctl.on_gyro(&sample).map_err(|e| abort(k, e))?;
            tau_cmd = ct.prediction.tau_cmd;
            applied = match cfg.kind {
                ScenarioKind::Uncontrolled => 0.0,
                ScenarioKind::MpcIdeal => tau_cmd,
                ScenarioKind::MpcDelayed => torque_line.push(tau_cmd),
                ScenarioKind::Hierarchical => {
                    v_cmd = ct.voltage;
                    let w = command_lead_weight(&cfg.motor, ts, plant.wheel_rate);
                    let act = match tau_hist.len() {
                        0 => tau_cmd,
                        1 => tau_hist[0] + w * (tau_cmd - tau_hist[0]),
                        _ => tau_hist[0] + w * (tau_hist[1] - tau_hist[0]),
                    };
                    if !tau_hist.is_empty() {
                        tau_hist.push_back(tau_cmd);
                        tau_hist.pop_front();
                    }
                    act
                }
            };
            ctl.on_encoder(plant.wheel_rate);
        }
        traj.samples.push(TrajectorySample {
            t,
            phi: plant.phi,
            phi_dot: omega,
            tau_cmd,
            v_cmd,
            wheel_rate: plant.wheel_rate,
            x: plant.x,
            x_dot: plant.x_dot,
        });
    }
    Ok(traj)
}
