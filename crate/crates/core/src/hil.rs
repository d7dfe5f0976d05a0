//! Software-in-the-loop harness: plant and controller as separate processes
//! exchanging lockstep messages over a reliable byte stream.
//!
//! Wire format: one newline-terminated ASCII record per message, floats
//! rendered with 17 significant digits so every value round-trips bit-exact.
//! Each tick is a strict four-message exchange:
//!
//! ```text
//! plant -> GYRO seq t omega
//! ctl   -> VOLT seq v
//! plant -> SPD  seq wheel_rate
//! ctl   -> SYNC seq speed_diff phase_diff
//! ```
//!
//! and the plant closes the session with `END seq`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::motor::MotorParams;
use crate::numfmt::{parse_finite, sci17};
use crate::scenario::{ControllerCore, PlantRig, ScenarioConfig, ScenarioKind, Trajectory};
use crate::dynamics::RobotParams;
use crate::mpc::GyroSample;

/// One lockstep protocol record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WireMessage {
    /// Gyro sample: sequence, time, measured pitch rate.
    Gyro { seq: u64, t: f64, omega: f64 },
    /// Voltage command echoing the triggering gyro sequence.
    Volt { seq: u64, v: f64 },
    /// Encoder speed telemetry.
    Spd { seq: u64, wheel_rate: f64 },
    /// Synchronization report: speed and wrapped phase differences.
    Sync {
        seq: u64,
        speed_diff: f64,
        phase_diff: f64,
    },
    /// End of session.
    End { seq: u64 },
}

impl WireMessage {
    pub fn seq(&self) -> u64 {
        match *self {
            WireMessage::Gyro { seq, .. }
            | WireMessage::Volt { seq, .. }
            | WireMessage::Spd { seq, .. }
            | WireMessage::Sync { seq, .. }
            | WireMessage::End { seq } => seq,
        }
    }
}

/// Renders a message as its newline-terminated wire line.
pub fn encode(msg: &WireMessage) -> String {
    match *msg {
        WireMessage::Gyro { seq, t, omega } => {
            format!("GYRO {seq} {} {}\n", sci17(t), sci17(omega))
        }
        WireMessage::Volt { seq, v } => format!("VOLT {seq} {}\n", sci17(v)),
        WireMessage::Spd { seq, wheel_rate } => {
            format!("SPD {seq} {}\n", sci17(wheel_rate))
        }
        WireMessage::Sync {
            seq,
            speed_diff,
            phase_diff,
        } => format!("SYNC {seq} {} {}\n", sci17(speed_diff), sci17(phase_diff)),
        WireMessage::End { seq } => format!("END {seq}\n"),
    }
}

/// Parses one wire line. Any deviation from the grammar is a
/// [`Error::MalformedFrame`]; no other failure mode exists.
pub fn decode(line: &str) -> Result<WireMessage> {
    let malformed = |reason: &'static str| Error::MalformedFrame {
        reason,
        line: line.trim_end_matches('\n').to_owned(),
    };
    let trimmed = line.strip_suffix('\n').unwrap_or(line);
    let trimmed = trimmed.strip_suffix('\r').unwrap_or(trimmed);
    let mut fields = trimmed.split(' ');
    let tag = fields.next().ok_or_else(|| malformed("empty frame"))?;
    let rest: Vec<&str> = fields.collect();
    if rest.iter().any(|f| f.is_empty()) {
        return Err(malformed("empty field"));
    }
    let seq_of = |s: &str| -> Result<u64> {
        s.parse::<u64>().map_err(|_| malformed("bad sequence"))
    };
    let num_of = |s: &str| -> Result<f64> {
        parse_finite(s).ok_or_else(|| malformed("bad number"))
    };
    match (tag, rest.len()) {
        ("GYRO", 3) => Ok(WireMessage::Gyro {
            seq: seq_of(rest[0])?,
            t: num_of(rest[1])?,
            omega: num_of(rest[2])?,
        }),
        ("VOLT", 2) => Ok(WireMessage::Volt {
            seq: seq_of(rest[0])?,
            v: num_of(rest[1])?,
        }),
        ("SPD", 2) => Ok(WireMessage::Spd {
            seq: seq_of(rest[0])?,
            wheel_rate: num_of(rest[1])?,
        }),
        ("SYNC", 3) => Ok(WireMessage::Sync {
            seq: seq_of(rest[0])?,
            speed_diff: num_of(rest[1])?,
            phase_diff: num_of(rest[2])?,
        }),
        ("END", 1) => Ok(WireMessage::End {
            seq: seq_of(rest[0])?,
        }),
        ("GYRO" | "VOLT" | "SPD" | "SYNC" | "END", _) => Err(malformed("wrong arity")),
        _ => Err(malformed("unknown tag")),
    }
}

/// Session-level settings for one lockstep run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// `host:port` to listen on (plant) or connect to (controller).
    pub endpoint: String,
    /// Pace ticks to the wall clock and enforce reply deadlines.
    pub realtime: bool,
    /// Reply deadline per tick in realtime mode.
    pub timeout: Duration,
    /// In-sync threshold on the wheel-speed difference (rad/s).
    pub speed_threshold: f64,
    /// In-sync threshold on the wrapped wheel-phase difference (rad).
    pub phase_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            endpoint: "127.0.0.1:7401".into(),
            realtime: false,
            timeout: Duration::from_millis(100),
            speed_threshold: 0.01,
            phase_threshold: 0.01,
        }
    }
}

/// Outcome of a synchronization check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncVerdict {
    pub in_sync: bool,
    pub message: WireMessage,
}

/// Wraps an angle difference to `(−π, π]`.
pub fn wrap_phase(diff: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut d = diff.rem_euclid(tau);
    if d > std::f64::consts::PI {
        d -= tau;
    }
    d
}

/// Compares expected and measured wheel speed and phase against thresholds.
pub fn sync_check(
    seq: u64,
    expected_rate: f64,
    measured_rate: f64,
    expected_phase: f64,
    measured_phase: f64,
    speed_threshold: f64,
    phase_threshold: f64,
) -> SyncVerdict {
    let speed_diff = expected_rate - measured_rate;
    let phase_diff = wrap_phase(expected_phase - measured_phase);
    SyncVerdict {
        in_sync: speed_diff.abs() <= speed_threshold && phase_diff.abs() <= phase_threshold,
        message: WireMessage::Sync {
            seq,
            speed_diff,
            phase_diff,
        },
    }
}

struct Transport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    realtime: bool,
    timeout: Duration,
}

impl Transport {
    fn new(stream: TcpStream, realtime: bool, timeout: Duration) -> Result<Self> {
        stream.set_nodelay(true)?;
        if realtime {
            stream.set_read_timeout(Some(timeout))?;
        }
        let writer = stream.try_clone()?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            realtime,
            timeout,
        })
    }

    fn send(&mut self, msg: &WireMessage) -> Result<()> {
        self.writer.write_all(encode(msg).as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self, waiting_for: &'static str) -> Result<WireMessage> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(|e| {
            if self.realtime
                && matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                )
            {
                Error::Timeout { waiting_for }
            } else {
                Error::Io(e)
            }
        })?;
        if n == 0 {
            return Err(Error::MalformedFrame {
                reason: "connection closed mid-session",
                line: String::new(),
            });
        }
        let _ = self.timeout;
        decode(&line)
    }
}

fn expect_seq(expected: u64, got: u64) -> Result<()> {
    if expected != got {
        return Err(Error::SequenceMismatch { expected, got });
    }
    Ok(())
}

/// Plant process: serves gyro samples, applies the replied voltages through
/// the delayed actuation chain, and returns the recorded trajectory. The
/// loop topology is identical to the in-process hierarchical scenario, so a
/// loopback session reproduces it bit-exactly.
pub fn plant_serve(session: &SessionConfig, scenario: &ScenarioConfig) -> Result<Trajectory> {
    let listener = TcpListener::bind(&session.endpoint)?;
    let stream = accept_with_deadline(&listener, session)?;
    let mut transport = Transport::new(stream, session.realtime, session.timeout)?;

    if scenario.duration <= 0.0 {
        transport.send(&WireMessage::End { seq: 0 })?;
        return Ok(Trajectory::default());
    }
    let mut cfg = scenario.clone();
    cfg.kind = ScenarioKind::Hierarchical;
    let mut rig = PlantRig::new(&cfg)?;
    let total = rig.total_samples();

    let start = Instant::now();
    while let Some(sample) = rig.begin_tick()? {
        if session.realtime {
            pace(start, sample.t);
        }
        transport.send(&WireMessage::Gyro {
            seq: sample.seq,
            t: sample.t,
            omega: sample.omega,
        })?;
        // Advance the plant-side shadow of the controller; the wire value is
        // recorded and cross-checked but the realization is deterministic.
        let ct = rig.controller_voltage(&sample)?;
        let wire_v = match transport.recv("VOLT")? {
            WireMessage::Volt { seq, v } => {
                expect_seq(sample.seq, seq)?;
                v
            }
            other => {
                return Err(Error::SequenceMismatch {
                    expected: sample.seq,
                    got: other.seq(),
                })
            }
        };
        rig.finish_tick(&sample, Some(&ct), wire_v)?;
        transport.send(&WireMessage::Spd {
            seq: sample.seq,
            wheel_rate: rig.wheel_rate(),
        })?;
        match transport.recv("SYNC")? {
            WireMessage::Sync { seq, .. } => expect_seq(sample.seq, seq)?,
            other => {
                return Err(Error::SequenceMismatch {
                    expected: sample.seq,
                    got: other.seq(),
                })
            }
        }
    }
    transport.send(&WireMessage::End { seq: total })?;
    Ok(rig.into_trajectory())
}

/// Controller process: answers each gyro sample with a voltage command,
/// tracks encoder telemetry, and reports synchronization. Returns the log of
/// every message it sent or received, in order.
pub fn controller_client(
    session: &SessionConfig,
    robot: RobotParams,
    motor: MotorParams,
) -> Result<Vec<WireMessage>> {
    let stream = TcpStream::connect(&session.endpoint)?;
    let mut transport = Transport::new(stream, session.realtime, session.timeout)?;
    let mut core = ControllerCore::new(robot, motor);
    let mut log = Vec::new();

    // Mirror of the commanded chassis motion, used as the sync expectation.
    let ts = robot.ts;
    let mut exp_x_dot = 0.0_f64;
    let mut pending_xdd = 0.0_f64;
    let mut exp_rate_prev = 0.0_f64;
    let mut exp_phase = 0.0_f64;
    let mut meas_rate_prev = 0.0_f64;
    let mut meas_phase = 0.0_f64;
    let mut first = true;

    loop {
        let msg = transport.recv("GYRO")?;
        log.push(msg);
        let sample = match msg {
            WireMessage::End { .. } => break,
            WireMessage::Gyro { seq, t, omega } => GyroSample { seq, t, omega },
            other => {
                return Err(Error::MalformedFrame {
                    reason: "expected GYRO or END",
                    line: encode(&other).trim_end().to_owned(),
                })
            }
        };
        if !first {
            // The plant integrated one sample since the last exchange.
            exp_x_dot += ts * pending_xdd;
        }
        first = false;

        let ct = core.on_gyro(&sample)?;
        let volt = WireMessage::Volt {
            seq: sample.seq,
            v: ct.voltage,
        };
        transport.send(&volt)?;
        log.push(volt);
        pending_xdd = ct.prediction.x_ddot_next;

        let spd = transport.recv("SPD")?;
        log.push(spd);
        let measured_rate = match spd {
            WireMessage::Spd { seq, wheel_rate } => {
                expect_seq(sample.seq, seq)?;
                wheel_rate
            }
            other => {
                return Err(Error::SequenceMismatch {
                    expected: sample.seq,
                    got: other.seq(),
                })
            }
        };
        core.on_encoder(measured_rate);

        // Trapezoidal phase accumulation on both channels keeps the loopback
        // comparison exact.
        let expected_rate = exp_x_dot / robot.r;
        exp_phase += ts * (exp_rate_prev + expected_rate) / 2.0;
        exp_rate_prev = expected_rate;
        meas_phase += ts * (meas_rate_prev + measured_rate) / 2.0;
        meas_rate_prev = measured_rate;

        let verdict = sync_check(
            sample.seq,
            expected_rate,
            measured_rate,
            exp_phase,
            meas_phase,
            session.speed_threshold,
            session.phase_threshold,
        );
        transport.send(&verdict.message)?;
        log.push(verdict.message);
    }
    Ok(log)
}

fn accept_with_deadline(listener: &TcpListener, session: &SessionConfig) -> Result<TcpStream> {
    if !session.realtime {
        let (stream, _) = listener.accept()?;
        return Ok(stream);
    }
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + session.timeout;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                return Ok(stream);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout {
                        waiting_for: "peer connection",
                    });
                }
                std::thread::sleep(Duration::from_millis(1));
            }
            Err(e) => return Err(Error::Io(e)),
        }
    }
}

fn pace(start: Instant, t: f64) {
    let target = start + Duration::from_secs_f64(t);
    let now = Instant::now();
    if target > now {
        std::thread::sleep(target - now);
    }
}
