//! Lockstep session tests: transparency against the in-process loop,
//! protocol error paths, and decoder fuzzing.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use twip_core::hil::{controller_client, decode, encode, plant_serve, SessionConfig, WireMessage};
use twip_core::scenario::{run_scenario, ScenarioConfig, ScenarioKind};
use twip_core::{Error, MotorParams, RobotParams};

fn free_endpoint() -> String {
    // Bind to port 0 to reserve an address, then release it for the test.
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    addr.to_string()
}

fn hier_config(duration: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(ScenarioKind::Hierarchical);
    cfg.duration = duration;
    cfg
}

/// Connects a controller to a plant that may still be binding its listener.
fn client_with_retry(
    session: &SessionConfig,
    robot: RobotParams,
    motor: MotorParams,
) -> Result<Vec<WireMessage>, Error> {
    for _ in 0..200 {
        match controller_client(session, robot, motor) {
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::ConnectionRefused => {
                thread::sleep(Duration::from_millis(10));
            }
            other => return other,
        }
    }
    panic!("plant never listened on {}", session.endpoint);
}

#[test]
fn loopback_matches_in_process_run_bit_for_bit() {
    let scenario = hier_config(2.0);
    let reference = run_scenario(&scenario).unwrap();

    let session = SessionConfig {
        endpoint: free_endpoint(),
        ..SessionConfig::default()
    };
    let plant_session = session.clone();
    let plant_scenario = scenario.clone();
    let plant = thread::spawn(move || plant_serve(&plant_session, &plant_scenario));

    let log = client_with_retry(&session, scenario.robot, scenario.motor).unwrap();
    let traj = plant.join().unwrap().unwrap();

    assert_eq!(traj.len(), reference.len());
    for (a, b) in traj.samples.iter().zip(&reference.samples) {
        assert_eq!(a, b, "trajectories must be bit-identical");
    }

    // The controller's VOLT stream equals the in-process voltage log.
    let volts: Vec<f64> = log
        .iter()
        .filter_map(|m| match m {
            WireMessage::Volt { v, .. } => Some(*v),
            _ => None,
        })
        .collect();
    let reference_volts: Vec<f64> = reference.samples.iter().map(|s| s.v_cmd).collect();
    assert_eq!(volts.len(), reference_volts.len());
    for (a, b) in volts.iter().zip(&reference_volts) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Loopback synchronization holds throughout; the mirrored integration
    // agrees to rounding noise.
    let syncs: Vec<(f64, f64)> = log
        .iter()
        .filter_map(|m| match m {
            WireMessage::Sync {
                speed_diff,
                phase_diff,
                ..
            } => Some((*speed_diff, *phase_diff)),
            _ => None,
        })
        .collect();
    assert_eq!(syncs.len(), reference.len());
    for (sd, pd) in syncs {
        assert!(sd.abs() <= 1e-9 && pd.abs() <= 1e-9, "({sd}, {pd})");
    }
}

#[test]
fn mismatched_plant_parameters_break_sync() {
    let mut scenario = hier_config(1.0);
    scenario.robot.big_m = 80.0; // plant side simulates a lighter robot

    let session = SessionConfig {
        endpoint: free_endpoint(),
        ..SessionConfig::default()
    };
    let plant_session = session.clone();
    let plant_scenario = scenario.clone();
    let plant = thread::spawn(move || plant_serve(&plant_session, &plant_scenario));

    // Controller believes the reference parameters.
    let log = client_with_retry(&session, RobotParams::default(), MotorParams::default()).unwrap();
    plant.join().unwrap().unwrap();

    let out_of_sync = log.iter().any(|m| match m {
        WireMessage::Sync {
            speed_diff,
            phase_diff,
            ..
        } => speed_diff.abs() > 0.01 || phase_diff.abs() > 0.01,
        _ => false,
    });
    assert!(out_of_sync, "erroneous parameters must surface in SYNC");
}

#[test]
fn zero_duration_session_ends_immediately() {
    let mut scenario = hier_config(1.0);
    scenario.duration = 0.0;

    let session = SessionConfig {
        endpoint: free_endpoint(),
        ..SessionConfig::default()
    };
    let plant_session = session.clone();
    let plant = thread::spawn(move || plant_serve(&plant_session, &scenario));

    let log = client_with_retry(&session, RobotParams::default(), MotorParams::default()).unwrap();
    let traj = plant.join().unwrap().unwrap();
    assert!(traj.is_empty());
    assert_eq!(log.len(), 1);
    assert!(matches!(log[0], WireMessage::End { seq: 0 }));
}

#[test]
fn out_of_order_volt_aborts_with_sequence_mismatch() {
    let scenario = hier_config(1.0);
    let session = SessionConfig {
        endpoint: free_endpoint(),
        ..SessionConfig::default()
    };
    let plant_session = session.clone();
    let plant = thread::spawn(move || plant_serve(&plant_session, &scenario));

    let stream = loop {
        match TcpStream::connect(&session.endpoint) {
            Ok(s) => break s,
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    };
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(matches!(
        decode(&line).unwrap(),
        WireMessage::Gyro { seq: 0, .. }
    ));
    let mut w = stream;
    w.write_all(encode(&WireMessage::Volt { seq: 7, v: 0.0 }).as_bytes())
        .unwrap();
    w.flush().unwrap();

    let err = plant.join().unwrap().unwrap_err();
    assert!(matches!(err, Error::SequenceMismatch { expected: 0, got: 7 }));
}

#[test]
fn end_only_stream_exits_cleanly() {
    let endpoint = free_endpoint();
    let listener = TcpListener::bind(&endpoint).unwrap();
    let server = thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        s.write_all(encode(&WireMessage::End { seq: 0 }).as_bytes())
            .unwrap();
    });
    let session = SessionConfig {
        endpoint,
        ..SessionConfig::default()
    };
    let log = controller_client(&session, RobotParams::default(), MotorParams::default()).unwrap();
    server.join().unwrap();
    assert_eq!(log.len(), 1);
}

#[test]
fn realtime_plant_without_peer_times_out() {
    let session = SessionConfig {
        endpoint: free_endpoint(),
        realtime: true,
        timeout: Duration::from_millis(50),
        ..SessionConfig::default()
    };
    let err = plant_serve(&session, &hier_config(1.0)).unwrap_err();
    assert!(matches!(err, Error::Timeout { .. }));
}

#[test]
fn realtime_session_paces_to_wall_clock() {
    let scenario = hier_config(0.2); // 21 ticks at 10 ms
    let session = SessionConfig {
        endpoint: free_endpoint(),
        realtime: true,
        timeout: Duration::from_millis(500),
        ..SessionConfig::default()
    };
    let plant_session = session.clone();
    let plant_scenario = scenario.clone();
    let plant = thread::spawn(move || plant_serve(&plant_session, &plant_scenario));
    let started = std::time::Instant::now();
    client_with_retry(&session, scenario.robot, scenario.motor).unwrap();
    let elapsed = started.elapsed();
    plant.join().unwrap().unwrap();
    assert!(elapsed >= Duration::from_millis(150), "paced run took {elapsed:?}");
}

#[test]
fn decoder_fuzzing_has_a_single_failure_mode() {
    // Deterministic pseudo-random byte lines; every outcome must be either a
    // parsed message or MalformedFrame.
    let mut state = 0x243F_6A88_85A3_08D3u64;
    let mut rng = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut parsed = 0u32;
    for _ in 0..100_000 {
        let len = (rng() % 40) as usize;
        let mut line = String::new();
        for _ in 0..len {
            let c = (rng() % 96) as u8 + 32;
            line.push(c as char);
        }
        line.push('\n');
        match decode(&line) {
            Ok(_) => parsed += 1,
            Err(Error::MalformedFrame { .. }) => {}
            Err(other) => panic!("unexpected failure mode: {other}"),
        }
    }
    // Random printable lines virtually never parse; the count is informative.
    assert!(parsed < 100);
}

#[test]
fn round_trip_over_random_structured_frames() {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut rng = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..2_000 {
        let f = |r: u64| f64::from_bits(0x3FF0_0000_0000_0000 | (r >> 12)) - 1.5;
        let msg = match rng() % 5 {
            0 => WireMessage::Gyro {
                seq: rng() % 10_000,
                t: f(rng()),
                omega: f(rng()) * 10.0,
            },
            1 => WireMessage::Volt {
                seq: rng() % 10_000,
                v: f(rng()) * 100.0,
            },
            2 => WireMessage::Spd {
                seq: rng() % 10_000,
                wheel_rate: f(rng()) * 50.0,
            },
            3 => WireMessage::Sync {
                seq: rng() % 10_000,
                speed_diff: f(rng()),
                phase_diff: f(rng()),
            },
            _ => WireMessage::End { seq: rng() % 10_000 },
        };
        assert_eq!(decode(&encode(&msg)).unwrap(), msg);
    }
}
