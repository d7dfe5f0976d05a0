//! Trajectory telemetry as CSV with 17-significant-digit floats.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use thiserror::Error;
use twip_core::numfmt::{parse_finite, sci17};
use twip_core::{Trajectory, TrajectorySample};

/// Exact column header of the telemetry format.
pub const HEADER: &str = "t,phi,phi_dot,tau_cmd,v_cmd,wheel_rate,x,x_dot";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("bad header: expected `{HEADER}`, got `{0}`")]
    Header(String),
    #[error("row {row}: expected 8 numeric fields")]
    Row { row: usize },
    #[error("file has no data rows")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Writes a trajectory; every number renders with 17 significant digits so
/// the file round-trips bit-exactly.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<(), CsvError> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{HEADER}")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            sci17(s.t),
            sci17(s.phi),
            sci17(s.phi_dot),
            sci17(s.tau_cmd),
            sci17(s.v_cmd),
            sci17(s.wheel_rate),
            sci17(s.x),
            sci17(s.x_dot),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`].
pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory, CsvError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| CsvError::Header(String::new()))?;
    if header.trim_end() != HEADER {
        return Err(CsvError::Header(header));
    }
    let mut traj = Trajectory::default();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .filter_map(parse_finite)
            .collect();
        if fields.len() != 8 || line.split(',').count() != 8 {
            return Err(CsvError::Row { row: idx + 2 });
        }
        traj.samples.push(TrajectorySample {
            t: fields[0],
            phi: fields[1],
            phi_dot: fields[2],
            tau_cmd: fields[3],
            v_cmd: fields[4],
            wheel_rate: fields[5],
            x: fields[6],
            x_dot: fields[7],
        });
    }
    if traj.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traj() -> Trajectory {
        Trajectory {
            samples: vec![
                TrajectorySample {
                    t: 0.0,
                    phi: -0.1,
                    phi_dot: 4.0,
                    tau_cmd: 8.15,
                    v_cmd: 1.0 / 3.0,
                    wheel_rate: 0.0,
                    x: 0.0,
                    x_dot: 0.0,
                },
                TrajectorySample {
                    t: 0.01,
                    phi: std::f64::consts::PI,
                    phi_dot: -2.0,
                    tau_cmd: -3.25e3,
                    v_cmd: 1e-17,
                    wheel_rate: 0.5,
                    x: 1e-3,
                    x_dot: 0.1,
                },
            ],
        }
    }

    #[test]
    fn round_trips_bit_exactly() {
        let traj = sample_traj();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn rejects_foreign_header() {
        let err = read_trajectory("time,angle\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CsvError::Header(_)));
    }

    #[test]
    fn rejects_short_rows() {
        let text = format!("{HEADER}\n1.0,2.0\n");
        let err = read_trajectory(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CsvError::Row { row: 2 }));
    }

    #[test]
    fn rejects_empty_files() {
        let text = format!("{HEADER}\n");
        assert!(matches!(
            read_trajectory(text.as_bytes()).unwrap_err(),
            CsvError::Empty
        ));
    }
}
