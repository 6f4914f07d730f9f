//! CSV emission: header row, '.' decimal point, shortest round-trip
//! float formatting, no locale dependence. Reruns of the same manifest
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use cgmc_core::kmc::{Snapshot, TrajectorySample};

/// Render a float for CSV; shortest representation that round-trips.
pub fn fmt(value: f64) -> String {
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value.is_nan() {
        return "nan".into();
    }
    format!("{value}")
}

pub fn write_file(path: &Path, body: &str) -> std::io::Result<()> {
    std::fs::write(path, body)
}

/// `t,coverage` rows of one trajectory.
pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::with_capacity(32 * samples.len() + 16);
    out.push_str("t,coverage\n");
    for s in samples {
        let _ = writeln!(out, "{},{}", fmt(s.t), fmt(s.coverage));
    }
    out
}

/// Per-unit occupancy of a configuration snapshot.
pub fn snapshot_csv(snapshot: &Snapshot) -> String {
    let mut out = String::new();
    match snapshot {
        Snapshot::Micro(sigma) => {
            out.push_str("site,occupancy\n");
            for (x, &s) in sigma.spins().iter().enumerate() {
                let _ = writeln!(out, "{x},{s}");
            }
        }
        Snapshot::Coarse(eta) => {
            out.push_str("cell,occupancy\n");
            for (k, &b) in eta.blocks().iter().enumerate() {
                let _ = writeln!(out, "{k},{b}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.072, 1.0 / 3.0, 532.0, 1e-12, 0.0] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt(f64::INFINITY), "inf");
    }

    #[test]
    fn trajectory_rows() {
        let samples = vec![
            TrajectorySample {
                t: 0.0,
                coverage: 0.0,
                snapshot: None,
            },
            TrajectorySample {
                t: 0.5,
                coverage: 0.25,
                snapshot: None,
            },
        ];
        assert_eq!(trajectory_csv(&samples), "t,coverage\n0,0\n0.5,0.25\n");
    }
}
