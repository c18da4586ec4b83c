//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that they round-trip exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use congested_flow::dynamics::{multipliers_at, EventTimeline, PressureMeasure};
use congested_flow::eulerian::{snapshot, EulerianPressure};
use congested_flow::fields::{ConvergenceTable, DeltaPadding};

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path, header: &[&str]) -> io::Result<csv::Writer<BufWriter<File>>> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

fn finish(w: csv::Writer<BufWriter<File>>) -> io::Result<()> {
    w.into_inner().map_err(|e| e.into_error())?.flush()
}

/// One row per coalescence; `merged_range` is `first:last`, 1-based and
/// inclusive.
pub fn write_events(path: &Path, tl: &EventTimeline) -> io::Result<()> {
    let mut w = writer(path, &["t_event", "merged_range", "post_velocity"])?;
    for ev in tl.events() {
        for c in &ev.merges {
            let range = format!("{}:{}", c.merged.start + 1, c.merged.end());
            w.write_record([float(ev.time), range, float(c.post_velocity)])?;
        }
    }
    finish(w)
}

pub fn write_states(path: &Path, tl: &EventTimeline, times: &[f64]) -> io::Result<()> {
    let mut w = writer(path, &["t", "i", "x", "u"])?;
    let mut replay = tl.replay();
    for &t in times {
        replay.advance_to(t);
        let st = replay.state(t);
        for (i, (x, u)) in st.positions.iter().zip(&st.velocities).enumerate() {
            w.write_record([float(t), (i + 1).to_string(), float(*x), float(*u)])?;
        }
    }
    finish(w)
}

/// `lambda_k` at each sample time, `k = 0..=n`.
pub fn write_multipliers(path: &Path, tl: &EventTimeline, times: &[f64]) -> io::Result<()> {
    let mut w = writer(path, &["t", "k", "lambda"])?;
    let mut replay = tl.replay();
    for &t in times {
        replay.advance_to(t);
        let st = replay.state(t);
        let lam = multipliers_at(&st, tl.u0()).map_err(io::Error::other)?;
        for (k, v) in lam.lambdas.iter().enumerate() {
            w.write_record([float(t), k.to_string(), float(*v)])?;
        }
    }
    finish(w)
}

/// Lagrangian profiles of the pressure atoms: `(t_event, k, w = k/n, value)`.
pub fn write_pressure_atoms(path: &Path, pressure: &PressureMeasure, n: usize) -> io::Result<()> {
    let mut w = writer(path, &["t_event", "k", "w", "profile"])?;
    for atom in &pressure.atoms {
        for (k, v) in atom.profile.entries() {
            w.write_record([float(atom.time), k.to_string(), float(k as f64 / n as f64), float(v)])?;
        }
    }
    finish(w)
}

pub fn write_pressure(path: &Path, pressure: &EulerianPressure) -> io::Result<()> {
    let mut w = writer(path, &["t_event", "x_left", "x_right", "pressure_lineal_density"])?;
    for atom in &pressure.atoms {
        for s in &atom.segments {
            w.write_record([float(atom.time), float(s.x_left), float(s.x_right), float(s.lineal_density)])?;
        }
    }
    finish(w)
}

pub fn write_snapshots(path: &Path, tl: &EventTimeline, times: &[f64], padding: DeltaPadding) -> io::Result<()> {
    let mut w = writer(path, &["t", "x_left", "x_right", "density", "velocity"])?;
    let mut replay = tl.replay();
    for &t in times {
        replay.advance_to(t);
        let snap = snapshot(&replay.state(t), tl.cone(), padding);
        for c in &snap.cells {
            w.write_record([float(t), float(c.x_left), float(c.x_right), float(c.density), float(c.velocity)])?;
        }
    }
    finish(w)
}

pub fn write_convergence(path: &Path, table: &ConvergenceTable) -> io::Result<()> {
    let mut w = writer(
        path,
        &["n", "t", "dist_X_L2", "dist_U_L2", "dist_Lambda_L2", "pressure_mass", "bv_X", "oleinik_max"],
    )?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            float(r.t),
            float(r.dist_x_l2),
            float(r.dist_u_l2),
            float(r.dist_lambda_l2),
            float(r.pressure_mass),
            float(r.bv_x),
            float(r.oleinik_max),
        ])?;
    }
    finish(w)
}

/// `(w, simulated, sticky, rebound)` at the nodes `w = k/n`.
pub fn write_profiles(path: &Path, rows: &[(f64, f64, f64, f64)]) -> io::Result<()> {
    let mut w = writer(path, &["w", "simulated", "sticky", "rebound"])?;
    for &(a, b, c, d) in rows {
        w.write_record([float(a), float(b), float(c), float(d)])?;
    }
    finish(w)
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = writer(path, header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(float(0.25), "2.5000000000000000e-1");
    }
}
