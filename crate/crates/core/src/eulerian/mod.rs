//! Eulerian reconstruction of the particle solution: density, velocity and
//! pressure on the line, and weak-form residuals of the constrained
//! pressureless Euler system.
//!
//! Particle `i` carries mass `1/n`, which the snapshot spreads uniformly over
//! the gap to its left neighbour; the first particle uses the fictitious
//! particle of the Lagrangian fields. The density of a cell is therefore
//! `2r / dx`, equal to one exactly on contacts.

mod testfn;
mod weak;

pub use testfn::{test_family, TestFunction};
pub use weak::{weak_residual_mass, weak_residual_momentum};

use crate::cone::SpacingCone;
use crate::dynamics::MicroState;
use crate::error::{Error, Result};
use crate::fields::{field_distance, field_norm, DeltaPadding, FieldTrace, Norm};

/// Cell `(x_left, x_right)` carrying density and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianCell {
    pub x_left: f64,
    pub x_right: f64,
    pub density: f64,
    pub velocity: f64,
}

impl EulerianCell {
    pub fn width(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn mass(&self) -> f64 {
        self.density * self.width()
    }
}

/// Step density and velocity at one time. Cell `0` lies between the
/// fictitious particle and particle `1`; cell `k >= 1` between particles `k`
/// and `k + 1` (1-based), and carries the velocity of the right one.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianSnapshot {
    pub time: f64,
    pub cells: Vec<EulerianCell>,
}

impl EulerianSnapshot {
    /// Total mass; one in canonical scaling.
    pub fn mass(&self) -> f64 {
        self.cells.iter().map(EulerianCell::mass).sum()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.cells[0].x_left, self.cells[self.cells.len() - 1].x_right)
    }

    pub fn max_density(&self) -> f64 {
        self.cells.iter().map(|c| c.density).fold(0.0, f64::max)
    }

    pub fn min_density(&self) -> f64 {
        self.cells.iter().map(|c| c.density).fold(f64::INFINITY, f64::min)
    }
}

/// Push-forward of a particle state. Cells inside a cluster get density
/// exactly one.
pub fn snapshot(state: &MicroState, cone: &SpacingCone, padding: DeltaPadding) -> EulerianSnapshot {
    let x = &state.positions;
    let u = &state.velocities;
    let two_r = cone.two_r();
    let mut cells = Vec::with_capacity(x.len());
    let x_fict = x[0] - two_r - padding.delta();
    cells.push(EulerianCell {
        x_left: x_fict,
        x_right: x[0],
        density: two_r / (x[0] - x_fict),
        velocity: u[0],
    });
    for k in 1..x.len() {
        cells.push(EulerianCell {
            x_left: x[k - 1],
            x_right: x[k],
            density: two_r / (x[k] - x[k - 1]),
            velocity: u[k],
        });
    }
    for b in state.partition.blocks() {
        for k in b.contacts() {
            cells[k].density = 1.0;
        }
    }
    EulerianSnapshot {
        time: state.time,
        cells,
    }
}

/// Piece of a spatial pressure profile: constant lineal density on the gap
/// that closes contact `cell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSegment {
    pub cell: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub lineal_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerianPressureAtom {
    pub time: f64,
    pub segments: Vec<PressureSegment>,
}

impl EulerianPressureAtom {
    pub fn mass(&self) -> f64 {
        self.segments.iter().map(|s| s.lineal_density * (s.x_right - s.x_left)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EulerianPressure {
    pub atoms: Vec<EulerianPressureAtom>,
}

impl EulerianPressure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(EulerianPressureAtom::mass).fold(0.0, |a, m| a + m)
    }
}

/// Transports each pressure atom to physical space at its event time. The
/// jump `p_k` of the multiplier of contact `k` becomes lineal density `p_k`
/// on the gap between the two particles, so that `<d_x phi, p>` equals
/// `sum_k p_k (phi(x_k) - phi(x_{k-1}))`.
pub fn pressure_pushforward(trace: &FieldTrace) -> EulerianPressure {
    let tl = trace.timeline();
    let mut replay = tl.replay();
    let mut atoms = Vec::with_capacity(trace.pressure().atoms.len());
    for atom in &trace.pressure().atoms {
        replay.advance_to(atom.time);
        let x = replay.state(atom.time).positions;
        let segments = atom
            .profile
            .entries()
            .filter(|(_, v)| *v != 0.0)
            .map(|(k, v)| PressureSegment {
                cell: k,
                x_left: x[k - 1],
                x_right: x[k],
                lineal_density: v,
            })
            .collect();
        atoms.push(EulerianPressureAtom {
            time: atom.time,
            segments,
        });
    }
    EulerianPressure { atoms }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianComplementarityReport {
    /// `max (1 - density)` over cells charged by the atom; `0` if none.
    pub max_defect: f64,
    pub min_pressure: f64,
    pub passed: bool,
}

/// `(1 - rho) p = 0` and `p >= 0` for one atom against the snapshot at its
/// time.
pub fn complementarity_eulerian(
    snap: &EulerianSnapshot,
    atom: &EulerianPressureAtom,
) -> Result<EulerianComplementarityReport> {
    if snap.time != atom.time {
        return Err(Error::Precondition(format!(
            "snapshot at t = {} paired with an atom at t = {}",
            snap.time, atom.time
        )));
    }
    let mut defect: f64 = 0.0;
    let mut min_p: f64 = 0.0;
    for s in &atom.segments {
        let cell = snap.cells.get(s.cell).ok_or_else(|| {
            Error::Precondition(format!("atom charges cell {} outside the snapshot", s.cell))
        })?;
        if s.lineal_density > 0.0 {
            defect = defect.max(1.0 - cell.density);
        }
        min_p = min_p.min(s.lineal_density);
    }
    Ok(EulerianComplementarityReport {
        max_defect: defect,
        min_pressure: min_p,
        passed: defect <= 1e-10 && min_p >= -1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianOleinikReport {
    pub max_ratio: f64,
    pub passed: bool,
}

/// `t (u_k - u_{k-1}) / (x_k - x_{k-1})` over adjacent cells, which must stay
/// below one.
pub fn oleinik_eulerian(snap: &EulerianSnapshot) -> Result<EulerianOleinikReport> {
    let t = snap.time;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("Oleinik bound needs t > 0, got {t}")));
    }
    let max_ratio = snap
        .cells
        .windows(2)
        .map(|w| t * (w[1].velocity - w[0].velocity) / w[1].width())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EulerianOleinikReport {
        max_ratio,
        passed: max_ratio < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinReport {
    /// `||X~(t) - X~(s)||_L2`, an upper bound for `W2(rho(s), rho(t))`.
    pub distance: f64,
    /// `(t - s) sup ||U~||_L2` over `[s, t]`.
    pub bound: f64,
    pub passed: bool,
}

/// Time modulus of the density in the quadratic Wasserstein distance, through
/// the monotone coupling of the two snapshots.
pub fn wasserstein_time_modulus(trace: &FieldTrace, s: f64, t: f64) -> Result<WassersteinReport> {
    let horizon = trace.timeline().horizon();
    if !(0.0 <= s && s <= t && t <= horizon) {
        return Err(Error::Precondition(format!(
            "need 0 <= s <= t <= {horizon}, got s = {s}, t = {t}"
        )));
    }
    let mut times = vec![s];
    times.extend(trace.timeline().event_times().into_iter().filter(|&e| e > s && e <= t));
    times.push(t);
    let snaps = trace.snapshots(&times)?;
    let first = &snaps[0];
    let last = &snaps[snaps.len() - 1];
    let distance = field_distance(&last.x_tilde(), &first.x_tilde(), Norm::L2);
    let sup_u = snaps
        .iter()
        .map(|sn| field_norm(&sn.u_tilde(), Norm::L2))
        .fold(0.0, f64::max);
    let bound = (t - s) * sup_u;
    Ok(WassersteinReport {
        distance,
        bound,
        passed: distance <= bound * (1.0 + 1e-12) + 1e-14,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, trajectory_at};
    use crate::fields::build_fields;
    use approx::assert_abs_diff_eq;

    fn pad() -> DeltaPadding {
        DeltaPadding::default()
    }

    #[test]
    fn packed_block_is_saturated() {
        let n = 8;
        let cone = SpacingCone::canonical(n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 0.3 + i as f64 / n as f64).collect();
        let s = trajectory_at(&x, &[0.2; 8], &cone, 0.0).unwrap();
        let snap = snapshot(&s, &cone, pad());
        assert!(snap.cells[1..].iter().all(|c| c.density == 1.0));
        assert_abs_diff_eq!(snap.mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dilute_spacing_gives_half_density() {
        let n = 10;
        let cone = SpacingCone::canonical(n).unwrap();
        let x: Vec<f64> = (1..=n).map(|i| 2.0 * i as f64 / n as f64).collect();
        let s = trajectory_at(&x, &[0.0; 10], &cone, 0.0).unwrap();
        let snap = snapshot(&s, &cone, pad());
        for c in &snap.cells[1..] {
            assert_abs_diff_eq!(c.density, 0.5, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(snap.mass(), 1.0, epsilon = 1e-14);
        let (a, b) = snap.support();
        assert!(b - a >= 1.0);
    }

    #[test]
    fn two_particle_post_merge() {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        let tl = evolve(&[0.0, 2.0], &[1.0, -1.0], &cone, 1.0).unwrap();
        let snap = snapshot(&tl.state_at(1.0), &cone, pad());
        assert_eq!(snap.cells[1].x_left, 0.5);
        assert_eq!(snap.cells[1].x_right, 1.5);
        assert_eq!(snap.cells[1].density, 1.0);

        let tr = build_fields(&tl, pad()).unwrap();
        let p = pressure_pushforward(&tr);
        assert_eq!(p.atoms.len(), 1);
        let seg = p.atoms[0].segments[0];
        assert_eq!((seg.x_left, seg.x_right, seg.lineal_density), (0.5, 1.5, 0.5));

        let at_event = snapshot(&tl.state_at(0.5), &cone, pad());
        let r = complementarity_eulerian(&at_event, &p.atoms[0]).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_defect, 0.0);

        let mut corrupted = at_event.clone();
        corrupted.cells[1].density = 0.9;
        assert!(!complementarity_eulerian(&corrupted, &p.atoms[0]).unwrap().passed);
        assert!(complementarity_eulerian(&snap, &p.atoms[0]).is_err());
    }

    #[test]
    fn empty_pressure() {
        let cone = SpacingCone::canonical(3).unwrap();
        let tl = evolve(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0], &cone, 1.0).unwrap();
        let p = pressure_pushforward(&build_fields(&tl, pad()).unwrap());
        assert!(p.atoms.is_empty());
        assert_eq!(p.total_mass(), 0.0);
    }

    #[test]
    fn eulerian_oleinik_mirrors_particles() {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        let s = trajectory_at(&[0.0, 2.0], &[1.0, -1.0], &cone, 0.25).unwrap();
        let r = oleinik_eulerian(&snapshot(&s, &cone, pad())).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 0.25 * -2.0 / 1.5, epsilon = 1e-15);
        assert!(r.passed);

        let s = trajectory_at(&[0.0, 2.0], &[-1.0, 1.0], &cone, 3.0).unwrap();
        let r = oleinik_eulerian(&snapshot(&s, &cone, pad())).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 6.0 / 8.0, epsilon = 1e-15);

        let s0 = trajectory_at(&[0.0, 2.0], &[-1.0, 1.0], &cone, 0.0).unwrap();
        assert!(oleinik_eulerian(&snapshot(&s0, &cone, pad())).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let cone = SpacingCone::canonical(5).unwrap();
        let c = -0.7;
        let tl = evolve(&[0.0, 0.4, 0.6, 1.5, 2.0], &[c; 5], &cone, 2.0).unwrap();
        let tr = build_fields(&tl, pad()).unwrap();
        assert_eq!(wasserstein_time_modulus(&tr, 0.5, 0.5).unwrap().distance, 0.0);
        let r = wasserstein_time_modulus(&tr, 0.25, 1.5).unwrap();
        assert_abs_diff_eq!(r.distance, 1.25 * 0.7, epsilon = 1e-14);
        assert!(r.passed);
        assert!(wasserstein_time_modulus(&tr, 1.0, 0.5).is_err());

        let cone = SpacingCone::canonical(3).unwrap();
        let tl = evolve(&[0.0, 1.0, 2.0], &[1.0, 0.0, -1.0], &cone, 2.0).unwrap();
        let tr = build_fields(&tl, pad()).unwrap();
        for (s, t) in [(0.0, 2.0), (0.3, 1.2), (1.0, 1.9)] {
            assert!(wasserstein_time_modulus(&tr, s, t).unwrap().passed);
        }
    }
}
