use super::{cluster_lambdas, EventTimeline, MicroState, MultiplierVector, SparseProfile};
use crate::error::{Error, Result};

/// Tolerance on the value the multiplier recursion reaches at the right end of
/// a cluster.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Tolerance below zero accepted for pressure profile entries.
pub const PRESSURE_NEG_TOL: f64 = 1e-12;

/// Multipliers from the recursion `lambda_i = lambda_{i-1} - (u_i - u0_i) / n`.
///
/// The recursion is restarted at zero at every cluster boundary after checking
/// that it closed there, so `lambda_0 = lambda_n = 0` exactly.
pub fn multipliers_at(state: &MicroState, u0: &[f64]) -> Result<MultiplierVector> {
    let n = state.n();
    if u0.len() != n {
        return Err(Error::InputDomain(format!(
            "u0 has length {}, state has {n} particles",
            u0.len()
        )));
    }
    let scale = 1.0 + u0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let inv_n = 1.0 / n as f64;
    let mut lambdas = vec![0.0; n + 1];
    let mut closure_residual = 0.0_f64;
    for b in state.partition.blocks() {
        let mut lam = 0.0;
        for i in b.range() {
            lam -= inv_n * (state.velocities[i] - u0[i]);
            if i + 1 < b.end() {
                lambdas[i + 1] = lam;
            }
        }
        closure_residual = closure_residual.max(lam.abs());
        if lam.abs() > CLOSURE_TOL * scale {
            return Err(Error::InternalConsistency(format!(
                "multiplier recursion does not close on cluster {:?}: residual {lam:e}",
                b
            )));
        }
    }
    Ok(MultiplierVector {
        lambdas,
        closure_residual,
    })
}

/// One time-atom of the pressure measure: `p = sum delta_{t_e} (x) profile_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureAtom {
    pub time: f64,
    /// Indexed like the multipliers, `0..=n`.
    pub profile: SparseProfile,
}

impl PressureAtom {
    /// `integral over (0,1)` of the piecewise-affine interpolation of the
    /// profile, i.e. `(1/n) sum_k profile_k`.
    pub fn mass(&self) -> f64 {
        self.profile.sum() / self.profile.n() as f64
    }
}

/// Purely atomic pressure `p_i = d lambda_i / dt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PressureMeasure {
    pub atoms: Vec<PressureAtom>,
}

impl PressureMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(PressureAtom::mass).fold(0.0, |a, m| a + m)
    }

    pub fn min_entry(&self) -> f64 {
        self.atoms.iter().map(|a| a.profile.min()).fold(0.0, f64::min)
    }

    /// Profiles of all atoms summed at each contact, `0..=n`.
    pub fn summed_profile(&self, n: usize) -> Vec<f64> {
        let mut profile = vec![0.0; n + 1];
        for atom in &self.atoms {
            for (k, v) in atom.profile.entries() {
                profile[k] += v;
            }
        }
        profile
    }
}

/// Collects the multiplier jumps of a timeline into the atomic pressure
/// measure, checking nonnegativity and support.
pub fn pressure_measure(timeline: &EventTimeline) -> Result<PressureMeasure> {
    let mut atoms = Vec::with_capacity(timeline.events().len());
    for ev in timeline.events() {
        let mut active = vec![false; timeline.n() + 1];
        for c in &ev.merges {
            for k in c.merged.contacts() {
                active[k] = true;
            }
        }
        for (k, v) in ev.multiplier_jump.entries() {
            if v < -PRESSURE_NEG_TOL {
                return Err(Error::InvariantViolation(format!(
                    "pressure atom at t = {} has negative entry {v:e} at contact {k}",
                    ev.time
                )));
            }
            if v != 0.0 && !active[k] {
                return Err(Error::InvariantViolation(format!(
                    "pressure atom at t = {} charges contact {k} outside merged clusters",
                    ev.time
                )));
            }
        }
        atoms.push(PressureAtom {
            time: ev.time,
            profile: ev.multiplier_jump.clone(),
        });
    }
    Ok(PressureMeasure { atoms })
}

/// Multipliers of every cluster of `state`, using cluster velocities rather
/// than the state velocities. Used by the estimates sweep.
pub(crate) fn cluster_multiplier_extremes(
    u0: &[f64],
    block: super::Block,
    v: f64,
    n: usize,
) -> (f64, f64) {
    let (lam, _) = cluster_lambdas(u0, block, v, n);
    let max_abs = lam.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let max_step = block
        .range()
        .map(|i| (v - u0[i]).abs())
        .fold(0.0_f64, f64::max);
    (max_abs, max_step)
}
