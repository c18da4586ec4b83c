//! Checkers for the microscopic invariants.

use super::multipliers::cluster_multiplier_extremes;
use super::{EventTimeline, MicroState, MultiplierVector};
use crate::cone::{project_onto_cone, SpacingCone};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementarityReport {
    /// `max_k |lambda_k (x_k - x_{k-1} - 2r)|`.
    pub max_violation: f64,
    pub min_lambda: f64,
    /// `|lambda_n|` as stored.
    pub lambda_n: f64,
    pub passed: bool,
}

/// Signorini conditions: `lambda >= 0` and `lambda_k * (gap_k - 2r) = 0`.
pub fn verify_complementarity(
    cone: &SpacingCone,
    state: &MicroState,
    mult: &MultiplierVector,
    tol: f64,
) -> ComplementarityReport {
    let n = state.n();
    let x = &state.positions;
    let lam = &mult.lambdas;
    let mut max_violation = 0.0_f64;
    let mut min_lambda = f64::INFINITY;
    for k in 1..n {
        let excess = x[k] - x[k - 1] - cone.two_r();
        max_violation = max_violation.max((lam[k] * excess).abs());
        min_lambda = min_lambda.min(lam[k]);
    }
    let lambda_n = lam[n].abs().max(lam[0].abs());
    ComplementarityReport {
        max_violation,
        min_lambda,
        lambda_n,
        passed: max_violation <= tol && min_lambda >= -tol && lambda_n == 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OleinikReport {
    /// `max_i t (u_i - u_{i-1}) / (x_i - x_{i-1})`.
    pub max_ratio: f64,
    pub passed: bool,
}

/// One-sided slope bound `(u_i - u_{i-1}) / (x_i - x_{i-1}) < 1/t`.
pub fn verify_oleinik(state: &MicroState) -> Result<OleinikReport> {
    if !(state.time > 0.0) {
        return Err(Error::Precondition(format!(
            "the slope bound is vacuous at t = {}",
            state.time
        )));
    }
    let t = state.time;
    let max_ratio = state
        .positions
        .windows(2)
        .zip(state.velocities.windows(2))
        .map(|(x, u)| t * (u[1] - u[0]) / (x[1] - x[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OleinikReport {
        max_ratio,
        passed: max_ratio < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupReport {
    /// `|P_K(x(s) + (t-s) u(s)) - x(t)|_inf`.
    pub position_residual: f64,
    /// `|mean_{partition(t)} u(s) - u(t)|_inf`.
    pub velocity_residual: f64,
    pub passed: bool,
}

/// Restarting the projection formula from `(x(s), u(s))` must land on `x(t)`.
pub fn verify_semigroup(timeline: &EventTimeline, s: f64, t: f64, tol: f64) -> Result<SemigroupReport> {
    if !(0.0 <= s && s < t && t <= timeline.horizon()) {
        return Err(Error::Precondition(format!(
            "need 0 <= s < t <= {}, got s = {s}, t = {t}",
            timeline.horizon()
        )));
    }
    let mut replay = timeline.replay();
    replay.advance_to(s);
    let at_s = replay.state(s);
    replay.advance_to(t);
    let at_t = replay.state(t);
    let y: Vec<f64> = at_s
        .positions
        .iter()
        .zip(&at_s.velocities)
        .map(|(x, u)| x + (t - s) * u)
        .collect();
    let p = project_onto_cone(timeline.cone(), &y)?;
    let position_residual = max_abs_diff(&p, &at_t.positions);
    let projected_u = at_t.partition.block_means(&at_s.velocities);
    let velocity_residual = max_abs_diff(&projected_u, &at_t.velocities);
    Ok(SemigroupReport {
        position_residual,
        velocity_residual,
        passed: position_residual <= tol && velocity_residual <= tol,
    })
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatesReport {
    pub initial_u_norm: f64,
    /// `sup_t |u(t)|` in the rescaled norm.
    pub sup_u_norm: f64,
    pub sup_u_abs: f64,
    /// `sup n |lambda_i|`.
    pub sup_n_lambda: f64,
    /// `sup n |lambda_i - lambda_{i-1}|`.
    pub sup_n_lambda_step: f64,
    /// `(time, (1/n) sum u_i^2)` at `t = 0` and right after each event.
    pub energies: Vec<(f64, f64)>,
    pub energy_nonincreasing: bool,
    /// Every event merging clusters with distinct velocities lowered the energy.
    pub strict_dissipation: bool,
    pub passed: bool,
}

/// Uniform bounds and energy dissipation along a timeline.
pub fn verify_estimates(timeline: &EventTimeline) -> EstimatesReport {
    let n = timeline.n();
    let nf = n as f64;
    let u0 = timeline.u0();
    let mut sum_sq: f64 = u0.iter().map(|u| u * u).sum();
    let e0 = sum_sq / nf;
    let tol = 1e-12 * (1.0 + e0);
    let mut energies = vec![(0.0, e0)];
    let mut sup_u_abs = u0.iter().fold(0.0_f64, |m, u| m.max(u.abs()));
    let mut sup_lambda = 0.0_f64;
    let mut sup_step = 0.0_f64;
    let mut nonincreasing = true;
    let mut strict = true;
    let mut sup_energy = e0;

    let mut replay = timeline.replay();
    let mut velocity_at: Vec<f64> = u0.to_vec();
    while let Some(ev) = replay.step() {
        let before = sum_sq / nf;
        let mut expected_drop = 0.0;
        for c in &ev.merges {
            let v = c.post_velocity;
            for b in &c.blocks {
                let vb = velocity_at[b.start];
                sum_sq -= b.len as f64 * vb * vb;
                expected_drop += b.len as f64 * (vb - v) * (vb - v) / nf;
            }
            sum_sq += c.merged.len as f64 * v * v;
            velocity_at[c.merged.start] = v;
            sup_u_abs = sup_u_abs.max(v.abs());
            let (lam, step) = cluster_multiplier_extremes(u0, c.merged, v, n);
            sup_lambda = sup_lambda.max(nf * lam);
            sup_step = sup_step.max(step);
        }
        let after = sum_sq / nf;
        if after > before + tol {
            nonincreasing = false;
        }
        if expected_drop > 1e-10 * (1.0 + before) && !(after < before) {
            strict = false;
        }
        sup_energy = sup_energy.max(after);
        energies.push((ev.time, after));
    }
    let initial_u_norm = e0.sqrt();
    let sup_u_norm = sup_energy.max(0.0).sqrt();
    let finite = [sup_u_abs, sup_lambda, sup_step, sup_u_norm]
        .iter()
        .all(|v| v.is_finite());
    EstimatesReport {
        initial_u_norm,
        sup_u_norm,
        sup_u_abs,
        sup_n_lambda: sup_lambda,
        sup_n_lambda_step: sup_step,
        energies,
        energy_nonincreasing: nonincreasing,
        strict_dissipation: strict,
        passed: finite && nonincreasing && strict && sup_u_norm <= initial_u_norm * (1.0 + 1e-12) + 1e-15,
    }
}

/// True iff contacts never disappear: every coalescence merges clusters that
/// exist at that moment, and event times strictly increase.
pub fn active_set_monotone(timeline: &EventTimeline) -> bool {
    let n = timeline.n();
    let mut len_at = vec![0usize; n];
    for b in timeline.initial().partition.blocks() {
        len_at[b.start] = b.len;
    }
    let mut last_time = f64::NEG_INFINITY;
    for ev in timeline.events() {
        if !(ev.time > last_time) || ev.time > timeline.horizon() {
            return false;
        }
        last_time = ev.time;
        for c in &ev.merges {
            if c.blocks.len() < 2 {
                return false;
            }
            let mut next = c.merged.start;
            for b in &c.blocks {
                // Each constituent must be a whole current cluster; a part of a
                // cluster would mean a contact was released.
                if b.start != next || b.start >= n || len_at[b.start] != b.len {
                    return false;
                }
                next = b.end();
            }
            if next != c.merged.end() {
                return false;
            }
            for b in &c.blocks {
                len_at[b.start] = 0;
            }
            len_at[c.merged.start] = c.merged.len;
        }
    }
    true
}
