use crate::cone::SpacingCone;
use crate::dynamics::{
    multipliers_at, pressure_measure, EventTimeline, MicroState, MultiplierVector, PressureMeasure,
};
use crate::error::{Error, Result};

use super::PiecewiseField;

/// Distance `delta` between the fictitious particle `x_0` and the first
/// particle, beyond the contact distance: `x_0 = x_1 - 2r - delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPadding {
    delta: f64,
}

impl DeltaPadding {
    pub const DEFAULT: f64 = 0.1;

    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InputDomain(format!("padding delta must be positive, got {delta}")));
        }
        Ok(DeltaPadding { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for DeltaPadding {
    fn default() -> Self {
        DeltaPadding { delta: Self::DEFAULT }
    }
}

/// Particle state and multipliers at one time, with the fictitious particle.
/// The fictitious particle moves with the first particle.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub state: MicroState,
    pub multipliers: MultiplierVector,
    pub fictitious_position: f64,
    pub two_r: f64,
}

impl FieldSnapshot {
    pub fn new(state: MicroState, multipliers: MultiplierVector, cone: &SpacingCone, padding: DeltaPadding) -> Self {
        let fictitious_position = state.positions[0] - cone.two_r() - padding.delta();
        FieldSnapshot {
            state,
            multipliers,
            fictitious_position,
            two_r: cone.two_r(),
        }
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn n(&self) -> usize {
        self.state.n()
    }

    /// Nodes `x_0..x_n`, including the fictitious particle.
    pub fn position_nodes(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n() + 1);
        v.push(self.fictitious_position);
        v.extend_from_slice(&self.state.positions);
        v
    }

    /// Nodes `u_0..u_n` with `u_0 = u_1`.
    pub fn velocity_nodes(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n() + 1);
        v.push(self.state.velocities[0]);
        v.extend_from_slice(&self.state.velocities);
        v
    }

    pub fn x_step(&self) -> PiecewiseField {
        PiecewiseField::constant_cells(&self.state.positions)
    }

    pub fn x_tilde(&self) -> PiecewiseField {
        PiecewiseField::affine_nodes(&self.position_nodes())
    }

    pub fn u_step(&self) -> PiecewiseField {
        PiecewiseField::constant_cells(&self.state.velocities)
    }

    pub fn u_tilde(&self) -> PiecewiseField {
        PiecewiseField::affine_nodes(&self.velocity_nodes())
    }

    /// `lambda_i` on cell `i`; the last cell carries `lambda_n = 0`.
    pub fn lambda_step(&self) -> PiecewiseField {
        PiecewiseField::constant_cells(&self.multipliers.lambdas[1..])
    }

    pub fn lambda_tilde(&self) -> PiecewiseField {
        PiecewiseField::affine_nodes(&self.multipliers.lambdas)
    }

    /// `n (x_i - x_{i-1} - 2r)` for cells `i = 1..n`: the excess of the slope
    /// of the affine position field over its minimum (`1` in canonical scaling).
    pub fn slope_excess(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let nodes = self.position_nodes();
        nodes.windows(2).map(|w| n * (w[1] - w[0] - self.two_r)).collect()
    }
}

/// Lagrangian description of a timeline: the timeline itself, its pressure
/// measure and the padding of the affine interpolants.
#[derive(Debug, Clone)]
pub struct FieldTrace {
    timeline: EventTimeline,
    pressure: PressureMeasure,
    padding: DeltaPadding,
}

impl FieldTrace {
    pub fn timeline(&self) -> &EventTimeline {
        &self.timeline
    }

    pub fn pressure(&self) -> &PressureMeasure {
        &self.pressure
    }

    pub fn padding(&self) -> DeltaPadding {
        self.padding
    }

    pub fn n(&self) -> usize {
        self.timeline.n()
    }

    /// `0`, every event time, and the horizon.
    pub fn time_grid(&self) -> Vec<f64> {
        let mut g = vec![0.0];
        g.extend(self.timeline.event_times());
        if *g.last().unwrap() < self.timeline.horizon() {
            g.push(self.timeline.horizon());
        }
        g
    }

    fn snapshot_of(&self, state: MicroState) -> Result<FieldSnapshot> {
        let m = multipliers_at(&state, self.timeline.u0())?;
        Ok(FieldSnapshot::new(state, m, self.timeline.cone(), self.padding))
    }

    pub fn snapshot(&self, t: f64) -> Result<FieldSnapshot> {
        self.snapshot_of(self.timeline.state_at(t))
    }

    /// Snapshots at nondecreasing times.
    pub fn snapshots(&self, times: &[f64]) -> Result<Vec<FieldSnapshot>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InputDomain("sample times must be nondecreasing".into()));
        }
        let mut replay = self.timeline.replay();
        times
            .iter()
            .map(|&t| {
                replay.advance_to(t);
                self.snapshot_of(replay.state(t))
            })
            .collect()
    }
}

/// Attaches the pressure measure and the padding to a timeline.
pub fn build_fields(timeline: &EventTimeline, padding: DeltaPadding) -> Result<FieldTrace> {
    let pressure = pressure_measure(timeline)?;
    // The fictitious particle copies the velocity of the first one, so its gap
    // never changes; check that it is resolvable next to the positions.
    let x1 = timeline.initial().positions[0];
    let gap = x1 - (x1 - timeline.cone().two_r() - padding.delta()) - timeline.cone().two_r();
    if !(gap > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "padding delta = {} is lost to rounding next to x_1 = {x1}",
            padding.delta()
        )));
    }
    Ok(FieldTrace {
        timeline: timeline.clone(),
        pressure,
        padding,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdeReport {
    /// `max |u_i - u0_i + n (lambda_i - lambda_{i-1})|` over inter-event windows.
    pub order1_residual: f64,
    /// `max |du_i + n (p_i - p_{i-1})|` over events.
    pub order2_residual: f64,
    /// `max |lambda_k| * slope excess` on the cell right of node `k`.
    pub lambda_complementarity: f64,
    /// Same with atom profiles at the event times.
    pub pressure_complementarity: f64,
    /// Smallest slope excess of the affine position field; nonnegative.
    pub min_slope_excess: f64,
    pub passed: bool,
}

/// Checks the first-order system between events and the atomic momentum
/// balance at events.
///
/// Node `k` of the multiplier field sits between particles `k` and `k + 1`
/// (1-based), so complementarity pairs it with the cell to its right, the
/// one spanning that gap.
pub fn verify_discrete_pde(trace: &FieldTrace, tol: f64) -> Result<DiscretePdeReport> {
    let tl = &trace.timeline;
    let n = tl.n();
    let nf = n as f64;
    let u0 = tl.u0();
    let mut order1: f64 = 0.0;
    let mut order2: f64 = 0.0;
    let mut lam_c: f64 = 0.0;
    let mut p_c: f64 = 0.0;
    let mut min_excess = f64::INFINITY;
    let mut scratch = vec![0.0; n + 1];

    let mut replay = tl.replay();
    let mut t = 0.0;
    loop {
        let snap = trace.snapshot_of(replay.state(t))?;
        let lam = &snap.multipliers.lambdas;
        for j in 0..n {
            let r = snap.state.velocities[j] - u0[j] + nf * (lam[j + 1] - lam[j]);
            order1 = order1.max(r.abs());
        }
        let excess = snap.slope_excess();
        min_excess = excess.iter().copied().fold(min_excess, f64::min);
        for k in 1..n {
            lam_c = lam_c.max((lam[k] * excess[k]).abs());
        }

        let Some(te) = replay.next_event_time() else { break };
        let before = replay.state(te);
        let ev = replay.step().expect("event exists");
        let after = replay.state(te);
        for (k, v) in ev.multiplier_jump.entries() {
            scratch[k] = v;
        }
        let excess_after = FieldSnapshot::new(after.clone(), snap.multipliers.clone(), tl.cone(), trace.padding)
            .slope_excess();
        for (k, v) in ev.multiplier_jump.entries() {
            p_c = p_c.max((v * excess_after[k]).abs());
        }
        for c in &ev.merges {
            for j in c.merged.range() {
                let du = after.velocities[j] - before.velocities[j];
                order2 = order2.max((du + nf * (scratch[j + 1] - scratch[j])).abs());
            }
        }
        for (k, _) in ev.multiplier_jump.entries() {
            scratch[k] = 0.0;
        }
        t = te;
    }
    let passed = order1 <= tol && order2 <= tol && lam_c <= tol && p_c <= tol && min_excess >= -tol;
    Ok(DiscretePdeReport {
        order1_residual: order1,
        order2_residual: order2,
        lambda_complementarity: lam_c,
        pressure_complementarity: p_c,
        min_slope_excess: min_excess,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OleinikFieldReport {
    pub time: f64,
    /// `max t * (slope of U~) / (slope of X~)` over cells.
    pub max_ratio: f64,
    /// `||d_w U~(t)||_L1 = sum |u_i - u_{i-1}|`.
    pub l1_du: f64,
    /// `2 (x_n - x_0) / t - (u_n - u_0)`, infinite at `t = 0`.
    pub l1_bound: f64,
    pub passed: bool,
}

/// One-sided slope bound `d_w U~ < d_w X~ / t` and the `L1` bound on
/// `d_w U~` that follows from it.
pub fn oleinik_field_check(trace: &FieldTrace, t: f64) -> Result<OleinikFieldReport> {
    if !(t >= 0.0) {
        return Err(Error::InputDomain(format!("time {t} is negative")));
    }
    let snap = trace.snapshot(t)?;
    let x = snap.position_nodes();
    let u = snap.velocity_nodes();
    let n = snap.n();
    let mut max_ratio = f64::NEG_INFINITY;
    let mut l1 = 0.0;
    for i in 1..=n {
        let du = u[i] - u[i - 1];
        max_ratio = max_ratio.max(t * du / (x[i] - x[i - 1]));
        l1 += du.abs();
    }
    let l1_bound = if t > 0.0 {
        2.0 * (x[n] - x[0]) / t - (u[n] - u[0])
    } else {
        f64::INFINITY
    };
    let slack = 1e-12 * (1.0 + l1_bound.abs());
    Ok(OleinikFieldReport {
        time: t,
        max_ratio,
        l1_du: l1,
        l1_bound,
        passed: max_ratio < 1.0 && l1 <= l1_bound + slack,
    })
}

/// Total mass `sum_e int_0^1 P~_e(w) dw` of the pressure atoms.
pub fn pressure_mass_bound(trace: &FieldTrace) -> f64 {
    trace.pressure.total_mass()
}

#[cfg(test)]
mod tests {
    use super::super::{field_distance, field_norm, Norm};
    use super::*;
    use crate::dynamics::evolve;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_particle_trace() -> FieldTrace {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        let tl = evolve(&[0.0, 2.0], &[1.0, -1.0], &cone, 1.0).unwrap();
        build_fields(&tl, DeltaPadding::default()).unwrap()
    }

    fn random_trace(n: usize, seed: u64) -> FieldTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cone = SpacingCone::canonical(n).unwrap();
        let mut x = vec![0.0];
        let mut u = vec![rng.gen_range(-1.0..1.0)];
        for _ in 1..n {
            let last = *x.last().unwrap();
            if rng.gen_bool(0.3) {
                x.push(last + cone.two_r());
                u.push(*u.last().unwrap());
            } else {
                x.push(last + cone.two_r() * (1.0 + rng.gen_range(0.0..2.0)));
                u.push(rng.gen_range(-1.0..1.0));
            }
        }
        let tl = evolve(&x, &u, &cone, 2.0).unwrap();
        build_fields(&tl, DeltaPadding::default()).unwrap()
    }

    #[test]
    fn padding_guard() {
        assert!(DeltaPadding::new(0.0).is_err());
        assert!(DeltaPadding::new(f64::NAN).is_err());
        assert_eq!(DeltaPadding::default().delta(), 0.1);
    }

    #[test]
    fn post_merge_step_field() {
        let tr = two_particle_trace();
        let s = tr.snapshot(1.0).unwrap();
        let x = s.x_step();
        assert_eq!(x.eval(0.25), 0.5);
        assert_eq!(x.eval(0.75), 1.5);
        assert_eq!(s.position_nodes(), vec![0.5 - 1.0 - 0.1, 0.5, 1.5]);
        assert_eq!(s.lambda_step().eval(0.25), 0.5);
        assert_eq!(s.lambda_step().eval(0.75), 0.0);
    }

    #[test]
    fn rigid_translation_has_no_multipliers() {
        let cone = SpacingCone::canonical(6).unwrap();
        let tl = evolve(&[0.0, 0.3, 0.5, 1.0, 1.2, 1.9], &[0.4; 6], &cone, 3.0).unwrap();
        let tr = build_fields(&tl, DeltaPadding::default()).unwrap();
        for s in tr.snapshots(&[0.0, 1.0, 3.0]).unwrap() {
            assert_eq!(field_norm(&s.lambda_tilde(), Norm::Linf), 0.0);
            assert_eq!(field_norm(&s.lambda_step(), Norm::Linf), 0.0);
        }
    }

    #[test]
    fn slopes_are_at_least_one() {
        let tr = random_trace(300, 11);
        for s in tr.snapshots(&[0.0, 0.5, 1.0, 2.0]).unwrap() {
            let f = s.x_tilde();
            for k in 0..f.n_cells() {
                assert!(f.slope(k) >= 1.0 - 1e-9, "cell {k}: {}", f.slope(k));
            }
            assert!(s.slope_excess().iter().all(|e| *e >= -1e-9));
            // BV of the affine position field is x_n - x_0.
            let nodes = s.position_nodes();
            let bv = field_norm(&f, Norm::BV);
            assert_abs_diff_eq!(bv, nodes[300] - nodes[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn step_and_affine_fields_differ_by_half_a_cell() {
        let tr = random_trace(128, 5);
        for s in tr.snapshots(&[0.0, 0.7, 1.9]).unwrap() {
            let nodes = s.position_nodes();
            let d = field_distance(&s.x_step(), &s.x_tilde(), Norm::L1);
            assert_abs_diff_eq!(d, (nodes[128] - nodes[0]) / 256.0, epsilon = 1e-12);
            // Lambda step vs interpolant, bounded by the largest increment.
            let lam = &s.multipliers.lambdas;
            let inc = lam.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            assert!(field_distance(&s.lambda_step(), &s.lambda_tilde(), Norm::Linf) <= inc + 1e-15);
        }
    }

    #[test]
    fn discrete_pde_free_flight() {
        let cone = SpacingCone::canonical(3).unwrap();
        let tl = evolve(&[0.0, 1.0, 2.0], &[-1.0, 0.0, 1.0], &cone, 5.0).unwrap();
        let tr = build_fields(&tl, DeltaPadding::default()).unwrap();
        let r = verify_discrete_pde(&tr, 0.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.order1_residual, 0.0);
    }

    #[test]
    fn discrete_pde_two_particle_merge() {
        let tr = two_particle_trace();
        let r = verify_discrete_pde(&tr, 1e-15).unwrap();
        assert!(r.passed, "{r:?}");
        // du = (-1, +1) against n (p_i - p_{i-1}) with p = (0, 0.5, 0).
        assert_eq!(r.order2_residual, 0.0);
        assert_eq!(tr.pressure().atoms[0].profile.to_dense(), vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn discrete_pde_random_sweep() {
        for seed in 0..3 {
            let tr = random_trace(200, seed);
            let r = verify_discrete_pde(&tr, 1e-10).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn oleinik_field_examples() {
        let tr = two_particle_trace();
        let r = oleinik_field_check(&tr, 1.0).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.passed);
        let r = oleinik_field_check(&tr, 0.25).unwrap();
        // The particle cell has ratio 0.25 * (-2) / 1.5; the padding cell 0.
        assert_eq!(r.max_ratio, 0.0);
        assert_eq!(r.l1_du, 2.0);
        assert!(r.l1_du <= r.l1_bound);

        let tr = random_trace(150, 9);
        for t in [0.1, 0.5, 1.3, 2.0] {
            let r = oleinik_field_check(&tr, t).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn pressure_mass_examples() {
        assert_abs_diff_eq!(pressure_mass_bound(&two_particle_trace()), 0.25, epsilon = 1e-16);
        let cone = SpacingCone::canonical(2).unwrap();
        let tl = evolve(&[0.0, 1.0], &[0.0, 1.0], &cone, 1.0).unwrap();
        assert_eq!(pressure_mass_bound(&build_fields(&tl, DeltaPadding::default()).unwrap()), 0.0);
    }
}
