//! Reference scenarios: the two-block collision with its two continuations,
//! the selection of the sticky one by the particle dynamics, the contraction
//! of the first-order flow, and a small registry of named data.

mod analytic;

pub use analytic::{rebound_solution, sticky_solution, AnalyticSolution, Branch, ProfilePiece};

use rand::Rng;
use serde::Serialize;

use crate::cone::{rescaled_distance, SpacingCone};
use crate::dynamics::{evolve, ClusterPartition, EventTimeline};
use crate::error::{Error, Result};
use crate::fields::{build_fields, field_distance, DeltaPadding, FieldKind, Norm, PiecewiseField};
use crate::initdata::{quantile_sample, DensityPiece, MacroscopicDatum, VelocityPiece};

/// Relative tolerance for detecting `d_w X = 1`.
pub const SATURATION_TOL: f64 = 1e-10;

/// Allowed increase between consecutive samples of the contraction distance.
pub const CONTRACTION_TOL: f64 = 1e-12;

/// Two saturated blocks `[0, 1/2]` and `[1/2 + eta, 1 + eta]` moving towards
/// each other with unit speed.
pub fn two_block_datum(eta: f64) -> Result<MacroscopicDatum> {
    analytic::check_eta(eta)?;
    MacroscopicDatum::new(
        &[DensityPiece::new(0.0, 0.5, 1.0), DensityPiece::new(0.5 + eta, 1.0 + eta, 1.0)],
        &[VelocityPiece::constant(0.0, 0.5, 1.0), VelocityPiece::constant(0.5 + eta, 1.0 + eta, -1.0)],
    )
}

/// `rho = 1/2` on `[0, 2]`, `u(x) = 1 - x`. Every particle of the quantile
/// sample reaches contact at `t = 1/2`.
pub fn smooth_compression_datum() -> MacroscopicDatum {
    MacroscopicDatum::new(&[DensityPiece::new(0.0, 2.0, 0.5)], &[VelocityPiece::new(0.0, 2.0, 1.0, -1.0)])
        .expect("valid datum")
}

/// `rho = 1/2` on `[0, 2]` moving with constant speed.
pub fn rigid_translation_datum(speed: f64) -> Result<MacroscopicDatum> {
    if !speed.is_finite() {
        return Err(Error::InputDomain(format!("speed must be finite, got {speed}")));
    }
    MacroscopicDatum::new(&[DensityPiece::new(0.0, 2.0, 0.5)], &[VelocityPiece::constant(0.0, 2.0, speed)])
}

// ---------------------------------------------------------------------------
// Registry

pub const SCENARIO_NAMES: [&str; 3] = ["two-block", "smooth-compression", "rigid-translation"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Abs(f64),
    /// `c / n` for an `n`-particle run.
    PerParticle(f64),
}

impl Tolerance {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Tolerance::Abs(t) => t,
            Tolerance::PerParticle(c) => c / n as f64,
        }
    }
}

/// Expected value of a measured quantity of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub key: &'static str,
    pub value: f64,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub parameter: Option<f64>,
    pub datum: MacroscopicDatum,
    pub horizon: f64,
    pub expected: Vec<Expectation>,
}

/// Named scenario. `parameter` is `eta` for `two-block` (default `0.5`) and
/// the speed for `rigid-translation` (default `1`); `smooth-compression` takes
/// none.
pub fn named_scenario(name: &str, parameter: Option<f64>) -> Result<Scenario> {
    let e = |key, value, tolerance| Expectation { key, value, tolerance };
    match name {
        "two-block" => {
            let eta = parameter.unwrap_or(0.5);
            let t_star = 0.5 * eta;
            Ok(Scenario {
                name: "two-block",
                parameter: Some(eta),
                datum: two_block_datum(eta)?,
                horizon: t_star + 0.5,
                expected: vec![
                    e("event_count", 1.0, Tolerance::Abs(0.0)),
                    e("final_merge_time", t_star, Tolerance::Abs(1e-12)),
                    e("final_mean_velocity", 0.0, Tolerance::Abs(1e-12)),
                    e("final_velocity_spread", 0.0, Tolerance::Abs(1e-12)),
                    e("pressure_mass", 0.25, Tolerance::PerParticle(2.0)),
                ],
            })
        }
        "smooth-compression" => {
            if parameter.is_some() {
                return Err(Error::InputDomain("smooth-compression takes no parameter".into()));
            }
            Ok(Scenario {
                name: "smooth-compression",
                parameter: None,
                datum: smooth_compression_datum(),
                horizon: 1.0,
                expected: vec![
                    e("final_merge_time", 0.5, Tolerance::Abs(1e-12)),
                    e("final_mean_velocity", 0.0, Tolerance::PerParticle(1.5)),
                    e("final_velocity_spread", 0.0, Tolerance::Abs(1e-12)),
                    e("pressure_mass", 1.0 / 6.0, Tolerance::PerParticle(1.0)),
                ],
            })
        }
        "rigid-translation" => {
            let speed = parameter.unwrap_or(1.0);
            Ok(Scenario {
                name: "rigid-translation",
                parameter: Some(speed),
                datum: rigid_translation_datum(speed)?,
                horizon: 1.0,
                expected: vec![
                    e("event_count", 0.0, Tolerance::Abs(0.0)),
                    e("final_mean_velocity", speed, Tolerance::Abs(1e-12)),
                    e("final_velocity_spread", 0.0, Tolerance::Abs(0.0)),
                    e("pressure_mass", 0.0, Tolerance::Abs(0.0)),
                ],
            })
        }
        other => Err(Error::InputDomain(format!(
            "unknown scenario {other:?}; expected one of {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestCheck {
    pub key: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Measures the quantities of `scenario.expected` on a run of it.
pub fn check_manifest(scenario: &Scenario, timeline: &EventTimeline) -> Vec<ManifestCheck> {
    let n = timeline.n();
    let last = timeline.state_at(timeline.horizon());
    let (lo, hi) = last
        .velocities
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &u| (a.min(u), b.max(u)));
    scenario
        .expected
        .iter()
        .map(|e| {
            let measured = match e.key {
                "event_count" => timeline.events().len() as f64,
                "final_merge_time" => timeline.events().last().map_or(f64::NAN, |ev| ev.time),
                "final_mean_velocity" => last.velocities.iter().sum::<f64>() / n as f64,
                "final_velocity_spread" => hi - lo,
                "pressure_mass" => crate::dynamics::pressure_measure(timeline).map_or(f64::NAN, |p| p.total_mass()),
                _ => f64::NAN,
            };
            let tolerance = e.tolerance.at(n);
            ManifestCheck {
                key: e.key,
                measured,
                expected: e.value,
                tolerance,
                passed: (measured - e.value).abs() <= tolerance,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Velocity projection

/// Replaces `u0` by its mean on every saturated component of `x`.
///
/// `x` is an affine position field whose first cell is the padding cell, as
/// built by [`crate::fields::FieldSnapshot::x_tilde`], and `u0` the step
/// velocity field on the same grid. A run of saturated cells `i..=j` ties the
/// particles `i - 1..=j`.
pub fn macroscopic_projection(x: &PiecewiseField, u0: &PiecewiseField) -> Result<PiecewiseField> {
    if x.kind() != FieldKind::Affine || u0.kind() != FieldKind::Constant {
        return Err(Error::InputDomain("expected an affine position and a step velocity".into()));
    }
    if x.breaks() != u0.breaks() {
        return Err(Error::InputDomain("position and velocity fields live on different grids".into()));
    }
    let m = x.n_cells();
    let mut values: Vec<f64> = (0..m).map(|k| u0.cell(k).2).collect();
    let saturated: Vec<bool> = (0..m).map(|k| (x.slope(k) - 1.0).abs() <= SATURATION_TOL).collect();
    let mut k = 0;
    while k < m {
        if !saturated[k] {
            k += 1;
            continue;
        }
        let mut j = k;
        while j + 1 < m && saturated[j + 1] {
            j += 1;
        }
        let tied = k.saturating_sub(1)..=j;
        let mean = values[tied.clone()].iter().sum::<f64>() / tied.clone().count() as f64;
        for v in &mut values[tied] {
            *v = mean;
        }
        k = j + 1;
    }
    Ok(PiecewiseField::constant_cells(&values))
}

// ---------------------------------------------------------------------------
// Selection test

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub eta: f64,
    pub n: usize,
    pub collision_time: f64,
    pub final_merge_time: f64,
    pub sample_times: Vec<f64>,
    /// `max |u_i|` after the last merge.
    pub max_post_velocity: f64,
    /// `max_t ||U_N - U_sticky||_{L2}` over the samples.
    pub dist_sticky_u: f64,
    /// `min_t ||U_N - U_rebound||_{L2}` over the samples.
    pub dist_rebound_u: f64,
    /// `||2w - 1||_{L2}`.
    pub rebound_norm: f64,
    /// `max_t ||X~_N - X_sticky||_{L2}`.
    pub dist_sticky_x: f64,
    /// `max_t ||U_N - projection of U0_N||_inf`.
    pub cluster_mean_defect: f64,
    pub pressure_mass: f64,
    /// `||P~_N - min(w, 1 - w)||_{L1}`.
    pub profile_l1_error: f64,
    pub merge_time_ok: bool,
    pub post_velocity_ok: bool,
    pub sticky_ok: bool,
    pub rebound_floor_ok: bool,
    pub cluster_mean_ok: bool,
    pub pressure_mass_ok: bool,
    pub profile_ok: bool,
    pub passed: bool,
}

/// Runs `n` particles from the two-block datum and compares the result with
/// both continuations.
pub fn selection_test(eta: f64, n: usize) -> Result<SelectionReport> {
    let datum = two_block_datum(eta)?;
    let sticky = sticky_solution(eta)?;
    let rebound = rebound_solution(eta)?;
    let t_star = sticky.collision_time();
    let horizon = t_star + 0.5;

    let (x0, u0) = quantile_sample(&datum, n)?;
    let cone = SpacingCone::canonical(n)?;
    let timeline = evolve(&x0, &u0, &cone, horizon)?;
    let trace = build_fields(&timeline, DeltaPadding::default())?;

    let final_merge_time = timeline.events().last().map_or(f64::NAN, |e| e.time);
    let after = if final_merge_time.is_finite() { final_merge_time.max(t_star) } else { t_star };
    let sample_times: Vec<f64> = [0.1, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|s| after + s * (horizon - after))
        .collect();

    let u0_step = PiecewiseField::constant_cells(&u0);
    let rebound_norm = (1.0f64 / 3.0).sqrt();
    let mut dist_sticky_u = 0.0f64;
    let mut dist_rebound_u = f64::INFINITY;
    let mut dist_sticky_x = 0.0f64;
    let mut cluster_mean_defect = 0.0f64;
    let mut max_post_velocity = 0.0f64;
    for snap in trace.snapshots(&sample_times)? {
        let t = snap.time();
        let u_n = snap.u_step();
        let (xs, us) = sticky.fields_at(t);
        let (_, ur) = rebound.fields_at(t);
        dist_sticky_u = dist_sticky_u.max(field_distance(&u_n, &us, Norm::L2));
        dist_rebound_u = dist_rebound_u.min(field_distance(&u_n, &ur, Norm::L2));
        dist_sticky_x = dist_sticky_x.max(field_distance(&snap.x_tilde(), &xs, Norm::L2));
        let projected = macroscopic_projection(&snap.x_tilde(), &u0_step)?;
        cluster_mean_defect = cluster_mean_defect.max(field_distance(&u_n, &projected, Norm::Linf));
        max_post_velocity = snap.state.velocities.iter().fold(max_post_velocity, |m, u| m.max(u.abs()));
    }

    let profile = trace.pressure().summed_profile(n);
    let pressure_mass = trace.pressure().total_mass();
    let profile_l1_error = field_distance(
        &PiecewiseField::affine_nodes(&profile),
        &sticky.profile_field().expect("sticky profile is piecewise affine"),
        Norm::L1,
    );

    let nf = n as f64;
    let merge_time_ok = (final_merge_time - t_star).abs() <= 1e-12;
    let post_velocity_ok = max_post_velocity <= 1e-12;
    let sticky_ok = dist_sticky_u <= 1e-10;
    let rebound_floor_ok = dist_rebound_u >= 0.5 * rebound_norm;
    let cluster_mean_ok = cluster_mean_defect <= 1e-12;
    let pressure_mass_ok = (pressure_mass - sticky.pressure_mass()).abs() <= 2.0 / nf;
    let profile_ok = profile_l1_error <= 4.0 / nf;
    let passed = merge_time_ok
        && post_velocity_ok
        && sticky_ok
        && rebound_floor_ok
        && cluster_mean_ok
        && pressure_mass_ok
        && profile_ok;
    Ok(SelectionReport {
        eta,
        n,
        collision_time: t_star,
        final_merge_time,
        sample_times,
        max_post_velocity,
        dist_sticky_u,
        dist_rebound_u,
        rebound_norm,
        dist_sticky_x,
        cluster_mean_defect,
        pressure_mass,
        profile_l1_error,
        merge_time_ok,
        post_velocity_ok,
        sticky_ok,
        rebound_floor_ok,
        cluster_mean_ok,
        pressure_mass_ok,
        profile_ok,
        passed,
    })
}

// ---------------------------------------------------------------------------
// Contraction

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// Rescaled distance between the two runs at each time.
    pub distances: Vec<f64>,
    /// Largest increase between consecutive samples (negative if strictly
    /// decreasing).
    pub max_increase: f64,
    pub passed: bool,
}

/// Evolves `(x0, u0)` and `(x0_perturbed, u0)` and samples their distance at
/// `samples` uniform times in `[0, horizon]`.
pub fn first_order_contraction_test(
    x0: &[f64],
    u0: &[f64],
    x0_perturbed: &[f64],
    cone: &SpacingCone,
    horizon: f64,
    samples: usize,
) -> Result<ContractionReport> {
    if samples < 2 {
        return Err(Error::InputDomain("need at least two sample times".into()));
    }
    let a = evolve(x0, u0, cone, horizon)?;
    let b = evolve(x0_perturbed, u0, cone, horizon)?;
    let times: Vec<f64> = (0..samples).map(|k| horizon * k as f64 / (samples - 1) as f64).collect();
    let (mut ra, mut rb) = (a.replay(), b.replay());
    let mut distances = Vec::with_capacity(samples);
    for &t in &times {
        ra.advance_to(t);
        rb.advance_to(t);
        distances.push(rescaled_distance(&ra.state(t).positions, &rb.state(t).positions));
    }
    let max_increase = distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(ContractionReport {
        times,
        distances,
        max_increase,
        passed: max_increase <= CONTRACTION_TOL,
    })
}

// ---------------------------------------------------------------------------
// Random data

/// Admissible data in canonical scaling: about 30% of adjacent pairs in
/// contact, other gaps `2r (1 + s)` with `s` uniform in `(0, 3)`, one uniform
/// velocity in `(-1, 1)` per cluster.
pub fn random_admissible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one particle");
    let two_r = 1.0 / n as f64;
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    x.push(0.0);
    u.push(rng.gen_range(-1.0..1.0));
    for i in 1..n {
        if rng.gen_bool(0.3) {
            x.push(x[i - 1] + two_r);
            u.push(u[i - 1]);
        } else {
            x.push(x[i - 1] + two_r * (1.0 + rng.gen_range(0.0..3.0)));
            u.push(rng.gen_range(-1.0..1.0));
        }
    }
    (x, u)
}

/// Shifts every cluster of `x0` rigidly by an amount uniform in `(-e, e)`,
/// `e = amplitude * (smallest excess gap) / 4`, `amplitude` in `[0, 1]`.
/// Contacts are preserved and no new ones are created, so data admissible for
/// `x0` stay admissible.
pub fn rigid_cluster_perturbation<R: Rng + ?Sized>(
    x0: &[f64],
    cone: &SpacingCone,
    amplitude: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&amplitude) {
        return Err(Error::InputDomain(format!("amplitude must lie in [0, 1], got {amplitude}")));
    }
    cone.check_feasible(x0)?;
    let partition = ClusterPartition::from_contacts(cone, x0);
    let active = partition.active_contacts();
    let min_gap = cone
        .excess_gaps(x0)
        .iter()
        .zip(&active[1..])
        .filter(|(_, &a)| !a)
        .map(|(g, _)| *g)
        .fold(f64::INFINITY, f64::min);
    let e = if min_gap.is_finite() { 0.25 * amplitude * min_gap } else { 0.25 * amplitude * cone.two_r() };
    let mut out = x0.to_vec();
    for b in partition.blocks() {
        let s = if e > 0.0 { rng.gen_range(-e..e) } else { 0.0 };
        for v in &mut out[b.range()] {
            *v += s;
        }
    }
    Ok(out)
}
