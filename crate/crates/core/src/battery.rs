//! The full invariant battery over one run, as a [`Report`].

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::{project_onto_cone, qp_oracle_project, ORACLE_MAX_N};
use crate::dynamics::{
    active_set_monotone, multipliers_at, verify_complementarity, verify_estimates, verify_oleinik,
    verify_semigroup, MergeEvent,
};
use crate::error::{Error, Result};
use crate::eulerian::{
    complementarity_eulerian, oleinik_eulerian, pressure_pushforward, snapshot, test_family,
    wasserstein_time_modulus, weak_residual_mass, weak_residual_momentum,
};
use crate::fields::{verify_discrete_pde, FieldTrace};
use crate::report::{Check, Report};

/// Largest `n` for which the battery runs the exhaustive projection oracle.
pub const BATTERY_ORACLE_N: usize = 12;

/// Deliberate corruption of the input of exactly one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips one multiplier negative before `lambda_min`.
    NegativeLambda,
    /// Adds a steep expansion to one state before `oleinik_max`.
    OleinikViolation,
    /// Inflates the padding cell of one snapshot before `eulerian_mass`.
    MassLeak,
    /// Drops the last event before `semigroup_residual`.
    MissingEvent,
}

impl Fault {
    pub const NAMES: [&'static str; 4] = ["negative-lambda", "oleinik", "mass-leak", "missing-event"];

    pub fn target_check(&self) -> &'static str {
        match self {
            Fault::NegativeLambda => "lambda_min",
            Fault::OleinikViolation => "oleinik_max",
            Fault::MassLeak => "eulerian_mass",
            Fault::MissingEvent => "semigroup_residual",
        }
    }
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative-lambda" => Ok(Fault::NegativeLambda),
            "oleinik" => Ok(Fault::OleinikViolation),
            "mass-leak" => Ok(Fault::MassLeak),
            "missing-event" => Ok(Fault::MissingEvent),
            other => Err(Error::InputDomain(format!(
                "unknown fault {other:?}; expected one of {}",
                Fault::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryOptions {
    /// Times in `[0, horizon]`; event times are added automatically.
    pub sample_times: Vec<f64>,
    pub semigroup_pairs: usize,
    pub seed: u64,
    pub weak_tol: f64,
    pub fault: Option<Fault>,
}

impl BatteryOptions {
    /// `samples` uniform times on `[0, horizon]`, 20 semigroup pairs, weak
    /// residual tolerance `1e-8`.
    pub fn uniform(horizon: f64, samples: usize) -> Self {
        let m = samples.max(2);
        BatteryOptions {
            sample_times: (0..m).map(|k| horizon * k as f64 / (m - 1) as f64).collect(),
            semigroup_pairs: 20,
            seed: 0,
            weak_tol: 1e-8,
            fault: None,
        }
    }
}

/// Runs every check on `trace`.
pub fn run_battery(trace: &FieldTrace, opts: &BatteryOptions) -> Result<Report> {
    let tl = trace.timeline();
    let cone = tl.cone();
    let n = tl.n();
    let horizon = tl.horizon();
    if opts.sample_times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::InputDomain(format!("sample times must lie in [0, {horizon}]")));
    }
    let mut times = opts.sample_times.clone();
    times.extend(tl.event_times());
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut states = Vec::with_capacity(times.len());
    let mut replay = tl.replay();
    for &t in &times {
        replay.advance_to(t);
        states.push(replay.state(t));
    }
    let mut report = Report::new();

    // Multipliers and complementarity.
    let mut max_violation = 0.0f64;
    let mut min_lambda = f64::INFINITY;
    let mut lambda_n_zero = true;
    for (i, st) in states.iter().enumerate() {
        let clean = multipliers_at(st, tl.u0())?;
        let c = verify_complementarity(cone, st, &clean, 1e-10);
        max_violation = max_violation.max(c.max_violation);
        lambda_n_zero &= c.lambda_n == 0.0;
        let mut lam = clean;
        if opts.fault == Some(Fault::NegativeLambda) && i + 1 == states.len() && n > 1 {
            lam.lambdas[1] = -1e-6;
        }
        min_lambda = min_lambda.min(verify_complementarity(cone, st, &lam, 1e-10).min_lambda);
    }
    if n == 1 {
        min_lambda = 0.0;
    }
    report.push(Check::at_most("complementarity_max", max_violation, 1e-10));
    report.push(Check::at_least("lambda_min", min_lambda, -1e-12));
    report.push(Check::flag("lambda_n_zero", lambda_n_zero));
    report.push(Check::at_least("pressure_min", trace.pressure().min_entry(), -1e-12));

    // Oleinik.
    let mut oleinik = f64::NEG_INFINITY;
    for st in states.iter().filter(|s| s.time > 0.0 && s.n() > 1) {
        let mut st = st.clone();
        if opts.fault == Some(Fault::OleinikViolation) {
            let k = st.n() - 1;
            st.velocities[k] += 2.0 * (st.positions[k] - st.positions[k - 1]) / st.time;
        }
        oleinik = oleinik.max(verify_oleinik(&st)?.max_ratio);
    }
    if oleinik == f64::NEG_INFINITY {
        oleinik = 0.0;
    }
    report.push(Check::below("oleinik_max", oleinik, 1.0));

    // Semigroup on random pairs.
    let shifted;
    let sg_timeline = if opts.fault == Some(Fault::MissingEvent) {
        let mut events: Vec<MergeEvent> = tl.events().to_vec();
        events.pop();
        shifted = tl.clone().with_events(events);
        &shifted
    } else {
        tl
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sg = 0.0f64;
    for _ in 0..opts.semigroup_pairs {
        let a = rng.gen_range(0.0..horizon);
        let b = rng.gen_range(0.0..horizon);
        let (s, t) = if a < b { (a, b) } else { (b, a) };
        if s < t {
            let r = verify_semigroup(sg_timeline, s, t, 1e-9)?;
            sg = sg.max(r.position_residual.max(r.velocity_residual));
        }
    }
    report.push(Check::at_most("semigroup_residual", sg, 1e-9));

    // Momentum and energy.
    let p0: f64 = tl.u0().iter().sum();
    let drift = states
        .iter()
        .map(|s| (s.velocities.iter().sum::<f64>() - p0).abs())
        .fold(0.0, f64::max);
    report.push(Check::at_most("momentum_drift", drift, 1e-12 * n as f64));
    let est = verify_estimates(tl);
    report.push(Check::flag("energy_nonincreasing", est.energy_nonincreasing));
    report.push(Check::flag("active_set_monotone", active_set_monotone(tl)));

    // Lagrangian fields.
    let pde = verify_discrete_pde(trace, 1e-10)?;
    report.push(Check::flag("discrete_pde", pde.passed).with_detail(format!(
        "order1 {:.3e}, order2 {:.3e}, lambda compl. {:.3e}, pressure compl. {:.3e}",
        pde.order1_residual, pde.order2_residual, pde.lambda_complementarity, pde.pressure_complementarity
    )));

    // Eulerian snapshots.
    let padding = trace.padding();
    let expected_mass = n as f64 * cone.two_r();
    let mut mass_err = 0.0f64;
    let mut rho_max = 0.0f64;
    let mut rho_min = f64::INFINITY;
    let mut contacts_saturated = true;
    let mut eu_oleinik = f64::NEG_INFINITY;
    for (i, st) in states.iter().enumerate() {
        let mut snap = snapshot(st, cone, padding);
        for b in st.partition.blocks() {
            contacts_saturated &= b.contacts().all(|k| snap.cells[k].density == 1.0);
        }
        if st.time > 0.0 && n > 1 {
            eu_oleinik = eu_oleinik.max(oleinik_eulerian(&snap)?.max_ratio);
        }
        if opts.fault == Some(Fault::MassLeak) && i == 0 {
            snap.cells[0].density *= 1.01;
        }
        mass_err = mass_err.max((snap.mass() - expected_mass).abs());
        rho_max = rho_max.max(snap.max_density());
        rho_min = rho_min.min(snap.min_density());
    }
    if eu_oleinik == f64::NEG_INFINITY {
        eu_oleinik = 0.0;
    }
    report.push(Check::at_most("eulerian_mass", mass_err, 1e-12));
    report.push(Check::at_most("eulerian_density_max", rho_max, 1.0 + 1e-12));
    report.push(Check::at_least("eulerian_density_min", rho_min, 0.0));
    report.push(Check::flag("eulerian_contact_density", contacts_saturated));
    report.push(Check::below("eulerian_oleinik_max", eu_oleinik, 1.0));

    let pressure = pressure_pushforward(trace);
    let mut eu_defect = 0.0f64;
    let mut eu_min_p = 0.0f64;
    for atom in &pressure.atoms {
        let st = tl.state_at(atom.time);
        let r = complementarity_eulerian(&snapshot(&st, cone, padding), atom)?;
        eu_defect = eu_defect.max(r.max_defect);
        eu_min_p = eu_min_p.min(r.min_pressure);
    }
    report.push(Check::at_most("eulerian_complementarity", eu_defect, 1e-10));
    report.push(Check::at_least("eulerian_pressure_min", eu_min_p, -1e-12));

    // Weak residuals over a family covering the swept region.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for st in &states {
        lo = lo.min(st.positions[0] - cone.two_r() - padding.delta());
        hi = hi.max(st.positions[n - 1]);
    }
    let pad = 0.1 * (hi - lo).max(1e-3);
    let family = test_family(horizon, lo - pad, hi + pad);
    let mut rm = 0.0f64;
    let mut rp = 0.0f64;
    for phi in &family {
        rm = rm.max(weak_residual_mass(trace, phi).abs());
        rp = rp.max(weak_residual_momentum(trace, phi).abs());
    }
    report.push(Check::at_most("weak_residual_mass", rm, opts.weak_tol));
    report.push(Check::at_most("weak_residual_momentum", rp, opts.weak_tol));

    // W2 time modulus between consecutive samples.
    let mut w2_ok = true;
    let mut w2_ratio = 0.0f64;
    for w in opts.sample_times.windows(2) {
        if w[0] < w[1] {
            let r = wasserstein_time_modulus(trace, w[0], w[1])?;
            w2_ok &= r.passed;
            if r.bound > 0.0 {
                w2_ratio = w2_ratio.max(r.distance / r.bound);
            }
        }
    }
    report.push(Check::flag("wasserstein_modulus", w2_ok).with_detail(format!("max distance/bound {w2_ratio:.6}")));

    // Exhaustive oracle on small systems.
    if n <= BATTERY_ORACLE_N.min(ORACLE_MAX_N) {
        let mut diff = 0.0f64;
        let mut certs = true;
        for &t in &opts.sample_times {
            let y: Vec<f64> = tl.x0().iter().zip(tl.u0()).map(|(x, u)| x + t * u).collect();
            let p = project_onto_cone(cone, &y)?;
            let (q, cert) = qp_oracle_project(cone, &y)?;
            certs &= cert.passed;
            diff = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(diff, f64::max);
        }
        report.push(Check::at_most("cone_oracle", diff, 1e-9));
        report.push(Check::flag("cone_oracle_certificates", certs));
    }
    Ok(report)
}
