use rayon::prelude::*;

use crate::cone::SpacingCone;
use crate::dynamics::evolve;
use crate::error::{Error, Result};
use crate::initdata::{quantile_sample, MacroscopicDatum};

use super::trace::{build_fields, DeltaPadding};
use super::{field_distance, field_norm, Norm, PiecewiseField};

/// One `(n, t)` line of a convergence table. Distances are to the run with
/// the largest `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub dist_x_l2: f64,
    pub dist_u_l2: f64,
    pub dist_lambda_l2: f64,
    pub pressure_mass: f64,
    pub bv_x: f64,
    pub oleinik_max: f64,
}

/// Suprema over the sample times for one `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub sup_dist_x: f64,
    pub sup_dist_u: f64,
    pub sup_dist_lambda: f64,
    pub pressure_mass: f64,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub reference_n: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Sorted by `n`, reference excluded.
    pub summaries: Vec<ConvergenceSummary>,
    /// Least-squares slope of `-log(sup_dist_x)` against `log n`, when at
    /// least two nonzero distances are available.
    pub rate_x: Option<f64>,
    pub rate_u: Option<f64>,
    pub rate_lambda: Option<f64>,
}

impl ConvergenceTable {
    /// Whether `sup_dist_x` strictly decreases along the sorted `n`.
    pub fn x_monotone(&self) -> bool {
        self.summaries.windows(2).all(|w| w[1].sup_dist_x < w[0].sup_dist_x)
    }

    /// `max / min` of the pressure masses over all runs, including the
    /// reference. `None` when some mass vanishes.
    pub fn pressure_mass_ratio(&self) -> Option<f64> {
        let masses = self.rows.iter().map(|r| r.pressure_mass);
        let (lo, hi) = masses.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
        (lo > 0.0).then(|| hi / lo)
    }
}

struct Run {
    n: usize,
    x: Vec<PiecewiseField>,
    u: Vec<PiecewiseField>,
    lambda: Vec<PiecewiseField>,
    bv_x: Vec<f64>,
    oleinik: Vec<f64>,
    pressure_mass: f64,
    events: usize,
}

fn run_pipeline(
    datum: &MacroscopicDatum,
    n: usize,
    horizon: f64,
    times: &[f64],
    padding: DeltaPadding,
) -> Result<Run> {
    let (x0, u0) = quantile_sample(datum, n)?;
    let cone = SpacingCone::canonical(n)?;
    let tl = evolve(&x0, &u0, &cone, horizon)?;
    let trace = build_fields(&tl, padding)?;
    let snaps = trace.snapshots(times)?;
    let mut run = Run {
        n,
        x: Vec::new(),
        u: Vec::new(),
        lambda: Vec::new(),
        bv_x: Vec::new(),
        oleinik: Vec::new(),
        pressure_mass: trace.pressure().total_mass(),
        events: tl.events().len(),
    };
    for s in snaps {
        let x = s.x_tilde();
        run.bv_x.push(field_norm(&x, Norm::BV));
        let nodes = s.position_nodes();
        let vel = s.velocity_nodes();
        let t = s.time();
        let ratio = (1..nodes.len())
            .map(|i| t * (vel[i] - vel[i - 1]) / (nodes[i] - nodes[i - 1]))
            .fold(f64::NEG_INFINITY, f64::max);
        run.oleinik.push(ratio);
        run.x.push(x);
        run.u.push(s.u_tilde());
        run.lambda.push(s.lambda_tilde());
    }
    Ok(run)
}

fn fit_rate(points: impl Iterator<Item = (usize, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .filter(|(_, d)| *d > 0.0)
        .map(|(n, d)| ((n as f64).ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Self-convergence study: runs the pipeline for every `n` (in parallel on
/// the current rayon pool) and measures the affine fields against the run
/// with the largest `n`. Output is ordered by `n`, then by time.
pub fn convergence_study(
    datum: &MacroscopicDatum,
    n_list: &[usize],
    horizon: f64,
    sample_times: &[f64],
    padding: DeltaPadding,
) -> Result<ConvergenceTable> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() {
        return Err(Error::InputDomain("empty list of particle counts".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InputDomain(format!("horizon {horizon} must be finite and nonnegative")));
    }
    let mut times = sample_times.to_vec();
    times.sort_by(f64::total_cmp);
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(Error::InputDomain(format!("sample times must lie in [0, {horizon}]")));
    }

    let runs: Vec<Run> = ns
        .par_iter()
        .map(|&n| run_pipeline(datum, n, horizon, &times, padding))
        .collect::<Result<_>>()?;
    let reference = runs.last().expect("nonempty");

    let mut rows = Vec::with_capacity(runs.len() * times.len());
    let mut summaries = Vec::new();
    for run in &runs {
        let mut sup = (0.0f64, 0.0f64, 0.0f64);
        for (k, &t) in times.iter().enumerate() {
            let dx = field_distance(&run.x[k], &reference.x[k], Norm::L2);
            let du = field_distance(&run.u[k], &reference.u[k], Norm::L2);
            let dl = field_distance(&run.lambda[k], &reference.lambda[k], Norm::L2);
            sup = (sup.0.max(dx), sup.1.max(du), sup.2.max(dl));
            rows.push(ConvergenceRow {
                n: run.n,
                t,
                dist_x_l2: dx,
                dist_u_l2: du,
                dist_lambda_l2: dl,
                pressure_mass: run.pressure_mass,
                bv_x: run.bv_x[k],
                oleinik_max: run.oleinik[k],
            });
        }
        if run.n != reference.n {
            summaries.push(ConvergenceSummary {
                n: run.n,
                sup_dist_x: sup.0,
                sup_dist_u: sup.1,
                sup_dist_lambda: sup.2,
                pressure_mass: run.pressure_mass,
                events: run.events,
            });
        }
    }
    Ok(ConvergenceTable {
        reference_n: reference.n,
        rate_x: fit_rate(summaries.iter().map(|s| (s.n, s.sup_dist_x))),
        rate_u: fit_rate(summaries.iter().map(|s| (s.n, s.sup_dist_u))),
        rate_lambda: fit_rate(summaries.iter().map(|s| (s.n, s.sup_dist_lambda))),
        rows,
        summaries,
    })
}
