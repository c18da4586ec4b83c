//! Timing helpers for the projection kernel and the event-driven solver.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cone::{project_onto_cone_into, ProjectionWorkspace, SpacingCone};
use crate::dynamics::evolve;
use crate::error::Result;
use crate::scenarios::random_admissible;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub n: usize,
    /// Best of several trials, seconds per call.
    pub seconds: f64,
}

/// Minimum wall time per call of `f` over `trials` trials, each repeating
/// `f` until at least `min_seconds` have elapsed.
fn best_time(trials: usize, min_seconds: f64, mut f: impl FnMut()) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let start = Instant::now();
        let mut calls = 0u32;
        loop {
            f();
            calls += 1;
            let el = start.elapsed().as_secs_f64();
            if el >= min_seconds {
                best = best.min(el / calls as f64);
                break;
            }
        }
    }
    best
}

/// Cycles through `inputs`, so that the branch pattern of one input cannot be
/// learnt by the predictor across repetitions.
fn time_kernel(cone: &SpacingCone, inputs: &[Vec<f64>]) -> f64 {
    let mut ws = ProjectionWorkspace::default();
    let mut out = Vec::new();
    let mut sink = 0.0;
    let mut next = 0;
    let seconds = best_time(3, 0.05, || {
        project_onto_cone_into(cone, &inputs[next % inputs.len()], &mut ws, &mut out).expect("valid input");
        next += 1;
        sink += out[0];
    });
    std::hint::black_box(sink);
    seconds
}

/// Elements in the rotating pool of benchmark inputs.
const INPUT_POOL: usize = 1 << 20;

/// Projection of `n` i.i.d. uniform points of `(0, 1)` onto the canonical
/// cone, with buffers reused across calls and a fresh input for each call
/// (drawn from a pool of about 10^6 values).
pub fn time_projection(n: usize, seed: u64) -> Result<Timing> {
    let cone = SpacingCone::canonical(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..(INPUT_POOL / n).max(1))
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    Ok(Timing { n, seconds: time_kernel(&cone, &inputs) })
}

/// Projection of a point already in the cone.
pub fn time_projection_feasible(n: usize) -> Result<Timing> {
    let cone = SpacingCone::canonical(n)?;
    let y: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / n as f64).collect();
    Ok(Timing { n, seconds: time_kernel(&cone, &[y]) })
}

/// Full event-driven evolution of random admissible data up to `t = 2`.
pub fn time_evolve(n: usize, seed: u64) -> Result<Timing> {
    let cone = SpacingCone::canonical(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, u) = random_admissible(n, &mut rng);
    let mut sink = 0usize;
    let seconds = best_time(3, 0.05, || sink += evolve(&x, &u, &cone, 2.0).expect("admissible").events().len());
    std::hint::black_box(sink);
    Ok(Timing { n, seconds })
}

/// Worst ratio `(t_{k+1} / t_k) / (g(n_{k+1}) / g(n_k))` over consecutive
/// sizes, `None` with fewer than two timings.
pub fn growth_ratio(timings: &[Timing], model: impl Fn(f64) -> f64) -> Option<f64> {
    let mut sorted = timings.to_vec();
    sorted.sort_by_key(|t| t.n);
    sorted
        .windows(2)
        .map(|w| (w[1].seconds / w[0].seconds) / (model(w[1].n as f64) / model(w[0].n as f64)))
        .reduce(f64::max)
}

pub fn linear(n: f64) -> f64 {
    n
}

pub fn n_log_n(n: f64) -> f64 {
    n * n.ln()
}
