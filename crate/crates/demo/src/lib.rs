//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Arrays cross the boundary flattened into `Float64Array`s; the row layout
//! of each is given on the method. Everything below the bindings is plain
//! Rust and is tested natively.

use wasm_bindgen::prelude::*;

use congested_flow::cone::SpacingCone;
use congested_flow::dynamics::{evolve, pressure_measure, EventTimeline};
use congested_flow::eulerian::snapshot;
use congested_flow::fields::DeltaPadding;
use congested_flow::initdata::quantile_sample;
use congested_flow::scenarios::{named_scenario, rebound_solution, sticky_solution, two_block_datum};
use congested_flow::Error;

/// Largest particle count the page will evolve.
pub const MAX_PARTICLES: usize = 20_000;

fn check_n(n: usize) -> Result<(), Error> {
    if (2..=MAX_PARTICLES).contains(&n) {
        Ok(())
    } else {
        Err(Error::InputDomain(format!("n must lie in 2..={MAX_PARTICLES}, got {n}")))
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One discretized run of a named scenario.
#[wasm_bindgen]
pub struct Simulation {
    timeline: EventTimeline,
    horizon: f64,
}

impl Simulation {
    /// `parameter` is the scenario parameter; `NaN` selects its default.
    pub fn build(scenario: &str, parameter: f64, n: usize) -> Result<Self, Error> {
        check_n(n)?;
        let s = named_scenario(scenario, (!parameter.is_nan()).then_some(parameter))?;
        let (x0, u0) = quantile_sample(&s.datum, n)?;
        let timeline = evolve(&x0, &u0, &SpacingCone::canonical(n)?, s.horizon)?;
        Ok(Simulation { timeline, horizon: s.horizon })
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, parameter: f64, n: usize) -> Result<Simulation, JsError> {
        Self::build(scenario, parameter, n).map_err(js)
    }

    pub fn n(&self) -> usize {
        self.timeline.n()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.timeline.event_times()
    }

    /// Total mass of the pressure atoms.
    pub fn pressure_mass(&self) -> f64 {
        pressure_measure(&self.timeline).map_or(f64::NAN, |p| p.total_mass())
    }

    /// Trajectories of at most `max_lines` evenly strided particles at
    /// `frames` uniform times in `[0, horizon]`. Row-major, one row per frame:
    /// `[t, x_a, x_b, ...]`.
    pub fn worldlines(&self, frames: usize, max_lines: usize) -> Vec<f64> {
        let n = self.timeline.n();
        let stride = n.div_ceil(max_lines.max(1));
        let frames = frames.max(2);
        let mut out = Vec::with_capacity(frames * (n / stride + 2));
        let mut replay = self.timeline.replay();
        for j in 0..frames {
            let t = self.horizon * j as f64 / (frames - 1) as f64;
            replay.advance_to(t);
            let st = replay.state(t);
            out.push(t);
            out.extend(st.positions.iter().step_by(stride));
        }
        out
    }

    /// Number of particles per row of [`Simulation::worldlines`].
    pub fn worldline_count(&self, max_lines: usize) -> usize {
        let n = self.timeline.n();
        n.div_ceil(n.div_ceil(max_lines.max(1)))
    }

    /// Eulerian density and velocity at time `t`, one cell per row:
    /// `[x_left, x_right, density, velocity]`. The first cell is the
    /// padding cell to the left of the first particle.
    pub fn density(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, self.horizon);
        let snap = snapshot(&self.timeline.state_at(t), self.timeline.cone(), DeltaPadding::default());
        snap.cells.iter().flat_map(|c| [c.x_left, c.x_right, c.density, c.velocity]).collect()
    }
}

/// Summed pressure profile of the `n`-particle two-block run against the
/// sticky and rebound continuations, one row per node `w = k/n`:
/// `[w, simulated, sticky, rebound]`.
pub fn profile_rows(eta: f64, n: usize) -> Result<Vec<f64>, Error> {
    check_n(n)?;
    let sticky = sticky_solution(eta)?;
    let rebound = rebound_solution(eta)?;
    let (x0, u0) = quantile_sample(&two_block_datum(eta)?, n)?;
    let tl = evolve(&x0, &u0, &SpacingCone::canonical(n)?, sticky.collision_time() + 0.5)?;
    let profile = pressure_measure(&tl)?.summed_profile(n);
    Ok(profile
        .iter()
        .enumerate()
        .flat_map(|(k, &p)| {
            let w = k as f64 / n as f64;
            [w, p, sticky.pressure_profile(w), rebound.pressure_profile(w)]
        })
        .collect())
}

#[wasm_bindgen]
pub fn two_block_profiles(eta: f64, n: usize) -> Result<Vec<f64>, JsError> {
    profile_rows(eta, n).map_err(js)
}

#[wasm_bindgen]
pub fn scenario_names() -> Vec<String> {
    congested_flow::scenarios::SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
}
