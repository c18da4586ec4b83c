//! Weak residuals in Lagrangian form. Each particle path is piecewise linear
//! in time, and the test functions are piecewise polynomial, so splitting at
//! events and at the edges of the support makes the ten-point Gauss rule
//! exact on every piece.

use crate::fields::FieldTrace;
use crate::quadrature::gauss_legendre;

use super::TestFunction;

/// `int_{t0}^{t1} g(phi, d_t phi, d_x phi)(t, x0 + (t - t0) u) dt`.
fn integrate_path(
    phi: &TestFunction,
    t0: f64,
    t1: f64,
    x0: f64,
    u: f64,
    g: &impl Fn((f64, f64, f64)) -> f64,
) -> f64 {
    let (ta, tb) = phi.t_support();
    let (a, b) = (t0.max(ta), t1.min(tb));
    if !(a < b) {
        return 0.0;
    }
    let (xa, xb) = phi.x_support();
    let mut cuts = vec![a, b];
    if u != 0.0 {
        for edge in [xa, xb] {
            let tc = t0 + (edge - x0) / u;
            if tc > a && tc < b {
                cuts.push(tc);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let pos = |t: f64| x0 + (t - t0) * u;
    cuts.windows(2)
        .filter(|w| {
            let xm = pos(0.5 * (w[0] + w[1]));
            xm > xa && xm < xb
        })
        .map(|w| gauss_legendre(w[0], w[1], |t| g(phi.eval(t, pos(t)))))
        .sum()
}

/// `(1/n) sum_i [phi(0, x_i(0)) m(u_i(0)) + int (d_t phi + u_i d_x phi) m(u_i) dt]`
/// plus, if requested, the pressure pairing at events.
fn residual(trace: &FieldTrace, phi: &TestFunction, momentum: bool) -> f64 {
    let tl = trace.timeline();
    let n = tl.n();
    let horizon = tl.horizon();
    let weight = |u: f64| if momentum { u } else { 1.0 };
    let init = tl.initial();
    let mut start_t = vec![0.0; n];
    let mut start_x = init.positions.clone();
    let mut vel = init.velocities.clone();

    let mut particles: f64 = (0..n).map(|j| phi.value(0.0, start_x[j]) * weight(vel[j])).sum();
    let mut pressure = 0.0;
    for ev in tl.events() {
        for c in &ev.merges {
            for j in c.merged.range() {
                let u = vel[j];
                particles += integrate_path(phi, start_t[j], ev.time, start_x[j], u, &|(_, ft, fx)| {
                    (ft + u * fx) * weight(u)
                });
                start_x[j] += (ev.time - start_t[j]) * u;
                start_t[j] = ev.time;
                vel[j] = c.post_velocity;
            }
        }
        if momentum {
            for (k, p) in ev.multiplier_jump.entries() {
                pressure += p * (phi.value(ev.time, start_x[k]) - phi.value(ev.time, start_x[k - 1]));
            }
        }
    }
    for j in 0..n {
        let u = vel[j];
        particles += integrate_path(phi, start_t[j], horizon, start_x[j], u, &|(_, ft, fx)| {
            (ft + u * fx) * weight(u)
        });
    }
    particles / n as f64 + pressure
}

/// Residual of `int phi(0) rho0 + int int (d_t phi + u d_x phi) rho = 0`.
pub fn weak_residual_mass(trace: &FieldTrace, phi: &TestFunction) -> f64 {
    residual(trace, phi, false)
}

/// Residual of
/// `int phi(0) u0 rho0 + int int (d_t phi + u d_x phi) u rho + <d_x phi, p> = 0`,
/// with the atomic pressure summed exactly over events.
pub fn weak_residual_momentum(trace: &FieldTrace, phi: &TestFunction) -> f64 {
    residual(trace, phi, true)
}
