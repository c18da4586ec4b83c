//! Closed-form continuations of the two-block collision.
//!
//! Before `t* = eta/2` both branches coincide: `X(t, w) = w + t` and `U = 1`
//! on `(0, 1/2]`, `X(t, w) = w + eta - t` and `U = -1` on `(1/2, 1]`. At `t*`
//! the blocks touch along the whole interval.
//!
//! * sticky: `X = w + eta/2`, `U = 0`; pressure profile `min(w, 1 - w)`.
//! * rebound: `X = w + eta/2 + (t - t*)(2w - 1)`, `U = 2w - 1`; profile
//!   `2w - w^2` on `[0, 1/2)` and `1 - w^2` on `[1/2, 1]`.
//!
//! Both profiles follow from `d_w P = -(U(t*+) - U(t*-))` with `P(0) = P(1) = 0`.

use crate::error::{Error, Result};
use crate::eulerian::TestFunction;
use crate::fields::{FieldKind, PiecewiseField};
use crate::quadrature::{gauss_legendre, gauss_legendre_composite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Sticky,
    Rebound,
}

/// Piece of `X(t, .)` and `U(t, .)` that is affine in `w` on `(w0, w1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WPiece {
    w0: f64,
    w1: f64,
    x0: f64,
    x1: f64,
    u0: f64,
    u1: f64,
}

impl WPiece {
    fn at(&self, w: f64) -> (f64, f64) {
        let s = (w - self.w0) / (self.w1 - self.w0);
        (self.x0 + s * (self.x1 - self.x0), self.u0 + s * (self.u1 - self.u0))
    }
}

/// Quadratic `c0 + c1 w + c2 w^2` on `[w0, w1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePiece {
    pub w0: f64,
    pub w1: f64,
    pub coeffs: [f64; 3],
}

impl ProfilePiece {
    pub fn eval(&self, w: f64) -> f64 {
        let [a, b, c] = self.coeffs;
        a + w * (b + w * c)
    }

    fn integral(&self) -> f64 {
        let [a, b, c] = self.coeffs;
        let prim = |w: f64| w * (a + w * (b / 2.0 + w * c / 3.0));
        prim(self.w1) - prim(self.w0)
    }

    fn min(&self) -> f64 {
        let [_, b, c] = self.coeffs;
        let mut m = self.eval(self.w0).min(self.eval(self.w1));
        if c != 0.0 {
            let v = -b / (2.0 * c);
            if v > self.w0 && v < self.w1 {
                m = m.min(self.eval(v));
            }
        }
        m
    }
}

/// One of the two continuations of the two-block datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution {
    branch: Branch,
    eta: f64,
}

/// Perfectly inelastic continuation.
pub fn sticky_solution(eta: f64) -> Result<AnalyticSolution> {
    check_eta(eta)?;
    Ok(AnalyticSolution { branch: Branch::Sticky, eta })
}

/// Continuation in which the merged block expands with `U = 2w - 1`.
pub fn rebound_solution(eta: f64) -> Result<AnalyticSolution> {
    check_eta(eta)?;
    Ok(AnalyticSolution { branch: Branch::Rebound, eta })
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InputDomain(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

impl AnalyticSolution {
    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn name(&self) -> &'static str {
        match self.branch {
            Branch::Sticky => "sticky",
            Branch::Rebound => "rebound",
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn collision_time(&self) -> f64 {
        0.5 * self.eta
    }

    /// Valid for all `t >= 0`.
    pub fn valid_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn pieces_pre(&self, t: f64) -> [WPiece; 2] {
        [
            WPiece { w0: 0.0, w1: 0.5, x0: t, x1: 0.5 + t, u0: 1.0, u1: 1.0 },
            WPiece {
                w0: 0.5,
                w1: 1.0,
                x0: 0.5 + self.eta - t,
                x1: 1.0 + self.eta - t,
                u0: -1.0,
                u1: -1.0,
            },
        ]
    }

    fn pieces_post(&self, t: f64) -> [WPiece; 2] {
        let h = 0.5 * self.eta;
        let s = t - self.collision_time();
        match self.branch {
            Branch::Sticky => [
                WPiece { w0: 0.0, w1: 0.5, x0: h, x1: 0.5 + h, u0: 0.0, u1: 0.0 },
                WPiece { w0: 0.5, w1: 1.0, x0: 0.5 + h, x1: 1.0 + h, u0: 0.0, u1: 0.0 },
            ],
            Branch::Rebound => [
                WPiece { w0: 0.0, w1: 0.5, x0: h - s, x1: 0.5 + h, u0: -1.0, u1: 0.0 },
                WPiece { w0: 0.5, w1: 1.0, x0: 0.5 + h, x1: 1.0 + h + s, u0: 0.0, u1: 1.0 },
            ],
        }
    }

    /// Right-continuous in time.
    fn pieces(&self, t: f64) -> [WPiece; 2] {
        if t < self.collision_time() {
            self.pieces_pre(t)
        } else {
            self.pieces_post(t)
        }
    }

    fn piece_at(&self, t: f64, w: f64) -> (f64, f64) {
        let p = self.pieces(t);
        if w <= 0.5 {
            p[0].at(w)
        } else {
            p[1].at(w)
        }
    }

    pub fn x(&self, t: f64, w: f64) -> f64 {
        self.piece_at(t, w).0
    }

    pub fn u(&self, t: f64, w: f64) -> f64 {
        self.piece_at(t, w).1
    }

    /// Position and velocity fields at `t` as exact piecewise-affine fields.
    pub fn fields_at(&self, t: f64) -> (PiecewiseField, PiecewiseField) {
        let p = self.pieces(t);
        let breaks = vec![0.0, 0.5, 1.0];
        let x = PiecewiseField::from_cells(FieldKind::Affine, breaks.clone(), vec![p[0].x0, p[1].x0], vec![p[0].x1, p[1].x1]);
        let u = PiecewiseField::from_cells(FieldKind::Affine, breaks, vec![p[0].u0, p[1].u0], vec![p[0].u1, p[1].u1]);
        (x.expect("valid pieces"), u.expect("valid pieces"))
    }

    pub fn profile_pieces(&self) -> [ProfilePiece; 2] {
        match self.branch {
            Branch::Sticky => [
                ProfilePiece { w0: 0.0, w1: 0.5, coeffs: [0.0, 1.0, 0.0] },
                ProfilePiece { w0: 0.5, w1: 1.0, coeffs: [1.0, -1.0, 0.0] },
            ],
            Branch::Rebound => [
                ProfilePiece { w0: 0.0, w1: 0.5, coeffs: [0.0, 2.0, -1.0] },
                ProfilePiece { w0: 0.5, w1: 1.0, coeffs: [1.0, 0.0, -1.0] },
            ],
        }
    }

    /// Lagrangian pressure profile of the single atom at `t*`.
    pub fn pressure_profile(&self, w: f64) -> f64 {
        let p = self.profile_pieces();
        if w < 0.5 {
            p[0].eval(w)
        } else {
            p[1].eval(w)
        }
    }

    /// `int_0^1 P`, exactly.
    pub fn pressure_mass(&self) -> f64 {
        self.profile_pieces().iter().map(ProfilePiece::integral).sum()
    }

    pub fn min_pressure(&self) -> f64 {
        self.profile_pieces().iter().map(ProfilePiece::min).fold(f64::INFINITY, f64::min)
    }

    /// Sticky profile as an exact field; `None` for the quadratic rebound one.
    pub fn profile_field(&self) -> Option<PiecewiseField> {
        (self.branch == Branch::Sticky).then(|| {
            PiecewiseField::from_cells(FieldKind::Affine, vec![0.0, 0.5, 1.0], vec![0.0, 0.5], vec![0.5, 0.0])
                .expect("valid pieces")
        })
    }

    /// `max |d_w X(t*, .) - 1|` where the profile is positive.
    pub fn complementarity_defect(&self) -> f64 {
        self.pieces(self.collision_time())
            .iter()
            .map(|p| ((p.x1 - p.x0) / (p.w1 - p.w0) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max t d_w U / d_w X` over the smooth pieces at time `t > 0`. Jumps of
    /// `U` are downward and do not count.
    pub fn oleinik_ratio(&self, t: f64) -> f64 {
        self.pieces(t)
            .iter()
            .map(|p| t * (p.u1 - p.u0) / (p.x1 - p.x0))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Times in `(0, horizon)` where the integrand in `w` changes form: the
    /// collision, the edges of the time window, and the crossings of the
    /// spatial support edges by piece ends.
    fn time_cuts(&self, phi: &TestFunction, horizon: f64) -> Vec<f64> {
        let ts = self.collision_time();
        let (ta, tb) = phi.t_support();
        let (xa, xb) = phi.x_support();
        let mut cuts = vec![0.0, horizon, ts, ta, tb];
        let phases: [(f64, f64, bool); 2] = [(0.0, ts.min(horizon), true), (ts, horizon, false)];
        for (a, b, pre) in phases {
            if !(a < b) {
                continue;
            }
            let (pa, pb) = if pre {
                (self.pieces_pre(a), self.pieces_pre(b))
            } else {
                (self.pieces_post(a), self.pieces_post(b))
            };
            for (qa, qb) in pa.iter().zip(&pb) {
                for (x_at_a, x_at_b) in [(qa.x0, qb.x0), (qa.x1, qb.x1)] {
                    for e in [xa, xb] {
                        if (x_at_a - e) * (x_at_b - e) < 0.0 {
                            cuts.push(a + (e - x_at_a) * (b - a) / (x_at_b - x_at_a));
                        }
                    }
                }
            }
        }
        cuts.retain(|t| (0.0..=horizon).contains(t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }

    /// `int_0^1 g(phi, d_t phi, d_x phi, U, d_w X)(t, X(t, w)) dw` over the
    /// given pieces, split at the spatial support edges.
    fn integrate_w(
        phi: &TestFunction,
        t: f64,
        pieces: &[WPiece],
        g: &impl Fn((f64, f64, f64), f64, f64, f64) -> f64,
    ) -> f64 {
        let (xa, xb) = phi.x_support();
        let mut total = 0.0;
        for p in pieces {
            let slope = (p.x1 - p.x0) / (p.w1 - p.w0);
            let mut cuts = vec![p.w0, p.w1];
            for e in [xa, xb] {
                if (p.x0 - e) * (p.x1 - e) < 0.0 {
                    cuts.push(p.w0 + (e - p.x0) / slope);
                }
            }
            cuts.sort_by(f64::total_cmp);
            for c in cuts.windows(2) {
                let (xm, _) = p.at(0.5 * (c[0] + c[1]));
                if xm <= xa || xm >= xb {
                    continue;
                }
                total += gauss_legendre(c[0], c[1], |w| {
                    let (x, u) = p.at(w);
                    g(phi.eval(t, x), u, w, slope)
                });
            }
        }
        total
    }

    /// `(initial + bulk, pressure)` parts of the residual.
    fn residual_parts(&self, phi: &TestFunction, horizon: f64, momentum: bool) -> (f64, f64) {
        let m = |u: f64| if momentum { u } else { 1.0 };
        let initial = Self::integrate_w(phi, 0.0, &self.pieces_pre(0.0), &|(f, _, _), u, _, _| f * m(u));
        let cuts = self.time_cuts(phi, horizon);
        let mut bulk = 0.0;
        for c in cuts.windows(2) {
            let (a, b) = (c[0], c[1]);
            if !(a < b) {
                continue;
            }
            let pre = b <= self.collision_time();
            bulk += gauss_legendre_composite(a, b, 8, |t| {
                let pieces = if pre { self.pieces_pre(t) } else { self.pieces_post(t) };
                Self::integrate_w(phi, t, &pieces, &|(_, ft, fx), u, _, _| (ft + u * fx) * m(u))
            });
        }
        let ts = self.collision_time();
        let pressure = if momentum && ts < horizon {
            let prof = self.profile_pieces();
            Self::integrate_w(phi, ts, &self.pieces_post(ts), &|(_, _, fx), _, w, slope| {
                let p = if w < 0.5 { prof[0].eval(w) } else { prof[1].eval(w) };
                p * fx * slope
            })
        } else {
            0.0
        };
        (initial + bulk, pressure)
    }

    fn residual(&self, phi: &TestFunction, horizon: f64, momentum: bool) -> f64 {
        let (a, b) = self.residual_parts(phi, horizon, momentum);
        a + b
    }

    /// Residual of the weak mass equation in Lagrangian form.
    pub fn weak_residual_mass(&self, phi: &TestFunction, horizon: f64) -> f64 {
        self.residual(phi, horizon, false)
    }

    /// Residual of the weak momentum equation, pressure atom included.
    pub fn weak_residual_momentum(&self, phi: &TestFunction, horizon: f64) -> f64 {
        self.residual(phi, horizon, true)
    }
}
