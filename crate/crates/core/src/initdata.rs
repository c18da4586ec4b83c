//! Macroscopic initial data: monotone rearrangement of a piecewise-constant
//! density, the Lagrangian velocity `U0 = u0 o X0`, and quantile sampling into
//! particles.
//!
//! Both maps are left-continuous on `(0, 1]` in the mass variable `w`, which
//! matches the infimum in the generalized inverse of the CDF. At a jump of
//! `U0` the sample therefore takes the left limit.

use crate::cone::SpacingCone;
use crate::dynamics::check_admissible;
use crate::error::{Error, Result};
use crate::fields::{field_distance, FieldKind, Norm, PiecewiseField};
use crate::report::{Check, Report};

/// Tolerance on the total mass of a density.
pub const MASS_TOL: f64 = 1e-12;

/// Constant density `rho` on `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub left: f64,
    pub right: f64,
    pub rho: f64,
}

impl DensityPiece {
    pub fn new(left: f64, right: f64, rho: f64) -> Self {
        DensityPiece { left, right, rho }
    }

    pub fn mass(&self) -> f64 {
        self.rho * (self.right - self.left)
    }
}

/// Eulerian velocity, affine on `[left, right]` with the given end values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityPiece {
    pub left: f64,
    pub right: f64,
    pub u_left: f64,
    pub u_right: f64,
}

impl VelocityPiece {
    pub fn new(left: f64, right: f64, u_left: f64, u_right: f64) -> Self {
        VelocityPiece { left, right, u_left, u_right }
    }

    pub fn constant(left: f64, right: f64, u: f64) -> Self {
        Self::new(left, right, u, u)
    }

    fn at(&self, x: f64) -> f64 {
        if x == self.left {
            self.u_left
        } else if x == self.right {
            self.u_right
        } else {
            self.u_left + (self.u_right - self.u_left) * (x - self.left) / (self.right - self.left)
        }
    }
}

/// Affine piece on the mass interval `(w0, w1]`, with values `v0` at `w0+` and
/// `v1` at `w1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianPiece {
    pub w0: f64,
    pub w1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl LagrangianPiece {
    pub fn eval(&self, w: f64) -> f64 {
        if w == self.w1 {
            self.v1
        } else if w == self.w0 {
            self.v0
        } else {
            self.v0 + (self.v1 - self.v0) * (w - self.w0) / (self.w1 - self.w0)
        }
    }

    pub fn slope(&self) -> f64 {
        (self.v1 - self.v0) / (self.w1 - self.w0)
    }
}

/// Left-continuous piecewise-affine map on `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianMap {
    pieces: Vec<LagrangianPiece>,
}

impl LagrangianMap {
    /// Pieces must tile `(0, 1]` in order.
    pub fn new(pieces: Vec<LagrangianPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InputDomain("map has no pieces".into()));
        }
        let mut w = 0.0;
        for (k, p) in pieces.iter().enumerate() {
            if p.w0 != w || !(p.w1 > p.w0) || !p.v0.is_finite() || !p.v1.is_finite() {
                return Err(Error::InputDomain(format!(
                    "piece {k} on ({}, {}] does not continue the tiling at {w}",
                    p.w0, p.w1
                )));
            }
            w = p.w1;
        }
        if w != 1.0 {
            return Err(Error::InputDomain(format!("pieces end at w = {w}, not 1")));
        }
        Ok(LagrangianMap { pieces })
    }

    pub fn pieces(&self) -> &[LagrangianPiece] {
        &self.pieces
    }

    fn piece_index(&self, w: f64) -> usize {
        self.pieces
            .partition_point(|p| p.w1 < w)
            .min(self.pieces.len() - 1)
    }

    /// Value at `w`, left-continuous; `w <= 0` gives the right limit at 0.
    pub fn eval(&self, w: f64) -> f64 {
        self.pieces[self.piece_index(w)].eval(w)
    }

    /// Exact piecewise-affine field with the same pieces.
    pub fn to_field(&self) -> PiecewiseField {
        let mut breaks = Vec::with_capacity(self.pieces.len() + 1);
        breaks.push(0.0);
        breaks.extend(self.pieces.iter().map(|p| p.w1));
        let left = self.pieces.iter().map(|p| p.v0).collect();
        let right = self.pieces.iter().map(|p| p.v1).collect();
        PiecewiseField::from_cells(FieldKind::Affine, breaks, left, right)
            .expect("pieces tile (0, 1]")
    }
}

fn validate_density(pieces: &[DensityPiece]) -> Result<()> {
    if pieces.is_empty() {
        return Err(Error::InputDomain("density has no pieces".into()));
    }
    let mut prev_right = f64::NEG_INFINITY;
    for (k, p) in pieces.iter().enumerate() {
        if !(p.left.is_finite() && p.right.is_finite() && p.rho.is_finite()) {
            return Err(Error::InputDomain(format!("density piece {k}: non-finite entry")));
        }
        if !(p.right > p.left) {
            return Err(Error::InputDomain(format!(
                "density piece {k}: empty interval [{}, {}]",
                p.left, p.right
            )));
        }
        if p.left < prev_right {
            return Err(Error::InputDomain(format!(
                "density piece {k}: overlaps or precedes the previous piece"
            )));
        }
        if p.rho < 0.0 {
            return Err(Error::InputDomain(format!("density piece {k}: rho = {} < 0", p.rho)));
        }
        if p.rho > 1.0 {
            return Err(Error::Constraint(format!(
                "density piece {k}: rho = {} exceeds the maximal density 1",
                p.rho
            )));
        }
        prev_right = p.right;
    }
    let mass: f64 = pieces.iter().map(DensityPiece::mass).sum();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::InputDomain(format!("total mass {mass} differs from 1")));
    }
    Ok(())
}

/// Generalized inverse `X0(w) = inf { x : F(x) >= w }` of the CDF of a
/// piecewise-constant density. Vacuum between pieces shows up as jumps.
pub fn rearrangement_from_density(pieces: &[DensityPiece]) -> Result<LagrangianMap> {
    validate_density(pieces)?;
    let occupied: Vec<&DensityPiece> = pieces.iter().filter(|p| p.rho > 0.0).collect();
    let mut out = Vec::with_capacity(occupied.len());
    let mut w = 0.0;
    for (k, p) in occupied.iter().enumerate() {
        let w1 = if k + 1 == occupied.len() { 1.0 } else { w + p.mass() };
        out.push(LagrangianPiece {
            w0: w,
            w1,
            v0: p.left,
            v1: p.right,
        });
        w = w1;
    }
    LagrangianMap::new(out)
}

/// Initial datum in Lagrangian form.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroscopicDatum {
    density: Vec<DensityPiece>,
    x0: LagrangianMap,
    u0: LagrangianMap,
}

impl MacroscopicDatum {
    /// Builds `X0` from the density and `U0 = u0 o X0` from the velocity
    /// pieces, which must cover the support of the density. The velocity must
    /// be constant on every saturated interval (`rho = 1`).
    pub fn new(density: &[DensityPiece], velocity: &[VelocityPiece]) -> Result<Self> {
        let x0 = rearrangement_from_density(density)?;
        for (k, v) in velocity.iter().enumerate() {
            if !(v.left.is_finite() && v.right.is_finite())
                || !(v.u_left.is_finite() && v.u_right.is_finite())
                || !(v.right > v.left)
            {
                return Err(Error::InputDomain(format!("velocity piece {k}: invalid entry")));
            }
            if k > 0 && v.left < velocity[k - 1].right {
                return Err(Error::InputDomain(format!(
                    "velocity piece {k}: overlaps the previous piece"
                )));
            }
        }
        let mut u_pieces = Vec::new();
        let mut occupied = density.iter().filter(|p| p.rho > 0.0);
        for xp in x0.pieces() {
            let d = occupied.next().expect("one occupied piece per map piece");
            let mut x = d.left;
            while x < d.right {
                let v = velocity
                    .iter()
                    .find(|v| v.left <= x && x < v.right)
                    .ok_or_else(|| {
                        Error::InputDomain(format!("velocity undefined at x = {x}"))
                    })?;
                let b = v.right.min(d.right);
                let wa = if x == d.left { xp.w0 } else { xp.w0 + (x - d.left) * d.rho };
                let wb = if b == d.right { xp.w1 } else { xp.w0 + (b - d.left) * d.rho };
                if wb > wa {
                    u_pieces.push(LagrangianPiece {
                        w0: wa,
                        w1: wb,
                        v0: v.at(x),
                        v1: v.at(b),
                    });
                }
                x = b;
            }
        }
        let datum = MacroscopicDatum {
            density: density.to_vec(),
            x0,
            u0: LagrangianMap::new(u_pieces)?,
        };
        datum.check_saturated_velocity()?;
        Ok(datum)
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn x0_map(&self) -> &LagrangianMap {
        &self.x0
    }

    pub fn u0_map(&self) -> &LagrangianMap {
        &self.u0
    }

    pub fn x0(&self, w: f64) -> f64 {
        self.x0.eval(w)
    }

    pub fn u0(&self, w: f64) -> f64 {
        self.u0.eval(w)
    }

    /// Closed hull of the support of the density.
    pub fn support(&self) -> (f64, f64) {
        let occ: Vec<_> = self.density.iter().filter(|p| p.rho > 0.0).collect();
        (occ[0].left, occ[occ.len() - 1].right)
    }

    /// Largest `|U0|`.
    pub fn max_speed(&self) -> f64 {
        self.u0
            .pieces()
            .iter()
            .map(|p| p.v0.abs().max(p.v1.abs()))
            .fold(0.0, f64::max)
    }

    /// Maximal mass intervals on which `rho = 1`.
    pub fn saturated_intervals(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut last_right = f64::NAN;
        for (p, d) in self
            .x0
            .pieces()
            .iter()
            .zip(self.density.iter().filter(|p| p.rho > 0.0))
        {
            if d.rho == 1.0 {
                match out.last_mut() {
                    Some(iv) if iv.1 == p.w0 && d.left == last_right => iv.1 = p.w1,
                    _ => out.push((p.w0, p.w1)),
                }
            }
            last_right = d.right;
        }
        out
    }

    fn check_saturated_velocity(&self) -> Result<()> {
        for (a, b) in self.saturated_intervals() {
            let inside = self.u0.pieces().iter().filter(|p| p.w0 >= a && p.w1 <= b);
            let reference = self.u0.eval(b);
            for p in inside {
                let tol = 1e-12 * (1.0 + reference.abs());
                if (p.v0 - reference).abs() > tol || (p.v1 - reference).abs() > tol {
                    return Err(Error::Admissibility(format!(
                        "velocity varies on the saturated mass interval ({a}, {b}], \
                         piece ({}, {}] has values {} .. {}",
                        p.w0, p.w1, p.v0, p.v1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Particles at the quantiles `w = i/n`, `i = 1..n`: `x_i = X0(i/n)`,
/// `u_i = U0(i/n)`. The result is admissible for the canonical cone.
pub fn quantile_sample(datum: &MacroscopicDatum, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InputDomain(format!("need at least 2 particles, got {n}")));
    }
    let ws = (1..=n).map(|i| i as f64 / n as f64);
    let x: Vec<f64> = ws.clone().map(|w| datum.x0(w)).collect();
    let u: Vec<f64> = ws.map(|w| datum.u0(w)).collect();
    let cone = SpacingCone::canonical(n)?;
    check_admissible(&cone, &x, &u).map_err(|e| match e {
        Error::Precondition(m) => Error::InternalConsistency(format!("sampled positions: {m}")),
        other => other,
    })?;
    Ok((x, u))
}

/// Spacing and velocity-at-contact checks with an absolute tolerance.
pub fn validate_initial(x0: &[f64], u0: &[f64], cone: &SpacingCone, tol: f64) -> Result<Report> {
    cone.check_len(x0)?;
    cone.check_len(u0)?;
    let excess = cone.excess_gaps(x0);
    let min_excess = excess.iter().copied().fold(f64::INFINITY, f64::min);
    let shear = excess
        .iter()
        .enumerate()
        .filter(|(_, e)| **e <= tol)
        .map(|(k, _)| (u0[k + 1] - u0[k]).abs())
        .fold(0.0, f64::max);
    let mut r = Report::new();
    r.push(Check::at_least("spacing", min_excess, -tol));
    r.push(Check::at_most("velocity_at_contact", shear, tol));
    Ok(r)
}

/// `L2(0, 1)` errors of the sampled step functions against the datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationError {
    pub n: usize,
    pub x_l2: f64,
    pub u_l2: f64,
}

/// Errors `||X0_N - X0||` and `||U0_N - U0||` in `L2(0, 1)`, computed by
/// exact piecewise integration. `X0_N` is the step function `x_i` on
/// `((i-1)/n, i/n]`, so even an affine `X0` has error `slope / (sqrt(3) n)`.
pub fn discretization_convergence(
    datum: &MacroscopicDatum,
    n_list: &[usize],
) -> Result<Vec<DiscretizationError>> {
    let xf = datum.x0.to_field();
    let uf = datum.u0.to_field();
    n_list
        .iter()
        .map(|&n| {
            let (x, u) = quantile_sample(datum, n)?;
            Ok(DiscretizationError {
                n,
                x_l2: field_distance(&PiecewiseField::constant_cells(&x), &xf, Norm::L2),
                u_l2: field_distance(&PiecewiseField::constant_cells(&u), &uf, Norm::L2),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(a: f64, b: f64) -> Vec<DensityPiece> {
        vec![DensityPiece::new(a, b, 1.0 / (b - a))]
    }

    #[test]
    fn identity_rearrangement() {
        let m = rearrangement_from_density(&uniform(0.0, 1.0)).unwrap();
        for w in [0.1, 0.25, 0.5, 1.0] {
            assert_eq!(m.eval(w), w);
        }
    }

    #[test]
    fn dilation_rearrangement() {
        let m = rearrangement_from_density(&uniform(0.0, 2.0)).unwrap();
        for w in [0.1, 0.25, 0.5, 1.0] {
            assert_eq!(m.eval(w), 2.0 * w);
        }
    }

    #[test]
    fn two_piece_rearrangement() {
        let d = [DensityPiece::new(0.0, 0.5, 1.0), DensityPiece::new(1.0, 2.0, 0.5)];
        let m = rearrangement_from_density(&d).unwrap();
        // Oracle: invert F(x) = x on [0, 1/2], 1/2 + (x - 1)/2 on [1, 2].
        let inv = |w: f64| if w <= 0.5 { w } else { 1.0 + 2.0 * (w - 0.5) };
        for k in 1..=40 {
            let w = k as f64 / 40.0;
            assert_abs_diff_eq!(m.eval(w), inv(w), epsilon = 1e-15);
        }
        // Infimum convention at the vacuum gap.
        assert_eq!(m.eval(0.5), 0.5);
    }

    #[test]
    fn density_guards() {
        assert!(matches!(
            rearrangement_from_density(&[DensityPiece::new(0.0, 1.0, 0.9)]),
            Err(Error::InputDomain(_))
        ));
        assert!(matches!(
            rearrangement_from_density(&[DensityPiece::new(0.0, 0.5, 1.2), DensityPiece::new(1.0, 1.4, 1.0)]),
            Err(Error::Constraint(_))
        ));
        assert!(matches!(
            rearrangement_from_density(&[DensityPiece::new(0.0, 0.6, 1.0), DensityPiece::new(0.5, 0.9, 1.0)]),
            Err(Error::InputDomain(_))
        ));
        assert!(rearrangement_from_density(&[]).is_err());
    }

    #[test]
    fn vacuum_pieces_are_skipped() {
        let d = [
            DensityPiece::new(0.0, 0.5, 1.0),
            DensityPiece::new(0.5, 3.0, 0.0),
            DensityPiece::new(3.0, 3.5, 1.0),
        ];
        let m = rearrangement_from_density(&d).unwrap();
        assert_eq!(m.pieces().len(), 2);
        assert_eq!(m.eval(0.75), 3.25);
    }

    #[test]
    fn quantiles_of_packed_datum() {
        let c = 0.7;
        let d = MacroscopicDatum::new(&uniform(0.0, 1.0), &[VelocityPiece::constant(0.0, 1.0, c)]).unwrap();
        let (x, u) = quantile_sample(&d, 4).unwrap();
        assert_eq!(x, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(u, vec![c; 4]);
        let cone = SpacingCone::canonical(4).unwrap();
        assert_eq!(cone.active_set(&x), vec![1, 2, 3]);
    }

    #[test]
    fn quantiles_of_dilute_datum() {
        let d = MacroscopicDatum::new(&uniform(0.0, 2.0), &[VelocityPiece::new(0.0, 2.0, 1.0, -1.0)]).unwrap();
        let (x, u) = quantile_sample(&d, 4).unwrap();
        assert_eq!(x, vec![0.5, 1.0, 1.5, 2.0]);
        // U0(w) = 1 - X0(w).
        for (xi, ui) in x.iter().zip(&u) {
            assert_abs_diff_eq!(*ui, 1.0 - xi, epsilon = 1e-15);
        }
        assert!(quantile_sample(&d, 1).is_err());
        assert_eq!(quantile_sample(&d, 2).unwrap().0, vec![1.0, 2.0]);
    }

    #[test]
    fn left_limit_at_velocity_jump() {
        let d = MacroscopicDatum::new(
            &[DensityPiece::new(0.0, 0.5, 1.0), DensityPiece::new(1.0, 1.5, 1.0)],
            &[VelocityPiece::constant(0.0, 0.5, 1.0), VelocityPiece::constant(1.0, 1.5, -1.0)],
        )
        .unwrap();
        assert_eq!(d.u0(0.5), 1.0);
        assert_eq!(d.u0(0.5 + 1e-9), -1.0);
        assert_eq!(d.saturated_intervals(), vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn shear_in_saturated_region_is_rejected() {
        let r = MacroscopicDatum::new(&uniform(0.0, 1.0), &[VelocityPiece::new(0.0, 1.0, 1.0, 0.0)]);
        assert!(matches!(r, Err(Error::Admissibility(_))));
        // Two abutting saturated pieces form one interval.
        let r = MacroscopicDatum::new(
            &[DensityPiece::new(0.0, 0.5, 1.0), DensityPiece::new(0.5, 1.0, 1.0)],
            &[VelocityPiece::constant(0.0, 0.5, 1.0), VelocityPiece::constant(0.5, 1.0, 0.0)],
        );
        assert!(matches!(r, Err(Error::Admissibility(_))));
    }

    #[test]
    fn velocity_must_cover_support() {
        let r = MacroscopicDatum::new(&uniform(0.0, 2.0), &[VelocityPiece::constant(0.0, 1.5, 0.0)]);
        assert!(matches!(r, Err(Error::InputDomain(_))));
    }

    #[test]
    fn validate_initial_examples() {
        let cone = SpacingCone::canonical(4).unwrap();
        let spread = [0.0, 0.5, 1.0, 1.5];
        assert!(validate_initial(&spread, &[1.0, -1.0, 2.0, 0.0], &cone, 1e-12).unwrap().passed());
        let packed = [0.0, 0.25, 0.5, 0.75];
        assert!(validate_initial(&packed, &[0.3; 4], &cone, 1e-12).unwrap().passed());
        let r = validate_initial(&packed, &[0.3, 0.3, 0.4, 0.3], &cone, 1e-12).unwrap();
        assert!(!r.passed());
        assert!(!r.get("velocity_at_contact").unwrap().passed);
        assert!(r.get("spacing").unwrap().passed);
    }

    #[test]
    fn discretization_error_closed_form() {
        // X0(w) = 2w against its right-endpoint step: error^2 = 4 / (3 n^2).
        let d = MacroscopicDatum::new(&uniform(0.0, 2.0), &[VelocityPiece::constant(0.0, 2.0, 0.5)]).unwrap();
        let rows = discretization_convergence(&d, &[4, 16, 64]).unwrap();
        for r in rows {
            assert_abs_diff_eq!(r.x_l2, 2.0 / (3f64.sqrt() * r.n as f64), epsilon = 1e-14);
            assert_eq!(r.u_l2, 0.0);
        }
    }

    #[test]
    fn discontinuous_velocity_error_decays() {
        let d = MacroscopicDatum::new(
            &uniform(0.0, 2.0),
            &[VelocityPiece::constant(0.0, 1.0, 1.0), VelocityPiece::constant(1.0, 2.0, -1.0)],
        )
        .unwrap();
        // The jump sits on the grid for even n, so only odd n see it.
        let rows = discretization_convergence(&d, &[9, 33, 129]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].u_l2 < w[0].u_l2);
        }
        // Oracle: one cell of width 1/n carries a jump of 2 on half its length.
        for r in &rows {
            assert_abs_diff_eq!(r.u_l2, (2.0 / r.n as f64).sqrt(), epsilon = 1e-12);
        }
    }
}
