//! Lagrangian interpolations of the particle solution in the mass variable
//! `w in (0, 1)`, with exact norms.
//!
//! For a state `x_1..x_n` (plus a fictitious particle `x_0`, see
//! [`DeltaPadding`]) the step fields take the value `x_i` on `((i-1)/n, i/n]`
//! and the affine fields interpolate the nodes `x_0..x_n` at `w = i/n`. The
//! same holds for velocities and multipliers.

mod convergence;
mod trace;

pub use convergence::{convergence_study, ConvergenceRow, ConvergenceSummary, ConvergenceTable};
pub use trace::{
    build_fields, oleinik_field_check, pressure_mass_bound, verify_discrete_pde, DeltaPadding,
    DiscretePdeReport, FieldSnapshot, FieldTrace, OleinikFieldReport,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// One value per cell.
    Constant,
    /// Affine on each cell.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
    /// Total variation, counting jumps between cells.
    BV,
}

/// Function on `(0, 1)` that is affine on each cell `(breaks[k], breaks[k+1]]`.
/// `left[k]` and `right[k]` are the one-sided limits at the cell ends, so
/// jumps between cells are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    kind: FieldKind,
    breaks: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

fn uniform_breaks(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

impl PiecewiseField {
    /// Step function with `values[k]` on `(k/n, (k+1)/n]`.
    pub fn constant_cells(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "a field needs at least one cell");
        PiecewiseField {
            kind: FieldKind::Constant,
            breaks: uniform_breaks(values.len()),
            left: values.to_vec(),
            right: values.to_vec(),
        }
    }

    /// Continuous interpolation of `nodes[i]` at `w = i/n`.
    pub fn affine_nodes(nodes: &[f64]) -> Self {
        assert!(nodes.len() >= 2, "an affine field needs at least two nodes");
        let n = nodes.len() - 1;
        PiecewiseField {
            kind: FieldKind::Affine,
            breaks: uniform_breaks(n),
            left: nodes[..n].to_vec(),
            right: nodes[1..].to_vec(),
        }
    }

    pub fn from_cells(kind: FieldKind, breaks: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let m = left.len();
        if m == 0 || right.len() != m || breaks.len() != m + 1 {
            return Err(Error::InputDomain(format!(
                "field with {} breaks, {} left and {} right values",
                breaks.len(),
                m,
                right.len()
            )));
        }
        if breaks[0] != 0.0 || breaks[m] != 1.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InputDomain("breaks must increase from 0 to 1".into()));
        }
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(Error::InputDomain("non-finite field value".into()));
        }
        if kind == FieldKind::Constant && left != right {
            return Err(Error::InputDomain("constant cells need equal end values".into()));
        }
        Ok(PiecewiseField { kind, breaks, left, right })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn n_cells(&self) -> usize {
        self.left.len()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// `(a, b, value at a+, value at b)` for cell `k`.
    pub fn cell(&self, k: usize) -> (f64, f64, f64, f64) {
        (self.breaks[k], self.breaks[k + 1], self.left[k], self.right[k])
    }

    pub fn slope(&self, k: usize) -> f64 {
        (self.right[k] - self.left[k]) / (self.breaks[k + 1] - self.breaks[k])
    }

    fn value_in_cell(&self, k: usize, w: f64) -> f64 {
        let (a, b, l, r) = self.cell(k);
        if w == a {
            l
        } else if w == b || l == r {
            r
        } else {
            l + (r - l) * (w - a) / (b - a)
        }
    }

    /// Left-continuous evaluation; `w <= 0` gives the limit at `0+`.
    pub fn eval(&self, w: f64) -> f64 {
        let k = self.breaks[1..]
            .partition_point(|&b| b < w)
            .min(self.n_cells() - 1);
        self.value_in_cell(k, w)
    }

    pub fn integral(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| {
                let (a, b, l, r) = self.cell(k);
                0.5 * (b - a) * (l + r)
            })
            .sum()
    }

    /// `self - other` on the merged breakpoint grid.
    pub fn difference(&self, other: &PiecewiseField) -> PiecewiseField {
        let mut breaks = vec![0.0];
        let (mut i, mut j) = (1, 1);
        while i < self.breaks.len() && j < other.breaks.len() {
            let (a, b) = (self.breaks[i], other.breaks[j]);
            breaks.push(a.min(b));
            if a <= b {
                i += 1;
            }
            if b <= a {
                j += 1;
            }
        }
        let m = breaks.len() - 1;
        let mut left = Vec::with_capacity(m);
        let mut right = Vec::with_capacity(m);
        let (mut ca, mut cb) = (0, 0);
        for s in 0..m {
            let (p, q) = (breaks[s], breaks[s + 1]);
            while self.breaks[ca + 1] < q {
                ca += 1;
            }
            while other.breaks[cb + 1] < q {
                cb += 1;
            }
            left.push(self.value_in_cell(ca, p) - other.value_in_cell(cb, p));
            right.push(self.value_in_cell(ca, q) - other.value_in_cell(cb, q));
        }
        let kind = if self.kind == FieldKind::Constant && other.kind == FieldKind::Constant {
            FieldKind::Constant
        } else {
            FieldKind::Affine
        };
        PiecewiseField { kind, breaks, left, right }
    }
}

/// `int_0^h |f|` for `f` affine with end values `a`, `b`.
fn abs_integral(h: f64, a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * h * (a.abs() + b.abs())
    } else {
        0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Exact norm of a piecewise-affine field.
pub fn field_norm(f: &PiecewiseField, which: Norm) -> f64 {
    let cells = 0..f.n_cells();
    match which {
        Norm::L1 => cells
            .map(|k| {
                let (a, b, l, r) = f.cell(k);
                abs_integral(b - a, l, r)
            })
            .sum(),
        Norm::L2 => cells
            .map(|k| {
                let (a, b, l, r) = f.cell(k);
                (b - a) * (l * l + l * r + r * r) / 3.0
            })
            .sum::<f64>()
            .sqrt(),
        Norm::Linf => cells
            .map(|k| f.left[k].abs().max(f.right[k].abs()))
            .fold(0.0, f64::max),
        Norm::BV => {
            let inner: f64 = cells.map(|k| (f.right[k] - f.left[k]).abs()).sum();
            let jumps: f64 = (1..f.n_cells()).map(|k| (f.left[k] - f.right[k - 1]).abs()).sum();
            inner + jumps
        }
    }
}

/// Norm of `a - b`, integrated exactly on the merged breakpoints.
pub fn field_distance(a: &PiecewiseField, b: &PiecewiseField, which: Norm) -> f64 {
    field_norm(&a.difference(b), which)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Midpoint sums on a fine grid, as an independent check of the exact norms.
    fn riemann(f: &PiecewiseField, m: usize, g: impl Fn(f64) -> f64) -> f64 {
        (0..m).map(|j| g(f.eval((j as f64 + 0.5) / m as f64))).sum::<f64>() / m as f64
    }

    #[test]
    fn constant_field_norms() {
        let f = PiecewiseField::constant_cells(&[-2.5; 7]);
        assert_abs_diff_eq!(field_norm(&f, Norm::L2), 2.5, epsilon = 1e-15);
        assert_eq!(field_norm(&f, Norm::Linf), 2.5);
        assert_eq!(field_norm(&f, Norm::BV), 0.0);
    }

    #[test]
    fn identity_field_has_unit_variation() {
        let nodes: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let f = PiecewiseField::affine_nodes(&nodes);
        assert_abs_diff_eq!(field_norm(&f, Norm::BV), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(field_norm(&f, Norm::L2), (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(f.eval(0.35), 0.35);
    }

    #[test]
    fn step_minus_interpolant() {
        // Nodes x_0..x_n: the step takes x_i on cell i, the interpolant is
        // linear, so the L1 gap is (x_n - x_0) / (2n).
        let nodes = [-0.3, 0.2, 0.5, 1.1, 1.4];
        let step = PiecewiseField::constant_cells(&nodes[1..]);
        let aff = PiecewiseField::affine_nodes(&nodes);
        assert_abs_diff_eq!(field_distance(&step, &aff, Norm::L1), (1.4 + 0.3) / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn distance_across_resolutions() {
        let a = PiecewiseField::affine_nodes(&[0.0, 1.0]);
        let b = PiecewiseField::constant_cells(&[0.5, 0.5, 0.5]);
        // |w - 1/2| integrates to 1/4; (w - 1/2)^2 to 1/12.
        assert_abs_diff_eq!(field_distance(&a, &b, Norm::L1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(field_distance(&a, &b, Norm::L2), (1.0f64 / 12.0).sqrt(), epsilon = 1e-15);
        assert_eq!(field_distance(&a, &a, Norm::L2), 0.0);
        assert_abs_diff_eq!(field_distance(&a, &b, Norm::Linf), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn left_continuous_evaluation() {
        let f = PiecewiseField::constant_cells(&[1.0, 2.0]);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.5000001), 2.0);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(1.0), 2.0);
    }

    #[test]
    fn invalid_cells_are_rejected() {
        assert!(PiecewiseField::from_cells(FieldKind::Affine, vec![0.0, 0.6, 0.5, 1.0], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(PiecewiseField::from_cells(FieldKind::Constant, vec![0.0, 1.0], vec![0.0], vec![1.0]).is_err());
        assert!(PiecewiseField::from_cells(FieldKind::Affine, vec![0.0, 0.9], vec![0.0], vec![1.0]).is_err());
    }

    fn arb_field() -> impl Strategy<Value = PiecewiseField> {
        (1usize..12, any::<bool>()).prop_flat_map(|(n, affine)| {
            prop::collection::vec(-3.0f64..3.0, n + 1).prop_map(move |v| {
                if affine {
                    PiecewiseField::affine_nodes(&v)
                } else {
                    PiecewiseField::constant_cells(&v[..n])
                }
            })
        })
    }

    /// Per-cell antiderivatives in slope form, splitting `|f|` at its root.
    fn antiderivative_norms(f: &PiecewiseField) -> (f64, f64) {
        let (mut l1, mut l2) = (0.0, 0.0);
        for k in 0..f.n_cells() {
            let (a, b, l, r) = f.cell(k);
            let h = b - a;
            let s = (r - l) / h;
            l2 += l * l * h + l * s * h * h + s * s * h * h * h / 3.0;
            let g = |x: f64| l * x + 0.5 * s * x * x;
            let root = if s != 0.0 { -l / s } else { f64::NAN };
            l1 += if root > 0.0 && root < h {
                (g(root) - g(0.0)).abs() + (g(h) - g(root)).abs()
            } else {
                (g(h) - g(0.0)).abs()
            };
        }
        (l1, l2.sqrt())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norms_match_riemann_sums(f in arb_field()) {
            let m = 100_000;
            let l1 = riemann(&f, m, f64::abs);
            let l2 = riemann(&f, m, |v| v * v).sqrt();
            // The midpoint rule loses O(1/m) at each jump.
            prop_assert!((field_norm(&f, Norm::L1) - l1).abs() < 1e-3);
            prop_assert!((field_norm(&f, Norm::L2) - l2).abs() < 1e-3);
        }

        #[test]
        fn norms_match_antiderivatives(f in arb_field()) {
            let (l1, l2) = antiderivative_norms(&f);
            prop_assert!((field_norm(&f, Norm::L1) - l1).abs() < 1e-10);
            prop_assert!((field_norm(&f, Norm::L2) - l2).abs() < 1e-10);
        }

        #[test]
        fn distance_is_a_metric(a in arb_field(), b in arb_field(), c in arb_field()) {
            for norm in [Norm::L1, Norm::L2, Norm::Linf, Norm::BV] {
                let ab = field_distance(&a, &b, norm);
                let ba = field_distance(&b, &a, norm);
                prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
                prop_assert!(ab <= field_distance(&a, &c, norm) + field_distance(&c, &b, norm) + 1e-12);
            }
        }
    }
}
