/// `B(s) = (1 - s^2)^3` on `|s| < 1`, zero outside; `C^2` with compact support.
fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    (q * q * q, -6.0 * s * q * q)
}

/// `phi(t, x) = A B((t - ct)/ht) (x - cx)^k B((x - cx)/hx)`.
///
/// Piecewise polynomial: of degree 6 in `t` and `6 + k` in `x` on its support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub ct: f64,
    pub ht: f64,
    pub cx: f64,
    pub hx: f64,
    pub k: u32,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(ct: f64, ht: f64, cx: f64, hx: f64, k: u32) -> Self {
        assert!(ht > 0.0 && hx > 0.0, "test function widths must be positive");
        TestFunction { ct, ht, cx, hx, k, amplitude: 1.0 }
    }

    /// The function that vanishes identically.
    pub fn zero() -> Self {
        TestFunction { amplitude: 0.0, ..Self::new(0.0, 1.0, 0.0, 1.0, 0) }
    }

    pub fn t_support(&self) -> (f64, f64) {
        (self.ct - self.ht, self.ct + self.ht)
    }

    pub fn x_support(&self) -> (f64, f64) {
        (self.cx - self.hx, self.cx + self.hx)
    }

    fn spatial(&self, x: f64) -> (f64, f64) {
        let y = x - self.cx;
        let (b, db) = bump(y / self.hx);
        let k = self.k as i32;
        let p = y.powi(k);
        let dp = if k == 0 { 0.0 } else { k as f64 * y.powi(k - 1) };
        (p * b, dp * b + p * db / self.hx)
    }

    /// `(phi, d_t phi, d_x phi)` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (bt, dbt) = bump((t - self.ct) / self.ht);
        if bt == 0.0 && dbt == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let (g, dg) = self.spatial(x);
        let a = self.amplitude;
        (a * bt * g, a * dbt / self.ht * g, a * bt * dg)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x).0
    }
}

/// Twelve test functions on `[0, horizon) x [x_lo, x_hi]`: two time windows,
/// one of which reaches `t = 0`, three spatial centres, and the spatial
/// factors `1` and `x - cx`.
pub fn test_family(horizon: f64, x_lo: f64, x_hi: f64) -> Vec<TestFunction> {
    let len = (x_hi - x_lo).max(1e-3);
    let windows = [(0.0, 0.6 * horizon), (0.5 * horizon, 0.45 * horizon)];
    let mut out = Vec::with_capacity(12);
    for (ct, ht) in windows {
        for c in [0.25, 0.5, 0.75] {
            for k in 0..2 {
                out.push(TestFunction::new(ct, ht, x_lo + c * len, 0.4 * len, k));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivatives_match_finite_differences() {
        let f = TestFunction::new(0.4, 0.5, 1.0, 0.7, 1);
        let h = 1e-6;
        for (t, x) in [(0.3, 0.8), (0.6, 1.4), (0.1, 1.05)] {
            let (_, ft, fx) = f.eval(t, x);
            let ft_fd = (f.value(t + h, x) - f.value(t - h, x)) / (2.0 * h);
            let fx_fd = (f.value(t, x + h) - f.value(t, x - h)) / (2.0 * h);
            assert_abs_diff_eq!(ft, ft_fd, epsilon = 1e-8);
            assert_abs_diff_eq!(fx, fx_fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn compact_support() {
        let f = TestFunction::new(0.5, 0.25, 0.0, 1.0, 0);
        assert_eq!(f.eval(0.8, 0.0), (0.0, 0.0, 0.0));
        assert_eq!(f.eval(0.5, 1.5), (0.0, 0.0, 0.0));
        assert_eq!(f.value(0.5, 0.0), 1.0);
        assert_eq!(TestFunction::zero().eval(0.0, 0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn family_vanishes_at_horizon() {
        let fam = test_family(2.0, -1.0, 3.0);
        assert_eq!(fam.len(), 12);
        for f in &fam {
            assert!(f.t_support().1 < 2.0);
            assert_eq!(f.value(2.0, 1.0), 0.0);
        }
        assert!(fam.iter().any(|f| f.value(0.0, f.cx) != 0.0));
    }
}
