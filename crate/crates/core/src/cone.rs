//! Euclidean projection onto the spacing cone
//! `K = { x : x[i+1] - x[i] >= 2r }` and certificates for it.
//!
//! Subtracting `2r * i` from coordinate `i` maps `K` onto the cone of
//! nondecreasing vectors, so the projection is an isotonic regression with
//! unit weights, solved here by pool-adjacent-violators. An exhaustive
//! active-set KKT solver is kept alongside as an independent oracle for small
//! `n`.
//!
//! Indexing: particles are `0..n`; contact `k` (for `k` in `1..n`) is the pair
//! `(k-1, k)`. Multiplier vectors of length `n + 1` use the same index and
//! carry the boundary entries `0` and `n`.

use crate::error::{Error, Result};

/// Relative tolerance used to decide feasibility and contact.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

/// Largest `n` accepted by [`qp_oracle_project`].
pub const ORACLE_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingCone {
    n: usize,
    two_r: f64,
}

impl SpacingCone {
    pub fn new(n: usize, two_r: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InputDomain(format!(
                "spacing cone needs at least 2 particles, got {n}"
            )));
        }
        if !(two_r > 0.0 && two_r.is_finite()) {
            return Err(Error::InputDomain(format!(
                "minimal spacing must be positive and finite, got {two_r}"
            )));
        }
        Ok(SpacingCone { n, two_r })
    }

    /// Cone with the unit-mass scaling `2r = 1/n`.
    pub fn canonical(n: usize) -> Result<Self> {
        Self::new(n, 1.0 / n as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn two_r(&self) -> f64 {
        self.two_r
    }

    pub fn is_canonical(&self) -> bool {
        (self.two_r * self.n as f64 - 1.0).abs() <= 1e-12
    }

    /// `x̃[i] = x[i] - 2r * i`.
    pub fn translate(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| v - self.two_r * i as f64)
            .collect()
    }

    pub fn untranslate(&self, xt: &[f64]) -> Vec<f64> {
        xt.iter()
            .enumerate()
            .map(|(i, &v)| v + self.two_r * i as f64)
            .collect()
    }

    /// Contact tolerance for the pair `(a, b)` of neighbouring positions.
    pub fn contact_tol(a: f64, b: f64) -> f64 {
        FEASIBILITY_RTOL * (1.0 + a.abs() + b.abs())
    }

    /// `x[k] - x[k-1] - 2r` for contacts `k = 1..n`, returned 0-based (entry `k-1`).
    pub fn excess_gaps(&self, x: &[f64]) -> Vec<f64> {
        x.windows(2).map(|w| w[1] - w[0] - self.two_r).collect()
    }

    /// Largest overlap `max(0, 2r - gap)` relative to the contact tolerance:
    /// `Ok(())` if every gap is within tolerance.
    pub fn check_feasible(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        for (k, w) in x.windows(2).enumerate() {
            let excess = w[1] - w[0] - self.two_r;
            if !excess.is_finite() || excess < -Self::contact_tol(w[0], w[1]) {
                return Err(Error::Precondition(format!(
                    "configuration leaves the spacing cone at contact {} (gap excess {excess:e})",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check_feasible(x).is_ok()
    }

    /// Contacts `k` (pair `(k-1, k)`) whose gap equals `2r` within tolerance.
    pub fn active_set(&self, x: &[f64]) -> Vec<usize> {
        x.windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] - self.two_r <= Self::contact_tol(w[0], w[1]))
            .map(|(k, _)| k + 1)
            .collect()
    }

    pub(crate) fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InputDomain(format!(
                "vector has length {}, cone has {} particles",
                x.len(),
                self.n
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InputDomain(format!("entry {i} is not finite")));
        }
        Ok(())
    }
}

/// KKT certificate of a projection onto the spacing cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeCertificate {
    /// One multiplier per contact `k = 1..n`, stored at `k - 1`.
    pub lambdas: Vec<f64>,
    /// Contacts `k` whose gap is at the minimal spacing.
    pub active_set: Vec<usize>,
    /// `max_k lambda_k * (x[k] - x[k-1] - 2r)`.
    pub max_complementarity_violation: f64,
    pub min_lambda: f64,
    /// `|sum xi| / n`: how far the direction is from the span of the constraint
    /// normals. Zero for certificates produced by the oracle.
    pub closure_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Pool {
    start: usize,
    len: usize,
    sum_wy: f64,
    sum_w: f64,
}

impl Pool {
    fn mean(&self) -> f64 {
        self.sum_wy / self.sum_w
    }
}

fn pava(y: &[f64], weights: &[f64]) -> Vec<Pool> {
    let mut pools: Vec<Pool> = Vec::with_capacity(y.len());
    for (i, (&yi, &wi)) in y.iter().zip(weights).enumerate() {
        let mut cur = Pool {
            start: i,
            len: 1,
            sum_wy: wi * yi,
            sum_w: wi,
        };
        // Ties are pooled: exact contact counts as active.
        while let Some(prev) = pools.last() {
            if prev.mean() >= cur.mean() {
                cur = Pool {
                    start: prev.start,
                    len: prev.len + cur.len,
                    sum_wy: prev.sum_wy + cur.sum_wy,
                    sum_w: prev.sum_w + cur.sum_w,
                };
                pools.pop();
            } else {
                break;
            }
        }
        pools.push(cur);
    }
    pools
}

/// Weighted isotonic regression: minimises `sum w_i (x_i - y_i)^2` over
/// nondecreasing `x`. Linear time.
pub fn isotonic_project(y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::InputDomain("isotonic projection of an empty vector".into()));
    }
    if y.len() != weights.len() {
        return Err(Error::InputDomain(format!(
            "{} values but {} weights",
            y.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InputDomain(format!(
            "weight {i} is {}, weights must be positive",
            weights[i]
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InputDomain(format!("value {i} is not finite")));
    }
    let mut out = vec![0.0; y.len()];
    for pool in pava(y, weights) {
        let m = pool.mean();
        out[pool.start..pool.start + pool.len].fill(m);
    }
    Ok(out)
}

/// Scratch space for [`project_onto_cone_into`], reusable across calls.
#[derive(Debug, Default, Clone)]
pub struct ProjectionWorkspace {
    /// Pools of the translated vector as `(sum, len)`.
    pools: Vec<(f64, usize)>,
}

/// Metric projection onto the spacing cone.
///
/// Inputs already feasible within [`FEASIBILITY_RTOL`] are returned unchanged,
/// which makes the map exactly idempotent.
pub fn project_onto_cone(cone: &SpacingCone, y: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    project_onto_cone_into(cone, y, &mut ProjectionWorkspace::default(), &mut out)?;
    Ok(out)
}

/// [`project_onto_cone`] writing into `out` and reusing `ws`, so repeated
/// calls do not allocate.
pub fn project_onto_cone_into(
    cone: &SpacingCone,
    y: &[f64],
    ws: &mut ProjectionWorkspace,
    out: &mut Vec<f64>,
) -> Result<()> {
    cone.check_len(y)?;
    out.clear();
    if cone.contains(y) {
        out.extend_from_slice(y);
        return Ok(());
    }
    // Unit-weight PAVA on the translated vector, fused with the translation
    // and its inverse.
    let two_r = cone.two_r();
    let pools = &mut ws.pools;
    pools.clear();
    for (i, &v) in y.iter().enumerate() {
        let mut sum = v - two_r * i as f64;
        let mut len = 1usize;
        while let Some(&(ps, pl)) = pools.last() {
            if ps / pl as f64 >= sum / len as f64 {
                sum += ps;
                len += pl;
                pools.pop();
            } else {
                break;
            }
        }
        pools.push((sum, len));
    }
    out.reserve(y.len());
    for &(sum, len) in pools.iter() {
        let m = sum / len as f64;
        for _ in 0..len {
            out.push(m + two_r * out.len() as f64);
        }
    }
    Ok(())
}

/// Rescaled norm `sqrt(sum x_i^2 / n)`.
pub fn rescaled_norm(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Rescaled distance `sqrt(sum (a_i - b_i)^2 / n)`.
pub fn rescaled_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// Solve the dense system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `m x m`. Returns `None` if singular.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let pivot = (col..m).max_by(|&r, &s| {
            a[r * m + col]
                .abs()
                .partial_cmp(&a[s * m + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot * m + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(pivot * m + k, col * m + k);
            }
            b.swap(pivot, col);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / d;
            if f != 0.0 {
                for k in col..m {
                    a[r * m + k] -= f * a[col * m + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = b[r];
        for k in r + 1..m {
            s -= a[r * m + k] * x[k];
        }
        x[r] = s / a[r * m + r];
    }
    Some(x)
}

/// Exhaustive active-set solution of the projection QP.
///
/// For every subset `A` of the `n - 1` spacing constraints the
/// equality-constrained least-squares problem is solved through its KKT
/// system `x = y + D_A^T mu`, `D_A D_A^T mu = 2r - D_A y` (with `D` the
/// forward-difference operator). The candidate that is primal feasible with
/// nonnegative multipliers and the smallest objective is returned.
///
/// The certificate carries the raw KKT multipliers, i.e. those of
/// `x - y + sum mu_k (e_{k-1} - e_k) = 0`.
pub fn qp_oracle_project(cone: &SpacingCone, y: &[f64]) -> Result<(Vec<f64>, ConeCertificate)> {
    let n = cone.n();
    if n > ORACLE_MAX_N {
        return Err(Error::Capacity(format!(
            "exhaustive oracle limited to n <= {ORACLE_MAX_N}, got {n}"
        )));
    }
    cone.check_len(y)?;
    let two_r = cone.two_r();
    let scale = 1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let m_all = n - 1;

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut active: Vec<usize> = Vec::with_capacity(m_all);
    for mask in 0u32..(1u32 << m_all) {
        active.clear();
        active.extend((0..m_all).filter(|j| mask & (1 << j) != 0));
        let m = active.len();
        // Gram matrix of difference rows d_j = e_{j+1} - e_j.
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (a, &ja) in active.iter().enumerate() {
            for (b, &jb) in active.iter().enumerate() {
                gram[a * m + b] = if ja == jb {
                    2.0
                } else if ja.abs_diff(jb) == 1 {
                    -1.0
                } else {
                    0.0
                };
            }
            rhs[a] = two_r - (y[ja + 1] - y[ja]);
        }
        let mu = if m == 0 {
            Vec::new()
        } else {
            match solve_dense(gram, rhs) {
                Some(mu) => mu,
                None => continue,
            }
        };
        let mut x = y.to_vec();
        for (a, &j) in active.iter().enumerate() {
            x[j] -= mu[a];
            x[j + 1] += mu[a];
        }
        if mu.iter().any(|&v| v < -tol) {
            continue;
        }
        if x.windows(2).any(|w| w[1] - w[0] - two_r < -tol) {
            continue;
        }
        let obj: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut lambdas = vec![0.0; m_all];
        for (a, &j) in active.iter().enumerate() {
            lambdas[j] = mu[a];
        }
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
            best = Some((obj, x, lambdas));
        }
    }
    let (_, x, lambdas) = best.ok_or_else(|| {
        Error::InternalConsistency("no active set satisfied the KKT conditions".into())
    })?;
    let cert = certificate(cone, &x, lambdas, 0.0, 1e-10, 1e-12);
    Ok((x, cert))
}

fn certificate(
    cone: &SpacingCone,
    x: &[f64],
    lambdas: Vec<f64>,
    closure_residual: f64,
    tol: f64,
    lambda_tol: f64,
) -> ConeCertificate {
    let excess = cone.excess_gaps(x);
    let min_lambda = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let min_lambda = if lambdas.is_empty() { 0.0 } else { min_lambda };
    let max_complementarity_violation = lambdas
        .iter()
        .zip(&excess)
        .map(|(l, e)| (l * e).abs())
        .fold(0.0, f64::max);
    let active_set = cone.active_set(x);
    let passed = min_lambda >= -lambda_tol
        && max_complementarity_violation <= tol
        && closure_residual <= tol;
    ConeCertificate {
        lambdas,
        active_set,
        max_complementarity_violation,
        min_lambda,
        closure_residual,
        passed,
    }
}

/// Checks that `xi` lies in the normal cone of `K` at `x`.
///
/// `xi` is decomposed as `n * sum_k lambda_k (e_{k-1} - e_k)`, which gives
/// `lambda_k = (1/n) sum_{i<k} xi_i`. The check passes iff the decomposition
/// closes (`sum xi = 0`), every `lambda_k >= -tol` and every product
/// `lambda_k * (gap_k - 2r)` is within `tol`.
pub fn normal_cone_check(
    cone: &SpacingCone,
    x: &[f64],
    xi: &[f64],
    tol: f64,
) -> Result<ConeCertificate> {
    cone.check_len(x)?;
    cone.check_len(xi)?;
    for (k, w) in x.windows(2).enumerate() {
        if w[1] - w[0] - cone.two_r() < -tol.max(SpacingCone::contact_tol(w[0], w[1])) {
            return Err(Error::Precondition(format!(
                "point is outside the spacing cone at contact {}",
                k + 1
            )));
        }
    }
    let n = cone.n() as f64;
    let mut lambdas = Vec::with_capacity(cone.n() - 1);
    let mut acc = 0.0;
    for &v in &xi[..cone.n() - 1] {
        acc += v;
        lambdas.push(acc / n);
    }
    let closure = (acc + xi[cone.n() - 1]).abs() / n;
    Ok(certificate(cone, x, lambdas, closure, tol, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Brute force over all block partitions of a 3-vector.
    fn isotonic_by_partition(y: &[f64; 3]) -> [f64; 3] {
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let candidates = [
            [y[0], y[1], y[2]],
            [mean(&y[..2]), mean(&y[..2]), y[2]],
            [y[0], mean(&y[1..]), mean(&y[1..])],
            [mean(y), mean(y), mean(y)],
        ];
        let mut best = None;
        let mut best_obj = f64::INFINITY;
        for c in candidates {
            if c[0] <= c[1] && c[1] <= c[2] {
                let obj: f64 = c.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                if obj < best_obj {
                    best_obj = obj;
                    best = Some(c);
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn isotonic_examples() {
        assert_eq!(isotonic_project(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(isotonic_project(&[1.0, 0.0], &[1.0; 2]).unwrap(), vec![0.5, 0.5]);
        let expected = isotonic_by_partition(&[3.0, 1.0, 2.0]);
        assert_eq!(expected, [2.0, 2.0, 2.0]);
        assert_eq!(isotonic_project(&[3.0, 1.0, 2.0], &[1.0; 3]).unwrap(), expected.to_vec());
    }

    #[test]
    fn isotonic_weighted_pool_is_weighted_mean() {
        let x = isotonic_project(&[2.0, 0.0], &[3.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn isotonic_rejects_bad_input() {
        assert!(matches!(isotonic_project(&[], &[]), Err(Error::InputDomain(_))));
        assert!(matches!(
            isotonic_project(&[1.0, 2.0], &[1.0, 0.0]),
            Err(Error::InputDomain(_))
        ));
        assert!(matches!(
            isotonic_project(&[1.0, 2.0], &[1.0, -2.0]),
            Err(Error::InputDomain(_))
        ));
    }

    #[test]
    fn cone_constructor_guards() {
        assert!(SpacingCone::new(1, 0.5).is_err());
        assert!(SpacingCone::new(3, 0.0).is_err());
        assert!(SpacingCone::canonical(4).unwrap().is_canonical());
        assert!(!SpacingCone::new(2, 1.0).unwrap().is_canonical());
    }

    #[test]
    fn projection_examples() {
        let cone = SpacingCone::new(3, 0.5).unwrap();
        assert_eq!(project_onto_cone(&cone, &[0.0, 0.6, 1.2]).unwrap(), vec![0.0, 0.6, 1.2]);
        let cone = SpacingCone::new(2, 1.0).unwrap();
        assert_eq!(project_onto_cone(&cone, &[0.0, 0.0]).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn oracle_two_particle_kkt() {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        let (x, cert) = qp_oracle_project(&cone, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.lambdas[0], 0.5, epsilon = 1e-15);
        assert_eq!(cert.active_set, vec![1]);
        assert!(cert.passed);
    }

    #[test]
    fn oracle_feasible_point_has_zero_multipliers() {
        let cone = SpacingCone::new(4, 0.25).unwrap();
        let y = [0.0, 0.3, 1.0, 1.25];
        let (x, cert) = qp_oracle_project(&cone, &y).unwrap();
        assert_eq!(x, y.to_vec());
        assert!(cert.lambdas.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn oracle_capacity() {
        let cone = SpacingCone::canonical(21).unwrap();
        assert!(matches!(
            qp_oracle_project(&cone, &[0.0; 21]),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn normal_cone_examples() {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        let x = [-0.5, 0.5];
        let zero = normal_cone_check(&cone, &x, &[0.0, 0.0], 1e-12).unwrap();
        assert!(zero.passed);
        assert_eq!(zero.lambdas, vec![0.0]);

        let c = normal_cone_check(&cone, &x, &[1.0, -1.0], 1e-12).unwrap();
        assert!(c.passed);
        assert_abs_diff_eq!(c.lambdas[0], 0.5, epsilon = 1e-15);
        // The n-scaled decomposition of (1,-1) * n doubles the multiplier.
        let c = normal_cone_check(&cone, &x, &[2.0, -2.0], 1e-12).unwrap();
        assert!(c.passed);
        assert_abs_diff_eq!(c.lambdas[0], 1.0, epsilon = 1e-15);

        let spread = [0.0, 3.0];
        let c = normal_cone_check(&cone, &spread, &[1.0, -1.0], 1e-12).unwrap();
        assert!(!c.passed);
        // Wrong orientation: pulls the particles apart.
        let c = normal_cone_check(&cone, &x, &[-1.0, 1.0], 1e-12).unwrap();
        assert!(!c.passed);
        // Not in the span of the constraint normals.
        let c = normal_cone_check(&cone, &x, &[1.0, 0.0], 1e-12).unwrap();
        assert!(!c.passed);

        assert!(matches!(
            normal_cone_check(&cone, &[0.0, 0.5], &[0.0, 0.0], 1e-12),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn projection_residual_lies_in_normal_cone() {
        let cone = SpacingCone::canonical(6).unwrap();
        let y = [0.4, 0.1, 0.2, 0.9, 0.5, 0.55];
        let x = project_onto_cone(&cone, &y).unwrap();
        let xi: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let c = normal_cone_check(&cone, &x, &xi, 1e-12).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn dense_solver_detects_singular() {
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_none());
        let x = solve_dense(vec![2.0, -1.0, -1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }
}
