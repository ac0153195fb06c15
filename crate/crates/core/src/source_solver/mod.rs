//! Source power allocation for a fixed relay allocation.
//!
//! Two problem shapes share the objective `-sum_m ln lambda_rs_tilde,m` (the
//! only source-dependent part of the high-SNR rate) and the relay power
//! conservation equality `sum_m a_m x_m = b`:
//!
//! * the ordered problem: `0 < x_1 <= ... <= x_r`, `sum_m w_m x_m <= P_S`,
//!   solved by the barrier method in [`barrier`];
//! * the relaxed problem: `x > 0`, `sum_m x_m <= P_S / max_m w_m`, solved in
//!   closed form (budget inactive) or through its two-multiplier KKT system
//!   (budget active).

pub mod barrier;

use crate::channel_model::SystemParams;
use crate::error::{RelayError, Result};
use crate::hpm_plm::DiagonalizedSystem;
use barrier::{dot, minimize_neg_log_sum, slice_centroid, BarrierOptions, LinearConstraints};

/// Largest certified objective gap (nats) accepted from the barrier method.
pub const GAP_TOL: f64 = 1e-7;
const ROOT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceProblem {
    /// Relay powers, held fixed.
    pub lambda_f: Vec<f64>,
    pub lambda_dr: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub sigma2: f64,
    pub p_s: f64,
    pub p_d: f64,
    pub lambda_dr_max: f64,
    /// Source-power weights `||h_e,m||^2`.
    pub w: Vec<f64>,
}

impl SourceProblem {
    pub fn from_system(sys: &DiagonalizedSystem, lambda_f: &[f64], params: &SystemParams) -> Self {
        SourceProblem {
            lambda_f: lambda_f.to_vec(),
            lambda_dr: sys.lambda_dr.clone(),
            beta: sys.beta.clone(),
            rho: params.rho,
            sigma2: params.sigma2,
            p_s: params.p_s,
            p_d: params.p_d,
            lambda_dr_max: sys.lambda_dr_max,
            w: sys.w.clone(),
        }
    }

    pub fn r(&self) -> usize {
        self.lambda_f.len()
    }

    /// Equality coefficients `a_m = lambda_f,m (1 - rho) - rho`.
    pub fn a(&self) -> Vec<f64> {
        self.lambda_f.iter().map(|lf| lf * (1.0 - self.rho) - self.rho).collect()
    }

    /// Equality right-hand side `rho P_D lambda_dr_max - sum_m (sigma2 + beta_m) lambda_f,m`.
    pub fn b(&self) -> f64 {
        self.rho * self.p_d * self.lambda_dr_max
            - self.lambda_f.iter().zip(&self.beta).map(|(lf, b)| (self.sigma2 + b) * lf).sum::<f64>()
    }

    pub fn h_e_max2(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }

    /// Relative residual of the power-conservation equality.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        let a = self.a();
        let b = self.b();
        // b is a difference of large terms; measure against their size.
        let b_terms = self.rho * self.p_d * self.lambda_dr_max
            + self.lambda_f.iter().zip(&self.beta).map(|(lf, be)| (self.sigma2 + be) * lf).sum::<f64>();
        let scale = b_terms + a.iter().zip(x).map(|(ai, xi)| (ai * xi).abs()).sum::<f64>();
        (dot(&a, x) - b).abs() / scale.max(f64::MIN_POSITIVE)
    }

    fn validate(&self) -> Result<()> {
        let r = self.r();
        if r == 0 || self.lambda_dr.len() != r || self.beta.len() != r || self.w.len() != r {
            return Err(RelayError::domain("source problem vectors must be nonempty and of equal length"));
        }
        if self.lambda_f.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(RelayError::domain("relay powers must be positive"));
        }
        if self.w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(RelayError::domain("source weights must be positive"));
        }
        Ok(())
    }

    pub fn relaxed_cap(&self) -> f64 {
        self.p_s / self.h_e_max2()
    }
}

/// Constraint set `{x_1 > 0, x_m <= x_(m+1), w.x <= p_s, a.x = b}`.
pub fn ordered_constraints(a: &[f64], b: f64, w: &[f64], p_s: f64) -> LinearConstraints {
    let r = a.len();
    let mut ineq = Vec::with_capacity(r + 1);
    let mut first = vec![0.0; r];
    first[0] = -1.0;
    ineq.push((first, 0.0));
    for m in 0..r.saturating_sub(1) {
        let mut g = vec![0.0; r];
        g[m] = 1.0;
        g[m + 1] = -1.0;
        ineq.push((g, 0.0));
    }
    ineq.push((w.to_vec(), p_s));
    LinearConstraints { ineq, eq_coef: a.to_vec(), eq_rhs: b }
}

/// Constraint set `{x > 0, sum(x) <= cap, a.x = b}`.
pub fn relaxed_constraints(a: &[f64], b: f64, cap: f64) -> LinearConstraints {
    let r = a.len();
    let mut ineq: Vec<(Vec<f64>, f64)> = (0..r)
        .map(|m| {
            let mut g = vec![0.0; r];
            g[m] = -1.0;
            (g, 0.0)
        })
        .collect();
    ineq.push((vec![1.0; r], cap));
    LinearConstraints { ineq, eq_coef: a.to_vec(), eq_rhs: b }
}

/// Vertices of `{0 <= x_1 <= ... <= x_r, w.x <= p_s}`.
fn ordered_vertices(w: &[f64], p_s: f64) -> Vec<Vec<f64>> {
    let r = w.len();
    let mut verts = vec![vec![0.0; r]];
    for k in 0..r {
        let tail: f64 = w[k..].iter().sum();
        let mut v = vec![0.0; r];
        for x in v.iter_mut().skip(k) {
            *x = p_s / tail;
        }
        verts.push(v);
    }
    verts
}

/// Vertices of `{x >= 0, sum(x) <= cap}`.
fn relaxed_vertices(r: usize, cap: f64) -> Vec<Vec<f64>> {
    let mut verts = vec![vec![0.0; r]];
    for k in 0..r {
        let mut v = vec![0.0; r];
        v[k] = cap;
        verts.push(v);
    }
    verts
}

/// Rate-oriented high-SNR objective,
/// `sum_m ln((1 - rho) x_m lambda_f,m lambda_DR,m / (sigma2 (1 + lambda_f,m lambda_DR,m)))`.
pub fn p3b_objective(
    lambda_rs_tilde: &[f64],
    lambda_f: &[f64],
    lambda_dr: &[f64],
    rho: f64,
    sigma2: f64,
) -> Result<f64> {
    let r = lambda_rs_tilde.len();
    if lambda_f.len() != r || lambda_dr.len() != r {
        return Err(RelayError::domain("objective vectors must have equal length"));
    }
    if !(sigma2 > 0.0) || !(rho > 0.0 && rho < 1.0) {
        return Err(RelayError::domain("objective needs sigma2 > 0 and rho in (0,1)"));
    }
    let mut total = 0.0;
    for m in 0..r {
        let (x, lf, ld) = (lambda_rs_tilde[m], lambda_f[m], lambda_dr[m]);
        if !(x > 0.0 && lf > 0.0 && ld > 0.0) {
            return Err(RelayError::domain("objective arguments must be positive"));
        }
        let g = lf * ld;
        total += ((1.0 - rho) * x).ln() + g.ln() - sigma2.ln() - g.ln_1p();
    }
    Ok(total)
}

/// Which closed form produced the relaxed-problem solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P3cBranch {
    /// Budget multiplier zero: `x_m = 1 / (mu a_m)`.
    Interior,
    /// Budget active: `x_m = 1 / (gamma + mu a_m)`.
    Active,
}

/// Solves the relaxed (uniform-weight, unordered) source problem.
pub fn solve_p3c(prob: &SourceProblem) -> Result<(Vec<f64>, P3cBranch)> {
    prob.validate()?;
    solve_relaxed(&prob.a(), prob.b(), prob.relaxed_cap())
}

/// `min -sum ln x` s.t. `x > 0`, `sum(x) <= cap`, `a.x = b`.
///
/// Returns the budget-inactive closed form when all `a_m` share a sign and
/// the resulting point fits the budget; otherwise solves the two-multiplier
/// system, falling back to nested bisection and then to the barrier method.
pub fn solve_relaxed(a: &[f64], b: f64, cap: f64) -> Result<(Vec<f64>, P3cBranch)> {
    let r = a.len();
    if r == 0 || !(cap > 0.0 && cap.is_finite()) {
        return Err(RelayError::domain("relaxed problem needs r >= 1 and a positive budget"));
    }
    if a.contains(&0.0) {
        return Err(RelayError::Degenerate(
            "a relay power equals rho / (1 - rho), zeroing its source coefficient".into(),
        ));
    }

    let all_pos = a.iter().all(|&v| v > 0.0);
    let all_neg = a.iter().all(|&v| v < 0.0);
    if (all_pos && b <= 0.0) || (all_neg && b >= 0.0) {
        return Err(RelayError::infeasible("power-conservation equality has no positive solution"));
    }
    if all_pos || all_neg {
        let inv_mu = b / r as f64;
        let sum_inv_a: f64 = a.iter().map(|v| 1.0 / v).sum();
        let bound = cap / sum_inv_a;
        let interior = if all_pos { inv_mu > 0.0 && inv_mu <= bound } else { inv_mu < 0.0 && inv_mu >= bound };
        if interior {
            return Ok((a.iter().map(|am| inv_mu / am).collect(), P3cBranch::Interior));
        }
    }

    let vertices = relaxed_vertices(r, cap);
    if slice_centroid(&vertices, a, b).is_none() {
        return Err(RelayError::infeasible("power-conservation equality unreachable within the relaxed source budget"));
    }
    if let Some((_, _, x)) = active_branch_newton(a, b, cap).or_else(|| active_branch_bisection(a, b, cap)) {
        return Ok((x, P3cBranch::Active));
    }
    log::debug!("relaxed source problem: KKT root-finding failed, falling back to barrier");
    let x = barrier_solve(&relaxed_constraints(a, b, cap), &vertices, None)?;
    Ok((x, P3cBranch::Active))
}

fn kkt_point(a: &[f64], gamma: f64, mu: f64) -> Option<Vec<f64>> {
    let x: Vec<f64> = a.iter().map(|am| 1.0 / (gamma + mu * am)).collect();
    if x.iter().all(|&v| v > 0.0 && v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn active_residuals(a: &[f64], b: f64, cap: f64, x: &[f64]) -> (f64, f64) {
    let sum: f64 = x.iter().sum();
    let eq = dot(a, x);
    let eq_scale = b.abs() + a.iter().zip(x).map(|(ai, xi)| (ai * xi).abs()).sum::<f64>();
    ((sum - cap).abs() / cap, (eq - b).abs() / eq_scale.max(f64::MIN_POSITIVE))
}

/// Newton on the concave dual `sum ln(gamma + mu a_m) - gamma cap - mu b`,
/// whose stationarity conditions are the budget and conservation equations.
fn active_branch_newton(a: &[f64], b: f64, cap: f64) -> Option<(f64, f64, Vec<f64>)> {
    let r = a.len() as f64;
    let dual = |g: f64, m: f64| -> Option<f64> {
        let mut v = -g * cap - m * b;
        for am in a {
            let d = g + m * am;
            if d <= 0.0 {
                return None;
            }
            v += d.ln();
        }
        Some(v)
    };
    let (mut gamma, mut mu) = (r / cap, 0.0);
    for _ in 0..ROOT_MAX_ITER {
        let x = kkt_point(a, gamma, mu)?;
        let (rs, re) = active_residuals(a, b, cap, &x);
        if rs <= 1e-13 && re <= 1e-13 {
            break;
        }
        let g0 = x.iter().sum::<f64>() - cap;
        let g1 = dot(a, &x) - b;
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        for (am, xm) in a.iter().zip(&x) {
            let x2 = xm * xm;
            h00 += x2;
            h01 += am * x2;
            h11 += am * am * x2;
        }
        // ascent direction: solve [h00 h01; h01 h11] d = g
        let det = h00 * h11 - h01 * h01;
        if !(det > 1e-300 * h00 * h11) {
            return None;
        }
        let dg = (h11 * g0 - h01 * g1) / det;
        let dm = (h00 * g1 - h01 * g0) / det;
        let slope = g0 * dg + g1 * dm;
        let base = dual(gamma, mu)?;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let (ng, nm) = (gamma + t * dg, mu + t * dm);
            if let Some(v) = dual(ng, nm) {
                if v >= base + 1e-4 * t * slope {
                    gamma = ng;
                    mu = nm;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let x = kkt_point(a, gamma, mu)?;
    let (rs, re) = active_residuals(a, b, cap, &x);
    if rs <= 1e-10 && re <= 1e-10 && gamma >= 0.0 {
        Some((gamma, mu, x))
    } else {
        None
    }
}

/// Open interval of `mu` keeping `gamma + mu a_m > 0` for all `m`.
fn mu_domain(a: &[f64], gamma: f64) -> (f64, f64) {
    let max_pos = a.iter().copied().filter(|&v| v > 0.0).fold(0.0, f64::max);
    let max_neg = a.iter().copied().filter(|&v| v < 0.0).map(f64::abs).fold(0.0, f64::max);
    let lo = if max_pos > 0.0 { -gamma / max_pos } else { f64::NEG_INFINITY };
    let hi = if max_neg > 0.0 { gamma / max_neg } else { f64::INFINITY };
    (lo, hi)
}

/// Root of the decreasing function `sum a_m / (gamma + mu a_m) - b` in `mu`.
fn mu_for_gamma(a: &[f64], b: f64, gamma: f64) -> Option<f64> {
    let h = |mu: f64| a.iter().map(|am| am / (gamma + mu * am)).sum::<f64>() - b;
    let (dlo, dhi) = mu_domain(a, gamma);
    let mut lo = if dlo.is_finite() { dlo } else { -1.0 };
    let mut hi = if dhi.is_finite() { dhi } else { 1.0 };
    let mut k = 0;
    while !dlo.is_finite() && h(lo) < 0.0 {
        lo *= 2.0;
        k += 1;
        if k > ROOT_MAX_ITER {
            return None;
        }
    }
    k = 0;
    while !dhi.is_finite() && h(hi) > 0.0 {
        hi *= 2.0;
        k += 1;
        if k > ROOT_MAX_ITER {
            return None;
        }
    }
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid > dlo && mid < dhi).then_some(mid)
}

/// Nested bisection: inner on `mu` at fixed `gamma`, outer on `gamma` for the
/// budget equation.
fn active_branch_bisection(a: &[f64], b: f64, cap: f64) -> Option<(f64, f64, Vec<f64>)> {
    let total = |gamma: f64| -> Option<(f64, f64, Vec<f64>)> {
        let mu = mu_for_gamma(a, b, gamma)?;
        let x = kkt_point(a, gamma, mu)?;
        Some((x.iter().sum::<f64>() - cap, mu, x))
    };
    let mut lo = a.len() as f64 / cap;
    let mut hi = lo;
    let mut k = 0;
    while total(lo)?.0 < 0.0 {
        lo *= 0.5;
        k += 1;
        if k > ROOT_MAX_ITER {
            return None;
        }
    }
    k = 0;
    while total(hi)?.0 > 0.0 {
        hi *= 2.0;
        k += 1;
        if k > ROOT_MAX_ITER {
            return None;
        }
    }
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let (_, mu, x) = total(gamma)?;
    let (rs, re) = active_residuals(a, b, cap, &x);
    (rs <= 1e-8 && re <= 1e-8).then_some((gamma, mu, x))
}

fn barrier_solve(cons: &LinearConstraints, vertices: &[Vec<f64>], warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let center = slice_centroid(vertices, &cons.eq_coef, cons.eq_rhs)
        .ok_or_else(|| RelayError::infeasible("power-conservation equality unreachable within the source budget"))?;
    let mut start = center.clone();
    cons.project_onto_equality(&mut start);
    if !cons.strictly_feasible(&start) {
        return Err(RelayError::infeasible(describe_tight(cons, &start)));
    }
    if let Some(w) = warm {
        if w.len() == start.len() {
            let mut blend: Vec<f64> = w.iter().zip(&start).map(|(a, b)| 0.5 * (a + b)).collect();
            cons.project_onto_equality(&mut blend);
            if cons.strictly_feasible(&blend) {
                start = blend;
            }
        }
    }
    let out = minimize_neg_log_sum(cons, &start, &BarrierOptions::default())?;
    if out.gap_bound > GAP_TOL {
        return Err(RelayError::SolverFailure(format!("barrier optimality gap {:.3e} above tolerance", out.gap_bound)));
    }
    Ok(out.x)
}

fn describe_tight(cons: &LinearConstraints, x: &[f64]) -> String {
    let slacks = cons.slacks(x);
    let n = slacks.len();
    match slacks.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        Some((i, _)) if i + 1 == n => "feasible set touches the source power budget only on its boundary".into(),
        Some(_) => "feasible set has no strictly positive ordered point".into(),
        None => "empty constraint set".into(),
    }
}

/// Solves the ordered source problem with the barrier method.
///
/// `warm_start`, when strictly feasible after projection, is blended with
/// the phase-1 point to start the barrier.
pub fn solve_p3b(prob: &SourceProblem, warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    prob.validate()?;
    solve_ordered(&prob.a(), prob.b(), &prob.w, prob.p_s, warm_start)
}

/// `min -sum ln x` s.t. `0 < x_1 <= ... <= x_r`, `w.x <= p_s`, `a.x = b`.
pub fn solve_ordered(a: &[f64], b: f64, w: &[f64], p_s: f64, warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    let r = a.len();
    if r == 0 || w.len() != r || !(p_s > 0.0) {
        return Err(RelayError::domain("ordered problem needs matching vectors and a positive budget"));
    }
    if r == 1 {
        if a[0] == 0.0 {
            return Err(RelayError::Degenerate("source coefficient vanishes".into()));
        }
        let x = b / a[0];
        if !(x > 0.0) {
            return Err(RelayError::infeasible("power-conservation equality forces a nonpositive source power"));
        }
        if w[0] * x > p_s * (1.0 + 1e-12) {
            return Err(RelayError::infeasible("power-conservation equality exceeds the source power budget"));
        }
        return Ok(vec![x]);
    }
    let cons = ordered_constraints(a, b, w, p_s);
    let mut x = barrier_solve(&cons, &ordered_vertices(w, p_s), warm_start)?;
    for m in 1..x.len() {
        if x[m] < x[m - 1] && x[m - 1] - x[m] <= 1e-12 * x[m - 1] {
            x[m] = x[m - 1];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxed_single_mode_interior() {
        // a = -1, b = -2: mu = r / b = -1/2, x = 1 / (mu a) = 2
        let (x, branch) = solve_relaxed(&[-1.0], -2.0, 1e6).unwrap();
        assert_eq!(branch, P3cBranch::Interior);
        assert!((x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn relaxed_parallel_constraints() {
        // equal coefficients make the equality and the budget parallel:
        // a = (-1, -1), b = -2 with cap 2 pins sum(x) = 2 and gives (1, 1)
        let (x, _) = solve_relaxed(&[-1.0, -1.0], -2.0, 2.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        // b = -4 would need sum(x) = 4 > cap
        assert!(matches!(solve_relaxed(&[-1.0, -1.0], -4.0, 2.0), Err(RelayError::Infeasible { .. })));
    }

    #[test]
    fn relaxed_mixed_signs_use_budget() {
        // a = (1, -1), b = 0 forces x1 = x2; the budget then binds at (cap/2, cap/2)
        let (x, branch) = solve_relaxed(&[1.0, -1.0], 0.0, 3.0).unwrap();
        assert_eq!(branch, P3cBranch::Active);
        assert!((x[0] - 1.5).abs() < 1e-10 && (x[1] - 1.5).abs() < 1e-10);
    }

    #[test]
    fn relaxed_active_when_interior_exceeds_budget() {
        // interior point would be (b/r)/a = (1.5, 0.75), sum 2.25 > cap = 2;
        // with the budget tight both equations pin x = (1, 1)
        let a = [1.0, 2.0];
        let (x, branch) = solve_relaxed(&a, 3.0, 2.0).unwrap();
        assert_eq!(branch, P3cBranch::Active);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn relaxed_rejects_sign_inconsistent_rhs() {
        assert!(solve_relaxed(&[1.0, 2.0], -1.0, 5.0).is_err());
        assert!(matches!(solve_relaxed(&[0.0, 2.0], 1.0, 5.0), Err(RelayError::Degenerate(_))));
    }

    #[test]
    fn ordered_single_mode_is_pinned() {
        let x = solve_ordered(&[-0.5], -0.25, &[2.0], 10.0, None).unwrap();
        assert_eq!(x, vec![0.5]);
        assert!(solve_ordered(&[-0.5], -0.25, &[2.0], 0.5, None).is_err());
    }

    #[test]
    fn ordered_matches_relaxed_when_compatible() {
        // uniform weights, increasing interior solution, budget slack
        let a = [-0.5, -0.3, -0.2];
        let b = -0.6;
        let (xr, branch) = solve_relaxed(&a, b, 100.0).unwrap();
        assert_eq!(branch, P3cBranch::Interior);
        assert!(xr.windows(2).all(|w| w[0] <= w[1]));
        let xo = solve_ordered(&a, b, &[1.0; 3], 100.0, None).unwrap();
        for (p, q) in xo.iter().zip(&xr) {
            assert!((p - q).abs() < 1e-6 * q.abs().max(1.0));
        }
    }

    #[test]
    fn ordered_enforces_ordering() {
        // unconstrained optimum x = (b/r)/a = (1.75, 0.7) is decreasing; ordering ties it
        let a = [-0.2, -0.5];
        let b = -0.7;
        let x = solve_ordered(&a, b, &[1.0, 1.0], 100.0, None).unwrap();
        assert!(x[0] <= x[1]);
        assert!((dot(&a, &x) - b).abs() < 1e-10);
        // tie: x1 = x2 = b / sum(a) = 1
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn objective_values() {
        // unit SNR term: (1-rho) x lf ld = sigma2 (1 + lf ld)
        let (rho, sigma2, lf, ld) = (0.5, 1.0, 1.0, 1.0);
        let x = sigma2 * (1.0 + lf * ld) / ((1.0 - rho) * lf * ld);
        assert!(p3b_objective(&[x], &[lf], &[ld], rho, sigma2).unwrap().abs() < 1e-15);
        let base = p3b_objective(&[0.1, 0.2], &[1.0, 2.0], &[0.3, 0.4], 0.7, 1e-3).unwrap();
        let doubled = p3b_objective(&[0.2, 0.4], &[1.0, 2.0], &[0.3, 0.4], 0.7, 1e-3).unwrap();
        assert!((doubled - base - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(p3b_objective(&[0.0], &[1.0], &[1.0], 0.5, 1.0).is_err());
    }
}
