//! Dense log-barrier method for
//!
//! ```text
//! minimize   -sum_m ln x_m
//! subject to g_i . x <= h_i      (strict interior maintained)
//!            a . x = b
//! ```
//!
//! The equality is eliminated through a null-space parameterization
//! `x = x0 + N y`; each barrier stage runs damped Newton on `y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{RelayError, Result};

#[derive(Debug, Clone)]
pub struct LinearConstraints {
    /// Rows `(g_i, h_i)` meaning `g_i . x <= h_i`.
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub eq_coef: Vec<f64>,
    pub eq_rhs: f64,
}

impl LinearConstraints {
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.ineq.iter().map(|(g, h)| h - dot(g, x)).collect()
    }

    pub fn eq_residual(&self, x: &[f64]) -> f64 {
        dot(&self.eq_coef, x) - self.eq_rhs
    }

    fn eq_scale(&self, x: &[f64]) -> f64 {
        self.eq_rhs.abs() + self.eq_coef.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>()
    }

    /// True when `x > 0`, every inequality holds strictly and the equality
    /// holds to `1e-10` relative.
    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v > 0.0)
            && self.slacks(x).iter().all(|&s| s > 0.0)
            && self.eq_residual(x).abs() <= 1e-10 * self.eq_scale(x).max(f64::MIN_POSITIVE)
    }

    /// Moves `x` onto the equality hyperplane along `eq_coef`.
    pub fn project_onto_equality(&self, x: &mut [f64]) {
        let aa = dot(&self.eq_coef, &self.eq_coef);
        if aa > 0.0 {
            let t = self.eq_residual(x) / aa;
            for (v, a) in x.iter_mut().zip(&self.eq_coef) {
                *v -= t * a;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    pub mu_start: f64,
    pub mu_end: f64,
    pub mu_factor: f64,
    /// Stop a stage once half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { mu_start: 1.0, mu_end: 1e-9, mu_factor: 0.1, newton_tol: 1e-14, max_newton_per_stage: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub x: Vec<f64>,
    /// Bound on the objective gap to the constrained optimum (nats):
    /// `m mu` for the final barrier weight plus the last squared Newton
    /// decrement. The objective and barrier are self-concordant, so the bound
    /// holds once the decrement is small.
    pub gap_bound: f64,
    pub newton_iters: usize,
}

/// Finds a strictly feasible point of `{v in conv(vertices)} ∩ {a.x = b}`.
///
/// The slice of a simplex by a hyperplane is the convex hull of the points
/// where the hyperplane crosses the simplex edges (plus vertices lying on
/// it); their centroid lies in the relative interior of the slice.
pub fn slice_centroid(vertices: &[Vec<f64>], a: &[f64], b: f64) -> Option<Vec<f64>> {
    let n = a.len();
    let vals: Vec<f64> = vertices.iter().map(|v| dot(a, v) - b).collect();
    let scale =
        b.abs() + vertices.iter().map(|v| a.iter().zip(v).map(|(x, y)| (x * y).abs()).sum::<f64>()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, vi) in vertices.iter().enumerate() {
        if vals[i].abs() <= tiny {
            points.push(vi.clone());
        }
        for j in (i + 1)..vertices.len() {
            let (gi, gj) = (vals[i], vals[j]);
            if (gi > tiny && gj < -tiny) || (gi < -tiny && gj > tiny) {
                let t = gi / (gi - gj);
                points.push((0..n).map(|k| vi[k] + t * (vertices[j][k] - vi[k])).collect());
            }
        }
    }
    if points.is_empty() {
        return None;
    }
    let inv = 1.0 / points.len() as f64;
    Some((0..n).map(|k| points.iter().map(|p| p[k]).sum::<f64>() * inv).collect())
}

fn null_space(a: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.len();
    let pivot = (0..n)
        .max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
        .ok_or_else(|| RelayError::Degenerate("empty equality".into()))?;
    if a[pivot] == 0.0 {
        return Err(RelayError::Degenerate("equality constraint has zero coefficients".into()));
    }
    let mut basis = DMatrix::zeros(n, n - 1);
    let mut col = 0;
    for j in 0..n {
        if j == pivot {
            continue;
        }
        basis[(j, col)] = 1.0;
        basis[(pivot, col)] = -a[j] / a[pivot];
        col += 1;
    }
    Ok(basis)
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(cons: &LinearConstraints, x: &[f64], mu: f64) -> Option<Eval> {
    let n = x.len();
    if x.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let slacks = cons.slacks(x);
    if slacks.iter().any(|&s| s <= 0.0) {
        return None;
    }
    let mut value = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for m in 0..n {
        value -= x[m].ln();
        grad[m] = -1.0 / x[m];
        hess[(m, m)] = 1.0 / (x[m] * x[m]);
    }
    for ((g, _), &s) in cons.ineq.iter().zip(&slacks) {
        value -= mu * s.ln();
        for i in 0..n {
            if g[i] == 0.0 {
                continue;
            }
            grad[i] += mu * g[i] / s;
            for j in 0..n {
                hess[(i, j)] += mu * g[i] * g[j] / (s * s);
            }
        }
    }
    Some(Eval { value, grad, hess })
}

fn value_only(cons: &LinearConstraints, x: &[f64], mu: f64) -> Option<f64> {
    if x.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let mut value: f64 = x.iter().map(|v| -v.ln()).sum();
    for s in cons.slacks(x) {
        if s <= 0.0 {
            return None;
        }
        value -= mu * s.ln();
    }
    Some(value)
}

fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    h.lu().solve(rhs)
}

/// Runs the barrier method from a strictly feasible `x0`.
pub fn minimize_neg_log_sum(cons: &LinearConstraints, x0: &[f64], opts: &BarrierOptions) -> Result<BarrierOutcome> {
    let n = x0.len();
    if cons.eq_coef.len() != n || cons.ineq.iter().any(|(g, _)| g.len() != n) {
        return Err(RelayError::domain("constraint dimensions do not match the start point"));
    }
    if !cons.strictly_feasible(x0) {
        return Err(RelayError::SolverFailure("barrier start point is not strictly feasible".into()));
    }
    if n == 1 {
        return Ok(BarrierOutcome { x: x0.to_vec(), gap_bound: 0.0, newton_iters: 0 });
    }
    let basis = null_space(&cons.eq_coef)?;
    let mut x = x0.to_vec();
    let mut mu = opts.mu_start;
    let mut total = 0;
    let mut last_decrement = f64::INFINITY;
    loop {
        for _ in 0..opts.max_newton_per_stage {
            let ev = evaluate(cons, &x, mu)
                .ok_or_else(|| RelayError::SolverFailure("iterate left the feasible interior".into()))?;
            let g_red = basis.transpose() * &ev.grad;
            let h_red = basis.transpose() * &ev.hess * &basis;
            let dy = solve_spd(h_red, &(-&g_red))
                .ok_or_else(|| RelayError::SolverFailure("singular reduced Hessian".into()))?;
            let decrement2 = -g_red.dot(&dy);
            if !decrement2.is_finite() {
                return Err(RelayError::SolverFailure("non-finite Newton step".into()));
            }
            last_decrement = decrement2;
            if decrement2 * 0.5 <= opts.newton_tol {
                break;
            }
            let dx = &basis * dy;
            let slope = ev.grad.dot(&dx);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial: Vec<f64> = (0..n).map(|i| x[i] + t * dx[i]).collect();
                if let Some(v) = value_only(cons, &trial, mu) {
                    if v <= ev.value + 0.25 * t * slope {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            total += 1;
            if !accepted {
                // no measurable progress: the stage is converged to rounding
                break;
            }
        }
        if mu <= opts.mu_end {
            break;
        }
        mu = (mu * opts.mu_factor).max(opts.mu_end);
    }

    let gap_bound = cons.ineq.len() as f64 * mu + last_decrement;
    Ok(BarrierOutcome { x, gap_bound, newton_iters: total })
}
