//! Relay power allocation for a fixed source allocation.
//!
//! Maximizes `sum_m ln(lambda_f,m lambda_DR,m / (1 + lambda_f,m lambda_DR,m))`
//! subject to `sum_m lambda_f,m z_m = budget`. Stationarity gives a
//! per-mode closed form in the dual variable `nu`; the total forwarded power
//! is strictly decreasing in `nu`, so `nu` is found by bisection.

use crate::error::{RelayError, Result};
use crate::hpm_plm::DiagonalizedSystem;

/// Default relative residual for the power-conservation equality.
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RelayProblem {
    /// Per-mode cost of relay power: `(1 - rho) lambda_rs_tilde + sigma2 + beta`.
    pub z: Vec<f64>,
    /// Forwarding channel gains, paired index-by-index with `z`.
    pub lambda_dr: Vec<f64>,
    /// Harvested power: `rho sum(lambda_rs_tilde) + rho P_D lambda_dr_max`.
    pub budget: f64,
}

impl RelayProblem {
    pub fn new(z: Vec<f64>, lambda_dr: Vec<f64>, budget: f64) -> Result<Self> {
        if z.is_empty() || z.len() != lambda_dr.len() {
            return Err(RelayError::domain("z and lambda_dr must be nonempty and of equal length"));
        }
        if z.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(RelayError::domain("z entries must be positive"));
        }
        if lambda_dr.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(RelayError::domain("lambda_dr entries must be positive"));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(RelayError::domain(format!("relay budget must be positive, got {budget}")));
        }
        Ok(RelayProblem { z, lambda_dr, budget })
    }

    /// Builds the relay problem from the physical quantities.
    #[allow(clippy::too_many_arguments)]
    pub fn energy_flow(
        lambda_rs_tilde: &[f64],
        lambda_dr: &[f64],
        beta: &[f64],
        rho: f64,
        sigma2: f64,
        p_d: f64,
        lambda_dr_max: f64,
    ) -> Result<Self> {
        if lambda_rs_tilde.len() != lambda_dr.len() || beta.len() != lambda_dr.len() {
            return Err(RelayError::domain("relay problem vectors must have equal length"));
        }
        let z = lambda_rs_tilde.iter().zip(beta).map(|(l, b)| (1.0 - rho) * l + sigma2 + b).collect();
        let budget = rho * lambda_rs_tilde.iter().sum::<f64>() + rho * p_d * lambda_dr_max;
        RelayProblem::new(z, lambda_dr.to_vec(), budget)
    }

    pub fn from_system(
        sys: &DiagonalizedSystem,
        lambda_rs_tilde: &[f64],
        rho: f64,
        sigma2: f64,
        p_d: f64,
    ) -> Result<Self> {
        RelayProblem::energy_flow(lambda_rs_tilde, &sys.lambda_dr, &sys.beta, rho, sigma2, p_d, sys.lambda_dr_max)
    }

    pub fn r(&self) -> usize {
        self.z.len()
    }

    /// `sum_m lambda_f,m z_m`.
    pub fn spent(&self, lambda_f: &[f64]) -> f64 {
        lambda_f.iter().zip(&self.z).map(|(l, z)| l * z).sum()
    }

    /// `lambda_f`-dependent part of the objective, natural log.
    pub fn utility(&self, lambda_f: &[f64]) -> f64 {
        relay_utility(lambda_f, &self.lambda_dr)
    }
}

/// `sum_m ln(lambda_f,m lambda_DR,m / (1 + lambda_f,m lambda_DR,m))`.
pub fn relay_utility(lambda_f: &[f64], lambda_dr: &[f64]) -> f64 {
    lambda_f
        .iter()
        .zip(lambda_dr)
        .map(|(&lf, &ld)| {
            let g = lf * ld;
            g.ln() - g.ln_1p()
        })
        .sum()
}

/// Per-mode stationary point for a given dual variable.
///
/// Evaluated as `2 / (nu z (1 + sqrt(1 + 4 lambda_DR / (nu z))))`, which is
/// algebraically `-1/(2 lambda_DR) + sqrt(1/lambda_DR^2 + 4/(nu lambda_DR z))/2`
/// without the cancellation at large `nu`.
pub fn lambda_f_closed_form(prob: &RelayProblem, nu: f64) -> Result<Vec<f64>> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(RelayError::domain(format!("dual variable must be positive, got {nu}")));
    }
    Ok(closed_form_unchecked(prob, nu))
}

fn closed_form_unchecked(prob: &RelayProblem, nu: f64) -> Vec<f64> {
    prob.z
        .iter()
        .zip(&prob.lambda_dr)
        .map(|(&z, &ld)| {
            let nz = nu * z;
            2.0 / (nz * (1.0 + (1.0 + 4.0 * ld / nz).sqrt()))
        })
        .collect()
}

/// Solves the relay allocation; returns `(lambda_f, nu_star)`.
///
/// The bracket starts at `[1e-12, 1]` and is widened by doubling the upper
/// end (and halving the lower end) until the power residual changes sign.
/// Bisection runs on `ln nu` until the relative residual is at most `tol` or
/// the bracket collapses to floating-point resolution.
pub fn solve_relay_power(prob: &RelayProblem, tol: f64) -> Result<(Vec<f64>, f64)> {
    if !(tol > 0.0) {
        return Err(RelayError::domain("tolerance must be positive"));
    }
    let residual = |nu: f64| prob.spent(&closed_form_unchecked(prob, nu)) / prob.budget - 1.0;

    let mut lo = 1e-12_f64;
    let mut hi = 1.0_f64;
    let mut expansions = 0;
    while residual(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_ITER || !hi.is_finite() {
            return Err(RelayError::NoSolution("dual bracket expansion failed (budget too small)".into()));
        }
    }
    expansions = 0;
    while residual(lo) < 0.0 {
        hi = lo;
        lo *= 0.5;
        expansions += 1;
        if expansions > MAX_ITER || lo == 0.0 {
            return Err(RelayError::NoSolution("dual bracket expansion failed (budget too large)".into()));
        }
    }

    let mut nu = (lo * hi).sqrt();
    let mut best = (f64::INFINITY, nu);
    for _ in 0..MAX_ITER {
        nu = (lo * hi).sqrt();
        let res = residual(nu);
        if res.abs() < best.0 {
            best = (res.abs(), nu);
        }
        if res.abs() <= tol {
            break;
        }
        if res > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (res, nu) = best;
    if res > tol.max(1e-12) {
        return Err(RelayError::NoSolution(format!("bisection stalled with relative residual {res:.3e}")));
    }
    Ok((closed_form_unchecked(prob, nu), nu))
}
