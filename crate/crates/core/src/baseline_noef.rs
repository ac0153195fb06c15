//! Two-phase relaying without energy flow from the destination.
//!
//! The source spreads its power uniformly over the right singular vectors of
//! its channel, and the relay allocation is the same closed form as the
//! energy-flow case with no destination power and no leakage term.

use crate::ao_driver::{rate_exact_matrix, rate_from_modes, PowerAllocation, RunResult, Scheme};
use crate::channel_model::{ChannelSet, SystemParams};
use crate::error::{RelayError, Result};
use crate::hpm_plm::{svd_ordered, OrderedSvd};
use crate::linalg::{diag_real, identity};
use crate::relay_solver::{solve_relay_power, RelayProblem, DEFAULT_TOL};
use crate::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct NoEfProblem {
    /// Effective source-to-relay gains under uniform power, increasing.
    pub lambda_rs_prime: Vec<f64>,
    /// Forwarding channel gains, increasing.
    pub lambda_dr: Vec<f64>,
    pub rho: f64,
    pub sigma2: f64,
}

impl NoEfProblem {
    pub fn new(lambda_rs_prime: Vec<f64>, lambda_dr: Vec<f64>, rho: f64, sigma2: f64) -> Result<Self> {
        if lambda_rs_prime.len() != lambda_dr.len() || lambda_dr.is_empty() {
            return Err(RelayError::domain("gain vectors must be nonempty and of equal length"));
        }
        if lambda_rs_prime.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(RelayError::domain("source gains must be nonnegative"));
        }
        if lambda_rs_prime.windows(2).any(|w| w[0] > w[1]) || lambda_dr.windows(2).any(|w| w[0] > w[1]) {
            return Err(RelayError::domain("gains must be sorted increasing"));
        }
        Ok(NoEfProblem { lambda_rs_prime, lambda_dr, rho, sigma2 })
    }

    /// `z'_m = (1 - rho) lambda'_m + sigma2`, budget `rho sum lambda'`.
    pub fn relay_problem(&self) -> Result<RelayProblem> {
        let z = self.lambda_rs_prime.iter().map(|l| (1.0 - self.rho) * l + self.sigma2).collect();
        let budget = self.rho * self.lambda_rs_prime.iter().sum::<f64>();
        RelayProblem::new(z, self.lambda_dr.clone(), budget)
    }
}

#[derive(Debug, Clone)]
pub struct NoEfDesign {
    pub result: RunResult,
    pub problem: NoEfProblem,
    pub relay_matrix: CMatrix,
    pub source_covariance: CMatrix,
    pub nu: f64,
}

fn decompose(channels: &ChannelSet, params: &SystemParams) -> Result<(OrderedSvd, OrderedSvd, NoEfProblem)> {
    params.validate()?;
    let dr = svd_ordered(&channels.h_dr)?;
    let rs = svd_ordered(&channels.h_rs)?;
    let per_mode = params.p_s / params.r as f64;
    let lambda_rs_prime = rs.s.iter().map(|s| per_mode * s * s).collect();
    let lambda_dr = dr.s.iter().map(|s| s * s).collect();
    let problem = NoEfProblem::new(lambda_rs_prime, lambda_dr, params.rho, params.sigma2)?;
    Ok((dr, rs, problem))
}

/// Solves the baseline and returns the matrices alongside the rate.
pub fn solve_noef_design(channels: &ChannelSet, params: &SystemParams) -> Result<NoEfDesign> {
    let (dr, rs, problem) = decompose(channels, params)?;
    let relay = problem.relay_problem()?;
    let (lambda_f, nu) = solve_relay_power(&relay, DEFAULT_TOL)?;

    let relay_matrix = &dr.v * diag_real(&lambda_f.iter().map(|l| l.sqrt()).collect::<Vec<_>>()) * rs.u.adjoint();
    let source_covariance = identity(params.r) * num_complex::Complex64::from(params.p_s / params.r as f64);

    let rate = rate_from_modes(&problem.lambda_rs_prime, &lambda_f, &problem.lambda_dr, params.rho, params.sigma2);
    let objective = -relay.utility(&lambda_f)
        - problem.lambda_rs_prime.iter().map(|l| ((1.0 - params.rho) * l / params.sigma2).ln()).sum::<f64>();
    let result = RunResult {
        allocation: PowerAllocation { lambda_f, lambda_rs_tilde: problem.lambda_rs_prime.clone() },
        rate_exact: rate,
        rate_highsnr: -objective / (2.0 * std::f64::consts::LN_2),
        trace: vec![objective],
        iterations: 1,
        converged: true,
        scheme: Scheme::NoEF,
        guarded_steps: 0,
    };
    Ok(NoEfDesign { result, problem, relay_matrix, source_covariance, nu })
}

pub fn solve_noef(channels: &ChannelSet, params: &SystemParams) -> Result<RunResult> {
    solve_noef_design(channels, params).map(|d| d.result)
}

/// Determinant-form rate of a baseline design.
pub fn noef_rate_exact(f: &CMatrix, q_s: &CMatrix, channels: &ChannelSet, params: &SystemParams) -> Result<f64> {
    rate_exact_matrix(f, q_s, None, channels, params)
}
