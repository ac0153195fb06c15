//! Alternating relay/source power optimization and rate evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel_model::{ChannelSet, SystemParams};
use crate::error::{RelayError, Result};
use crate::hpm_plm::{assemble_relay_matrix, assemble_source_covariance, diagonalize, DiagonalizedSystem};
use crate::linalg::{check_psd, identity, logdet_hpd, trace_re};
use crate::relay_solver::{solve_relay_power, RelayProblem};
use crate::source_solver::{p3b_objective, solve_p3b, solve_p3c, SourceProblem};
use crate::CMatrix;

/// Relative residual used for relay solves inside the AO loop. Tighter than
/// the standalone default so that the relay step never undoes the source
/// step by more than rounding.
pub const AO_RELAY_TOL: f64 = 1e-13;

/// Objective increase that is reported as a logic error rather than noise.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Energy-flow assisted, ordered source problem.
    P3B,
    /// Energy-flow assisted, relaxed source problem.
    P3C,
    /// No energy flow, uniform source power.
    NoEF,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::P3B, Scheme::P3C, Scheme::NoEF];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::P3B => "p3b",
            Scheme::P3C => "p3c",
            Scheme::NoEF => "noef",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = RelayError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p3b" => Ok(Scheme::P3B),
            "p3c" => Ok(Scheme::P3C),
            "noef" => Ok(Scheme::NoEF),
            other => Err(RelayError::Parse(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Relay amplification powers.
    pub lambda_f: Vec<f64>,
    /// Effective source channel powers.
    pub lambda_rs_tilde: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub allocation: PowerAllocation,
    /// Exact two-hop rate in bits per channel use, half-duplex factor included.
    pub rate_exact: f64,
    /// High-SNR surrogate of the same rate.
    pub rate_highsnr: f64,
    /// Minimization objective after initialization and after each iteration (nats).
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub scheme: Scheme,
    /// Updates rejected because they would have increased the objective.
    pub guarded_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonePolicy {
    /// Abort with [`RelayError::NonMonotone`].
    Error,
    /// Log a warning and continue.
    Warn,
}

#[derive(Debug, Clone, Copy)]
pub struct AoOptions {
    pub monotone: MonotonePolicy,
    pub relay_tol: f64,
}

impl Default for AoOptions {
    fn default() -> Self {
        AoOptions { monotone: MonotonePolicy::Warn, relay_tol: AO_RELAY_TOL }
    }
}

/// Per-mode rate `1/2 sum log2(1 + snr_m)` with
/// `snr_m = (1 - rho) x_m lf_m ld_m / (sigma2 (1 + lf_m ld_m))`.
pub fn rate_from_modes(lambda_rs_tilde: &[f64], lambda_f: &[f64], lambda_dr: &[f64], rho: f64, sigma2: f64) -> f64 {
    lambda_rs_tilde
        .iter()
        .zip(lambda_f)
        .zip(lambda_dr)
        .map(|((&x, &lf), &ld)| {
            let g = lf * ld;
            let snr = (1.0 - rho) * x * g / (sigma2 * (1.0 + g));
            snr.ln_1p()
        })
        .sum::<f64>()
        / (2.0 * std::f64::consts::LN_2)
}

/// Exact rate of a diagonalized allocation.
pub fn rate_diagonal(alloc: &PowerAllocation, sys: &DiagonalizedSystem, params: &SystemParams) -> Result<f64> {
    let r = sys.r();
    if alloc.lambda_f.len() != r || alloc.lambda_rs_tilde.len() != r {
        return Err(RelayError::domain("allocation length does not match the system"));
    }
    if alloc.lambda_f.iter().chain(&alloc.lambda_rs_tilde).any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(RelayError::domain("allocation entries must be nonnegative"));
    }
    Ok(rate_from_modes(&alloc.lambda_rs_tilde, &alloc.lambda_f, &sys.lambda_dr, params.rho, params.sigma2))
}

/// Determinant-form rate evaluated directly from the matrices.
///
/// The destination's own energy signal is assumed cancelled at the
/// destination, so `q_d` enters only the relay power budget and is checked
/// here for validity only.
pub fn rate_exact_matrix(
    f: &CMatrix,
    q_s: &CMatrix,
    q_d: Option<&CMatrix>,
    channels: &ChannelSet,
    params: &SystemParams,
) -> Result<f64> {
    let r = channels.r();
    if f.shape() != (r, r) || q_s.shape() != (r, r) {
        return Err(RelayError::domain("matrices are not conformable with the channels"));
    }
    check_psd(q_s, "Q_S")?;
    if let Some(q) = q_d {
        if q.shape() != (r, r) {
            return Err(RelayError::domain("Q_D is not conformable with the channels"));
        }
        check_psd(q, "Q_D")?;
    }
    let hf = &channels.h_dr * f;
    let signal = &hf
        * &channels.h_rs
        * q_s
        * channels.h_rs.adjoint()
        * hf.adjoint()
        * num_complex::Complex64::from(1.0 - params.rho);
    let noise = (&hf * hf.adjoint() + identity(r)) * num_complex::Complex64::from(params.sigma2);
    let total = &noise + signal;
    Ok((logdet_hpd(&total)? - logdet_hpd(&noise)?) / (2.0 * std::f64::consts::LN_2))
}

/// Both sides of the relay power-conservation constraint in matrix form:
/// forwarded power (signal, leaked energy flow, relay noise) and harvested
/// power.
pub fn relay_power_balance(
    f: &CMatrix,
    q_s: &CMatrix,
    q_d: &CMatrix,
    channels: &ChannelSet,
    params: &SystemParams,
) -> (f64, f64) {
    let rx_s = &channels.h_rs * q_s * channels.h_rs.adjoint();
    let rx_d = &channels.h_rd * q_d * channels.h_rd.adjoint();
    let fwd = (1.0 - params.rho) * (trace_re(&(f * &rx_s * f.adjoint())) + trace_re(&(f * &rx_d * f.adjoint())))
        + params.sigma2 * trace_re(&(f * f.adjoint()));
    let harvested = params.rho * (trace_re(&rx_d) + trace_re(&rx_s));
    (fwd, harvested)
}

/// Relay matrix, source covariance and destination covariance for an
/// allocation on a diagonalized system.
pub fn reconstruct_matrices(
    sys: &DiagonalizedSystem,
    alloc: &PowerAllocation,
    p_d: f64,
) -> Result<(CMatrix, CMatrix, CMatrix)> {
    let f = assemble_relay_matrix(sys, &alloc.lambda_f)?;
    let q_s = assemble_source_covariance(sys, &alloc.lambda_rs_tilde)?;
    Ok((f, q_s, sys.energy_covariance(p_d)))
}

/// Starting source powers: equal transmit power `P_S / r` on every mode.
///
/// For the ordered scheme that is `x_m = P_S / (r w_m)`, pooled over adjacent
/// blocks until nondecreasing; a pooled block `B` gets `|B| P_S / (r W_B)`,
/// which keeps the budget tight and maximizes `sum ln x` over the ordered
/// budget set. For the relaxed scheme every weight is `max_m w_m`.
pub fn default_source_init(sys: &DiagonalizedSystem, params: &SystemParams, scheme: Scheme) -> Vec<f64> {
    let r = sys.r();
    let per_mode = params.p_s / r as f64;
    if scheme == Scheme::P3C {
        return vec![per_mode / sys.h_e_max2(); r];
    }
    // (modes, weight sum) per block; block value is modes / weight sum
    let mut blocks: Vec<(usize, f64)> = Vec::with_capacity(r);
    for &w in &sys.w {
        blocks.push((1, w));
        while blocks.len() > 1 {
            let (n2, w2) = blocks[blocks.len() - 1];
            let (n1, w1) = blocks[blocks.len() - 2];
            if n1 as f64 / w1 <= n2 as f64 / w2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push((n1 + n2, w1 + w2));
        }
    }
    blocks.into_iter().flat_map(|(n, w)| std::iter::repeat_n(per_mode * n as f64 / w, n)).collect()
}

/// Whether `x` satisfies the scheme's source constraints for relay powers
/// `lambda_f`, to rounding.
fn source_feasible(
    sys: &DiagonalizedSystem,
    params: &SystemParams,
    scheme: Scheme,
    lambda_f: &[f64],
    x: &[f64],
) -> bool {
    let sp = SourceProblem::from_system(sys, lambda_f, params);
    if sp.equality_residual(x) > 1e-9 || x.iter().any(|&v| v <= 0.0) {
        return false;
    }
    let slack = 1.0 + 1e-9;
    match scheme {
        Scheme::P3B => {
            x.windows(2).all(|w| w[0] <= w[1] * slack)
                && x.iter().zip(&sys.w).map(|(a, b)| a * b).sum::<f64>() <= params.p_s * slack
        }
        _ => x.iter().sum::<f64>() * sys.h_e_max2() <= params.p_s * slack,
    }
}

fn check_init(sys: &DiagonalizedSystem, params: &SystemParams, scheme: Scheme, x: &[f64]) -> Result<()> {
    if x.len() != sys.r() || x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(RelayError::domain("initial source powers must be positive with length r"));
    }
    let slack = 1.0 + 1e-12;
    match scheme {
        Scheme::P3B => {
            if x.windows(2).any(|w| w[0] > w[1]) {
                return Err(RelayError::domain("initial source powers must be nondecreasing"));
            }
            let spent: f64 = x.iter().zip(&sys.w).map(|(a, b)| a * b).sum();
            if spent > params.p_s * slack {
                return Err(RelayError::domain("initial source powers exceed the source budget"));
            }
        }
        Scheme::P3C => {
            if x.iter().sum::<f64>() * sys.h_e_max2() > params.p_s * slack {
                return Err(RelayError::domain("initial source powers exceed the relaxed source budget"));
            }
        }
        Scheme::NoEF => return Err(RelayError::domain("the baseline has no alternating optimization")),
    }
    Ok(())
}

/// Runs the alternating optimization with production settings.
pub fn run_ao(
    channels: &ChannelSet,
    params: &SystemParams,
    scheme: Scheme,
    init: Option<&PowerAllocation>,
) -> Result<RunResult> {
    run_ao_with(channels, params, scheme, init, &AoOptions::default())
}

/// Alternates the closed-form relay update and the scheme's source update
/// until the objective changes by less than `params.eps` or `params.max_iter`
/// iterations have run.
///
/// Only the source powers of `init` are used; the relay powers are recomputed
/// by one relay solve so the starting pair satisfies power conservation.
/// Each update is accepted only if it does not increase the objective, which
/// keeps the trace monotone in the presence of solver rounding.
pub fn run_ao_with(
    channels: &ChannelSet,
    params: &SystemParams,
    scheme: Scheme,
    init: Option<&PowerAllocation>,
    opts: &AoOptions,
) -> Result<RunResult> {
    if scheme == Scheme::NoEF {
        return Err(RelayError::domain("the baseline has no alternating optimization; use solve_noef"));
    }
    let sys = diagonalize(channels, params)?;
    run_ao_on_system(&sys, params, scheme, init, opts)
}

pub fn run_ao_on_system(
    sys: &DiagonalizedSystem,
    params: &SystemParams,
    scheme: Scheme,
    init: Option<&PowerAllocation>,
    opts: &AoOptions,
) -> Result<RunResult> {
    let (rho, sigma2) = (params.rho, params.sigma2);
    let mut lt = match init {
        Some(a) => a.lambda_rs_tilde.clone(),
        None => default_source_init(sys, params, scheme),
    };
    check_init(sys, params, scheme, &lt)?;

    let relay = |lt: &[f64]| -> Result<Vec<f64>> {
        let prob = RelayProblem::from_system(sys, lt, rho, sigma2, params.p_d)?;
        solve_relay_power(&prob, opts.relay_tol).map(|(lf, _)| lf)
    };
    let objective =
        |lf: &[f64], lt: &[f64]| -> Result<f64> { p3b_objective(lt, lf, &sys.lambda_dr, rho, sigma2).map(|v| -v) };

    let mut lf = relay(&lt)?;
    let mut current = objective(&lf, &lt)?;
    let mut trace = vec![current];
    let mut guarded = 0;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=params.max_iter {
        let partial = |lf: &[f64], lt: &[f64], e: RelayError| RelayError::PartialResult {
            iteration: k,
            last: Box::new(PowerAllocation { lambda_f: lf.to_vec(), lambda_rs_tilde: lt.to_vec() }),
            source: Box::new(e),
        };

        let cand = relay(&lt).map_err(|e| partial(&lf, &lt, e))?;
        let mut mid = current;
        match objective(&cand, &lt) {
            Ok(v) if v <= current => {
                lf = cand;
                mid = v;
            }
            _ => guarded += 1,
        }

        let sp = SourceProblem::from_system(sys, &lf, params);
        let cand = match scheme {
            Scheme::P3B => solve_p3b(&sp, Some(&lt)),
            _ => solve_p3c(&sp).map(|(x, _)| x),
        };
        // A slice with no interior around the incumbent leaves nothing to improve.
        let cand = match cand {
            Err(RelayError::Infeasible { .. }) if source_feasible(sys, params, scheme, &lf, &lt) => lt.clone(),
            other => other.map_err(|e| partial(&lf, &lt, e))?,
        };
        let mut next = mid;
        match objective(&lf, &cand) {
            Ok(v) if v <= mid => {
                lt = cand;
                next = v;
            }
            _ => guarded += 1,
        }

        if next > current + MONOTONE_SLACK {
            match opts.monotone {
                MonotonePolicy::Error => {
                    return Err(RelayError::NonMonotone { iteration: k, increase: next - current });
                }
                MonotonePolicy::Warn => {
                    log::warn!("objective increased by {:.3e} at iteration {k}", next - current);
                }
            }
        }
        trace.push(next);
        iterations = k;
        let delta = (next - current).abs();
        current = next;
        if delta < params.eps {
            converged = true;
            break;
        }
    }

    let allocation = PowerAllocation { lambda_f: lf, lambda_rs_tilde: lt };
    let rate_exact = rate_diagonal(&allocation, sys, params)?;
    Ok(RunResult {
        allocation,
        rate_exact,
        rate_highsnr: -current / (2.0 * std::f64::consts::LN_2),
        trace,
        iterations,
        converged,
        scheme,
        guarded_steps: guarded,
    })
}
