//! Channel diagonalization: ordered SVDs, rank-one energy beamforming at the
//! destination, and the structured relay matrix / source covariance that
//! reduce rate maximization to a power allocation.
//!
//! Conventions: singular values are sorted increasing, so the strongest
//! relay-to-destination eigenmode sits at index `r - 1`. The energy leak that
//! reaches the relay's information receiver is placed on that same index,
//! which pairs it with the largest effective source gain and, after the relay
//! solve, with the smallest amplification.

use num_complex::Complex64;

use crate::channel_model::{ChannelSet, SystemParams, RANK_TOL};
use crate::error::{RelayError, Result};
use crate::linalg::{column_norms_sq, diag_real};
use crate::CMatrix;

/// Condition-number ceiling for the effective source channel inversion.
pub const MAX_CONDITION: f64 = 1e10;

/// `M = u * diag(s) * v^H` with `s` nondecreasing.
#[derive(Debug, Clone)]
pub struct OrderedSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// Singular value decomposition with a deterministic convention.
///
/// Singular values come out nondecreasing (stable with respect to ties), and
/// each column of `v` is rotated so that its largest-magnitude entry is real
/// and positive; the matching column of `u` gets the same rotation.
pub fn svd_ordered(m: &CMatrix) -> Result<OrderedSvd> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(RelayError::domain("svd_ordered expects a nonempty square matrix"));
    }
    let svd = m.clone().svd(true, true);
    let u_raw = svd.u.ok_or_else(|| RelayError::Singular("SVD did not return U".into()))?;
    let v_raw = svd.v_t.ok_or_else(|| RelayError::Singular("SVD did not return V".into()))?.adjoint();
    let s_raw: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s_raw[a].total_cmp(&s_raw[b]));

    let s_max = s_raw.iter().copied().fold(0.0, f64::max);
    let s_min = s_raw.iter().copied().fold(f64::INFINITY, f64::min);
    if !(s_max > 0.0) || s_min <= RANK_TOL * s_max {
        return Err(RelayError::Singular(format!(
            "rank deficient matrix (smallest/largest singular value {:.3e})",
            if s_max > 0.0 { s_min / s_max } else { 0.0 }
        )));
    }

    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let vc = v_raw.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if vc[i].norm() > vc[pivot].norm() {
                pivot = i;
            }
        }
        let phase = Complex64::from_polar(1.0, -vc[pivot].arg());
        v.set_column(k, &(vc * phase));
        u.set_column(k, &(u_raw.column(src) * phase));
        s.push(s_raw[src]);
    }
    Ok(OrderedSvd { u, s, v })
}

/// Rank-one transmit covariance at the destination.
#[derive(Debug, Clone)]
pub struct EnergyBeam {
    pub q_d: CMatrix,
    /// Right singular vector of `H_RD` for its largest singular value.
    pub v_max: nalgebra::DVector<Complex64>,
    /// Largest channel power gain of `H_RD`.
    pub lambda_max: f64,
}

/// Steers the whole destination budget along the strongest right singular
/// vector of `H_RD`, which maximizes `tr(H_RD Q_D H_RD^H)` over
/// `tr(Q_D) = P_D`.
pub fn design_energy_beam(h_rd: &CMatrix, p_d: f64) -> Result<EnergyBeam> {
    if !(p_d.is_finite() && p_d >= 0.0) {
        return Err(RelayError::domain("P_D must be nonnegative"));
    }
    let svd = svd_ordered(h_rd)?;
    let last = svd.s.len() - 1;
    let v_max = svd.v.column(last).into_owned();
    let q_d = &v_max * v_max.adjoint() * Complex64::from(p_d);
    Ok(EnergyBeam { q_d, v_max, lambda_max: svd.s[last] * svd.s[last] })
}

/// Harvested-power proxy `tr(H_RD Q_D H_RD^H)` (before the PS ratio).
pub fn harvested_proxy(h_rd: &CMatrix, q_d: &CMatrix) -> f64 {
    (h_rd * q_d * h_rd.adjoint()).trace().re
}

/// Output of the diagonalization for one channel set and one PS ratio.
#[derive(Debug, Clone)]
pub struct DiagonalizedSystem {
    /// Channel power gains of `H_DR`, nondecreasing.
    pub lambda_dr: Vec<f64>,
    pub u_dr: CMatrix,
    pub v_dr: CMatrix,
    pub lambda_dr_max: f64,
    /// Receive eigenmodes at the relay, `conj(v_dr)`.
    pub u_rs_tilde: CMatrix,
    /// Effective source channel `(u_rs_tilde^H H_RS)^-1`.
    pub h_e: CMatrix,
    /// Squared column norms of `h_e`.
    pub w: Vec<f64>,
    /// Energy leak per mode; only the last entry is nonzero.
    pub beta: Vec<f64>,
    /// `(1 - rho) P_D lambda_dr_max`.
    pub c: f64,
}

impl DiagonalizedSystem {
    pub fn r(&self) -> usize {
        self.lambda_dr.len()
    }

    /// Rank-one destination covariance consistent with this decomposition.
    ///
    /// `H_RD = conj(v_dr) diag(s) u_dr^T`, so the strongest right singular
    /// vector of `H_RD` is the conjugate of the last column of `u_dr`.
    pub fn energy_covariance(&self, p_d: f64) -> CMatrix {
        let last = self.r() - 1;
        let v = self.u_dr.column(last).map(|z| z.conj());
        &v * v.adjoint() * Complex64::from(p_d)
    }

    /// Largest squared column norm of `h_e`.
    pub fn h_e_max2(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }
}

pub fn diagonalize(channels: &ChannelSet, params: &SystemParams) -> Result<DiagonalizedSystem> {
    params.validate()?;
    let r = channels.r();
    if r != params.r {
        return Err(RelayError::domain(format!("channel size {r} does not match r = {}", params.r)));
    }
    let svd = svd_ordered(&channels.h_dr)?;
    let lambda_dr: Vec<f64> = svd.s.iter().map(|s| s * s).collect();
    let lambda_dr_max = lambda_dr[r - 1];

    let u_rs_tilde = svd.v.map(|z| z.conj());
    let g = u_rs_tilde.adjoint() * &channels.h_rs;
    let sv = g.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(RelayError::IllConditioned { cond });
    }
    let h_e =
        g.try_inverse().ok_or_else(|| RelayError::Singular("effective source channel is not invertible".into()))?;
    let w = column_norms_sq(&h_e);

    let c = (1.0 - params.rho) * params.p_d * lambda_dr_max;
    let mut beta = vec![0.0; r];
    beta[r - 1] = c;

    Ok(DiagonalizedSystem { lambda_dr, u_dr: svd.u, v_dr: svd.v, lambda_dr_max, u_rs_tilde, h_e, w, beta, c })
}

/// `F = v_dr diag(sqrt(lambda_f)) u_rs_tilde^H`.
pub fn assemble_relay_matrix(sys: &DiagonalizedSystem, lambda_f: &[f64]) -> Result<CMatrix> {
    check_len(sys, lambda_f, "lambda_f")?;
    if lambda_f.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(RelayError::domain("relay powers must be nonnegative"));
    }
    let amp: Vec<f64> = lambda_f.iter().map(|x| x.sqrt()).collect();
    Ok(&sys.v_dr * diag_real(&amp) * sys.u_rs_tilde.adjoint())
}

/// `Q_S = h_e diag(lambda_rs_tilde) h_e^H`.
pub fn assemble_source_covariance(sys: &DiagonalizedSystem, lambda_rs_tilde: &[f64]) -> Result<CMatrix> {
    check_len(sys, lambda_rs_tilde, "lambda_rs_tilde")?;
    if lambda_rs_tilde.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(RelayError::domain("source powers must be nonnegative"));
    }
    Ok(&sys.h_e * diag_real(lambda_rs_tilde) * sys.h_e.adjoint())
}

fn check_len(sys: &DiagonalizedSystem, v: &[f64], name: &str) -> Result<()> {
    if v.len() != sys.r() {
        return Err(RelayError::domain(format!("{name} has length {}, expected {}", v.len(), sys.r())));
    }
    Ok(())
}

/// Net harvested-minus-leaked energy-flow power at the relay,
/// `tr{(rho I - (1 - rho) Sigma_F^H Sigma_F) U^H H_RD Q_D H_RD^H U}`, for an
/// arbitrary choice `u_rs` of relay receive eigenmodes.
pub fn energy_flow_balance(channels: &ChannelSet, u_rs: &CMatrix, lambda_f: &[f64], q_d: &CMatrix, rho: f64) -> f64 {
    let weights: Vec<f64> = lambda_f.iter().map(|lf| rho - (1.0 - rho) * lf).collect();
    let inner = u_rs.adjoint() * &channels.h_rd * q_d * channels.h_rd.adjoint() * u_rs;
    (diag_real(&weights) * inner).trace().re
}
