//! System parameters, node geometry and random channel generation.
//!
//! Channels are i.i.d. Rayleigh flat fading with a `d^(-3/2)` amplitude
//! path loss. The relay-to-destination channel is the plain transpose of the
//! destination-to-relay channel (reciprocity).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RelayError, Result};
use crate::CMatrix;

/// Name of the pseudo-random generator behind every channel draw.
pub const RNG_NAME: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

/// Relative threshold on the smallest singular value below which a draw is
/// treated as rank deficient and resampled.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Antennas per node.
    pub r: usize,
    /// Source transmit budget in watts.
    pub p_s: f64,
    /// Destination (energy flow) transmit budget in watts.
    pub p_d: f64,
    /// Noise power in watts.
    pub sigma2: f64,
    /// Power-splitting ratio: fraction of received power sent to the harvester.
    pub rho: f64,
    /// Stopping tolerance on the objective change between AO iterations.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams { r: 4, p_s: 0.1, p_d: 0.5, sigma2: 1e-6, rho: 0.7, eps: 1e-6, max_iter: 500 }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(invalid("r", "must be a positive integer"));
        }
        if !(self.p_s.is_finite() && self.p_s > 0.0) {
            return Err(invalid("p_s", "must be positive"));
        }
        if !(self.p_d.is_finite() && self.p_d >= 0.0) {
            return Err(invalid("p_d", "must be nonnegative"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(invalid("sigma2", "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid("rho", "must be in (0,1)"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be a positive integer"));
        }
        Ok(())
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        SystemParams { rho, ..self.clone() }
    }
}

fn invalid(field: &'static str, reason: &str) -> RelayError {
    RelayError::InvalidParam { field, reason: reason.to_string() }
}

/// Node placement on a line: D -- R -- S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Destination-to-source distance in meters.
    pub d_ds: f64,
    /// d_DR / d_DS.
    pub ratio_dr: f64,
}

impl Geometry {
    pub fn new(d_ds: f64, ratio_dr: f64) -> Result<Self> {
        let g = Geometry { d_ds, ratio_dr };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_ds.is_finite() && self.d_ds > 0.0) {
            return Err(invalid("d_ds", "must be positive"));
        }
        if !(self.ratio_dr > 0.0 && self.ratio_dr < 1.0) {
            return Err(invalid("ratio", "must be in (0,1)"));
        }
        Ok(())
    }

    pub fn d_dr(&self) -> f64 {
        self.ratio_dr * self.d_ds
    }

    pub fn d_rs(&self) -> f64 {
        self.d_ds - self.d_dr()
    }
}

/// The three channel matrices of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Source to relay.
    pub h_rs: CMatrix,
    /// Destination to relay.
    pub h_rd: CMatrix,
    /// Relay to destination, `h_rd^T`.
    pub h_dr: CMatrix,
}

impl ChannelSet {
    /// Builds a set from the two independent channels, enforcing reciprocity.
    pub fn from_parts(h_rs: CMatrix, h_rd: CMatrix) -> Result<Self> {
        let r = h_rs.nrows();
        if h_rs.shape() != (r, r) || h_rd.shape() != (r, r) || r == 0 {
            return Err(RelayError::domain("channel matrices must be square and of equal size"));
        }
        let h_dr = h_rd.transpose();
        Ok(ChannelSet { h_rs, h_rd, h_dr })
    }

    pub fn r(&self) -> usize {
        self.h_rs.nrows()
    }
}

/// Amplitude scale `d^(-3/2)` applied to the small-scale fading.
pub fn path_loss_amplitude(d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(RelayError::domain(format!("distance must be positive, got {d}")));
    }
    Ok(d.powf(-1.5))
}

/// Draws an r x r matrix of unit-variance circularly-symmetric complex
/// Gaussian entries.
pub fn draw_small_scale<R: Rng + ?Sized>(rng: &mut R, r: usize) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(r, r, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

pub(crate) fn is_full_rank(m: &CMatrix) -> bool {
    let s = m.clone().singular_values();
    let max = s.max();
    let min = s.min();
    max > 0.0 && min > RANK_TOL * max
}

fn draw_full_rank<R: Rng + ?Sized>(rng: &mut R, r: usize) -> CMatrix {
    loop {
        let m = draw_small_scale(rng, r);
        if is_full_rank(&m) {
            return m;
        }
    }
}

/// Generates one channel realization.
///
/// The small-scale fading depends only on `(seed, r)`, so realizations for
/// different geometries drawn with the same seed share their fading and
/// differ only in path loss.
pub fn generate_channels(params: &SystemParams, geom: &Geometry, seed: u64) -> Result<ChannelSet> {
    params.validate()?;
    geom.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let r = params.r;
    let small_rs = draw_full_rank(&mut rng, r);
    let small_rd = draw_full_rank(&mut rng, r);
    let a_rs = path_loss_amplitude(geom.d_rs())?;
    let a_dr = path_loss_amplitude(geom.d_dr())?;
    ChannelSet::from_parts(small_rs * Complex64::from(a_rs), small_rd * Complex64::from(a_dr))
}
