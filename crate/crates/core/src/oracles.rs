//! Brute-force and randomized verifiers for the production solvers.
//!
//! Nothing here is used on the production path. Every oracle draws from its
//! own ChaCha20 stream (stream index >= `ORACLE_STREAM`), which never
//! overlaps the stream-0 draws made by channel generation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::ao_driver::{default_source_init, Scheme, AO_RELAY_TOL};
use crate::channel_model::{draw_small_scale, path_loss_amplitude, ChannelSet, Geometry, SystemParams};
use crate::error::{RelayError, Result};
use crate::hpm_plm::{design_energy_beam, diagonalize, energy_flow_balance, harvested_proxy, DiagonalizedSystem};
use crate::relay_solver::{relay_utility, solve_relay_power, RelayProblem};
use crate::source_solver::{solve_p3b, solve_p3c, SourceProblem};
use crate::table::render;
use crate::CMatrix;

pub const ORACLE_STREAM: u64 = 1 << 32;

pub const REPORT_HEADER: &str = "name,instances,max_violation,tolerance,passed,inconclusive,seed";

pub const RELAY_GRID_TOL: f64 = 1e-5;
pub const RELAY_RESIDUAL_TOL: f64 = 1e-8;
pub const PAIRING_TOL: f64 = 1e-9;
pub const DOMINANCE_TOL: f64 = 1e-6;
pub const BEAM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// No instance produced a usable comparison. Not a failure.
    pub inconclusive: bool,
    pub seed: u64,
}

impl OracleReport {
    pub fn new(name: &str, instances: usize, max_violation: f64, tolerance: f64, seed: u64) -> Self {
        OracleReport {
            name: name.to_string(),
            instances,
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
            inconclusive: false,
            seed,
        }
    }

    pub fn inconclusive(name: &str, seed: u64, tolerance: f64) -> Self {
        OracleReport {
            name: name.to_string(),
            instances: 0,
            max_violation: 0.0,
            tolerance,
            passed: true,
            inconclusive: true,
            seed,
        }
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            self.instances.to_string(),
            self.max_violation.to_string(),
            self.tolerance.to_string(),
            self.passed.to_string(),
            self.inconclusive.to_string(),
            self.seed.to_string(),
        ]
    }
}

pub fn reports_csv(metadata: &[String], reports: &[OracleReport]) -> String {
    render(metadata, REPORT_HEADER, reports.iter().map(OracleReport::row))
}

/// Generator for instance `idx` of an oracle run.
pub fn oracle_rng(seed: u64, idx: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(ORACLE_STREAM + idx as u64);
    rng
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo_exp: f64, hi_exp: f64) -> f64 {
    10f64.powf(rng.random_range(lo_exp..hi_exp))
}

/// Draws a channel set from the oracle stream at the given geometry,
/// redrawing until it diagonalizes.
pub fn oracle_channels<R: Rng + ?Sized>(
    rng: &mut R,
    params: &SystemParams,
    geom: &Geometry,
) -> Result<(ChannelSet, DiagonalizedSystem)> {
    let a_rs = Complex64::from(path_loss_amplitude(geom.d_rs())?);
    let a_dr = Complex64::from(path_loss_amplitude(geom.d_dr())?);
    for _ in 0..100 {
        let h_rs = draw_small_scale(rng, params.r) * a_rs;
        let h_rd = draw_small_scale(rng, params.r) * a_dr;
        let ch = ChannelSet::from_parts(h_rs, h_rd)?;
        if let Ok(sys) = diagonalize(&ch, params) {
            return Ok((ch, sys));
        }
    }
    Err(RelayError::Degenerate("oracle could not draw a usable channel".into()))
}

// ---------------------------------------------------------------- relay grid

/// Grid maximizer of the relay objective for `r = 2`.
///
/// `lambda_f,1` runs over an interior grid of `(0, budget / z_1)` and
/// `lambda_f,2` is solved from the equality. The best cell is re-gridded
/// twice more at the same resolution so the oracle error sits well below
/// the comparison tolerance. A zero budget collapses the segment to the
/// origin, which is returned with value `-inf`.
pub fn grid_search_relay(prob: &RelayProblem, grid_n: usize) -> Result<(Vec<f64>, f64)> {
    if prob.z.len() != 2 || prob.lambda_dr.len() != 2 {
        return Err(RelayError::domain("grid oracle needs r = 2"));
    }
    if grid_n < 100 {
        return Err(RelayError::domain("grid oracle needs grid_n >= 100"));
    }
    let (z1, z2) = (prob.z[0], prob.z[1]);
    if !(z1 > 0.0 && z2 > 0.0) || !(prob.budget >= 0.0) {
        return Err(RelayError::infeasible("empty feasible segment"));
    }
    if prob.budget == 0.0 {
        return Ok((vec![0.0, 0.0], f64::NEG_INFINITY));
    }
    let point = |l1: f64| vec![l1, (prob.budget - l1 * z1) / z2];
    let value = |l1: f64| relay_utility(&point(l1), &prob.lambda_dr);

    let (mut lo, mut hi) = (0.0, prob.budget / z1);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for _ in 0..3 {
        let h = (hi - lo) / grid_n as f64;
        for k in 1..grid_n {
            let l1 = lo + k as f64 * h;
            let v = value(l1);
            if v > best.1 {
                best = (l1, v);
            }
        }
        lo = (best.0 - h).max(0.0);
        hi = (best.0 + h).min(prob.budget / z1);
    }
    Ok((point(best.0), best.1))
}

/// Random `r = 2` relay problem with entries spread over several decades.
pub fn random_relay_problem<R: Rng + ?Sized>(rng: &mut R) -> Result<RelayProblem> {
    let z = vec![log_uniform(rng, -2.0, 2.0), log_uniform(rng, -2.0, 2.0)];
    let ld = vec![log_uniform(rng, -2.0, 2.0), log_uniform(rng, -2.0, 2.0)];
    RelayProblem::new(z, ld, log_uniform(rng, -1.0, 1.0))
}

/// Compares the closed-form relay solve with the grid oracle. Returns the
/// objective report and the equality-residual report.
pub fn relay_closed_form_check(n_instances: usize, grid_n: usize, seed: u64) -> Result<(OracleReport, OracleReport)> {
    let per: Vec<(f64, f64)> = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = oracle_rng(seed, i);
            let prob = random_relay_problem(&mut rng)?;
            let (lf, _) = solve_relay_power(&prob, 1e-10)?;
            let (_, grid_best) = grid_search_relay(&prob, grid_n)?;
            let gap = (prob.utility(&lf) - grid_best).abs();
            let res = (prob.spent(&lf) - prob.budget).abs() / prob.budget;
            Ok((gap, res))
        })
        .collect::<Result<_>>()?;
    let gap = per.iter().map(|p| p.0).fold(0.0, f64::max);
    let res = per.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok((
        OracleReport::new("relay_closed_form_vs_grid", n_instances, gap, RELAY_GRID_TOL, seed),
        OracleReport::new("relay_equality_residual", n_instances, res, RELAY_RESIDUAL_TOL, seed),
    ))
}

// ------------------------------------------------------------------- pairing

/// One instance of the eigenmode pairing problem.
#[derive(Debug, Clone)]
pub struct PairingInstance {
    /// Effective source gains, nondecreasing.
    pub lambda_rs_tilde: Vec<f64>,
    /// Relay-to-destination gains, nondecreasing.
    pub lambda_dr: Vec<f64>,
    /// `leaks[k]` is the per-mode energy leak when the energy-beam direction
    /// is received on mode `k`.
    pub leaks: Vec<Vec<f64>>,
    pub rho: f64,
    pub sigma2: f64,
    pub budget: f64,
}

/// Outcome of enumerating every pairing and leak placement.
#[derive(Debug, Clone)]
pub struct PairingCheck {
    /// Objective of the increasing pairing with the leak on the last mode.
    pub canonical: f64,
    pub best: f64,
    /// `(permutation, placement, value)` for every configuration.
    pub values: Vec<(Vec<usize>, usize, f64)>,
}

impl PairingCheck {
    pub fn violation(&self) -> f64 {
        (self.best - self.canonical).max(0.0)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn swap_columns(m: &CMatrix, a: usize, b: usize) -> CMatrix {
    let mut out = m.clone();
    out.swap_columns(a, b);
    out
}

impl PairingInstance {
    /// Builds an instance from a channel set. The leak per placement is read
    /// off the energy-flow balance with the relay receive basis permuted so
    /// that the strongest direction lands on mode `k`.
    pub fn from_channels(
        ch: &ChannelSet,
        sys: &DiagonalizedSystem,
        params: &SystemParams,
        lambda_rs_tilde: Vec<f64>,
    ) -> Result<Self> {
        let r = sys.r();
        let beam = design_energy_beam(&ch.h_rd, params.p_d)?;
        let mut leaks = Vec::with_capacity(r);
        for k in 0..r {
            let u = swap_columns(&sys.u_rs_tilde, k, r - 1);
            // with unit amplification on mode m only, the balance drops by
            // (1 - rho) times the power received on m
            let full = energy_flow_balance(ch, &u, &vec![0.0; r], &beam.q_d, params.rho);
            let leak: Vec<f64> = (0..r)
                .map(|m| {
                    let mut e = vec![0.0; r];
                    e[m] = 1.0;
                    (full - energy_flow_balance(ch, &u, &e, &beam.q_d, params.rho)).max(0.0)
                })
                .collect();
            leaks.push(leak);
        }
        let budget =
            params.rho * lambda_rs_tilde.iter().sum::<f64>() + params.rho * harvested_proxy(&ch.h_rd, &beam.q_d);
        Ok(PairingInstance {
            lambda_rs_tilde,
            lambda_dr: sys.lambda_dr.clone(),
            leaks,
            rho: params.rho,
            sigma2: params.sigma2,
            budget,
        })
    }

    pub fn check(&self) -> Result<PairingCheck> {
        let r = self.lambda_dr.len();
        let mut values = Vec::new();
        let mut canonical = f64::NAN;
        let mut best = f64::NEG_INFINITY;
        for perm in permutations(r) {
            for (k, leak) in self.leaks.iter().enumerate() {
                let z: Vec<f64> =
                    (0..r).map(|m| (1.0 - self.rho) * self.lambda_rs_tilde[m] + self.sigma2 + leak[m]).collect();
                let ld: Vec<f64> = perm.iter().map(|&p| self.lambda_dr[p]).collect();
                let prob = RelayProblem::new(z, ld, self.budget)?;
                let (lf, _) = solve_relay_power(&prob, AO_RELAY_TOL)?;
                let v = prob.utility(&lf);
                if k == r - 1 && perm.iter().enumerate().all(|(i, &p)| i == p) {
                    canonical = v;
                }
                best = best.max(v);
                values.push((perm.clone(), k, v));
            }
        }
        Ok(PairingCheck { canonical, best, values })
    }
}

/// Enumerates all `r! * r` configurations on random instances and reports
/// how far the best one beats the canonical ordering.
pub fn exhaustive_pairing_check(r: usize, n_instances: usize, seed: u64) -> Result<OracleReport> {
    if !(1..=4).contains(&r) {
        return Err(RelayError::domain("pairing oracle supports 1 <= r <= 4"));
    }
    let violations: Vec<f64> = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = oracle_rng(seed, i);
            let params = SystemParams {
                r,
                rho: rng.random_range(0.05..0.95),
                p_d: log_uniform(&mut rng, -1.0, 1.0),
                ..SystemParams::default()
            };
            let geom = Geometry::new(10.0, rng.random_range(0.2..0.9))?;
            let (ch, sys) = oracle_channels(&mut rng, &params, &geom)?;
            let mut lt: Vec<f64> = (0..r).map(|_| log_uniform(&mut rng, -7.0, -3.0)).collect();
            lt.sort_by(f64::total_cmp);
            let inst = PairingInstance::from_channels(&ch, &sys, &params, lt)?;
            Ok(inst.check()?.violation())
        })
        .collect::<Result<_>>()?;
    let worst = violations.iter().copied().fold(0.0, f64::max);
    Ok(OracleReport::new(&format!("pairing_r{r}"), n_instances, worst, PAIRING_TOL, seed))
}

// --------------------------------------------------------------- leak bound

/// Checks that the energy-flow balance with the canonical receive basis
/// equals `(rho - (1 - rho) min lambda_f) P_D lambda_max`, and that no random
/// permutation of the receive basis exceeds it.
pub fn leakage_bound_check(n_instances: usize, n_perms: usize, seed: u64) -> Result<OracleReport> {
    let violations: Vec<f64> = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = oracle_rng(seed, i);
            let params = SystemParams { rho: rng.random_range(0.05..0.95), ..SystemParams::default() };
            let (ch, sys) = oracle_channels(&mut rng, &params, &Geometry::new(10.0, 0.65)?)?;
            let beam = design_energy_beam(&ch.h_rd, params.p_d)?;
            let x = default_source_init(&sys, &params, Scheme::P3B);
            let prob = RelayProblem::from_system(&sys, &x, params.rho, params.sigma2, params.p_d)?;
            let (lf, _) = solve_relay_power(&prob, AO_RELAY_TOL)?;
            let lf_min = lf.iter().copied().fold(f64::INFINITY, f64::min);
            let bound = (params.rho - (1.0 - params.rho) * lf_min) * params.p_d * sys.lambda_dr_max;
            let scale = params.p_d * sys.lambda_dr_max * (1.0 + lf.iter().copied().fold(0.0, f64::max));
            let canonical = energy_flow_balance(&ch, &sys.u_rs_tilde, &lf, &beam.q_d, params.rho);
            let mut worst = (canonical - bound).abs() / scale;
            let r = params.r;
            for _ in 0..n_perms {
                let mut perm: Vec<usize> = (0..r).collect();
                for j in (1..r).rev() {
                    perm.swap(j, rng.random_range(0..=j));
                }
                let u = DMatrix::from_fn(r, r, |row, col| sys.u_rs_tilde[(row, perm[col])]);
                let v = energy_flow_balance(&ch, &u, &lf, &beam.q_d, params.rho);
                worst = worst.max((v - bound) / scale);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let worst = violations.iter().copied().fold(0.0, f64::max);
    Ok(OracleReport::new("leakage_bound", n_instances, worst, BEAM_TOL, seed))
}

// ---------------------------------------------------------------- dominance

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominanceKind {
    P3B,
    P3C,
    EnergyBeam,
}

impl DominanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DominanceKind::P3B => "dominance_p3b",
            DominanceKind::P3C => "dominance_p3c",
            DominanceKind::EnergyBeam => "dominance_energy_beam",
        }
    }
}

/// Largest amount by which any sample beats the reference value.
pub fn dominance_violation(reference: f64, samples: &[f64]) -> f64 {
    samples.iter().map(|s| s - reference).fold(0.0, f64::max)
}

/// Random trace-`p_d` PSD matrix of random rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, r: usize, p_d: f64) -> CMatrix {
    let k = rng.random_range(1..=r);
    let g = DMatrix::from_fn(r, k, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = &g * g.adjoint();
    let tr = q.trace().re;
    q * Complex64::from(p_d / tr)
}

fn dirichlet_combination<R: Rng + ?Sized>(rng: &mut R, vertices: &[Vec<f64>]) -> Vec<f64> {
    let weights: Vec<f64> = vertices.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    let r = vertices[0].len();
    (0..r).map(|m| vertices.iter().zip(&weights).map(|(v, w)| v[m] * w / total).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples points of `polytope ∩ {a.x = b}` by intersecting the hyperplane
/// with segments between random polytope points on opposite sides.
pub fn sample_slice<R: Rng + ?Sized>(rng: &mut R, vertices: &[Vec<f64>], a: &[f64], b: f64, n: usize) -> Vec<Vec<f64>> {
    let mut below = Vec::new();
    let mut above = Vec::new();
    let mut out = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n && draws < 20 * n {
        draws += 1;
        let p = dirichlet_combination(rng, vertices);
        if dot(a, &p) < b {
            below.push(p);
        } else {
            above.push(p);
        }
        if below.is_empty() || above.is_empty() {
            continue;
        }
        let p = &below[rng.random_range(0..below.len())];
        let q = &above[rng.random_range(0..above.len())];
        let (ap, aq) = (dot(a, p), dot(a, q));
        if aq - ap <= 0.0 {
            continue;
        }
        let t = (b - ap) / (aq - ap);
        let x: Vec<f64> = p.iter().zip(q).map(|(pi, qi)| pi + t * (qi - pi)).collect();
        if x.iter().all(|&v| v > 0.0) {
            out.push(x);
        }
    }
    out
}

fn ordered_polytope_vertices(w: &[f64], p_s: f64) -> Vec<Vec<f64>> {
    let r = w.len();
    let mut verts = vec![vec![0.0; r]];
    for k in 0..r {
        let tail: f64 = w[k..].iter().sum();
        verts.push((0..r).map(|m| if m >= k { p_s / tail } else { 0.0 }).collect());
    }
    verts
}

fn simplex_vertices(r: usize, cap: f64) -> Vec<Vec<f64>> {
    let mut verts = vec![vec![0.0; r]];
    for k in 0..r {
        verts.push((0..r).map(|m| if m == k { cap } else { 0.0 }).collect());
    }
    verts
}

fn sum_ln(x: &[f64]) -> f64 {
    x.iter().map(|v| v.ln()).sum()
}

/// Per-instance dominance: `None` when no comparison was possible.
fn dominance_instance(kind: DominanceKind, n_samples: usize, seed: u64, idx: usize) -> Result<Option<f64>> {
    let mut rng = oracle_rng(seed, idx);
    let params = SystemParams {
        rho: rng.random_range(0.1..0.9),
        p_d: if kind == DominanceKind::EnergyBeam { log_uniform(&mut rng, -2.0, 1.0) } else { 0.5 },
        ..SystemParams::default()
    };
    let geom = Geometry::new(10.0, rng.random_range(0.2..0.9))?;
    let (ch, sys) = oracle_channels(&mut rng, &params, &geom)?;
    match kind {
        DominanceKind::EnergyBeam => {
            let beam = design_energy_beam(&ch.h_rd, params.p_d)?;
            let ours = harvested_proxy(&ch.h_rd, &beam.q_d);
            let target = params.p_d * sys.lambda_dr_max;
            let scale = target.max(f64::MIN_POSITIVE);
            let samples: Vec<f64> = (0..n_samples)
                .map(|_| harvested_proxy(&ch.h_rd, &random_psd(&mut rng, params.r, params.p_d)) / scale)
                .collect();
            let identity = (ours - target).abs() / scale;
            Ok(Some(identity.max(dominance_violation(ours / scale, &samples))))
        }
        DominanceKind::P3B | DominanceKind::P3C => {
            let scheme = if kind == DominanceKind::P3B { Scheme::P3B } else { Scheme::P3C };
            let x0 = default_source_init(&sys, &params, scheme);
            let rp = RelayProblem::from_system(&sys, &x0, params.rho, params.sigma2, params.p_d)?;
            let (lf, _) = solve_relay_power(&rp, AO_RELAY_TOL)?;
            let sp = SourceProblem::from_system(&sys, &lf, &params);
            let (x, vertices) = match kind {
                DominanceKind::P3B => (solve_p3b(&sp, Some(&x0)), ordered_polytope_vertices(&sys.w, params.p_s)),
                _ => (solve_p3c(&sp).map(|s| s.0), simplex_vertices(params.r, sp.relaxed_cap())),
            };
            let x = match x {
                Ok(x) => x,
                Err(RelayError::Infeasible { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let samples: Vec<f64> =
                sample_slice(&mut rng, &vertices, &sp.a(), sp.b(), n_samples).iter().map(|s| sum_ln(s)).collect();
            if samples.is_empty() {
                return Ok(None);
            }
            Ok(Some(dominance_violation(sum_ln(&x), &samples)))
        }
    }
}

/// Compares solver outputs against sampled feasible points.
pub fn random_feasible_dominance(
    kind: DominanceKind,
    n_samples: usize,
    n_instances: usize,
    seed: u64,
) -> Result<OracleReport> {
    if n_samples < 100 {
        return Err(RelayError::domain("dominance oracle needs at least 100 samples"));
    }
    let per: Vec<Option<f64>> = (0..n_instances)
        .into_par_iter()
        .map(|i| dominance_instance(kind, n_samples, seed, i))
        .collect::<Result<_>>()?;
    let tol = if kind == DominanceKind::EnergyBeam { BEAM_TOL } else { DOMINANCE_TOL };
    let used: Vec<f64> = per.into_iter().flatten().collect();
    if used.is_empty() {
        return Ok(OracleReport::inconclusive(kind.name(), seed, tol));
    }
    let worst = used.iter().copied().fold(0.0, f64::max);
    Ok(OracleReport::new(kind.name(), used.len(), worst, tol, seed))
}

/// The full oracle suite run by the `validate` command.
pub fn run_all(seed: u64) -> Result<Vec<OracleReport>> {
    let (grid, residual) = relay_closed_form_check(50, 10_000, seed)?;
    Ok(vec![
        grid,
        residual,
        exhaustive_pairing_check(2, 10, seed)?,
        exhaustive_pairing_check(3, 20, seed)?,
        exhaustive_pairing_check(4, 5, seed)?,
        leakage_bound_check(20, 50, seed)?,
        random_feasible_dominance(DominanceKind::EnergyBeam, 100, 20, seed)?,
        random_feasible_dominance(DominanceKind::P3B, 10_000, 20, seed)?,
        random_feasible_dominance(DominanceKind::P3C, 10_000, 20, seed)?,
    ])
}
