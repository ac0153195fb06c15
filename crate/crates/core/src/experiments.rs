//! Monte Carlo sweeps over the PS ratio and the relay position.
//!
//! Trial `t` draws its small-scale fading from seed `base_seed + t`; the same
//! draw is reused for every PS ratio, scheme and relay position, so scheme
//! comparisons within a trial are paired.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ao_driver::{run_ao, RunResult, Scheme};
use crate::baseline_noef::solve_noef;
use crate::channel_model::{generate_channels, ChannelSet, Geometry, SystemParams, RNG_NAME};
use crate::error::{RelayError, Result};
use crate::table::{render, ResultRow, ResultsTable};

/// Cells whose skipped fraction exceeds this are flagged.
pub const SKIP_FLAG_FRACTION: f64 = 0.05;

pub const GENERATOR: &str = concat!("wpt-relay ", env!("CARGO_PKG_VERSION"));

pub const BEST_RHO_HEADER: &str =
    "scheme,ratio,best_rho,rate_at_best,stderr,mean_trial_best_rho,mean_trial_best_rate,n_trials";

/// `start, start + step, ..., stop` with values rounded to 1e-9 so that
/// decimal grids print cleanly.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(RelayError::domain("grid needs step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect())
}

pub fn default_rho_grid() -> Vec<f64> {
    grid(0.02, 0.98, 0.02).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub rho_grid: Vec<f64>,
    /// d_DR / d_DS values.
    pub ratio_grid: Vec<f64>,
    pub n_trials: usize,
    pub schemes: Vec<Scheme>,
    pub d_ds: f64,
    pub base_seed: u64,
    pub params: SystemParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rho_grid: default_rho_grid(),
            ratio_grid: vec![0.65],
            n_trials: 200,
            schemes: Scheme::ALL.to_vec(),
            params: SystemParams::default(),
            d_ds: 10.0,
            base_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| RelayError::InvalidParam { field, reason: reason.into() };
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(bad("rho", "must be in (0,1)"));
        }
        if self.ratio_grid.is_empty() || self.ratio_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(bad("ratio", "must be in (0,1)"));
        }
        if self.n_trials == 0 {
            return Err(bad("trials", "must be a positive integer"));
        }
        if self.schemes.is_empty() {
            return Err(bad("scheme", "must name at least one scheme"));
        }
        Geometry::new(self.d_ds, self.ratio_grid[0])?;
        self.params.with_rho(self.rho_grid[0]).validate()
    }

    /// Canonical TOML rendering, used for the metadata echo and the hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("sweep config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

/// Runs one scheme on one channel realization.
pub fn run_scheme(channels: &ChannelSet, params: &SystemParams, scheme: Scheme) -> Result<RunResult> {
    match scheme {
        Scheme::NoEF => solve_noef(channels, params),
        _ => run_ao(channels, params, scheme, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Rho,
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scheme: Scheme,
    pub ratio: f64,
    pub rho: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub n_ok: usize,
    pub n_skip: usize,
}

impl Cell {
    pub fn flagged(&self) -> bool {
        self.n_skip as f64 > SKIP_FLAG_FRACTION * (self.n_ok + self.n_skip) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRho {
    pub scheme: Scheme,
    pub ratio: f64,
    /// Grid point maximizing the mean-rate curve.
    pub best_rho: f64,
    pub rate_at_best: f64,
    pub stderr: f64,
    /// Average over trials of each trial's own maximizing grid point.
    pub mean_trial_best_rho: f64,
    pub mean_trial_best_rate: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub config: SweepConfig,
    /// Exact rates indexed `[scheme][ratio][rho][trial]`, NaN where skipped.
    rates: Vec<f64>,
    pub metadata: Vec<String>,
}

fn mean_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, 0.0, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

impl SweepResult {
    fn index(&self, s: usize, i: usize, j: usize, t: usize) -> usize {
        let c = &self.config;
        ((s * c.ratio_grid.len() + i) * c.rho_grid.len() + j) * c.n_trials + t
    }

    fn scheme_index(&self, scheme: Scheme) -> Result<usize> {
        self.config
            .schemes
            .iter()
            .position(|&s| s == scheme)
            .ok_or_else(|| RelayError::domain(format!("scheme {scheme} was not swept")))
    }

    /// Per-trial rates of one cell (NaN where the trial was skipped).
    pub fn samples(&self, scheme: Scheme, ratio_idx: usize, rho_idx: usize) -> Result<&[f64]> {
        let s = self.scheme_index(scheme)?;
        let start = self.index(s, ratio_idx, rho_idx, 0);
        Ok(&self.rates[start..start + self.config.n_trials])
    }

    pub fn cell(&self, scheme: Scheme, ratio_idx: usize, rho_idx: usize) -> Result<Cell> {
        let samples = self.samples(scheme, ratio_idx, rho_idx)?;
        let (mean_rate, stderr, n_ok) = mean_stderr(samples.iter().copied());
        Ok(Cell {
            scheme,
            ratio: self.config.ratio_grid[ratio_idx],
            rho: self.config.rho_grid[rho_idx],
            mean_rate,
            stderr,
            n_ok,
            n_skip: samples.len() - n_ok,
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        let c = &self.config;
        let mut out = Vec::new();
        for &scheme in &c.schemes {
            for i in 0..c.ratio_grid.len() {
                for j in 0..c.rho_grid.len() {
                    out.push(self.cell(scheme, i, j).expect("swept scheme"));
                }
            }
        }
        out
    }

    /// Mean-rate curve over the PS-ratio grid.
    pub fn curve(&self, scheme: Scheme, ratio_idx: usize) -> Result<Vec<f64>> {
        (0..self.config.rho_grid.len()).map(|j| self.cell(scheme, ratio_idx, j).map(|c| c.mean_rate)).collect()
    }

    /// Per-trial best grid index, or `None` when every PS ratio failed.
    pub fn trial_best(&self, scheme: Scheme, ratio_idx: usize) -> Result<Vec<Option<(usize, f64)>>> {
        let s = self.scheme_index(scheme)?;
        let c = &self.config;
        Ok((0..c.n_trials)
            .map(|t| {
                (0..c.rho_grid.len())
                    .map(|j| (j, self.rates[self.index(s, ratio_idx, j, t)]))
                    .filter(|(_, v)| v.is_finite())
                    .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                        Some((_, bv)) if bv >= v => best,
                        _ => Some((j, v)),
                    })
            })
            .collect())
    }

    pub fn best_rho(&self, scheme: Scheme, ratio_idx: usize) -> Result<BestRho> {
        let curve = self.curve(scheme, ratio_idx)?;
        let arg = argmax(&curve).ok_or_else(|| RelayError::domain("no successful trials in this curve"))?;
        let at_best = self.cell(scheme, ratio_idx, arg)?;
        let per_trial: Vec<(usize, f64)> = self.trial_best(scheme, ratio_idx)?.into_iter().flatten().collect();
        let n = per_trial.len().max(1) as f64;
        Ok(BestRho {
            scheme,
            ratio: self.config.ratio_grid[ratio_idx],
            best_rho: self.config.rho_grid[arg],
            rate_at_best: at_best.mean_rate,
            stderr: at_best.stderr,
            mean_trial_best_rho: per_trial.iter().map(|(j, _)| self.config.rho_grid[*j]).sum::<f64>() / n,
            mean_trial_best_rate: per_trial.iter().map(|(_, v)| v).sum::<f64>() / n,
            n_trials: per_trial.len(),
        })
    }

    pub fn best_rhos(&self) -> Vec<BestRho> {
        let mut out = Vec::new();
        for &scheme in &self.config.schemes {
            for i in 0..self.config.ratio_grid.len() {
                if let Ok(b) = self.best_rho(scheme, i) {
                    out.push(b);
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> ResultsTable {
        ResultsTable {
            metadata: self.metadata.clone(),
            rows: self
                .cells()
                .into_iter()
                .map(|c| ResultRow {
                    scheme: c.scheme,
                    ratio: c.ratio,
                    rho: c.rho,
                    mean_rate: c.mean_rate,
                    stderr: c.stderr,
                    n_ok: c.n_ok,
                    n_skip: c.n_skip,
                })
                .collect(),
        }
    }

    pub fn best_rho_csv(&self) -> String {
        render(
            &self.metadata,
            BEST_RHO_HEADER,
            self.best_rhos().into_iter().map(|b| {
                vec![
                    b.scheme.to_string(),
                    b.ratio.to_string(),
                    b.best_rho.to_string(),
                    b.rate_at_best.to_string(),
                    b.stderr.to_string(),
                    b.mean_trial_best_rho.to_string(),
                    b.mean_trial_best_rate.to_string(),
                    b.n_trials.to_string(),
                ]
            }),
        )
    }

    pub fn flagged_cells(&self) -> Vec<Cell> {
        self.cells().into_iter().filter(Cell::flagged).collect()
    }
}

/// Index of the largest finite value; the first one on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Nondecreasing up to the maximum and nonincreasing after it.
pub fn is_unimodal(values: &[f64]) -> bool {
    let Some(peak) = argmax(values) else { return false };
    values[..=peak].windows(2).all(|w| w[0] <= w[1]) && values[peak..].windows(2).all(|w| w[0] >= w[1])
}

fn run_sweep(kind: SweepKind, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let (n_s, n_i, n_j, n_t) = (config.schemes.len(), config.ratio_grid.len(), config.rho_grid.len(), config.n_trials);

    // one work unit per (ratio, trial); results come back in index order
    let units: Vec<Vec<f64>> = (0..n_i * n_t)
        .into_par_iter()
        .map(|u| {
            let (i, t) = (u / n_t, u % n_t);
            let mut out = vec![f64::NAN; n_s * n_j];
            let seed = config.base_seed.wrapping_add(t as u64);
            let geom = match Geometry::new(config.d_ds, config.ratio_grid[i]) {
                Ok(g) => g,
                Err(_) => return out,
            };
            let channels = match generate_channels(&config.params, &geom, seed) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("trial {t} ratio {}: channel draw failed: {e}", config.ratio_grid[i]);
                    return out;
                }
            };
            for (j, &rho) in config.rho_grid.iter().enumerate() {
                let params = config.params.with_rho(rho);
                for (s, &scheme) in config.schemes.iter().enumerate() {
                    match run_scheme(&channels, &params, scheme) {
                        Ok(res) if res.rate_exact.is_finite() => out[s * n_j + j] = res.rate_exact,
                        Ok(_) => log::warn!("trial {t} rho {rho} {scheme}: non-finite rate"),
                        Err(e) => log::debug!("trial {t} rho {rho} {scheme}: skipped: {e}"),
                    }
                }
            }
            out
        })
        .collect();

    let mut rates = vec![f64::NAN; n_s * n_i * n_j * n_t];
    for (u, vals) in units.into_iter().enumerate() {
        let (i, t) = (u / n_t, u % n_t);
        for s in 0..n_s {
            for j in 0..n_j {
                rates[((s * n_i + i) * n_j + j) * n_t + t] = vals[s * n_j + j];
            }
        }
    }

    let mut metadata = vec![
        format!("generator: {GENERATOR}"),
        format!(
            "kind: {}",
            match kind {
                SweepKind::Rho => "sweep-rho",
                SweepKind::Distance => "sweep-distance",
            }
        ),
        format!("rng: {RNG_NAME}"),
        format!("base_seed: {}", config.base_seed),
        format!("trial_seed: base_seed + trial index"),
        format!("config_sha256: {}", config.hash()),
        "rate: exact two-hop rate, bits per channel use, half-duplex factor included".to_string(),
        "effective config:".to_string(),
    ];
    metadata.extend(config.canonical().lines().map(|l| format!("  {l}")));
    let result = SweepResult { kind, config: config.clone(), rates, metadata };
    let flagged = result.flagged_cells();
    if !flagged.is_empty() {
        let mut note = format!("flagged cells (skips above {:.0}%):", SKIP_FLAG_FRACTION * 100.0);
        for c in &flagged {
            let _ = write!(note, " {}@ratio={},rho={}", c.scheme, c.ratio, c.rho);
        }
        log::warn!("{note}");
        let mut result = result;
        result.metadata.push(note);
        return Ok(result);
    }
    Ok(result)
}

/// Mean rate over the PS-ratio grid for every ratio in the config.
pub fn sweep_rho(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep(SweepKind::Rho, config)
}

/// Full PS-ratio grid at every relay position, summarized by best ratio.
pub fn sweep_distance(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep(SweepKind::Distance, config)
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RelayError::domain(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub const TABLE_FILE: &str = "table.csv";
pub const BEST_RHO_FILE: &str = "best_rho.csv";
pub const PLOT_FILE: &str = "plot.gp";

fn plot_script(result: &SweepResult) -> String {
    let schemes: Vec<String> = result.config.schemes.iter().map(|s| s.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "# gnuplot script; run from this directory: gnuplot -p {PLOT_FILE}");
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set datafile commentschars '#'");
    let _ = writeln!(out, "set key autotitle columnhead");
    let _ = writeln!(out, "set ylabel 'average rate (bit/channel use)'");
    let _ = writeln!(out, "schemes = \"{}\"", schemes.join(" "));
    match result.kind {
        SweepKind::Rho => {
            let _ = writeln!(out, "set xlabel 'PS ratio'");
            let _ = writeln!(
                out,
                "plot for [s in schemes] '{TABLE_FILE}' using 3:(strcol(1) eq s ? $4 : 1/0) with linespoints title s"
            );
        }
        SweepKind::Distance => {
            let _ = writeln!(out, "set xlabel 'd_DR / d_DS'");
            let _ = writeln!(out, "set multiplot layout 1,2");
            let _ = writeln!(
                out,
                "plot for [s in schemes] '{BEST_RHO_FILE}' using 2:(strcol(1) eq s ? $4 : 1/0) with linespoints title s"
            );
            let _ = writeln!(out, "set ylabel 'best PS ratio'");
            let _ = writeln!(
                out,
                "plot for [s in schemes] '{BEST_RHO_FILE}' using 2:(strcol(1) eq s ? $3 : 1/0) with linespoints title s"
            );
            let _ = writeln!(out, "unset multiplot");
        }
    }
    out
}

/// Writes the results table, the best-ratio summary and a gnuplot script
/// into `dir`; returns the written paths.
pub fn emit_results(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let table = dir.join(TABLE_FILE);
    result.to_table().write(&table)?;
    let best = dir.join(BEST_RHO_FILE);
    std::fs::write(&best, result.best_rho_csv())?;
    let plot = dir.join(PLOT_FILE);
    std::fs::write(&plot, plot_script(result))?;
    Ok(vec![table, best, plot])
}
