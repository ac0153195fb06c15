//! Run configuration: a sectioned TOML file, command-line overrides and
//! defaults, resolved into one effective configuration.
//!
//! ```toml
//! [system]
//! r = 4
//! p_s = 0.1
//! p_d = 0.5
//! sigma2 = 1e-6
//! rho = 0.7
//! eps = 1e-6
//! max_iter = 500
//!
//! [geometry]
//! d_ds = 10.0
//! ratio = 0.65
//!
//! [sweep]
//! rho_grid = { start = 0.02, stop = 0.98, step = 0.02 }
//! ratio_grid = [0.3, 0.65, 0.9]
//! trials = 200
//! schemes = ["p3b", "p3c", "noef"]
//!
//! [run]
//! seed = 0
//! threads = 4
//! out = "results"
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ao_driver::Scheme;
use crate::channel_model::{Geometry, SystemParams};
use crate::error::{RelayError, Result};
use crate::experiments::{default_rho_grid, grid, SweepConfig};

pub const SEED_ENV: &str = "WPT_RELAY_SEED";

/// Relay positions swept by `sweep-distance` when none are configured.
pub fn default_distance_grid() -> Vec<f64> {
    grid(0.1, 0.9, 0.1).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            GridSpec::Range(g) => grid(g.start, g.stop, g.step),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_ds: Option<f64>,
    /// d_DR / d_DS for `single` and the default `sweep-rho` position.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Scheme names; `"all"` expands to every scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// The file as written, every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub run: RunSection,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| RelayError::Parse(e.to_string()))
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RelayError::Parse(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Values given on the command line. They win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub ratio: Option<f64>,
    pub p_d: Option<f64>,
    pub p_s: Option<f64>,
    pub trials: Option<usize>,
    pub schemes: Option<Vec<Scheme>>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// What the relay-position grid defaults to when neither file nor flags set it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioDefault {
    /// The single configured position.
    Single,
    /// `0.1, 0.2, ..., 0.9`.
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveConfig {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub rho_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

pub fn parse_schemes(names: &[String]) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(Scheme::ALL);
        } else {
            out.push(
                n.parse::<Scheme>().map_err(|e| RelayError::InvalidParam { field: "scheme", reason: e.to_string() })?,
            );
        }
    }
    let mut seen = Vec::new();
    out.retain(|s| {
        let fresh = !seen.contains(s);
        seen.push(*s);
        fresh
    });
    Ok(out)
}

/// Seed precedence: flag, then file, then `WPT_RELAY_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| RelayError::InvalidParam {
            field: "seed",
            reason: format!("from {SEED_ENV} must be a nonnegative integer, got '{v}'"),
        }),
        None => Ok(0),
    }
}

impl EffectiveConfig {
    /// Merges file, overrides and defaults and validates the result.
    /// `env_seed` is the raw value of `WPT_RELAY_SEED`, if set.
    pub fn resolve(
        file: &ConfigFile,
        ov: &Overrides,
        env_seed: Option<&str>,
        ratio_default: RatioDefault,
    ) -> Result<Self> {
        let d = SystemParams::default();
        let s = &file.system;
        let params = SystemParams {
            r: s.r.unwrap_or(d.r),
            p_s: ov.p_s.or(s.p_s).unwrap_or(d.p_s),
            p_d: ov.p_d.or(s.p_d).unwrap_or(d.p_d),
            sigma2: s.sigma2.unwrap_or(d.sigma2),
            rho: ov.rho.or(s.rho).unwrap_or(d.rho),
            eps: s.eps.unwrap_or(d.eps),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
        };
        params.validate()?;
        let ratio = ov.ratio.or(file.geometry.ratio).unwrap_or(0.65);
        let geometry = Geometry::new(file.geometry.d_ds.unwrap_or(10.0), ratio)?;

        // a flag pins the grid to its single value
        let rho_grid = match (ov.rho, &file.sweep.rho_grid) {
            (Some(r), _) => vec![r],
            (None, Some(g)) => g.values().map_err(|e| named("rho_grid", e))?,
            (None, None) => default_rho_grid(),
        };
        let ratio_grid = match (ov.ratio, &file.sweep.ratio_grid) {
            (Some(r), _) => vec![r],
            (None, Some(g)) => g.values().map_err(|e| named("ratio_grid", e))?,
            (None, None) => match ratio_default {
                RatioDefault::Single => vec![ratio],
                RatioDefault::Distance => default_distance_grid(),
            },
        };
        let schemes = match (&ov.schemes, &file.sweep.schemes) {
            (Some(s), _) => s.clone(),
            (None, Some(names)) => parse_schemes(names)?,
            (None, None) => Scheme::ALL.to_vec(),
        };
        let threads = ov.threads.or(file.run.threads);
        if threads == Some(0) {
            return Err(RelayError::InvalidParam { field: "threads", reason: "must be a positive integer".into() });
        }
        let cfg = EffectiveConfig {
            params,
            geometry,
            rho_grid,
            ratio_grid,
            trials: ov.trials.or(file.sweep.trials).unwrap_or(200),
            schemes,
            seed: resolve_seed(ov.seed, file.run.seed, env_seed)?,
            threads,
            out: ov.out.clone().or_else(|| file.run.out.clone()).unwrap_or_else(|| PathBuf::from("results")),
        };
        cfg.sweep().validate()?;
        Ok(cfg)
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            rho_grid: self.rho_grid.clone(),
            ratio_grid: self.ratio_grid.clone(),
            n_trials: self.trials,
            schemes: self.schemes.clone(),
            d_ds: self.geometry.d_ds,
            base_seed: self.seed,
            params: self.params.clone(),
        }
    }

    /// The configuration in file form. Thread count and output directory are
    /// left out: neither changes any emitted number.
    pub fn to_file(&self) -> ConfigFile {
        let p = &self.params;
        ConfigFile {
            system: SystemSection {
                r: Some(p.r),
                p_s: Some(p.p_s),
                p_d: Some(p.p_d),
                sigma2: Some(p.sigma2),
                rho: Some(p.rho),
                eps: Some(p.eps),
                max_iter: Some(p.max_iter),
            },
            geometry: GeometrySection { d_ds: Some(self.geometry.d_ds), ratio: Some(self.geometry.ratio_dr) },
            sweep: SweepSection {
                rho_grid: Some(GridSpec::List(self.rho_grid.clone())),
                ratio_grid: Some(GridSpec::List(self.ratio_grid.clone())),
                trials: Some(self.trials),
                schemes: Some(self.schemes.iter().map(|s| s.to_string()).collect()),
            },
            run: RunSection { seed: Some(self.seed), threads: None, out: None },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

fn named(field: &'static str, e: RelayError) -> RelayError {
    RelayError::InvalidParam { field, reason: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str, ov: &Overrides) -> Result<EffectiveConfig> {
        EffectiveConfig::resolve(&parse_config(text)?, ov, None, RatioDefault::Single)
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = resolve("", &Overrides::default()).unwrap();
        assert_eq!(c.params, SystemParams::default());
        assert_eq!(c.rho_grid, default_rho_grid());
        assert_eq!(c.ratio_grid, vec![0.65]);
        assert_eq!(c.trials, 200);
        assert_eq!(c.seed, 0);
        assert_eq!(c.schemes, Scheme::ALL.to_vec());
    }

    #[test]
    fn sections_and_grids() {
        let text = r#"
            [system]
            p_d = 5.0
            p_s = 0.01
            [geometry]
            d_ds = 12.0
            [sweep]
            rho_grid = { start = 0.1, stop = 0.5, step = 0.2 }
            ratio_grid = [0.3, 0.9]
            schemes = ["noef", "p3b"]
            trials = 7
            [run]
            seed = 42
            threads = 2
        "#;
        let c = resolve(text, &Overrides::default()).unwrap();
        assert_eq!(c.params.p_d, 5.0);
        assert_eq!(c.geometry.d_ds, 12.0);
        assert_eq!(c.rho_grid, vec![0.1, 0.3, 0.5]);
        assert_eq!(c.ratio_grid, vec![0.3, 0.9]);
        assert_eq!(c.schemes, vec![Scheme::NoEF, Scheme::P3B]);
        assert_eq!((c.trials, c.seed, c.threads), (7, 42, Some(2)));
    }

    #[test]
    fn overrides_win() {
        let text = "[system]\nrho = 0.3\n[sweep]\ntrials = 5\n[run]\nseed = 1\n";
        let ov = Overrides { rho: Some(0.6), trials: Some(9), seed: Some(3), ..Overrides::default() };
        let c = resolve(text, &ov).unwrap();
        assert_eq!(c.params.rho, 0.6);
        assert_eq!(c.rho_grid, vec![0.6]);
        assert_eq!((c.trials, c.seed), (9, 3));
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }

    #[test]
    fn distance_default_grid() {
        let c = EffectiveConfig::resolve(&ConfigFile::default(), &Overrides::default(), None, RatioDefault::Distance)
            .unwrap();
        assert_eq!(c.ratio_grid.len(), 9);
        assert_eq!(c.ratio_grid[8], 0.9);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let ov = Overrides { rho: Some(1.5), ..Overrides::default() };
        assert_eq!(resolve("", &ov).unwrap_err().to_string(), "rho must be in (0,1)");
        let err = resolve("[sweep]\nratio_grid = [0.5, 1.2]\n", &Overrides::default()).unwrap_err();
        assert_eq!(err.to_string(), "ratio must be in (0,1)");
        let err = resolve("[sweep]\nschemes = [\"p9\"]\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().starts_with("scheme "));
        assert!(resolve("[run]\nthreads = 0\n", &Overrides::default()).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config("[system]\nrhoo = 0.5\n").is_err());
        assert!(parse_config("[extra]\n").is_err());
        assert!(parse_config("[sweep]\nrho_grid = { start = 0.1, stop = 0.2 }\n").is_err());
    }

    #[test]
    fn file_form_round_trips() {
        let text = "[system]\np_d = 5.0\n[sweep]\nratio_grid = [0.3, 0.9]\nschemes = [\"all\"]\n";
        let c = resolve(text, &Overrides { threads: Some(3), ..Overrides::default() }).unwrap();
        let again = resolve(&c.to_toml(), &Overrides::default()).unwrap();
        assert_eq!(again, EffectiveConfig { threads: None, ..c });
    }
}
