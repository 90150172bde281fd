//! JSON run configuration: strict schema, defaults, validation, and the
//! binding into sweep inputs.

use serde::{Deserialize, Serialize};

use crate::bands::CriticalSearch;
use crate::effective::MacroPotential;
use crate::error::{Error, Result};
use crate::harness::{HomGrid, SweepConfig};
use crate::periodic::{sample_periodic, CoeffSpec, PeriodicFunction};
use crate::profile::MacroProfile;
use crate::spde::Noise;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub sigma: CoeffSpec,
    pub c: CoeffSpec,
    #[serde(default)]
    pub d: MacroPotentialSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum MacroPotentialSpec {
    #[default]
    Zero,
    Separable {
        a: MacroProfile,
        b: CoeffSpec,
    },
    Grid {
        x_grid: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<CoeffSpec>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { kind: NoiseKindSpec::Off, g: None }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindSpec {
    #[default]
    Off,
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    #[serde(default = "default_band")]
    pub n: usize,
    #[serde(default = "default_theta_candidates")]
    pub theta_candidates: Vec<f64>,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { n: default_band(), theta_candidates: default_theta_candidates() }
    }
}

fn default_band() -> usize {
    1
}

fn default_theta_candidates() -> Vec<f64> {
    vec![0.0, 0.5]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Nodes of the symmetric Bloch sweep grid.
    #[serde(default = "default_theta_grid")]
    pub theta_grid: usize,
    #[serde(default = "default_n_bands")]
    pub n_bands: usize,
    #[serde(default = "default_points_per_cell")]
    pub points_per_cell: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_domain_len")]
    pub domain_len: f64,
    /// `"match"` or an interior node count for the coarse homogenized grid.
    #[serde(default = "default_hom_grid")]
    pub hom_grid: HomGridSpec,
    #[serde(default = "default_snapshots")]
    pub n_snapshots: usize,
    #[serde(default = "default_v0")]
    pub v0: MacroProfile,
    /// Torus sampling size used to materialize coefficient specs.
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    #[serde(default = "default_true")]
    pub use_discrete_shift: bool,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum HomGridSpec {
    Fixed(usize),
    Named(String),
}

impl Default for Numerics {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are complete")
    }
}

fn default_k_max() -> usize {
    16
}
fn default_theta_grid() -> usize {
    65
}
fn default_n_bands() -> usize {
    4
}
fn default_points_per_cell() -> usize {
    64
}
fn default_dt() -> f64 {
    1e-4
}
fn default_t_final() -> f64 {
    0.5
}
fn default_epsilons() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125]
}
fn default_replicas() -> u64 {
    64
}
fn default_seed() -> u64 {
    0x5EED_0001
}
fn default_domain_len() -> f64 {
    1.0
}
fn default_hom_grid() -> HomGridSpec {
    HomGridSpec::Fixed(511)
}
fn default_snapshots() -> usize {
    17
}
fn default_v0() -> MacroProfile {
    MacroProfile::Bump { center: 0.5, width: 0.6, amplitude: 1.0 }
}
fn default_grid_m() -> usize {
    256
}
fn default_true() -> bool {
    true
}
fn default_gap_tol() -> f64 {
    1e-6
}
fn default_fd_step() -> f64 {
    1e-2
}

/// Strict parse: unknown keys are rejected and schema violations name the
/// offending JSON path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        let positive = [
            ("numerics.dt", n.dt),
            ("numerics.t_final", n.t_final),
            ("numerics.domain_len", n.domain_len),
            ("numerics.gap_tol", n.gap_tol),
            ("numerics.fd_step", n.fd_step),
        ];
        for (path, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config {
                    path: path.into(),
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        if n.k_max == 0 {
            return Err(Error::Config { path: "numerics.k_max".into(), message: "must be at least 1".into() });
        }
        if n.theta_grid < 3 {
            return Err(Error::Config { path: "numerics.theta_grid".into(), message: "needs at least 3 nodes".into() });
        }
        if n.replicas == 0 {
            return Err(Error::Config { path: "numerics.replicas".into(), message: "needs at least one replica".into() });
        }
        if self.band.n == 0 || self.band.n > 2 * n.k_max + 1 {
            return Err(Error::Config {
                path: "band.n".into(),
                message: format!("band index must lie in 1..={}", 2 * n.k_max + 1),
            });
        }
        for (i, &eps) in n.epsilons.iter().enumerate() {
            if epsilon_cells(eps).is_none() {
                return Err(Error::Config {
                    path: format!("numerics.epsilons[{i}]"),
                    message: format!("epsilon {eps} is not the reciprocal of a positive integer"),
                });
            }
        }
        if let HomGridSpec::Named(name) = &n.hom_grid {
            if name != "match" {
                return Err(Error::Config {
                    path: "numerics.hom_grid".into(),
                    message: format!("expected \"match\" or a node count, got \"{name}\""),
                });
            }
        }
        match self.noise.kind {
            NoiseKindSpec::Off => {}
            _ => {
                if self.noise.g.is_none() {
                    return Err(Error::Config {
                        path: "noise.g".into(),
                        message: "additive or multiplicative noise needs an amplitude spec".into(),
                    });
                }
            }
        }
        // Materialize coefficient specs once so bad specs fail at parse time.
        self.sigma_fn()?;
        self.c_fn()?;
        if let Some(g) = &self.noise.g {
            sample_periodic(g, n.grid_m)?;
        }
        if let MacroPotentialSpec::Separable { b, .. } = &self.d {
            sample_periodic(b, n.grid_m)?;
        }
        Ok(())
    }

    pub fn sigma_fn(&self) -> Result<PeriodicFunction> {
        sample_periodic(&self.sigma, self.numerics.grid_m)
    }

    pub fn c_fn(&self) -> Result<PeriodicFunction> {
        sample_periodic(&self.c, self.numerics.grid_m)
    }

    pub fn g_fn(&self) -> Result<Option<PeriodicFunction>> {
        self.noise.g.as_ref().map(|g| sample_periodic(g, self.numerics.grid_m)).transpose()
    }

    pub fn noise_realized(&self) -> Result<Noise> {
        Ok(match (self.noise.kind, self.g_fn()?) {
            (NoiseKindSpec::Off, _) => Noise::Off,
            (NoiseKindSpec::Additive, Some(g)) => Noise::Additive(g),
            (NoiseKindSpec::Multiplicative, Some(g)) => Noise::Multiplicative(g),
            _ => Noise::Off,
        })
    }

    pub fn potential_realized(&self) -> Result<MacroPotential> {
        Ok(match &self.d {
            MacroPotentialSpec::Zero => MacroPotential::Zero,
            MacroPotentialSpec::Separable { a, b } => MacroPotential::Separable {
                a: a.clone(),
                b: sample_periodic(b, self.numerics.grid_m)?,
            },
            MacroPotentialSpec::Grid { x_grid, values } => {
                MacroPotential::Grid { x_grid: x_grid.clone(), values: values.clone() }
            }
        })
    }

    pub fn search(&self) -> CriticalSearch {
        CriticalSearch {
            gap_tol: self.numerics.gap_tol,
            fd_step: self.numerics.fd_step,
            ..CriticalSearch::default()
        }
    }

    pub fn cells_list(&self) -> Vec<u32> {
        self.numerics
            .epsilons
            .iter()
            .map(|&e| epsilon_cells(e).expect("validated on parse"))
            .collect()
    }

    pub fn to_sweep_config(&self, seed_override: Option<u64>) -> Result<SweepConfig> {
        let n = &self.numerics;
        Ok(SweepConfig {
            sigma: self.sigma_fn()?,
            c: self.c_fn()?,
            d: self.potential_realized()?,
            noise: self.noise_realized()?,
            band: self.band.n,
            theta_candidates: self.band.theta_candidates.clone(),
            k_max: n.k_max,
            domain_len: n.domain_len,
            t_final: n.t_final,
            dt: n.dt,
            cells_list: self.cells_list(),
            replicas: n.replicas,
            seed: seed_override.unwrap_or(n.seed),
            points_per_cell: n.points_per_cell,
            hom_grid: match &n.hom_grid {
                HomGridSpec::Fixed(count) => HomGrid::Coarse(*count),
                HomGridSpec::Named(_) => HomGrid::Match,
            },
            v0: n.v0.clone(),
            n_snapshots: n.n_snapshots,
            search: self.search(),
            use_discrete_shift: n.use_discrete_shift,
        })
    }
}

/// `Some(q)` when `eps` is `1/q` within rounding.
pub fn epsilon_cells(eps: f64) -> Option<u32> {
    if !(eps > 0.0) || !eps.is_finite() {
        return None;
    }
    let q = (1.0 / eps).round();
    if q < 1.0 || q > u32::MAX as f64 || (eps * q - 1.0).abs() > 1e-9 {
        return None;
    }
    Some(q as u32)
}

/// FNV-1a over the canonical serialized config, the reproducibility key in
/// the manifest.
pub fn config_hash(config: &RunConfig) -> u64 {
    let text = serde_json::to_string(config).expect("config serializes");
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "scenario": "free",
            "sigma": {"named": "constant", "params": {"value": 1.0}},
            "c": {"named": "constant", "params": {"value": 0.0}}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(&minimal()).unwrap();
        assert_eq!(cfg.numerics.k_max, 16);
        assert_eq!(cfg.numerics.dt, 1e-4);
        assert_eq!(cfg.numerics.points_per_cell, 64);
        assert_eq!(cfg.band.n, 1);
        assert_eq!(cfg.cells_list(), vec![8, 16, 32]);
    }

    #[test]
    fn bad_epsilon_rejected_with_path() {
        let text = r#"{
            "scenario": "x",
            "sigma": {"named": "constant"},
            "c": {"named": "constant", "params": {"value": 0.0}},
            "numerics": {"epsilons": [0.3]}
        }"#;
        match parse_config(text) {
            Err(Error::Config { path, .. }) => assert!(path.contains("epsilon"), "path {path}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{
            "scenario": "x",
            "sigma": {"named": "constant"},
            "c": {"named": "constant"},
            "extra_key": 1
        }"#;
        assert!(matches!(parse_config(text), Err(Error::Config { .. })));

        let nested = r#"{
            "scenario": "x",
            "sigma": {"named": "constant", "bogus": true},
            "c": {"named": "constant"}
        }"#;
        match parse_config(nested) {
            Err(Error::Config { path, .. }) => assert!(path.contains("sigma"), "path {path}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn noise_requires_amplitude() {
        let text = r#"{
            "scenario": "x",
            "sigma": {"named": "constant"},
            "c": {"named": "constant"},
            "noise": {"kind": "additive"}
        }"#;
        match parse_config(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "noise.g"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"{
            "scenario": "mathieu",
            "sigma": {"named": "constant", "params": {"value": 1.0}},
            "c": {"named": "cosine", "params": {"amplitude": 2.0}},
            "noise": {"kind": "multiplicative", "g": {"named": "cosine"}},
            "d": {"kind": "separable", "a": {"kind": "linear", "slope": 1.0}, "b": {"named": "cosine"}},
            "numerics": {"epsilons": [0.125, 0.0625], "replicas": 8, "hom_grid": "match"}
        }"#;
        let cfg = parse_config(text).unwrap();
        let serialized = serde_json::to_string_pretty(&cfg).unwrap();
        let reparsed = parse_config(&serialized).unwrap();
        assert_eq!(cfg, reparsed);
        assert_eq!(config_hash(&cfg), config_hash(&reparsed));
    }

    #[test]
    fn hom_grid_spellings() {
        let fixed: HomGridSpec = serde_json::from_str("257").unwrap();
        assert_eq!(fixed, HomGridSpec::Fixed(257));
        let named: HomGridSpec = serde_json::from_str("\"match\"").unwrap();
        assert_eq!(named, HomGridSpec::Named("match".into()));
    }
}
