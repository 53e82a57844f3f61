//! JSON run configurations: one schema per subcommand, validated before any
//! computation, and written back fully resolved next to the outputs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fockmet::{DetectorMode, GridSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Version tag carried by every config and resolved-config file.
pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_points() -> usize {
    241
}

fn default_theta_max() -> f64 {
    2.0 * std::f64::consts::PI
}

fn default_n() -> u32 {
    6
}

fn default_n_max() -> u32 {
    12
}

fn default_wigner_ns() -> Vec<u32> {
    vec![3, 12]
}

fn default_optimize_ns() -> Vec<u32> {
    (1..=12).collect()
}

fn default_detector() -> DetectorMode {
    DetectorMode::Binary
}

fn default_detectors() -> Vec<DetectorMode> {
    vec![DetectorMode::Binary, DetectorMode::NumberResolving]
}

fn default_scheme() -> Scheme {
    Scheme::Optimal
}

/// Which measurement scheme a scan-producing command simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Ramsey-style projection onto the maximum-variance state.
    Optimal,
    /// Displacement followed by photon counting.
    Hybrid,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Optimal => "optimal",
            Scheme::Hybrid => "hybrid",
        })
    }
}

/// Config for `fockmet wigner`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Photon numbers N; one grid per entry.
    #[serde(default = "default_wigner_ns")]
    pub ns: Vec<u32>,
    /// Overrides the per-N default plotting window.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Caps the number of Fock levels entering the parity sums.
    #[serde(default)]
    pub dim: Option<usize>,
}

impl Default for WignerConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl WignerConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.ns.is_empty() {
            bail!("config: ns must list at least one photon number");
        }
        if self.ns.contains(&0) {
            bail!("config: photon numbers must be >= 1");
        }
        if let Some(g) = &self.grid {
            GridSpec::new(g.re_min, g.re_max, g.im_min, g.im_max, g.points_per_axis)
                .context("config: invalid grid")?;
        }
        if self.dim == Some(0) {
            bail!("config: dim must be >= 1");
        }
        Ok(())
    }
}

/// Config for `fockmet fringe`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Photon number N of the probe state.
    #[serde(default = "default_n", rename = "N")]
    pub n: u32,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Detector model for the hybrid scheme (fringe scans need `binary`).
    #[serde(default = "default_detector")]
    pub detector: DetectorMode,
    /// Number of phase points, evenly spaced over [0, theta_max].
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Repetitions per phase point; omitted means an exact scan.
    #[serde(default)]
    pub shots: Option<u64>,
    /// Base seed for shot sampling (CLI --seed overrides).
    #[serde(default)]
    pub seed: Option<u64>,
    /// Photon-loss rate (1/s) during phase accumulation.
    #[serde(default)]
    pub kappa: f64,
    /// Pure-dephasing rate (1/s) during phase accumulation.
    #[serde(default)]
    pub kappa_phi: f64,
    /// Dispersive shift (rad/s) converting phase to wait time.
    #[serde(default)]
    pub chi_qs: Option<f64>,
    /// Fock-space dimension for the hybrid scheme.
    #[serde(default)]
    pub dim: Option<usize>,
}

impl Default for FringeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl FringeConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.n == 0 {
            bail!("config: N must be >= 1");
        }
        check_scan_shape(self.points, self.theta_max, self.n)?;
        check_rates(self.kappa, self.kappa_phi, self.chi_qs)?;
        if self.shots == Some(0) {
            bail!("config: shots must be >= 1 when present");
        }
        if self.scheme == Scheme::Hybrid {
            if self.detector != DetectorMode::Binary {
                bail!(
                    "config: fringe scans record a single outcome per phase, so the hybrid \
                     scheme requires detector = \"binary\"; use the optimize or scaling \
                     commands for number-resolving results"
                );
            }
            check_hybrid_supported(self.kappa, self.kappa_phi)?;
        }
        Ok(())
    }
}

/// Config for `fockmet scaling`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Largest photon number; points run N = 1..=N_max.
    #[serde(default = "default_n_max", rename = "N_max")]
    pub n_max: u32,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Detector model (hybrid scheme only).
    #[serde(default = "default_detector")]
    pub detector: DetectorMode,
    /// Phase points per scan (optimal scheme pipeline).
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Repetitions per phase point; omitted means exact scans.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub kappa_phi: f64,
    #[serde(default)]
    pub chi_qs: Option<f64>,
    /// Fock-space dimension for the hybrid scheme (per N default: N + 46).
    #[serde(default)]
    pub dim: Option<usize>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.n_max < 3 {
            bail!("config: N_max must be >= 3 so the scaling fit has enough points");
        }
        check_scan_shape(self.points, self.theta_max, 1)?;
        check_rates(self.kappa, self.kappa_phi, self.chi_qs)?;
        if self.shots == Some(0) {
            bail!("config: shots must be >= 1 when present");
        }
        if self.scheme == Scheme::Hybrid {
            check_hybrid_supported(self.kappa, self.kappa_phi)?;
            if self.shots.is_some() && self.detector != DetectorMode::Binary {
                bail!(
                    "config: sampled hybrid scans need the binary detector's single fringe; \
                     drop shots for exact number-resolving precisions"
                );
            }
        }
        Ok(())
    }
}

/// Config for `fockmet optimize`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Photon numbers to optimize for.
    #[serde(default = "default_optimize_ns")]
    pub ns: Vec<u32>,
    /// Detector models to optimize for, in output order.
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorMode>,
    /// Fock-space dimension (per N default: N + 46).
    #[serde(default)]
    pub dim: Option<usize>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        if self.ns.is_empty() {
            bail!("config: ns must list at least one photon number");
        }
        if self.ns.contains(&0) {
            bail!("config: photon numbers must be >= 1");
        }
        if self.detectors.is_empty() {
            bail!("config: detectors must list at least one mode");
        }
        Ok(())
    }
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("config: unsupported schema_version {version} (this build reads {SCHEMA_VERSION})");
    }
    Ok(())
}

fn check_scan_shape(points: usize, theta_max: f64, n: u32) -> Result<()> {
    if points < 8 {
        bail!("config: a fit needs at least 8 phase points");
    }
    if !theta_max.is_finite() || theta_max <= 0.0 {
        bail!("config: theta_max must be finite and > 0");
    }
    let period = 2.0 * std::f64::consts::PI / n as f64;
    if theta_max < 0.9 * period {
        bail!(
            "config: theta_max {theta_max} spans less than a fringe period 2 pi / {n}; \
             the fit would not be identifiable"
        );
    }
    Ok(())
}

fn check_rates(kappa: f64, kappa_phi: f64, chi_qs: Option<f64>) -> Result<()> {
    if !kappa.is_finite() || kappa < 0.0 || !kappa_phi.is_finite() || kappa_phi < 0.0 {
        bail!("config: kappa and kappa_phi must be finite and >= 0");
    }
    if let Some(chi) = chi_qs {
        if !chi.is_finite() || chi <= 0.0 {
            bail!("config: chi_qs must be finite and > 0");
        }
    }
    Ok(())
}

fn check_hybrid_supported(kappa: f64, kappa_phi: f64) -> Result<()> {
    if kappa > 0.0 || kappa_phi > 0.0 {
        bail!(
            "config: decoherence is not supported for the hybrid scheme; \
             set kappa and kappa_phi to 0"
        );
    }
    Ok(())
}

/// Loads a subcommand config, falling back to defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Fully resolved run description written next to the outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResolvedConfig<T> {
    pub schema_version: u32,
    pub command: String,
    pub config: T,
}

impl<T: Serialize> ResolvedConfig<T> {
    pub fn new(command: &str, config: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
        }
    }
}
