//! Subcommand implementations: compute, write artifacts, then re-read and
//! validate everything so exit status 0 certifies the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fockmet::{
    db_enhancement, fit_fringe, hl, hybrid_probability_fixed, optimal_scan, optimize_hybrid,
    precision_from_fit, sample_shots, scaling_fit, scan_read_csv, snl, wigner_grid,
    wigner_write_csv, wigner_write_meta, DecoherenceParams, DetectorMode, FringeFit, FringeScan,
    GridSpec, OptimizedHybrid, PrecisionPoint, ScalingFit, WignerMeta, WIGNER_BOUND,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{
    FringeConfig, OptimizeConfig, ResolvedConfig, ScalingConfig, Scheme, WignerConfig,
    SCHEMA_VERSION,
};

/// Default Fock-space dimension for the hybrid scheme at photon number N:
/// comfortably above the optimizer's displacement-support requirement.
fn hybrid_dim(n: u32, overridden: Option<usize>) -> usize {
    overridden.unwrap_or(n as usize + 46)
}

fn theta_grid(points: usize, theta_max: f64) -> Vec<f64> {
    (0..points)
        .map(|k| theta_max * k as f64 / (points - 1) as f64)
        .collect()
}

fn decoherence(kappa: f64, kappa_phi: f64, chi_qs: Option<f64>) -> Result<Option<DecoherenceParams>> {
    if kappa == 0.0 && kappa_phi == 0.0 {
        return Ok(None);
    }
    let params = match chi_qs {
        Some(chi) => DecoherenceParams::with_chi(kappa, kappa_phi, chi)?,
        None => DecoherenceParams::new(kappa, kappa_phi)?,
    };
    Ok(Some(params))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("re-reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("validating {}", path.display()))
}

fn write_resolved<T: Serialize>(out: &Path, command: &str, config: T) -> Result<PathBuf> {
    let path = out.join("config_resolved.json");
    write_json(&path, &ResolvedConfig::new(command, config))?;
    Ok(path)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

// ---------------------------------------------------------------------------
// wigner
// ---------------------------------------------------------------------------

pub fn run_wigner(cfg: WignerConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let mut written = vec![write_resolved(out, "wigner", cfg.clone())?];

    for &n in &cfg.ns {
        let spec = cfg.grid.unwrap_or_else(|| GridSpec::default_for(n));
        let psi = fockmet::make_mvs(n, n as usize + 1)?;
        let mut grid = wigner_grid(&psi, &spec, cfg.dim)?;
        grid.state = format!("mvs_{n}");

        let csv_path = out.join(format!("wigner_N{n}.csv"));
        let meta_path = out.join(format!("wigner_N{n}_meta.json"));
        wigner_write_csv(&grid, &csv_path)?;
        wigner_write_meta(&grid, &meta_path)?;

        validate_wigner_csv(&csv_path, spec.points_per_axis)?;
        let meta: WignerMeta = read_json(&meta_path)?;
        if meta.points_per_axis != spec.points_per_axis || meta.state != grid.state {
            bail!("validation: {} does not match the run", meta_path.display());
        }
        written.push(csv_path);
        written.push(meta_path);
    }

    announce(&written);
    Ok(())
}

fn validate_wigner_csv(path: &Path, points_per_axis: usize) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("re-reading {}", path.display()))?;
    let headers = rdr.headers().context("reading CSV header")?.clone();
    if headers.iter().collect::<Vec<_>>() != ["re_alpha", "im_alpha", "w_value"] {
        bail!("validation: {} has unexpected columns", path.display());
    }
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        let w: f64 = record[2]
            .parse()
            .with_context(|| format!("validation: bad w_value in {}", path.display()))?;
        if w.abs() > WIGNER_BOUND + 1e-9 {
            bail!("validation: |W| exceeds 2/pi in {}", path.display());
        }
        rows += 1;
    }
    if rows != points_per_axis * points_per_axis {
        bail!(
            "validation: {} has {rows} rows, expected {}",
            path.display(),
            points_per_axis * points_per_axis
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fringe
// ---------------------------------------------------------------------------

pub fn run_fringe(cfg: FringeConfig, out: &Path, seed_flag: Option<u64>) -> Result<()> {
    let mut cfg = cfg;
    if let Some(seed) = seed_flag {
        cfg.seed = Some(seed);
    }
    cfg.validate()?;
    let mut written = vec![write_resolved(out, "fringe", cfg.clone())?];

    let thetas = theta_grid(cfg.points, cfg.theta_max);
    let (scan, hybrid) = build_scan(&cfg, &thetas)?;

    let scan = match cfg.shots {
        Some(shots) => sample_shots(&scan, shots, cfg.seed.unwrap_or(0))?,
        None => scan,
    };

    let fit = fit_fringe(&scan)?;
    let delta = precision_from_fit(&fit)?;
    let point = PrecisionPoint::new(cfg.n, delta)?;

    let scan_path = out.join("fringe_scan.csv");
    let fit_path = out.join("fringe_fit.json");
    let precision_path = out.join("fringe_precision.json");
    fockmet::scan_write_csv(&scan, &scan_path)?;
    write_json(&fit_path, &fit)?;
    write_json(&precision_path, &point)?;
    written.extend([scan_path.clone(), fit_path.clone(), precision_path.clone()]);

    if let Some(opt) = hybrid {
        let hybrid_path = out.join("hybrid_config.json");
        write_json(&hybrid_path, &opt)?;
        let back: OptimizedHybrid = read_json(&hybrid_path)?;
        if back != opt {
            bail!("validation: {} does not round-trip", hybrid_path.display());
        }
        written.push(hybrid_path);
    }

    // Re-read and validate.
    let reread = scan_read_csv(&scan_path, cfg.n)?;
    if reread.len() != cfg.points {
        bail!("validation: {} lost scan points", scan_path.display());
    }
    let fit_back: FringeFit = read_json(&fit_path)?;
    let point_back: PrecisionPoint = read_json(&precision_path)?;
    if (fit_back.a - fit.a).abs() > 0.0 || (point_back.delta_theta - delta).abs() > 0.0 {
        bail!(
            "validation: fit artifacts do not round-trip (dA = {:e}, d_delta = {:e})",
            fit_back.a - fit.a,
            point_back.delta_theta - delta
        );
    }

    announce(&written);
    println!(
        "N = {}, scheme = {}, delta_theta = {:.6e} rad",
        cfg.n, cfg.scheme, delta
    );
    Ok(())
}

/// Builds the exact scan for the configured scheme. For the hybrid scheme
/// the displacement stays frozen at the optimized working point while the
/// accumulated phase is swept, so the fringe frequency stays N.
fn build_scan(cfg: &FringeConfig, thetas: &[f64]) -> Result<(FringeScan, Option<OptimizedHybrid>)> {
    match cfg.scheme {
        Scheme::Optimal => {
            let params = decoherence(cfg.kappa, cfg.kappa_phi, cfg.chi_qs)?;
            let scan = optimal_scan(cfg.n, thetas, params.as_ref())?;
            Ok((scan, None))
        }
        Scheme::Hybrid => {
            let dim = hybrid_dim(cfg.n, cfg.dim);
            let opt = optimize_hybrid(cfg.n, dim, DetectorMode::Binary)?;
            let probs: Vec<f64> = thetas
                .iter()
                .map(|&t| hybrid_probability_fixed(&opt.config, t, dim))
                .collect::<fockmet::Result<_>>()?;
            let scan = FringeScan::exact(cfg.n, thetas.to_vec(), probs)?;
            Ok((scan, Some(opt)))
        }
    }
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

/// Sidecar describing conventions behind the scaling table.
#[derive(Debug, Serialize, Deserialize)]
struct ScalingMeta {
    scheme: String,
    detector: Option<String>,
    #[serde(rename = "N_max")]
    n_max: u32,
    shots: Option<u64>,
    seed: Option<u64>,
    kappa: f64,
    kappa_phi: f64,
    /// Convention used by the snl and db_vs_snl columns.
    snl_convention: String,
    /// The alternative normalization, for cross-checking against sources
    /// that quote mean photon number.
    snl_alternative: String,
    db_vs_snl_at_n_max: f64,
}

pub fn run_scaling(cfg: ScalingConfig, out: &Path, seed_flag: Option<u64>) -> Result<()> {
    let mut cfg = cfg;
    if let Some(seed) = seed_flag {
        cfg.seed = Some(seed);
    }
    cfg.validate()?;
    let mut written = vec![write_resolved(out, "scaling", cfg.clone())?];

    let mut points = Vec::with_capacity(cfg.n_max as usize);
    for n in 1..=cfg.n_max {
        let delta = match cfg.scheme {
            Scheme::Optimal => optimal_precision_for(&cfg, n)?,
            Scheme::Hybrid => hybrid_precision_for(&cfg, n)?,
        };
        points.push(PrecisionPoint::new(n, delta)?);
    }
    let fit = scaling_fit(&points)?;

    let points_path = out.join("scaling_points.csv");
    write_scaling_csv(&points_path, &points)?;
    let fit_path = out.join("scaling_fit.json");
    write_json(&fit_path, &fit)?;

    let last = points.last().expect("N_max >= 3 points");
    let meta = ScalingMeta {
        scheme: cfg.scheme.to_string(),
        detector: match cfg.scheme {
            Scheme::Hybrid => Some(detector_name(cfg.detector).to_string()),
            Scheme::Optimal => None,
        },
        n_max: cfg.n_max,
        shots: cfg.shots,
        seed: cfg.seed,
        kappa: cfg.kappa,
        kappa_phi: cfg.kappa_phi,
        snl_convention: "SNL = 1/sqrt(N) with N the maximum photon number of the probe"
            .to_string(),
        snl_alternative: "with the mean photon number nbar = N/2 of (|0> + |N>)/sqrt(2), \
                          SNL' = 1/sqrt(nbar) = sqrt(2/N); quoting gains against SNL' adds \
                          10 log10(2) ~ 3.01 dB"
            .to_string(),
        db_vs_snl_at_n_max: db_enhancement(last.delta_theta, snl(last.n)?)?,
    };
    let meta_path = out.join("scaling_meta.json");
    write_json(&meta_path, &meta)?;

    // Re-read and validate.
    validate_scaling_csv(&points_path, cfg.n_max)?;
    let fit_back: ScalingFit = read_json(&fit_path)?;
    if fit_back.points_used != points.len() {
        bail!("validation: {} does not match the run", fit_path.display());
    }
    let _meta_back: ScalingMeta = read_json(&meta_path)?;
    written.extend([points_path, fit_path, meta_path]);

    announce(&written);
    println!(
        "scheme = {}, slope = {:.4}, intercept = {:.4}, R^2 = {:.6}",
        cfg.scheme, fit.slope, fit.intercept, fit.r_squared
    );
    Ok(())
}

fn detector_name(mode: DetectorMode) -> &'static str {
    match mode {
        DetectorMode::Binary => "binary",
        DetectorMode::NumberResolving => "number_resolving",
    }
}

/// Exact or sampled fringe pipeline for the projection scheme.
fn optimal_precision_for(cfg: &ScalingConfig, n: u32) -> Result<f64> {
    let thetas = theta_grid(cfg.points, cfg.theta_max);
    let params = decoherence(cfg.kappa, cfg.kappa_phi, cfg.chi_qs)?;
    let scan = optimal_scan(n, &thetas, params.as_ref())?;
    let scan = match cfg.shots {
        Some(shots) => sample_shots(&scan, shots, cfg.seed.unwrap_or(0).wrapping_add(n as u64))?,
        None => scan,
    };
    let fit = fit_fringe(&scan)?;
    Ok(precision_from_fit(&fit)?)
}

/// Optimized hybrid precision; with shots, the binary fringe is sampled and
/// refit like an experiment would be.
fn hybrid_precision_for(cfg: &ScalingConfig, n: u32) -> Result<f64> {
    let dim = hybrid_dim(n, cfg.dim);
    let opt = optimize_hybrid(n, dim, cfg.detector)?;
    match cfg.shots {
        None => Ok(opt.precision),
        Some(shots) => {
            let thetas = theta_grid(cfg.points, cfg.theta_max);
            let probs: Vec<f64> = thetas
                .iter()
                .map(|&t| hybrid_probability_fixed(&opt.config, t, dim))
                .collect::<fockmet::Result<_>>()?;
            let scan = FringeScan::exact(n, thetas, probs)?;
            let scan = sample_shots(&scan, shots, cfg.seed.unwrap_or(0).wrapping_add(n as u64))?;
            let fit = fit_fringe(&scan)?;
            Ok(precision_from_fit(&fit)?)
        }
    }
}

const SCALING_HEADER: [&str; 5] = ["N", "delta_theta", "snl", "hl", "db_vs_snl"];

fn write_scaling_csv(path: &Path, points: &[PrecisionPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    wtr.write_record(SCALING_HEADER)?;
    for p in points {
        wtr.write_record(&[
            format!("{}", p.n),
            format!("{}", p.delta_theta),
            format!("{}", snl(p.n)?),
            format!("{}", hl(p.n)?),
            format!("{}", db_enhancement(p.delta_theta, snl(p.n)?)?),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn validate_scaling_csv(path: &Path, n_max: u32) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("re-reading {}", path.display()))?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != SCALING_HEADER {
        bail!("validation: {} has unexpected columns", path.display());
    }
    let mut rows = 0u32;
    for record in rdr.records() {
        let record = record?;
        let _: u32 = record[0].parse()?;
        for field in record.iter().skip(1) {
            let v: f64 = field.parse()?;
            if !v.is_finite() {
                bail!("validation: non-finite value in {}", path.display());
            }
        }
        rows += 1;
    }
    if rows != n_max {
        bail!("validation: {} has {rows} rows, expected {n_max}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

pub fn run_optimize(cfg: OptimizeConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let mut written = vec![write_resolved(out, "optimize", cfg.clone())?];

    let mut results: Vec<OptimizedHybrid> = Vec::new();
    for &n in &cfg.ns {
        for &detector in &cfg.detectors {
            let dim = hybrid_dim(n, cfg.dim);
            results.push(optimize_hybrid(n, dim, detector)?);
        }
    }

    let path = out.join("optimize_results.json");
    write_json(&path, &results)?;
    let back: Vec<OptimizedHybrid> = read_json(&path)?;
    if back != results {
        bail!("validation: {} does not round-trip", path.display());
    }
    written.push(path);

    announce(&written);
    for r in &results {
        println!(
            "N = {:>2}, detector = {:<16} |alpha| = {:.4}, n_detect = {}, \
             delta_theta = {:.6e} rad",
            r.config.n,
            detector_name(r.detector),
            r.config.alpha_mag,
            r.config.n_detect,
            r.precision
        );
    }
    Ok(())
}

// A compile-time guard that the resolved-config schema stays versioned.
const _: () = assert!(SCHEMA_VERSION == 1);
