//! Shot-noise sampling, fringe fitting, and precision-scaling regression.
//!
//! The fitter estimates the three-parameter model
//! P(theta) = A + B cos(N theta + phi0) from a (possibly sampled) fringe
//! scan by weighted least squares: a linear solve in (A, B cos phi0,
//! B sin phi0) seeds a Levenberg-Marquardt refinement with an analytic
//! Jacobian. Weights are inverse binomial variances, floored at one quarter
//! shot to keep degenerate 0/1 counts finite, and normalized to mean one so
//! the convergence thresholds are scale-free.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrology::{binary_precision, PrecisionPoint};
use crate::schemes::FringeScan;

/// Infinity-norm gradient threshold declaring the fit converged.
const GRAD_TOL: f64 = 1e-12;

/// Iteration cap for the Levenberg-Marquardt loop.
const MAX_ITERS: usize = 200;

/// Fitted fringe parameters for P(theta) = A + B cos(N theta + phi0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "N_assumed")]
    pub n_assumed: u32,
    /// Fringe phase in (-pi, pi].
    pub phi0: f64,
    /// Unweighted rms residual against the fitted data.
    pub residual_rms: f64,
}

impl FringeFit {
    pub fn new(a: f64, b: f64, n_assumed: u32, phi0: f64, residual_rms: f64) -> Result<Self> {
        if n_assumed == 0 {
            return Err(Error::InvalidFit("fit requires N >= 1".into()));
        }
        if !a.is_finite() || !b.is_finite() || !phi0.is_finite() || !residual_rms.is_finite() {
            return Err(Error::InvalidFit("fit parameters must be finite".into()));
        }
        if b < 0.0 {
            return Err(Error::InvalidFit("contrast B must be nonnegative".into()));
        }
        // A +- B must describe a probability up to statistical slack.
        if a - b < -0.02 || a + b > 1.02 {
            return Err(Error::InvalidFit(format!(
                "fitted fringe leaves the probability range: A = {a}, B = {b}"
            )));
        }
        Ok(Self {
            a,
            b,
            n_assumed,
            phi0,
            residual_rms,
        })
    }
}

/// Power-law fit of precision against N on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Exponent: delta_theta ~ N^slope.
    pub slope: f64,
    /// log10 prefactor.
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Draws binomial counts at every grid point of an exact scan.
///
/// Point k uses ChaCha8 stream k of the given seed, so results do not
/// depend on thread scheduling and any subset of points is reproducible.
pub fn sample_shots(scan: &FringeScan, shots: u64, seed: u64) -> Result<FringeScan> {
    use rayon::prelude::*;

    if scan.shots() != 0 {
        return Err(Error::InvalidInput(
            "sample_shots expects an exact scan, not an already-sampled one".into(),
        ));
    }
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be >= 1".into()));
    }
    let probs = scan.probabilities();
    let counts: Vec<u64> = (0..scan.len())
        .into_par_iter()
        .map(|k| {
            let p = probs[k];
            if p <= 0.0 {
                return Ok(0);
            }
            if p >= 1.0 {
                return Ok(shots);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let dist = Binomial::new(shots, p)
                .map_err(|e| Error::InvalidInput(format!("binomial setup failed: {e}")))?;
            Ok(dist.sample(&mut rng))
        })
        .collect::<Result<Vec<u64>>>()?;

    FringeScan::new(
        scan.n(),
        scan.thetas().to_vec(),
        probs.to_vec(),
        shots,
        Some(counts),
    )
}

struct FitData {
    thetas: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
    nf: f64,
}

fn prepare_fit_data(scan: &FringeScan, n_assumed: u32) -> Result<FitData> {
    if n_assumed == 0 {
        return Err(Error::InvalidFit("fit requires N >= 1".into()));
    }
    if scan.len() < 6 {
        return Err(Error::InvalidFit(format!(
            "need at least 6 points to fit three parameters, got {}",
            scan.len()
        )));
    }
    let thetas = scan.thetas().to_vec();
    let span = thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    // Identifiability: require most of one fringe period. The 0.9 factor
    // admits half-open uniform grids (span = period * (1 - 1/len)).
    let period = 2.0 * std::f64::consts::PI / n_assumed as f64;
    if span < 0.9 * period {
        return Err(Error::InvalidFit(format!(
            "theta grid spans {span:.6} rad but one fringe period is {period:.6} rad"
        )));
    }

    let values: Vec<f64> = (0..scan.len()).map(|k| scan.empirical(k)).collect();
    let mut weights = vec![1.0f64; scan.len()];
    if scan.shots() > 0 {
        let m = scan.shots() as f64;
        for (w, &p) in weights.iter_mut().zip(&values) {
            // Binomial variance of the empirical frequency, floored at the
            // quarter-shot level so p-hat in {0, 1} stays usable.
            let var = (p * (1.0 - p) / m).max(0.25 / (m * m));
            *w = 1.0 / var;
        }
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    for w in &mut weights {
        *w /= mean;
    }

    Ok(FitData {
        thetas,
        values,
        weights,
        nf: n_assumed as f64,
    })
}

/// Linear least squares in (A, B cos phi0, B sin phi0) to seed the
/// nonlinear refinement.
fn linear_init(data: &FitData) -> Result<Vector3<f64>> {
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for ((&theta, &y), &w) in data.thetas.iter().zip(&data.values).zip(&data.weights) {
        let (s, c) = (data.nf * theta).sin_cos();
        let row = [1.0, c, s];
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += w * row[i] * row[j];
            }
            rhs[i] += w * row[i] * y;
        }
    }
    let sol = m.lu().solve(&rhs).ok_or_else(|| {
        Error::InvalidFit("degenerate theta grid: linear initialization is singular".into())
    })?;
    let (a, cc, ss): (f64, f64, f64) = (sol[0], sol[1], sol[2]);
    let b = cc.hypot(ss);
    let phi0 = (-ss).atan2(cc);
    Ok(Vector3::new(a, b, phi0))
}

struct LmEval {
    cost: f64,
    jtj: Matrix3<f64>,
    grad: Vector3<f64>,
}

fn lm_eval(data: &FitData, p: &Vector3<f64>) -> LmEval {
    let (a, b, phi0) = (p[0], p[1], p[2]);
    let mut cost = 0.0;
    let mut jtj = Matrix3::zeros();
    let mut grad = Vector3::zeros();
    for ((&theta, &y), &w) in data.thetas.iter().zip(&data.values).zip(&data.weights) {
        let (s, c) = (data.nf * theta + phi0).sin_cos();
        let r = y - a - b * c;
        let sw = w.sqrt();
        let res = sw * r;
        // Jacobian of the weighted residual wrt (A, B, phi0).
        let row = [-sw, -sw * c, sw * b * s];
        cost += res * res;
        for i in 0..3 {
            grad[i] += row[i] * res;
            for j in 0..3 {
                jtj[(i, j)] += row[i] * row[j];
            }
        }
    }
    LmEval { cost, jtj, grad }
}

/// Fits A + B cos(N theta + phi0) using the scan's own N.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    fit_fringe_with_n(scan, scan.n())
}

/// Fits A + B cos(N theta + phi0) with a caller-chosen fringe order.
pub fn fit_fringe_with_n(scan: &FringeScan, n_assumed: u32) -> Result<FringeFit> {
    let data = prepare_fit_data(scan, n_assumed)?;
    let mut p = linear_init(&data)?;
    let mut eval = lm_eval(&data, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0usize;

    while eval.grad.amax() >= GRAD_TOL {
        if iterations >= MAX_ITERS {
            return Err(Error::FitNotConverged {
                iterations,
                gradient: eval.grad.amax(),
            });
        }
        iterations += 1;

        let mut improved = false;
        while lambda <= 1e12 {
            let mut h = eval.jtj;
            for k in 0..3 {
                h[(k, k)] += lambda * eval.jtj[(k, k)].max(1e-30);
            }
            let Some(step) = h.lu().solve(&(-eval.grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_eval = lm_eval(&data, &trial);
            if trial_eval.cost.is_finite() && trial_eval.cost <= eval.cost {
                p = trial;
                eval = trial_eval;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Err(Error::FitNotConverged {
                iterations,
                gradient: eval.grad.amax(),
            });
        }
    }

    let (a, mut b, mut phi0) = (p[0], p[1], p[2]);
    if b < 0.0 {
        b = -b;
        phi0 += std::f64::consts::PI;
    }
    // Wrap to (-pi, pi].
    phi0 = phi0.rem_euclid(2.0 * std::f64::consts::PI);
    if phi0 > std::f64::consts::PI {
        phi0 -= 2.0 * std::f64::consts::PI;
    }

    let nf = n_assumed as f64;
    let mut ss = 0.0;
    for (&theta, &y) in data.thetas.iter().zip(&data.values) {
        let r = y - a - b * (nf * theta + phi0).cos();
        ss += r * r;
    }
    let residual_rms = (ss / data.thetas.len() as f64).sqrt();

    FringeFit::new(a, b, n_assumed, phi0, residual_rms)
}

/// Single-shot phase precision implied by a fitted fringe, evaluated at the
/// steepest point of the curve where P = A and |dP/dtheta| = N B.
pub fn precision_from_fit(fit: &FringeFit) -> Result<f64> {
    binary_precision(fit.a, fit.n_assumed as f64 * fit.b)
}

/// Approximate covariance of (A, B, phi0) from binomial counting statistics,
/// i.e. the inverse of the Gauss-Newton information matrix at the fit.
pub fn fit_covariance(scan: &FringeScan, fit: &FringeFit) -> Result<[[f64; 3]; 3]> {
    if scan.shots() == 0 {
        return Err(Error::InvalidInput(
            "covariance estimation requires a sampled scan".into(),
        ));
    }
    let m = scan.shots() as f64;
    let nf = fit.n_assumed as f64;
    let mut info = Matrix3::zeros();
    for &theta in scan.thetas() {
        let (s, c) = (nf * theta + fit.phi0).sin_cos();
        let model = (fit.a + fit.b * c).clamp(0.0, 1.0);
        let var = (model * (1.0 - model) / m).max(0.25 / (m * m));
        let row = [1.0, c, -fit.b * s];
        for i in 0..3 {
            for j in 0..3 {
                info[(i, j)] += row[i] * row[j] / var;
            }
        }
    }
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::InvalidFit("singular information matrix".into()))?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cov[(i, j)];
        }
    }
    Ok(out)
}

/// Ordinary least squares of log10(delta_theta) against log10(N).
pub fn scaling_fit(points: &[PrecisionPoint]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut distinct: Vec<u32> = points.iter().map(|p| p.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput(
            "scaling fit needs at least 3 distinct N values".into(),
        ));
    }

    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.delta_theta.log10()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
        syy += (y - ybar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy <= 1e-300 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };

    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points_used: points.len(),
    })
}

const CSV_HEADER: [&str; 4] = ["theta_rad", "probability", "shots", "counts"];

/// Writes a scan as CSV with columns theta_rad, probability, shots, counts.
/// For sampled scans the probability column holds the empirical frequency;
/// the counts column is empty for exact scans.
pub fn scan_write_csv(scan: &FringeScan, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(CSV_HEADER)?;
    for k in 0..scan.len() {
        let counts_field = scan
            .counts()
            .map(|c| c[k].to_string())
            .unwrap_or_default();
        wtr.write_record(&[
            format!("{}", scan.thetas()[k]),
            format!("{}", scan.empirical(k)),
            scan.shots().to_string(),
            counts_field,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a scan written by [`scan_write_csv`]. The fringe order N is not
/// stored in the CSV and must be supplied.
pub fn scan_read_csv(path: &Path, n: u32) -> Result<FringeScan> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header {:?}, want {CSV_HEADER:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }

    let mut thetas = Vec::new();
    let mut probs = Vec::new();
    let mut shots_values = Vec::new();
    let mut counts = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::InvalidInput(format!(
                "CSV row has {} fields, want 4",
                record.len()
            )));
        }
        let parse = |field: &str, what: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|e| {
                Error::InvalidInput(format!("bad {what} value '{field}': {e}"))
            })
        };
        thetas.push(parse(&record[0], "theta_rad")?);
        probs.push(parse(&record[1], "probability")?);
        shots_values.push(record[2].trim().parse::<u64>().map_err(|e| {
            Error::InvalidInput(format!("bad shots value '{}': {e}", &record[2]))
        })?);
        let cfield = record[3].trim();
        counts.push(if cfield.is_empty() {
            None
        } else {
            Some(cfield.parse::<u64>().map_err(|e| {
                Error::InvalidInput(format!("bad counts value '{cfield}': {e}"))
            })?)
        });
    }
    if thetas.is_empty() {
        return Err(Error::InvalidInput("CSV contains no data rows".into()));
    }
    let shots = shots_values[0];
    if shots_values.iter().any(|&s| s != shots) {
        return Err(Error::InvalidInput(
            "shots column must be constant across the scan".into(),
        ));
    }
    let n_some = counts.iter().filter(|c| c.is_some()).count();
    let counts_opt = if n_some == 0 {
        None
    } else if n_some == counts.len() {
        Some(counts.into_iter().map(|c| c.unwrap()).collect())
    } else {
        return Err(Error::InvalidInput(
            "counts column must be fully present or fully empty".into(),
        ));
    };

    FringeScan::new(n, thetas, probs, shots, counts_opt)
}
