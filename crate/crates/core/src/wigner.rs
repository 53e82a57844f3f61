//! Wigner quasiprobability function on the truncated Fock space.
//!
//! Evaluation uses the displaced-parity form rearranged to
//! W(alpha) = (2/pi) <psi| Pi D(-2 alpha) |psi>, which needs only the
//! leading (support+1) x (support+1) block of a displacement matrix. Each
//! block entry is an exact infinite-dimensional matrix element up to f64
//! rounding, so there is no truncation tail at any |alpha|: the absolute
//! error of W stays near machine precision over arbitrarily large grids.
//! (Displacing the state and summing parities over a finite working space
//! is equivalent in exact arithmetic but loses ~1e-7 at grid corners.)

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{displacement_columns, StateVector};

/// |W| can never exceed 2/pi for a physical state.
pub const WIGNER_BOUND: f64 = 2.0 / std::f64::consts::PI;

/// Rectangular phase-space grid, inclusive of both endpoints on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        points_per_axis: usize,
    ) -> Result<Self> {
        for v in [re_min, re_max, im_min, im_max] {
            if !v.is_finite() {
                return Err(Error::InvalidInput("grid bounds must be finite".into()));
            }
        }
        if re_max <= re_min || im_max <= im_min {
            return Err(Error::InvalidInput(
                "grid bounds must satisfy max > min on both axes".into(),
            ));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidInput(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
            points_per_axis,
        })
    }

    pub fn symmetric_square(half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidInput(
                "half_width must be finite and > 0".into(),
            ));
        }
        Self::new(-half_width, half_width, -half_width, half_width, points_per_axis)
    }

    /// Default plotting window for |Psi(N)|: both axes span
    /// [-(2.7 + 0.1 N), 2.6 + 0.1 N] at 101 points per axis, framing the
    /// fringe circle of radius sqrt(N) tightly (e.g. [-3.0, 2.9] at N = 3,
    /// [-3.9, 3.8] at N = 12).
    pub fn default_for(n: u32) -> Self {
        let lo = -(2.7 + 0.1 * n as f64);
        Self::new(lo, -lo - 0.1, lo, -lo - 0.1, 101).expect("static grid parameters are valid")
    }

    /// Grid wide enough to normalize |Psi(N)|: half-width sqrt(N) + 3 at
    /// 101 points per axis integrates the Wigner function to 1 at ~1e-14.
    pub fn integration_for(n: u32) -> Self {
        let half = (n as f64).sqrt() + 3.0;
        Self::symmetric_square(half, 101).expect("static grid parameters are valid")
    }

    pub fn re_points(&self) -> Vec<f64> {
        let step = (self.re_max - self.re_min) / (self.points_per_axis - 1) as f64;
        (0..self.points_per_axis)
            .map(|i| self.re_min + step * i as f64)
            .collect()
    }

    pub fn im_points(&self) -> Vec<f64> {
        let step = (self.im_max - self.im_min) / (self.points_per_axis - 1) as f64;
        (0..self.points_per_axis)
            .map(|j| self.im_min + step * j as f64)
            .collect()
    }

    /// Axis steps (d_re, d_im).
    pub fn spacing(&self) -> (f64, f64) {
        let d = (self.points_per_axis - 1) as f64;
        ((self.re_max - self.re_min) / d, (self.im_max - self.im_min) / d)
    }
}

/// Wigner values sampled on a grid, row-major with the real axis outer:
/// `values[i * points_per_axis + j]` is W(re_i + i im_j).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    /// Number of Fock levels of the state entering the parity sums.
    pub dim: usize,
    /// Free-form label of the state, recorded in the metadata sidecar.
    pub state: String,
    /// True when a dim override dropped populated levels of the state.
    pub truncation_warning: bool,
    pub values: Vec<f64>,
}

impl WignerGrid {
    /// Riemann integral over the grid window.
    pub fn integral(&self) -> f64 {
        let (dre, dim_step) = self.spec.spacing();
        self.values.iter().sum::<f64>() * dre * dim_step
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.points_per_axis + j]
    }
}

/// JSON sidecar describing a [`WignerGrid`] CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerMeta {
    pub state: String,
    pub dim: usize,
    pub points_per_axis: usize,
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub truncation_warning: bool,
    pub integral: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl From<&WignerGrid> for WignerMeta {
    fn from(grid: &WignerGrid) -> Self {
        Self {
            state: grid.state.clone(),
            dim: grid.dim,
            points_per_axis: grid.spec.points_per_axis,
            re_min: grid.spec.re_min,
            re_max: grid.spec.re_max,
            im_min: grid.spec.im_min,
            im_max: grid.spec.im_max,
            truncation_warning: grid.truncation_warning,
            integral: grid.integral(),
            w_min: grid.min_value(),
            w_max: grid.max_value(),
        }
    }
}

/// Number of Fock levels entering the parity sum: the state's support plus
/// one, unless an explicit override truncates it (flagged and logged).
fn resolve_levels(support: usize, dim: Option<usize>) -> Result<(usize, bool)> {
    let full = support + 1;
    match dim {
        None => Ok((full, false)),
        Some(0) => Err(Error::InvalidInput("dim must be >= 1".into())),
        Some(d) if d < full => {
            log::warn!(
                "wigner: dim {d} drops populated levels (state support reaches {support})"
            );
            Ok((d, true))
        }
        Some(_) => Ok((full, false)),
    }
}

/// <psi| Pi D(-2 alpha) |psi> over the leading `levels` Fock levels.
fn displaced_parity_pure(
    amps: &nalgebra::DVector<Complex64>,
    levels: usize,
    alpha: Complex64,
) -> Complex64 {
    let block = displacement_columns(-(alpha * 2.0), levels, levels);
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..levels {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..levels {
            row += block[(k, j)] * amps[j];
        }
        let term = amps[k].conj() * row;
        total += if k % 2 == 0 { term } else { -term };
    }
    total
}

/// Tr[rho Pi D(-2 alpha)] over the leading `levels` Fock levels.
fn displaced_parity_rho(rho: &DensityMatrix, levels: usize, alpha: Complex64) -> Complex64 {
    let block = displacement_columns(-(alpha * 2.0), levels, levels);
    let entries = rho.entries();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..levels {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..levels {
            acc += entries[(j, k)] * block[(k, j)];
        }
        total += if k % 2 == 0 { acc } else { -acc };
    }
    total
}

fn check_alpha(alpha: Complex64) -> Result<()> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidInput("alpha must be finite".into()));
    }
    Ok(())
}

fn realize(w: Complex64) -> f64 {
    debug_assert!(
        w.im.abs() < 1e-10,
        "Wigner value has imaginary residue {:.3e}",
        w.im
    );
    WIGNER_BOUND * w.re
}

/// W(alpha) of a pure state. `dim` optionally caps the number of Fock
/// levels used (values are exact whenever it covers the state's support).
pub fn wigner_value(psi: &StateVector, alpha: Complex64, dim: Option<usize>) -> Result<f64> {
    check_alpha(alpha)?;
    let (levels, _) = resolve_levels(psi.support_max(), dim)?;
    Ok(realize(displaced_parity_pure(psi.amps(), levels, alpha)))
}

/// W(alpha) of a density matrix.
pub fn wigner_value_rho(rho: &DensityMatrix, alpha: Complex64, dim: Option<usize>) -> Result<f64> {
    check_alpha(alpha)?;
    let (levels, _) = resolve_levels(rho_support(rho), dim)?;
    Ok(realize(displaced_parity_rho(rho, levels, alpha)))
}

fn rho_support(rho: &DensityMatrix) -> usize {
    // Population threshold matching the amplitude threshold of the pure path.
    let floor = crate::fock::SUPPORT_EPS * crate::fock::SUPPORT_EPS;
    (0..rho.dim())
        .rev()
        .find(|&n| rho.population(n) > floor)
        .unwrap_or(0)
}

/// Samples W over a grid for a pure state.
pub fn wigner_grid(psi: &StateVector, spec: &GridSpec, dim: Option<usize>) -> Result<WignerGrid> {
    use rayon::prelude::*;

    let (levels, truncation_warning) = resolve_levels(psi.support_max(), dim)?;
    let re = spec.re_points();
    let im = spec.im_points();
    let ppa = spec.points_per_axis;
    let amps = psi.amps();
    let values: Vec<f64> = (0..ppa * ppa)
        .into_par_iter()
        .map(|idx| {
            let alpha = Complex64::new(re[idx / ppa], im[idx % ppa]);
            realize(displaced_parity_pure(amps, levels, alpha))
        })
        .collect();

    Ok(WignerGrid {
        spec: *spec,
        dim: levels,
        state: "pure".into(),
        truncation_warning,
        values,
    })
}

/// Samples W over a grid for a density matrix.
pub fn wigner_grid_rho(
    rho: &DensityMatrix,
    spec: &GridSpec,
    dim: Option<usize>,
) -> Result<WignerGrid> {
    use rayon::prelude::*;

    let (levels, truncation_warning) = resolve_levels(rho_support(rho), dim)?;
    let re = spec.re_points();
    let im = spec.im_points();
    let ppa = spec.points_per_axis;
    let values: Vec<f64> = (0..ppa * ppa)
        .into_par_iter()
        .map(|idx| {
            let alpha = Complex64::new(re[idx / ppa], im[idx % ppa]);
            realize(displaced_parity_rho(rho, levels, alpha))
        })
        .collect();

    Ok(WignerGrid {
        spec: *spec,
        dim: levels,
        state: "density".into(),
        truncation_warning,
        values,
    })
}

/// Writes the grid as CSV with columns re_alpha, im_alpha, w_value.
pub fn wigner_write_csv(grid: &WignerGrid, path: &std::path::Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["re_alpha", "im_alpha", "w_value"])?;
    let re = grid.spec.re_points();
    let im = grid.spec.im_points();
    let ppa = grid.spec.points_per_axis;
    for (i, re_i) in re.iter().enumerate() {
        for (j, im_j) in im.iter().enumerate() {
            wtr.write_record(&[
                format!("{re_i}"),
                format!("{im_j}"),
                format!("{}", grid.values[i * ppa + j]),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the JSON metadata sidecar for a grid CSV.
pub fn wigner_write_meta(grid: &WignerGrid, path: &std::path::Path) -> Result<()> {
    let meta = WignerMeta::from(grid);
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::apply_phase;
    use crate::fock::{coherent_state, make_fock, make_mvs};
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_wigner_is_gaussian() {
        let vac = make_fock(0, 1).unwrap();
        let w0 = wigner_value(&vac, Complex64::new(0.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(w0, WIGNER_BOUND, epsilon = 1e-14);
        for (re, im) in [(0.5, 0.0), (0.0, -1.2), (0.8, 0.6)] {
            let a = Complex64::new(re, im);
            let w = wigner_value(&vac, a, None).unwrap();
            let want = WIGNER_BOUND * (-2.0 * a.norm_sqr()).exp();
            assert_abs_diff_eq!(w, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn fock_one_wigner_is_negative_at_origin() {
        let one = make_fock(1, 2).unwrap();
        let w0 = wigner_value(&one, Complex64::new(0.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(w0, -WIGNER_BOUND, epsilon = 1e-14);
        // W_|1>(a) = (2/pi) e^{-2|a|^2} (4|a|^2 - 1).
        let a = Complex64::new(0.3, -0.4);
        let x = 4.0 * a.norm_sqr();
        let want = WIGNER_BOUND * (-x / 2.0).exp() * (x - 1.0);
        assert_abs_diff_eq!(wigner_value(&one, a, None).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn coherent_state_wigner_is_displaced_gaussian() {
        let beta = Complex64::new(0.6, -0.2);
        let psi = coherent_state(beta, 30).unwrap();
        for (re, im) in [(0.0, 0.0), (0.9, 0.1), (-0.4, -0.6)] {
            let a = Complex64::new(re, im);
            let want = WIGNER_BOUND * (-2.0 * (a - beta).norm_sqr()).exp();
            assert_abs_diff_eq!(wigner_value(&psi, a, None).unwrap(), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn mvs_wigner_matches_frozen_references() {
        // Independently computed from the closed form
        // W = (2/pi) e^{-2|a|^2} [1/2 + (-1)^N L_N(4|a|^2)/2
        //     + Re((2 conj(a))^N)/sqrt(N!)].
        let cases = [
            (3u32, 0.9f64, 0.4f64, 0.08616085001766469),
            (6, 1.1, 1.0, 0.19422629189978358),
            (12, 1.4, 0.25, -0.07083828525842602),
        ];
        for (n, r, phase, want) in cases {
            let psi = make_mvs(n, n as usize + 1).unwrap();
            let alpha = Complex64::from_polar(r, phase);
            let w = wigner_value(&psi, alpha, None).unwrap();
            assert_abs_diff_eq!(w, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn density_path_matches_pure_path() {
        let psi = coherent_state(Complex64::new(0.7, 0.3), 24).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        for (re, im) in [(0.0, 0.0), (1.1, -0.5), (-0.3, 0.8)] {
            let a = Complex64::new(re, im);
            let wp = wigner_value(&psi, a, None).unwrap();
            let wr = wigner_value_rho(&rho, a, None).unwrap();
            assert_abs_diff_eq!(wp, wr, epsilon = 1e-12);
        }
    }

    #[test]
    fn mvs_wigner_has_n_fold_symmetry() {
        let n = 6u32;
        let psi = make_mvs(n, n as usize + 1).unwrap();
        let step = 2.0 * std::f64::consts::PI / n as f64;
        for (r, phase) in [(0.7, 0.13), (1.5, 1.9), (2.4, -0.6), (5.2, 0.8)] {
            let base = wigner_value(&psi, Complex64::from_polar(r, phase), None).unwrap();
            for k in 1..n {
                let rotated =
                    wigner_value(&psi, Complex64::from_polar(r, phase + step * k as f64), None)
                        .unwrap();
                assert_abs_diff_eq!(base, rotated, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn half_period_rotation_flips_the_fringes() {
        // U(pi/N) rotates |Psi(N)> to the orthogonal superposition, whose
        // Wigner fringes have opposite sign on the same backbone.
        let n = 3u32;
        let psi = make_mvs(n, 4).unwrap();
        let rotated = apply_phase(&psi, std::f64::consts::PI / n as f64).unwrap();
        let vac = make_fock(0, 1).unwrap();
        let top = make_fock(n as usize, n as usize + 1).unwrap();
        for (r, ph) in [(0.9, 0.2), (1.2, 1.0)] {
            let a = Complex64::from_polar(r, ph);
            let w = wigner_value(&psi, a, None).unwrap();
            let wr = wigner_value(&rotated, a, None).unwrap();
            let backbone = 0.5 * wigner_value(&vac, a, None).unwrap()
                + 0.5 * wigner_value(&top, a, None).unwrap();
            assert_abs_diff_eq!(w + wr, 2.0 * backbone, epsilon = 1e-12);
            // The fringe term itself is substantial at these points.
            assert!((w - backbone).abs() > 1e-2);
        }
    }

    #[test]
    fn grid_layout_matches_pointwise_values() {
        let psi = make_mvs(2, 3).unwrap();
        let spec = GridSpec::new(-1.0, 1.0, -0.5, 0.5, 5).unwrap();
        let grid = wigner_grid(&psi, &spec, None).unwrap();
        let re = spec.re_points();
        let im = spec.im_points();
        for (i, &re_i) in re.iter().enumerate() {
            for (j, &im_j) in im.iter().enumerate() {
                let want =
                    wigner_value(&psi, Complex64::new(re_i, im_j), Some(grid.dim)).unwrap();
                assert_abs_diff_eq!(grid.value_at(i, j), want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn integration_grid_integrates_to_unity_and_is_bounded() {
        for n in [1u32, 6, 12] {
            let psi = make_mvs(n, n as usize + 1).unwrap();
            let grid = wigner_grid(&psi, &GridSpec::integration_for(n), None).unwrap();
            assert!(!grid.truncation_warning);
            assert_abs_diff_eq!(grid.integral(), 1.0, epsilon = 1e-10);
            assert!(grid.max_value() <= WIGNER_BOUND + 1e-9);
            assert!(grid.min_value() >= -WIGNER_BOUND - 1e-9);
        }
        // Interference fringes go genuinely negative.
        let psi = make_mvs(6, 7).unwrap();
        let grid = wigner_grid(&psi, &GridSpec::integration_for(6), None).unwrap();
        assert!(grid.min_value() < -0.25);
    }

    #[test]
    fn default_plot_windows_match_convention() {
        let g3 = GridSpec::default_for(3);
        assert_abs_diff_eq!(g3.re_min, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g3.re_max, 2.9, epsilon = 1e-12);
        let g12 = GridSpec::default_for(12);
        assert_abs_diff_eq!(g12.im_min, -3.9, epsilon = 1e-12);
        assert_abs_diff_eq!(g12.im_max, 3.8, epsilon = 1e-12);
        assert_eq!(g12.points_per_axis, 101);
    }

    #[test]
    fn undersized_override_flags_truncation() {
        let psi = make_mvs(4, 5).unwrap();
        let spec = GridSpec::symmetric_square(2.0, 9).unwrap();
        let grid = wigner_grid(&psi, &spec, Some(3)).unwrap();
        assert!(grid.truncation_warning);
        assert_eq!(grid.dim, 3);
        // Dropping the |4> amplitude changes the values materially.
        let full = wigner_grid(&psi, &spec, None).unwrap();
        assert!(!full.truncation_warning);
        let mid = 4 * 9 + 4;
        assert!((grid.values[mid] - full.values[mid]).abs() > 1e-3);
        assert!(wigner_value(&psi, Complex64::new(0.1, 0.0), Some(0)).is_err());
    }

    #[test]
    fn csv_and_meta_outputs_are_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let psi = make_mvs(2, 3).unwrap();
        let spec = GridSpec::symmetric_square(3.0, 21).unwrap();
        let mut grid = wigner_grid(&psi, &spec, None).unwrap();
        grid.state = "mvs_2".into();

        let csv_path = dir.path().join("wigner.csv");
        let meta_path = dir.path().join("wigner_meta.json");
        wigner_write_csv(&grid, &csv_path).unwrap();
        wigner_write_meta(&grid, &meta_path).unwrap();

        let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
        assert_eq!(
            rdr.headers().unwrap().iter().collect::<Vec<_>>(),
            vec!["re_alpha", "im_alpha", "w_value"]
        );
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 21 * 21);
        let w00: f64 = rows[0][2].parse().unwrap();
        assert_abs_diff_eq!(w00, grid.values[0], epsilon = 0.0);

        let meta: WignerMeta =
            serde_json::from_str(&std::fs::read_to_string(&meta_path).unwrap()).unwrap();
        assert_eq!(meta.state, "mvs_2");
        assert_eq!(meta.points_per_axis, 21);
        assert_abs_diff_eq!(meta.integral, grid.integral(), epsilon = 0.0);
    }
}
