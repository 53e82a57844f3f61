//! Python bindings: states, density matrices, measurement schemes, bounds,
//! fitting, and Wigner evaluation from the core crate.
//!
//! Validation failures raise `ValueError`; numerical failures (integrator
//! instability, non-convergent fits, degenerate optimizations) raise
//! `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: fockmet::Error) -> PyErr {
    use fockmet::Error as E;
    match e {
        E::IntegratorUnstable { .. }
        | E::FitNotConverged { .. }
        | E::DegenerateOptimization(_)
        | E::Io(_)
        | E::Csv(_)
        | E::Json(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn into_py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for fockmet::Result<T> {
    fn into_py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

#[pyo3::pymodule]
mod fockmet_py {
    use fockmet::Complex64;
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    use super::IntoPyResult;

    /// Pure state in the truncated photon-number basis.
    #[pyclass]
    struct StateVector {
        inner: fockmet::StateVector,
    }

    #[pymethods]
    impl StateVector {
        /// Number state |n> embedded in `dim` levels.
        #[staticmethod]
        fn fock(n: usize, dim: usize) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::make_fock(n, dim).into_py()?,
            })
        }

        /// Maximum-variance state (|0> + |N>)/sqrt(2) in `dim` levels.
        #[staticmethod]
        fn mvs(n: u32, dim: usize) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::make_mvs(n, dim).into_py()?,
            })
        }

        /// Coherent state |alpha> truncated to `dim` levels.
        #[staticmethod]
        fn coherent(alpha: Complex64, dim: usize) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::coherent_state(alpha, dim).into_py()?,
            })
        }

        /// Raw amplitudes from a list of complex numbers, rescaled to unit
        /// norm.
        #[staticmethod]
        fn from_amps(amps: Vec<Complex64>) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::StateVector::from_amps(amps).into_py()?,
            })
        }

        fn dim(&self) -> usize {
            self.inner.dim()
        }

        fn amplitude(&self, n: usize) -> PyResult<Complex64> {
            if n >= self.inner.dim() {
                return Err(pyo3::exceptions::PyIndexError::new_err(format!(
                    "level {n} outside dimension {}",
                    self.inner.dim()
                )));
            }
            Ok(self.inner.amp(n))
        }

        fn population(&self, n: usize) -> PyResult<f64> {
            if n >= self.inner.dim() {
                return Err(pyo3::exceptions::PyIndexError::new_err(format!(
                    "level {n} outside dimension {}",
                    self.inner.dim()
                )));
            }
            Ok(self.inner.population(n))
        }

        /// Rotates by the number operator: amplitudes pick up e^{-i n theta}.
        fn apply_phase(&self, theta: f64) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::apply_phase(&self.inner, theta).into_py()?,
            })
        }

        fn inner_product(&self, other: &Self) -> PyResult<Complex64> {
            fockmet::inner(&self.inner, &other.inner).into_py()
        }

        fn fidelity(&self, other: &Self) -> PyResult<f64> {
            fockmet::fidelity(&self.inner, &other.inner).into_py()
        }

        /// Variance of the photon number operator.
        fn variance_number(&self) -> PyResult<f64> {
            let num = fockmet::number_op(self.inner.dim()).into_py()?;
            fockmet::variance_of(&num, &self.inner).into_py()
        }

        /// Quantum Cramer-Rao bound on a phase generated by photon number.
        fn qcrb_number(&self) -> PyResult<f64> {
            let num = fockmet::number_op(self.inner.dim()).into_py()?;
            fockmet::qcrb(&self.inner, &num).into_py()
        }

        fn __repr__(&self) -> String {
            format!(
                "StateVector(dim={}, support_max={})",
                self.inner.dim(),
                self.inner.support_max()
            )
        }
    }

    /// Mixed state, evolvable under photon loss and dephasing.
    #[pyclass]
    struct DensityMatrix {
        inner: fockmet::DensityMatrix,
    }

    #[pymethods]
    impl DensityMatrix {
        #[staticmethod]
        fn from_pure(psi: &StateVector) -> Self {
            Self {
                inner: fockmet::DensityMatrix::from_pure(&psi.inner),
            }
        }

        fn dim(&self) -> usize {
            self.inner.dim()
        }

        fn trace(&self) -> f64 {
            self.inner.trace().re
        }

        fn purity(&self) -> f64 {
            self.inner.purity()
        }

        fn population(&self, n: usize) -> PyResult<f64> {
            if n >= self.inner.dim() {
                return Err(pyo3::exceptions::PyIndexError::new_err(format!(
                    "level {n} outside dimension {}",
                    self.inner.dim()
                )));
            }
            Ok(self.inner.population(n))
        }

        fn coherence(&self, m: usize, n: usize) -> PyResult<Complex64> {
            let d = self.inner.dim();
            if m >= d || n >= d {
                return Err(pyo3::exceptions::PyIndexError::new_err(format!(
                    "indices ({m}, {n}) outside dimension {d}"
                )));
            }
            Ok(self.inner.coherence(m, n))
        }

        /// Rotates by the number operator.
        fn apply_phase(&self, theta: f64) -> PyResult<Self> {
            Ok(Self {
                inner: fockmet::apply_phase_density(&self.inner, theta).into_py()?,
            })
        }

        /// Evolves for time `t` (seconds) under photon loss at rate `kappa`
        /// and pure dephasing at rate `kappa_phi` (both 1/s).
        #[pyo3(signature = (kappa, kappa_phi, t, dt=None))]
        fn evolve(&self, kappa: f64, kappa_phi: f64, t: f64, dt: Option<f64>) -> PyResult<Self> {
            let params = fockmet::DecoherenceParams::new(kappa, kappa_phi).into_py()?;
            Ok(Self {
                inner: fockmet::lindblad_evolve(&self.inner, &params, t, dt).into_py()?,
            })
        }

        /// <psi| rho |psi> for a pure probe state.
        fn expectation(&self, psi: &StateVector) -> PyResult<f64> {
            self.inner.expectation_with(&psi.inner).into_py()
        }

        fn __repr__(&self) -> String {
            format!(
                "DensityMatrix(dim={}, purity={:.6})",
                self.inner.dim(),
                self.inner.purity()
            )
        }
    }

    /// Shot-noise limit 1/sqrt(N) for maximum photon number N.
    #[pyfunction]
    fn snl(n: u32) -> PyResult<f64> {
        fockmet::snl(n).into_py()
    }

    /// Heisenberg limit 1/N.
    #[pyfunction]
    fn hl(n: u32) -> PyResult<f64> {
        fockmet::hl(n).into_py()
    }

    /// Gain of `delta` over `reference` in dB: 20 log10(reference / delta).
    #[pyfunction]
    fn db_enhancement(delta: f64, reference: f64) -> PyResult<f64> {
        fockmet::db_enhancement(delta, reference).into_py()
    }

    /// Ideal fringe of the projection scheme: (1 + cos(N theta))/2.
    #[pyfunction]
    fn optimal_probability(n: u32, theta: f64) -> PyResult<f64> {
        fockmet::optimal_probability(n, theta).into_py()
    }

    /// Click probability of the hybrid scheme with the displacement phase
    /// co-rotating with the accumulated phase `phi`.
    #[pyfunction]
    fn hybrid_probability(
        n: u32,
        alpha_mag: f64,
        alpha_phase_offset: f64,
        n_detect: usize,
        phi_work: f64,
        phi: f64,
        dim: usize,
    ) -> PyResult<f64> {
        let cfg = fockmet::HybridConfig {
            n,
            alpha_mag,
            alpha_phase_offset,
            n_detect,
            phi_work,
        };
        fockmet::hybrid_probability(&cfg, phi, dim).into_py()
    }

    /// Optimizes the hybrid scheme for one N; detector is "binary" or
    /// "number_resolving". Returns a dict with the tuned parameters and the
    /// achieved single-shot precision.
    #[pyfunction]
    fn optimize_hybrid<'py>(
        py: Python<'py>,
        n: u32,
        dim: usize,
        detector: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode: fockmet::DetectorMode = detector.parse().into_py()?;
        let res = fockmet::optimize_hybrid(n, dim, mode).into_py()?;
        let out = PyDict::new(py);
        out.set_item("N", res.config.n)?;
        out.set_item("alpha_mag", res.config.alpha_mag)?;
        out.set_item("alpha_phase_offset", res.config.alpha_phase_offset)?;
        out.set_item("n_detect", res.config.n_detect)?;
        out.set_item("phi_work", res.config.phi_work)?;
        out.set_item("detector", detector)?;
        out.set_item("precision", res.precision)?;
        Ok(out)
    }

    /// Wigner function of a pure state at a phase-space point.
    #[pyfunction]
    #[pyo3(signature = (psi, alpha, dim=None))]
    fn wigner_value(psi: &StateVector, alpha: Complex64, dim: Option<usize>) -> PyResult<f64> {
        fockmet::wigner_value(&psi.inner, alpha, dim).into_py()
    }

    /// Wigner function of a density matrix at a phase-space point.
    #[pyfunction]
    #[pyo3(signature = (rho, alpha, dim=None))]
    fn wigner_value_rho(
        rho: &DensityMatrix,
        alpha: Complex64,
        dim: Option<usize>,
    ) -> PyResult<f64> {
        fockmet::wigner_value_rho(&rho.inner, alpha, dim).into_py()
    }

    /// Draws binomial counts for each probability of an exact scan.
    /// Deterministic in (seed, point index), independent of thread count.
    #[pyfunction]
    fn sample_counts(
        n: u32,
        thetas: Vec<f64>,
        probabilities: Vec<f64>,
        shots: u64,
        seed: u64,
    ) -> PyResult<Vec<u64>> {
        let scan = fockmet::FringeScan::exact(n, thetas, probabilities).into_py()?;
        let sampled = fockmet::sample_shots(&scan, shots, seed).into_py()?;
        Ok(sampled
            .counts()
            .expect("sampled scan carries counts")
            .to_vec())
    }

    /// Weighted least-squares fit of A + B cos(N theta + phi0). When counts
    /// and shots are given, points are weighted by binomial variance and the
    /// empirical probabilities counts/shots are fit; otherwise the supplied
    /// probabilities are fit with uniform weights. Returns the fit fields
    /// plus the inferred precision delta_theta = sqrt(A(1-A))/(N B).
    #[pyfunction]
    #[pyo3(signature = (n, thetas, probabilities, shots=None, counts=None))]
    fn fit_fringe<'py>(
        py: Python<'py>,
        n: u32,
        thetas: Vec<f64>,
        probabilities: Vec<f64>,
        shots: Option<u64>,
        counts: Option<Vec<u64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let scan = fockmet::FringeScan::new(n, thetas, probabilities, shots.unwrap_or(0), counts)
            .into_py()?;
        let fit = fockmet::fit_fringe(&scan).into_py()?;
        let delta = fockmet::precision_from_fit(&fit).into_py()?;
        let out = PyDict::new(py);
        out.set_item("A", fit.a)?;
        out.set_item("B", fit.b)?;
        out.set_item("N_assumed", fit.n_assumed)?;
        out.set_item("phi0", fit.phi0)?;
        out.set_item("residual_rms", fit.residual_rms)?;
        out.set_item("delta_theta", delta)?;
        Ok(out)
    }

    /// Ordinary least squares of log10(delta_theta) against log10(N).
    #[pyfunction]
    fn scaling_fit<'py>(
        py: Python<'py>,
        ns: Vec<u32>,
        deltas: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        if ns.len() != deltas.len() {
            return Err(pyo3::exceptions::PyValueError::new_err(
                "ns and deltas must have equal length",
            ));
        }
        let points: Vec<fockmet::PrecisionPoint> = ns
            .iter()
            .zip(&deltas)
            .map(|(&n, &d)| fockmet::PrecisionPoint::new(n, d))
            .collect::<fockmet::Result<_>>()
            .into_py()?;
        let fit = fockmet::scaling_fit(&points).into_py()?;
        let out = PyDict::new(py);
        out.set_item("slope", fit.slope)?;
        out.set_item("intercept", fit.intercept)?;
        out.set_item("r_squared", fit.r_squared)?;
        out.set_item("points_used", fit.points_used)?;
        Ok(out)
    }

    /// |W| <= 2/pi bound, exposed for convenience.
    #[pymodule_export]
    const WIGNER_BOUND: f64 = fockmet::WIGNER_BOUND;
}
