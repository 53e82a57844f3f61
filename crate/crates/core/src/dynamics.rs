//! Phase accumulation and photon-loss decoherence of the sensing mode.
//!
//! Decohered evolution integrates the Lindblad master equation with collapse
//! operators sqrt(kappa) a (photon loss) and sqrt(2 kappa_phi) a^dag a
//! (dephasing) and no Hamiltonian; the deterministic phase is applied
//! separately and commutes exactly with both dissipators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::StateVector;

/// Default dispersive shift chi_qs = 2 pi * 1.90 MHz (rad/s).
pub const CHI_QS_DEFAULT: f64 = 2.0 * std::f64::consts::PI * 1.90e6;

/// Trace drift beyond this aborts the integrator.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Density matrix on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Projector |psi><psi| of a (normalized) pure state.
    pub fn from_pure(psi: &StateVector) -> Self {
        let amps = psi.amps();
        let dim = psi.dim();
        let entries = DMatrix::from_fn(dim, dim, |m, n| amps[m] * amps[n].conj());
        Self { dim, entries }
    }

    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::InvalidInput(
                "density matrix must be square and nonempty".into(),
            ));
        }
        Ok(Self {
            dim: entries.nrows(),
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Purity Tr rho^2; for Hermitian rho this equals the squared Frobenius
    /// norm of the entries.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn population(&self, n: usize) -> f64 {
        self.entries[(n, n)].re
    }

    pub fn coherence(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    /// <psi|rho|psi>, clamped into [0, 1] for use as a probability.
    pub fn expectation_with(&self, psi: &StateVector) -> Result<f64> {
        if psi.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: psi.dim(),
            });
        }
        let v = &self.entries * psi.amps();
        Ok(psi.amps().dotc(&v).re.clamp(0.0, 1.0))
    }

    pub fn hermiticity_deficit(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                dev = dev.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Smallest eigenvalue (Hermitian part), for positivity monitoring.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigenvalues();
        eig.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Validates the Hermiticity / unit-trace / positivity invariants.
    pub fn check_valid(&self) -> Result<()> {
        let h = self.hermiticity_deficit();
        if h > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "density matrix Hermiticity deficit {h:.3e} exceeds 1e-10"
            )));
        }
        let t = self.trace();
        if (t.re - 1.0).abs() > 1e-8 || t.im.abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "density matrix trace {t} deviates from 1 beyond 1e-8"
            )));
        }
        let lambda = self.min_eigenvalue();
        if lambda < -1e-8 {
            return Err(Error::InvalidInput(format!(
                "density matrix has eigenvalue {lambda:.3e} below -1e-8"
            )));
        }
        Ok(())
    }
}

/// Decoherence rates and the dispersive time-to-phase conversion factor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecoherenceParams {
    /// Photon-loss rate (1/s).
    pub kappa: f64,
    /// Cavity dephasing rate (1/s).
    pub kappa_phi: f64,
    /// Dispersive shift (rad/s).
    pub chi_qs: f64,
}

impl DecoherenceParams {
    pub fn new(kappa: f64, kappa_phi: f64) -> Result<Self> {
        Self::with_chi(kappa, kappa_phi, CHI_QS_DEFAULT)
    }

    pub fn with_chi(kappa: f64, kappa_phi: f64, chi_qs: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("kappa_phi", kappa_phi), ("chi_qs", chi_qs)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self {
            kappa,
            kappa_phi,
            chi_qs,
        })
    }
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            kappa_phi: 0.0,
            chi_qs: CHI_QS_DEFAULT,
        }
    }
}

/// Phase accumulated over a wait time: theta = -chi_qs * tau (no wrapping).
pub fn phase_from_wait(tau: f64, chi_qs: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidInput(format!(
            "wait time must be finite and >= 0, got {tau}"
        )));
    }
    if !chi_qs.is_finite() {
        return Err(Error::InvalidInput("chi_qs must be finite".into()));
    }
    Ok(-chi_qs * tau)
}

/// Applies U(theta) = exp(i theta a^dag a) to a pure state.
pub fn apply_phase(psi: &StateVector, theta: f64) -> Result<StateVector> {
    if !theta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "phase angle must be finite, got {theta}"
        )));
    }
    let mut amps = psi.amps().clone();
    for n in 0..psi.dim() {
        amps[n] *= Complex64::from_polar(1.0, theta * n as f64);
    }
    Ok(StateVector::new_unchecked(amps))
}

/// Applies U(theta) . rho . U(theta)^dag.
pub fn apply_phase_density(rho: &DensityMatrix, theta: f64) -> Result<DensityMatrix> {
    if !theta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "phase angle must be finite, got {theta}"
        )));
    }
    let entries = DMatrix::from_fn(rho.dim, rho.dim, |m, n| {
        rho.entries[(m, n)] * Complex64::from_polar(1.0, theta * (m as f64 - n as f64))
    });
    Ok(DensityMatrix {
        dim: rho.dim,
        entries,
    })
}

/// Lindblad generator applied elementwise.
///
/// With L1 = sqrt(kappa) a and L2 = sqrt(2 kappa_phi) a^dag a the dissipator
/// reduces to
///   drho[m,n] = kappa sqrt((m+1)(n+1)) rho[m+1,n+1]
///             - (kappa (m+n)/2 + kappa_phi (m-n)^2) rho[m,n],
/// which is exact for the truncated space (loss only moves population down)
/// and preserves the trace identically.
fn lindblad_deriv(rho: &DMatrix<Complex64>, kappa: f64, kappa_phi: f64) -> DMatrix<Complex64> {
    let d = rho.nrows();
    DMatrix::from_fn(d, d, |m, n| {
        let diff = m as f64 - n as f64;
        let decay = 0.5 * kappa * (m + n) as f64 + kappa_phi * diff * diff;
        let mut v = -decay * rho[(m, n)];
        if m + 1 < d && n + 1 < d {
            v += kappa * (((m + 1) * (n + 1)) as f64).sqrt() * rho[(m + 1, n + 1)];
        }
        v
    })
}

/// Fastest decay rate present in the truncated generator, used to size the
/// default integrator step.
fn max_decay_rate(dim: usize, kappa: f64, kappa_phi: f64) -> f64 {
    let top = (dim - 1) as f64;
    kappa * top + kappa_phi * top * top
}

/// Evolves a density matrix for time `t` under photon loss and dephasing
/// with fixed-step RK4.
///
/// `dt` defaults to `min(1/(50 * rate_max), t/100)` where `rate_max` is the
/// fastest decay rate in the truncated space; this keeps the integrator well
/// inside its stability region for any valid rates and dimension.
pub fn lindblad_evolve(
    rho: &DensityMatrix,
    params: &DecoherenceParams,
    t: f64,
    dt: Option<f64>,
) -> Result<DensityMatrix> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let kappa = params.kappa;
    let kappa_phi = params.kappa_phi;
    let rate = max_decay_rate(rho.dim, kappa, kappa_phi);
    let step = match dt {
        Some(dt) => {
            if !dt.is_finite() || dt <= 0.0 || dt > t {
                return Err(Error::InvalidInput(format!(
                    "dt must satisfy 0 < dt <= t, got dt = {dt}, t = {t}"
                )));
            }
            dt
        }
        None => {
            if rate > 0.0 {
                (1.0 / (50.0 * rate)).min(t / 100.0)
            } else {
                t / 100.0
            }
        }
    };
    let n_steps = (t / step).ceil() as usize;
    let h = t / n_steps as f64;
    let trace0 = rho.trace();

    let mut state = rho.entries.clone();
    for step_idx in 0..n_steps {
        let k1 = lindblad_deriv(&state, kappa, kappa_phi);
        let k2 = lindblad_deriv(&(&state + &k1 * Complex64::new(0.5 * h, 0.0)), kappa, kappa_phi);
        let k3 = lindblad_deriv(&(&state + &k2 * Complex64::new(0.5 * h, 0.0)), kappa, kappa_phi);
        let k4 = lindblad_deriv(&(&state + &k3 * Complex64::new(h, 0.0)), kappa, kappa_phi);
        state += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(h / 6.0, 0.0);

        if step_idx % 16 == 15 && !state.trace().re.is_finite() {
            return Err(Error::IntegratorUnstable {
                drift: f64::INFINITY,
                dt: h,
            });
        }
    }

    let out = DensityMatrix {
        dim: rho.dim,
        entries: state,
    };
    let tr = out.trace();
    let drift = (tr.re - trace0.re).abs() + (tr.im - trace0.im).abs();
    if !drift.is_finite() || drift > TRACE_DRIFT_LIMIT {
        return Err(Error::IntegratorUnstable { drift, dt: h });
    }
    Ok(out)
}
