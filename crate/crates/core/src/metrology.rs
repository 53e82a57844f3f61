//! Precision bounds and baselines.
//!
//! All precisions are single-shot standard deviations in radians; multi-shot
//! precision is the single-shot value divided by sqrt(shots).
//!
//! The shot-noise baseline uses the probe's maximum photon number N (not the
//! mean N/2): snl(N) = 1/sqrt(N). Both conventions differ only by a constant
//! sqrt(2) and the dB bookkeeping here is self-consistent with hl(N) = 1/N.

use crate::error::{Error, Result};
use crate::fock::{variance_of, OperatorMatrix, StateVector};

/// Outcomes with probability below this are dropped from Fisher sums.
pub const FISHER_PROB_FLOOR: f64 = 1e-12;

/// A single (N, delta_theta) precision sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrecisionPoint {
    #[serde(rename = "N")]
    pub n: u32,
    pub delta_theta: f64,
}

impl PrecisionPoint {
    pub fn new(n: u32, delta_theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("precision point requires N >= 1".into()));
        }
        if !delta_theta.is_finite() || delta_theta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "delta_theta must be finite and > 0, got {delta_theta}"
            )));
        }
        Ok(Self { n, delta_theta })
    }
}

/// Quantum Cramer-Rao bound 1/(2 sqrt(Var(H))) for a phase generated by the
/// Hermitian operator `generator`.
pub fn qcrb(psi: &StateVector, generator: &OperatorMatrix) -> Result<f64> {
    let var = variance_of(generator, psi)?;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(1.0 / (2.0 * var.sqrt()))
}

/// Shot-noise limit 1/sqrt(N).
pub fn snl(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("snl requires N >= 1".into()));
    }
    Ok(1.0 / (n as f64).sqrt())
}

/// Heisenberg limit 1/N.
pub fn hl(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("hl requires N >= 1".into()));
    }
    Ok(1.0 / n as f64)
}

/// Precision enhancement 20 log10(reference/delta) in dB.
pub fn db_enhancement(delta: f64, reference: f64) -> Result<f64> {
    for (name, v) in [("delta", delta), ("reference", reference)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "{name} must be finite and > 0, got {v}"
            )));
        }
    }
    Ok(20.0 * (reference / delta).log10())
}

/// Single-shot precision of a binary (yes/no) measurement by error
/// propagation: sqrt(P(1-P)) / |dP/dphi|.
pub fn binary_precision(p: f64, dpdphi: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::UndefinedPrecision(format!(
            "binary outcome probability must lie strictly in (0, 1), got {p}"
        )));
    }
    if !dpdphi.is_finite() || dpdphi == 0.0 {
        return Err(Error::UndefinedPrecision(
            "binary measurement has zero slope at this working point".into(),
        ));
    }
    Ok((p * (1.0 - p)).sqrt() / dpdphi.abs())
}

/// Single-shot precision 1/sqrt(F) of a full counting measurement, with the
/// classical Fisher information F = sum_n (dP_n/dphi)^2 / P_n.
///
/// Outcomes with P_n below [`FISHER_PROB_FLOOR`] are skipped.
pub fn fisher_full(probs: &[f64], derivs: &[f64]) -> Result<f64> {
    if probs.len() != derivs.len() {
        return Err(Error::InvalidInput(format!(
            "probs and derivs must have equal length ({} vs {})",
            probs.len(),
            derivs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "outcome probabilities sum to {total}, expected 1 within 1e-6"
        )));
    }
    let mut fisher = 0.0;
    for (&p, &d) in probs.iter().zip(derivs) {
        if !p.is_finite() || p < -FISHER_PROB_FLOOR {
            return Err(Error::InvalidInput(format!("invalid probability {p}")));
        }
        if p < FISHER_PROB_FLOOR {
            continue;
        }
        fisher += d * d / p;
    }
    if fisher <= 0.0 {
        return Err(Error::UndefinedPrecision(
            "all outcome derivatives vanish at this working point".into(),
        ));
    }
    Ok(1.0 / fisher.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, make_fock, make_mvs, number_op};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn qcrb_mvs_is_heisenberg() {
        for n in [1u32, 5, 12] {
            let dim = n as usize + 2;
            let psi = make_mvs(n, dim).unwrap();
            let h = number_op(dim).unwrap();
            assert_abs_diff_eq!(qcrb(&psi, &h).unwrap(), 1.0 / n as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn qcrb_eigenstate_errors() {
        let psi = make_fock(3, 6).unwrap();
        let h = number_op(6).unwrap();
        assert!(matches!(qcrb(&psi, &h), Err(Error::ZeroVariance)));
    }

    #[test]
    fn qcrb_coherent_state() {
        let alpha = 1.3;
        let psi = coherent_state(Complex64::new(alpha, 0.0), 40).unwrap();
        let h = number_op(40).unwrap();
        assert_abs_diff_eq!(qcrb(&psi, &h).unwrap(), 1.0 / (2.0 * alpha), epsilon = 1e-10);
    }

    #[test]
    fn baselines() {
        assert_eq!(snl(1).unwrap(), 1.0);
        assert_eq!(hl(1).unwrap(), 1.0);
        assert_abs_diff_eq!(snl(4).unwrap() / hl(4).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hl(12).unwrap(), 1.0 / 12.0, epsilon = 1e-16);
        assert!(snl(0).is_err());
        assert!(hl(0).is_err());
    }

    #[test]
    fn db_bookkeeping() {
        assert_eq!(db_enhancement(0.37, 0.37).unwrap(), 0.0);
        // 20 log10(snl/hl) at N = 12 equals 10 log10(12).
        let db = db_enhancement(hl(12).unwrap(), snl(12).unwrap()).unwrap();
        assert_abs_diff_eq!(db, 10.791_812_460_476_25, epsilon = 1e-10);
        // Antisymmetry.
        let a = db_enhancement(0.2, 0.9).unwrap();
        let b = db_enhancement(0.9, 0.2).unwrap();
        assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
        assert!(db_enhancement(0.0, 1.0).is_err());
    }

    #[test]
    fn binary_precision_values() {
        for n in [4.0f64, 12.0] {
            let p = binary_precision(0.5, n / 2.0).unwrap();
            assert_abs_diff_eq!(p, 1.0 / n, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(binary_precision(0.5, 0.5).unwrap(), 1.0, epsilon = 1e-15);

        // Ideal N = 12 fringe at theta = pi/24: P = 1/2, |dP/dtheta| = 6.
        let n = 12.0f64;
        let theta = std::f64::consts::PI / 24.0;
        let p = 0.5 * (1.0 + (n * theta).cos());
        let slope = -0.5 * n * (n * theta).sin();
        assert_abs_diff_eq!(binary_precision(p, slope).unwrap(), 1.0 / 12.0, epsilon = 1e-12);

        assert!(binary_precision(0.0, 1.0).is_err());
        assert!(binary_precision(1.0, 1.0).is_err());
        assert!(binary_precision(0.5, 0.0).is_err());
    }

    #[test]
    fn fisher_two_outcome_reduces_to_binary() {
        for (p, d) in [(0.3, 0.71), (0.62, -1.4), (0.5, 3.0)] {
            let full = fisher_full(&[p, 1.0 - p], &[d, -d]).unwrap();
            let binary = binary_precision(p, d).unwrap();
            assert_abs_diff_eq!(full, binary, epsilon = 1e-14);
        }
    }

    #[test]
    fn fisher_full_validation() {
        assert!(fisher_full(&[0.5, 0.4], &[1.0, -1.0]).is_err());
        assert!(fisher_full(&[0.5, 0.5], &[0.0, 0.0]).is_err());
        assert!(fisher_full(&[0.5, 0.5, 0.0], &[1.0, -1.0]).is_err());
        // Tiny-probability outcomes are skipped, not divided by.
        let out = fisher_full(&[0.5, 0.5 - 1e-13, 1e-13], &[1.0, -1.0, 5.0]).unwrap();
        assert!(out.is_finite());
    }

    #[test]
    fn precision_point_validation() {
        assert!(PrecisionPoint::new(3, 0.2).is_ok());
        assert!(PrecisionPoint::new(0, 0.2).is_err());
        assert!(PrecisionPoint::new(3, 0.0).is_err());
        assert!(PrecisionPoint::new(3, f64::NAN).is_err());
    }
}
