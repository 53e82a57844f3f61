//! Truncated Fock-space simulator and optimizer for single-mode bosonic
//! phase estimation.
//!
//! The crate models a microwave cavity probed through a dispersive qubit
//! coupling: states live in a finite photon-number basis, phases are
//! generated by the number operator, and photon loss and dephasing act
//! through a Lindblad generator. On top of that it implements the two
//! measurement schemes studied by the accompanying tools, a
//! Ramsey-style projection onto the maximum-variance superposition
//! (|0> + |N>)/sqrt(2) and a hybrid displacement-plus-photon-counting
//! readout, together with the estimation-theory machinery to score them:
//! Cramer-Rao bounds, Fisher information, fringe fitting under binomial
//! shot noise, and precision-versus-N scaling regressions.
//!
//! Module map:
//! - [`fock`]: states, operators, displacement, truncation bookkeeping.
//! - [`dynamics`]: phase accumulation and Lindblad time evolution.
//! - [`metrology`]: precision bounds and Fisher information.
//! - [`schemes`]: the optimal and hybrid measurement schemes and the
//!   hybrid-parameter optimizer.
//! - [`analysis`]: shot sampling, fringe fitting, scaling fits, CSV I/O.
//! - [`wigner`]: Wigner functions on phase-space grids.
//!
//! All randomness is explicit: every stochastic routine takes a `u64` seed
//! and uses per-point counter-style streams, so results are reproducible
//! across thread counts and platforms.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod metrology;
pub mod schemes;
pub mod wigner;

pub use num_complex::Complex64;

pub use analysis::{
    fit_covariance, fit_fringe, fit_fringe_with_n, precision_from_fit, sample_shots,
    scaling_fit, scan_read_csv, scan_write_csv, FringeFit, ScalingFit,
};
pub use dynamics::{
    apply_phase, apply_phase_density, lindblad_evolve, phase_from_wait, DecoherenceParams,
    DensityMatrix, CHI_QS_DEFAULT,
};
pub use error::{Error, Result};
pub use fock::{
    annihilation_op, coherent_state, displacement_dim, displacement_op, fidelity, inner,
    make_fock, make_mvs, number_op, parity_op, phase_op, safe_block, variance_of,
    OperatorMatrix, StateVector, TruncationPolicy,
};
pub use metrology::{
    binary_precision, db_enhancement, fisher_full, hl, qcrb, snl, PrecisionPoint,
};
pub use schemes::{
    hybrid_observation, hybrid_probabilities, hybrid_probability, hybrid_probability_fixed,
    optimal_probability, optimal_probability_contrast, optimal_scan, optimize_hybrid,
    DetectorMode, FringeScan, HybridConfig, HybridObservation, OptimizedHybrid, ALPHA_MAX,
};
pub use wigner::{
    wigner_grid, wigner_grid_rho, wigner_value, wigner_value_rho, wigner_write_csv,
    wigner_write_meta, GridSpec, WignerGrid, WignerMeta, WIGNER_BOUND,
};
