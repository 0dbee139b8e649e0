//! Synthesis, calibration, noise modeling and benchmarking of an
//! arbitrary-angle doubly-controlled phase gate built from two-qutrit
//! flux-pulse primitives, plus its use as the phase separator of a
//! depth-one QAOA for MAX-3-SAT.
//!
//! Module map:
//!
//! - [`linalg`]: dense qutrit states, unitaries, superoperators, fidelities.
//! - [`pulse`]: the `iSWAP_02/20(beta)` primitive, Bessel couplings, RWA evolution.
//! - [`synth`]: four-pulse `CCPHASE_011(theta)` sequences, combination rules, truth tables.
//! - [`device`]: device parameters and edge records, JSON loading.
//! - [`noise`]: qutrit decoherence channels and noisy sequence channels.
//! - [`backend`]: executes pulse sequences with injected imperfections and optional noise.
//! - [`calibration`]: Ramsey scans and the correction-phase calibration loop.
//! - [`benchmarking`]: cycle benchmarking and process tomography.
//! - [`decompose`]: the reference CPHASE/CNOT decomposition and its lowering.
//! - [`qaoa`]: MAX-3-SAT clause algebra and QAOA landscapes.

pub mod backend;
pub mod benchmarking;
pub mod calibration;
pub mod decompose;
pub mod device;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod pulse;
pub mod qaoa;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
