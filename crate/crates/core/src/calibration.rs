//! Ramsey calibration of the single-qubit corrections `(C, D, E)` and the
//! retrieval-pulse phase `B`.
//!
//! Each scan prepares `RX(pi/2)` on the probed site, runs `CCPHASE(0)`, then
//! analyses with `RZ(-phi) RX(-pi/2)`. The ground-state probability follows
//! `(1 + cos(phi - phi0)) / 2`, where `phi0` is the phase the probed qubit
//! picked up during the gate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::linalg::{basis_digits, c64, CMatrix};
use crate::pulse::normalize_angle;
use crate::rng;
use crate::synth::{qutrit_rx, qutrit_rz, PulseSequence};

/// Oscillation amplitudes below this make the phase meaningless.
pub const MIN_FIT_AMPLITUDE: f64 = 0.05;
pub const MIN_SCAN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyScan {
    pub target_site: usize,
    /// Sites flipped with `RX(pi)` before the Ramsey sequence.
    #[serde(default)]
    pub excitations: Vec<usize>,
    pub scan_phases: Vec<f64>,
    /// `None` returns exact probabilities.
    pub shots: Option<u64>,
}

impl RamseyScan {
    /// `points` phases evenly covering `[0, 2 pi)`.
    pub fn uniform(target_site: usize, excitations: Vec<usize>, points: usize, shots: Option<u64>) -> Self {
        let scan_phases = (0..points).map(|k| 2.0 * PI * k as f64 / points as f64).collect();
        Self { target_site, excitations, scan_phases, shots }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scan_phases.len() < MIN_SCAN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "a Ramsey scan needs at least {MIN_SCAN_POINTS} phases, got {}",
                self.scan_phases.len()
            )));
        }
        let lo = self.scan_phases.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.scan_phases.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // evenly spaced points over a full period span 2 pi (n - 1) / n
        let n = self.scan_phases.len() as f64;
        if hi - lo < 2.0 * PI * (n - 1.0) / n - 1e-9 {
            return Err(Error::InvalidArgument(format!("scan phases span {:.3} rad, less than a period", hi - lo)));
        }
        if self.target_site > 2 || self.excitations.iter().any(|&s| s > 2 || s == self.target_site) {
            return Err(Error::InvalidArgument("Ramsey sites must be distinct chain sites".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyCurve {
    pub phases: Vec<f64>,
    pub p0: Vec<f64>,
}

/// Runs the scan against `CCPHASE(0)` built from `seq`.
pub fn ramsey_scan(scan: &RamseyScan, seq: &PulseSequence, backend: &Backend, seed: u64) -> Result<RamseyCurve> {
    scan.validate()?;
    let gate = seq.with_theta(0.0);
    let mut before: Vec<(usize, CMatrix)> = scan.excitations.iter().map(|&s| (s, qutrit_rx(PI))).collect();
    before.push((scan.target_site, qutrit_rx(PI / 2.0)));
    let mut rho0 = CMatrix::zeros(27, 27);
    rho0[(0, 0)] = c64(1.0, 0.0);
    let zero_rows: Vec<usize> = (0..27).filter(|&i| basis_digits(i, 3, 3)[scan.target_site] == 0).collect();

    // the scan phase only enters after the gate, so run the gate once
    let mid = backend.run(&gate, &before, &[], &rho0)?;
    let p0 = scan
        .scan_phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let mut c = crate::linalg::ChannelCircuit::new(vec![3, 3, 3]);
            c.push_local(vec![scan.target_site], vec![qutrit_rz(-phi)]);
            c.push_local(vec![scan.target_site], vec![qutrit_rx(-PI / 2.0)]);
            let out = c.apply(&mid);
            let p: f64 = zero_rows.iter().map(|&i| out[(i, i)].re).sum::<f64>().clamp(0.0, 1.0);
            match scan.shots {
                None => p,
                Some(n) => {
                    let mut r = rng::stream(seed, &[k as u64]);
                    rng::binomial(&mut r, n, p) as f64 / n as f64
                }
            }
        })
        .collect();
    Ok(RamseyCurve { phases: scan.scan_phases.clone(), p0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    /// `phi0`, in `(-pi, pi]`.
    pub offset: f64,
    pub amplitude: f64,
    pub mean: f64,
    pub rms: f64,
}

/// Linear least squares for `a + b cos(phi - phi0)`.
pub fn fit_phase_offset(curve: &RamseyCurve) -> Result<PhaseFit> {
    let n = curve.phases.len();
    if n < MIN_SCAN_POINTS || curve.p0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "fit needs at least {MIN_SCAN_POINTS} matched points, got {n} phases and {} values",
            curve.p0.len()
        )));
    }
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => curve.phases[r].cos(),
        _ => curve.phases[r].sin(),
    });
    let y = DVector::from_column_slice(&curve.p0);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let amplitude = coef[1].hypot(coef[2]);
    if amplitude < MIN_FIT_AMPLITUDE {
        return Err(Error::DegenerateFit(amplitude));
    }
    let resid = &design * &coef - y;
    Ok(PhaseFit {
        offset: normalize_angle(coef[2].atan2(coef[1])),
        amplitude,
        mean: coef[0],
        rms: (resid.norm_squared() / n as f64).sqrt(),
    })
}

/// The four calibrated phases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationPhases {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    /// Offsets measured in this pass, before applying them.
    pub measured: CalibrationPhases,
    pub rms: CalibrationPhases,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub phases: CalibrationPhases,
    /// Fit RMS of the last pass.
    pub residuals: CalibrationPhases,
    pub passes: usize,
    pub history: Vec<PassRecord>,
    pub sequence: PulseSequence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub shots: Option<u64>,
    pub passes: usize,
    pub scan_points: usize,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { shots: Some(8192), passes: 2, scan_points: 16, seed: 0 }
    }
}

/// Runs the calibration loop and returns the corrected sequence.
pub fn calibrate(seq: &PulseSequence, backend: &Backend, settings: &CalibrationSettings) -> Result<CalibrationResult> {
    if settings.passes < 1 {
        return Err(Error::InvalidArgument("calibration needs at least one pass".into()));
    }
    seq.validate()?;
    let mut current = seq.clone();
    let mut history = Vec::with_capacity(settings.passes);
    for pass in 0..settings.passes {
        // single-qubit phases: independent scans
        let fits = (0..3usize)
            .into_par_iter()
            .map(|site| {
                let scan = RamseyScan::uniform(site, vec![], settings.scan_points, settings.shots);
                let seed = rng::derive_seed(settings.seed, &[pass as u64, site as u64]);
                fit_phase_offset(&ramsey_scan(&scan, &current, backend, seed)?)
            })
            .collect::<Result<Vec<_>>>()?;
        for (site, fit) in fits.iter().enumerate() {
            current.rz_corrections[site] = normalize_angle(current.rz_corrections[site] - fit.offset);
        }
        // conditional phase of (q0, q1), seen on q1 with q0 excited
        let scan = RamseyScan::uniform(1, vec![0], settings.scan_points, settings.shots);
        let seed = rng::derive_seed(settings.seed, &[pass as u64, 3]);
        let b_fit = fit_phase_offset(&ramsey_scan(&scan, &current, backend, seed)?)?;
        current = current.with_retrieval_offset(current.retrieval_offset() + b_fit.offset);
        log::debug!(
            "calibration pass {}: C {:.4}, D {:.4}, E {:.4}, B {:.4}",
            pass + 1,
            fits[0].offset,
            fits[1].offset,
            fits[2].offset,
            b_fit.offset
        );
        history.push(PassRecord {
            measured: CalibrationPhases { b: b_fit.offset, c: fits[0].offset, d: fits[1].offset, e: fits[2].offset },
            rms: CalibrationPhases { b: b_fit.rms, c: fits[0].rms, d: fits[1].rms, e: fits[2].rms },
        });
    }
    let [c, d, e] = current.rz_corrections;
    Ok(CalibrationResult {
        phases: CalibrationPhases { b: current.retrieval_offset(), c, d, e },
        residuals: history.last().map(|h| h.rms).unwrap_or_default(),
        passes: settings.passes,
        history,
        sequence: current,
    })
}

/// Process fidelity of the sequence as the backend runs it, noise-free
/// channels only, against `CCPHASE(seq.theta)`.
pub fn corrected_fidelity(seq: &PulseSequence, backend: &Backend) -> Result<f64> {
    let u = backend
        .sequence_circuit(seq)?
        .unitary()
        .ok_or_else(|| Error::InvalidArgument("corrected fidelity needs a noise-free backend".into()))?;
    let emb = crate::linalg::ComputationalEmbedding::new(3);
    let r = crate::linalg::restrict_to_computational(&u, &emb)?;
    Ok(crate::linalg::unitary_process_fidelity(&r.block, &crate::synth::target_unitary(seq.theta)))
}
