//! Four-pulse `CCPHASE_011(theta)` synthesis.
//!
//! Pulse 1 stashes `|11x>` of `(q0, q1)` in the second excited level, pulses
//! 2 and 3 form a `CPHASE(theta)` on `(q1, q2)` that only the surviving
//! `|011>` population sees, and pulse 4 retrieves the stash with flux phase
//! `pi`. Sites are numbered 0, 1, 2 along the chain.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::device::{check_chain_shape, DeviceModel};
use crate::error::{Error, Result};
use crate::linalg::{
    basis_index, c64, cis, kron, ket_label, restrict_to_computational, CMatrix, ComputationalEmbedding, C64,
};
use crate::pulse::{normalize_angle, FluxPulse, Subspace};
use crate::rng;

/// `(first-edge type, second-edge type)`.
pub type Combo = (Subspace, Subspace);

pub const ALL_COMBOS: [Combo; 4] = [
    (Subspace::Swap02, Subspace::Swap02),
    (Subspace::Swap02, Subspace::Swap20),
    (Subspace::Swap20, Subspace::Swap02),
    (Subspace::Swap20, Subspace::Swap20),
];

/// Pulse durations used when no device model is given (edges (10,11), (11,12)).
pub const DEFAULT_PULSE_NS: [f64; 2] = [61.0, 76.0];

pub const FORBIDDEN_DIAGNOSIS: &str = "central qubit promoted twice";

pub fn combo_label(combo: Combo) -> String {
    format!("({}, {})", combo.0, combo.1)
}

/// Parses `"20,02"` style combo strings; the `combo_label` form also parses.
pub fn parse_combo(s: &str) -> Result<Combo> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!("combo `{s}` must have the form A,B (e.g. 20,02)")));
    }
    Ok((parts[0].parse()?, parts[1].parse()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboRule {
    pub first: Subspace,
    pub second: Subspace,
    pub allowed: bool,
    /// Site holding `|2>` while the first edge's population is stashed.
    pub stash_site: usize,
    /// Site promoted by the second edge's CPHASE.
    pub swap_site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
}

pub fn combo_allowed(combo: Combo) -> ComboRule {
    let stash_site = match combo.0 {
        Subspace::Swap02 => 1,
        Subspace::Swap20 => 0,
    };
    let swap_site = match combo.1 {
        Subspace::Swap02 => 2,
        Subspace::Swap20 => 1,
    };
    let allowed = !(stash_site == 1 && swap_site == 1);
    ComboRule {
        first: combo.0,
        second: combo.1,
        allowed,
        stash_site,
        swap_site,
        diagnosis: (!allowed).then(|| FORBIDDEN_DIAGNOSIS.to_string()),
    }
}

/// Flux phase of pulse 3 that puts `e^{i theta}` on `|011>`.
pub fn theta_pulse(theta: f64) -> f64 {
    normalize_angle(PI - theta)
}

/// `diag(1, 1, 1, e^{i theta}, 1, 1, 1, 1)`.
pub fn target_unitary(theta: f64) -> CMatrix {
    let mut u = CMatrix::identity(8, 8);
    u[(3, 3)] = cis(theta);
    u
}

/// 27x27 action of a pulse on sites `(0, 1)` or `(1, 2)`.
pub fn embed_pulse(pulse: &FluxPulse) -> Result<CMatrix> {
    let i3 = CMatrix::identity(3, 3);
    match pulse.edge {
        (0, 1) => Ok(kron(&pulse.unitary(), &i3)),
        (1, 2) => Ok(kron(&i3, &pulse.unitary())),
        (a, b) => Err(Error::InvalidArgument(format!("pulse edge ({a}, {b}) is not a chain edge"))),
    }
}

/// `diag(1, e^{i phi}, e^{2 i phi})`.
pub fn qutrit_rz(phi: f64) -> CMatrix {
    CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![c64(1.0, 0.0), cis(phi), cis(2.0 * phi)]))
}

/// Qubit `RX(angle)` on levels 0 and 1, identity on `|2>`.
pub fn qutrit_rx(angle: f64) -> CMatrix {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let mut m = CMatrix::identity(3, 3);
    m[(0, 0)] = c64(c, 0.0);
    m[(1, 1)] = c64(c, 0.0);
    m[(0, 1)] = c64(0.0, -s);
    m[(1, 0)] = c64(0.0, -s);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub theta: f64,
    pub combo: Combo,
    pub pulses: Vec<FluxPulse>,
    /// Final `RZ` corrections `(C, D, E)` on sites 0, 1, 2.
    pub rz_corrections: [f64; 3],
}

impl PulseSequence {
    pub fn validate(&self) -> Result<()> {
        if self.pulses.len() != 4 {
            return Err(Error::Invariant {
                constraint: "exactly 4 pulses".into(),
                detail: format!("got {}", self.pulses.len()),
            });
        }
        let expected = [(0, 1), (1, 2), (1, 2), (0, 1)];
        for (k, (p, e)) in self.pulses.iter().zip(expected).enumerate() {
            if p.edge != e {
                return Err(Error::Invariant {
                    constraint: "pulses 1 and 4 on (q0, q1), pulses 2 and 3 on (q1, q2)".into(),
                    detail: format!("pulse {} acts on {:?}", k + 1, p.edge),
                });
            }
        }
        if self.pulses[0].subspace != self.combo.0
            || self.pulses[3].subspace != self.combo.0
            || self.pulses[1].subspace != self.combo.1
            || self.pulses[2].subspace != self.combo.1
        {
            return Err(Error::Invariant {
                constraint: "pulse subspaces match the combo".into(),
                detail: combo_label(self.combo),
            });
        }
        Ok(())
    }

    /// Same sequence with a new conditional phase; corrections are kept.
    pub fn with_theta(&self, theta: f64) -> Self {
        let mut s = self.clone();
        s.theta = theta;
        s.pulses[2] = s.pulses[2].with_flux_phase(theta_pulse(theta));
        s
    }

    /// Offset `B` of the retrieval pulse's flux phase from `pi`.
    pub fn retrieval_offset(&self) -> f64 {
        normalize_angle(self.pulses[3].flux_phase - PI)
    }

    pub fn with_retrieval_offset(&self, b: f64) -> Self {
        let mut s = self.clone();
        s.pulses[3] = s.pulses[3].with_flux_phase(PI + b);
        s
    }

    pub fn pulse_unitaries(&self) -> Result<Vec<CMatrix>> {
        self.pulses.iter().map(embed_pulse).collect()
    }

    /// Product of the four pulses, without the final `RZ` layer.
    pub fn pulse_unitary(&self) -> Result<CMatrix> {
        let mut u = CMatrix::identity(27, 27);
        for p in self.pulse_unitaries()? {
            u = p * u;
        }
        Ok(u)
    }

    pub fn rz_unitary(&self) -> CMatrix {
        let [c, d, e] = self.rz_corrections;
        kron(&kron(&qutrit_rz(c), &qutrit_rz(d)), &qutrit_rz(e))
    }

    /// Full 27-dimensional ideal unitary.
    pub fn ideal_unitary(&self) -> Result<CMatrix> {
        Ok(self.rz_unitary() * self.pulse_unitary()?)
    }
}

/// Ideal sequence with the default pulse durations.
pub fn synthesize(theta: f64, combo: Combo) -> Result<PulseSequence> {
    synthesize_with_durations(theta, combo, DEFAULT_PULSE_NS)
}

pub fn synthesize_with_durations(theta: f64, combo: Combo, pulse_ns: [f64; 2]) -> Result<PulseSequence> {
    let rule = combo_allowed(combo);
    if !rule.allowed {
        return Err(Error::ForbiddenCombo {
            combo: combo_label(combo),
            rule: "the central qubit may not be promoted to |2> by both edges".into(),
        });
    }
    let (e01, e12) = ((0, 1), (1, 2));
    let pulses = vec![
        FluxPulse::new(e01, combo.0, 0.0, pulse_ns[0])?,
        FluxPulse::new(e12, combo.1, 0.0, pulse_ns[1])?,
        FluxPulse::new(e12, combo.1, theta_pulse(theta), pulse_ns[1])?,
        FluxPulse::new(e01, combo.0, PI, pulse_ns[0])?,
    ];
    let seq = PulseSequence { theta, combo, pulses, rz_corrections: [0.0; 3] };
    let v = verify(&seq)?;
    if v.max_deviation > 1e-9 || v.leakage > 1e-10 {
        return Err(Error::Invariant {
            constraint: "synthesized sequence realizes the target".into(),
            detail: format!("deviation {:.3e}, leakage {:.3e}", v.max_deviation, v.leakage),
        });
    }
    Ok(seq)
}

/// Sequence for a device chain; combo and durations come from the chain's edges.
pub fn synthesize_on(theta: f64, model: &DeviceModel, chain: &[u32]) -> Result<PulseSequence> {
    let [e01, e12] = model.chain_edges(chain)?;
    synthesize_with_durations(theta, (e01.interaction, e12.interaction), [e01.pulse_ns, e12.pulse_ns])
}

/// Builds the sequence without checking the combo; used to study the forbidden case.
pub fn unchecked_sequence(theta: f64, combo: Combo) -> PulseSequence {
    let mk = |edge, s, beta, ns| FluxPulse { edge, subspace: s, flux_phase: normalize_angle(beta), duration_ns: ns };
    let [d01, d12] = DEFAULT_PULSE_NS;
    PulseSequence {
        theta,
        combo,
        pulses: vec![
            mk((0, 1), combo.0, 0.0, d01),
            mk((1, 2), combo.1, 0.0, d12),
            mk((1, 2), combo.1, theta_pulse(theta), d12),
            mk((0, 1), combo.0, PI, d01),
        ],
        rz_corrections: [0.0; 3],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Max entry deviation of the restricted unitary from the target.
    pub max_deviation: f64,
    pub leakage: f64,
}

pub fn verify(seq: &PulseSequence) -> Result<Verification> {
    let u = seq.ideal_unitary()?;
    let r = restrict_to_computational(&u, &ComputationalEmbedding::new(3))?;
    let max_deviation = crate::linalg::max_abs_diff(&r.block, &target_unitary(seq.theta));
    Ok(Verification { max_deviation, leakage: r.leakage })
}

/// One input's path through the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub input: usize,
    /// Dominant basis state and its amplitude after pulses 1 to 4.
    pub checkpoints: [(usize, C64); 4],
    /// Mass outside the dominant state at the worst checkpoint (0 for a
    /// generalized permutation).
    pub spread: f64,
}

impl Trajectory {
    pub fn output(&self) -> (usize, C64) {
        self.checkpoints[3]
    }

    /// Whether the final state differs from what `CCPHASE_011(theta)` produces.
    pub fn is_erroneous(&self, theta: f64, tol: f64) -> bool {
        let expected = if self.input == basis_index(&[0, 1, 1], 3) { cis(theta) } else { c64(1.0, 0.0) };
        let (state, amp) = self.output();
        state != self.input || (amp - expected).norm() > tol
    }
}

/// Format an amplitude and ket compactly, e.g. `-i|020>`.
pub fn format_term(state: usize, amp: C64) -> String {
    let ket = ket_label(state, 3, 3);
    let tol = 1e-9;
    let coeff = if (amp - c64(1.0, 0.0)).norm() < tol {
        String::new()
    } else if (amp + c64(1.0, 0.0)).norm() < tol {
        "-".into()
    } else if (amp - c64(0.0, 1.0)).norm() < tol {
        "i".into()
    } else if (amp + c64(0.0, 1.0)).norm() < tol {
        "-i".into()
    } else if (amp.norm() - 1.0).abs() < tol {
        format!("e^{{{:.4}i}}", amp.arg())
    } else {
        format!("({:.4}{:+.4}i)", amp.re, amp.im)
    };
    format!("{coeff}{ket}")
}

pub fn truth_table(seq: &PulseSequence, inputs: &[usize]) -> Result<Vec<Trajectory>> {
    let pulses = seq.pulse_unitaries()?;
    inputs
        .iter()
        .map(|&input| {
            if input >= 27 {
                return Err(Error::InvalidArgument(format!("basis index {input} out of range")));
            }
            let mut v = crate::linalg::CVector::zeros(27);
            v[input] = c64(1.0, 0.0);
            let mut checkpoints = [(0usize, c64(0.0, 0.0)); 4];
            let mut spread: f64 = 0.0;
            for (k, p) in pulses.iter().enumerate() {
                v = p * v;
                let (idx, amp) = v
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
                    .map(|(i, a)| (i, *a))
                    .expect("non-empty state");
                spread = spread.max(1.0 - amp.norm_sqr());
                checkpoints[k] = (idx, amp);
            }
            Ok(Trajectory { input, checkpoints, spread })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainValidity {
    pub valid: bool,
    pub combo: Combo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
}

/// Whether a CCPHASE can be built on `chain` from the deployed edge types.
pub fn chain_validity(edge_types: &BTreeMap<(u32, u32), Subspace>, chain: &[u32]) -> Result<ChainValidity> {
    check_chain_shape(chain)?;
    let lookup = |a: u32, b: u32| -> Result<Subspace> {
        if let Some(s) = edge_types.get(&(a, b)) {
            Ok(*s)
        } else if let Some(s) = edge_types.get(&(b, a)) {
            Ok(s.reversed())
        } else {
            Err(Error::MissingEdge(a, b))
        }
    };
    let combo = (lookup(chain[0], chain[1])?, lookup(chain[1], chain[2])?);
    let rule = combo_allowed(combo);
    Ok(ChainValidity { valid: rule.allowed, combo, diagnosis: rule.diagnosis })
}

/// Result of one conditional-phase measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub requested: f64,
    pub measured: f64,
    pub x: f64,
    pub y: f64,
}

/// Prepares the controls in `|c0 c1>` and the target in `|+>`, runs the
/// sequence at each requested angle and reads the target's equatorial phase
/// from `<X>` and `<Y>`. `shots = None` returns exact expectations.
pub fn conditional_phase_scan(
    seq: &PulseSequence,
    controls: (usize, usize),
    thetas: &[f64],
    backend: &Backend,
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    if controls.0 > 1 || controls.1 > 1 {
        return Err(Error::InvalidArgument("controls must be computational states".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = crate::linalg::CVector::zeros(27);
    psi[basis_index(&[controls.0, controls.1, 0], 3)] = c64(s, 0.0);
    psi[basis_index(&[controls.0, controls.1, 1], 3)] = c64(s, 0.0);
    let rho0 = &psi * psi.adjoint();
    thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let rho = backend.run(&seq.with_theta(theta), &[], &[], &rho0)?;
            // <1|rho_q2|0>
            let mut coh = c64(0.0, 0.0);
            for a in 0..3 {
                for b in 0..3 {
                    coh += rho[(basis_index(&[a, b, 1], 3), basis_index(&[a, b, 0], 3))];
                }
            }
            let (mut x, mut y) = (2.0 * coh.re, 2.0 * coh.im);
            if let Some(n) = shots {
                let coords = [controls.0 as u64, controls.1 as u64, k as u64];
                let mut rx = rng::stream(seed, &[coords[0], coords[1], coords[2], 0]);
                let mut ry = rng::stream(seed, &[coords[0], coords[1], coords[2], 1]);
                x = 2.0 * rng::binomial(&mut rx, n, (1.0 + x) / 2.0) as f64 / n as f64 - 1.0;
                y = 2.0 * rng::binomial(&mut ry, n, (1.0 + y) / 2.0) as f64 / n as f64 - 1.0;
            }
            Ok(PhasePoint { requested: theta, measured: y.atan2(x), x, y })
        })
        .collect()
}

/// Sequentially unwraps a phase series so consecutive values differ by less than `pi`.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (k, &p) in phases.iter().enumerate() {
        if k > 0 {
            let prev = phases[k - 1];
            offset += -2.0 * PI * ((p - prev) / (2.0 * PI)).round();
        }
        out.push(p + offset);
    }
    out
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn ket(s: &str) -> usize {
        let d: Vec<usize> = s.chars().map(|c| c.to_digit(10).unwrap() as usize).collect();
        basis_index(&d, 3)
    }

    #[test]
    fn ccz_for_device_combo() {
        let seq = synthesize(PI, (Subspace::Swap20, Subspace::Swap02)).unwrap();
        let v = verify(&seq).unwrap();
        assert!(v.max_deviation < 1e-10 && v.leakage < 1e-10);
        let phases: Vec<f64> = seq.pulses.iter().map(|p| p.flux_phase).collect();
        assert_eq!(phases[0], 0.0);
        assert_eq!(phases[1], 0.0);
        assert!((phases[3] - PI).abs() < 1e-12);
    }

    #[test]
    fn forbidden_combo_rejected() {
        let err = synthesize(0.3, (Subspace::Swap02, Subspace::Swap20)).unwrap_err();
        assert!(err.to_string().contains("central qubit"));
        let rule = combo_allowed((Subspace::Swap02, Subspace::Swap20));
        assert!(!rule.allowed);
        assert_eq!(rule.diagnosis.as_deref(), Some(FORBIDDEN_DIAGNOSIS));
        for combo in [ALL_COMBOS[0], ALL_COMBOS[2], ALL_COMBOS[3]] {
            assert!(combo_allowed(combo).allowed);
        }
    }

    #[test]
    fn forbidden_combo_110_error() {
        let theta = 0.7;
        let seq = unchecked_sequence(theta, (Subspace::Swap02, Subspace::Swap20));
        let t = &truth_table(&seq, &[ket("110")]).unwrap()[0];
        assert_eq!(t.checkpoints[0].0, ket("020"));
        assert_eq!(t.checkpoints[1].0, ket("011"));
        assert_eq!(t.checkpoints[2].0, ket("020"));
        let (state, amp) = t.output();
        assert_eq!(state, ket("110"));
        assert!((amp - cis(-theta)).norm() < 1e-12);
        assert!(t.is_erroneous(theta, 1e-9));
    }

    #[test]
    fn forbidden_combo_at_pi_is_two_cz() {
        let seq = unchecked_sequence(PI, (Subspace::Swap02, Subspace::Swap20));
        let r = restrict_to_computational(&seq.ideal_unitary().unwrap(), &ComputationalEmbedding::new(3)).unwrap();
        // CZ(q0,q1) * CZ(q1,q2): -1 on |011> and |110>, and +1 on |111>
        let mut expected = CMatrix::identity(8, 8);
        expected[(3, 3)] = c64(-1.0, 0.0);
        expected[(6, 6)] = c64(-1.0, 0.0);
        assert!(max_abs_diff(&r.block, &expected) < 1e-12);
    }

    #[test]
    fn chain_validity_examples() {
        let mut map = BTreeMap::new();
        map.insert((10, 11), Subspace::Swap20);
        map.insert((11, 12), Subspace::Swap02);
        assert!(chain_validity(&map, &[10, 11, 12]).unwrap().valid);
        let reversed = chain_validity(&map, &[12, 11, 10]).unwrap();
        assert_eq!(reversed.combo, (Subspace::Swap20, Subspace::Swap02));
        map.insert((11, 13), Subspace::Swap20);
        map.insert((11, 14), Subspace::Swap20);
        assert!(chain_validity(&map, &[12, 11, 13]).unwrap().valid);
        let bad = chain_validity(&map, &[13, 11, 14]).unwrap();
        assert!(!bad.valid);
        assert_eq!(bad.diagnosis.as_deref(), Some(FORBIDDEN_DIAGNOSIS));
        assert!(chain_validity(&map, &[10, 11]).is_err());
        assert!(matches!(chain_validity(&map, &[10, 11, 15]), Err(Error::MissingEdge(11, 15))));
    }

    #[test]
    fn with_theta_keeps_corrections() {
        let mut seq = synthesize(0.1, ALL_COMBOS[2]).unwrap();
        seq.rz_corrections = [0.1, 0.2, 0.3];
        let s2 = seq.with_theta(1.0);
        assert_eq!(s2.rz_corrections, seq.rz_corrections);
        assert!((s2.pulses[2].flux_phase - (PI - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn combo_parsing() {
        assert_eq!(parse_combo("20,02").unwrap(), (Subspace::Swap20, Subspace::Swap02));
        assert!(parse_combo("20").is_err());
    }

    #[test]
    fn unwrap_and_fit() {
        let xs: Vec<f64> = (0..17).map(|k| k as f64 * 2.0 * PI / 16.0).collect();
        let wrapped: Vec<f64> = xs.iter().map(|&x| normalize_angle(x)).collect();
        let (slope, _) = linear_fit(&xs, &unwrap_phases(&wrapped));
        assert!((slope - 1.0).abs() < 1e-12);
    }
}
