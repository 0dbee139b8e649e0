//! Qutrit decoherence from device coherence times.
//!
//! Each site relaxes down the ladder (`2 -> 1 -> 0`) and dephases with
//! rates chosen so that the `0-1` and `1-2` coherences decay exactly with
//! `T2_01` and `T2_12`. Channels are `exp(L t)` of the Lindblad generator,
//! factorized into Kraus operators through the Choi matrix.

use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, QubitParams};
use crate::error::{Error, Result};
use crate::linalg::{c64, kron, CMatrix, ChannelCircuit, Superoperator};
use crate::synth::PulseSequence;

/// Choi eigenvalues below this are dropped when extracting Kraus operators.
const KRAUS_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct QutritNoiseChannel {
    pub site: u32,
    pub kraus_ops: Vec<CMatrix>,
    pub window_ns: f64,
}

impl QutritNoiseChannel {
    pub fn superoperator(&self) -> Superoperator {
        Superoperator::from_kraus(&self.kraus_ops)
    }
}

/// Scales the `T2` times of a flux-modulated qubit while its pulse plays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationDephasingPolicy {
    pub factor: f64,
}

impl Default for ModulationDephasingPolicy {
    fn default() -> Self {
        Self { factor: 0.5 }
    }
}

impl ModulationDephasingPolicy {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::Invariant { constraint: "0 < factor <= 1".into(), detail: format!("factor = {factor}") });
        }
        Ok(Self { factor })
    }

    pub fn apply(&self, q: &QubitParams) -> QubitParams {
        QubitParams { t2_01_us: q.t2_01_us * self.factor, t2_12_us: q.t2_12_us * self.factor, ..q.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseOptions {
    pub modulation: Option<ModulationDephasingPolicy>,
    /// Decohere sites that sit out a pulse for the same wall-clock time.
    pub idle_decoherence: bool,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self { modulation: None, idle_decoherence: true }
    }
}

/// Per-site rates in 1/ns: `(relax 1->0, relax 2->1, dephase A, dephase B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRates {
    pub relax_1: f64,
    pub relax_2: f64,
    pub dephase_01: f64,
    pub dephase_2: f64,
}

fn per_ns(t_us: f64) -> f64 {
    1.0 / (t_us * 1e3)
}

pub fn ladder_rates(q: &QubitParams) -> LadderRates {
    let g1 = per_ns(q.t1_1_us);
    let g2 = per_ns(q.t1_2_us);
    let mut phi01 = per_ns(q.t2_01_us) - 0.5 * g1;
    let mut phi12 = per_ns(q.t2_12_us) - 0.5 * (g1 + g2);
    if phi01 < 0.0 {
        log::warn!("qubit {}: negative 0-1 pure dephasing rate {phi01:.3e}/ns clamped to 0", q.id);
        phi01 = 0.0;
    }
    if phi12 < 0.0 {
        log::warn!("qubit {}: negative 1-2 pure dephasing rate {phi12:.3e}/ns clamped to 0", q.id);
        phi12 = 0.0;
    }
    // |1><1| dephasing hits both coherences of level 1; |2><2| adds the rest
    // of the 1-2 rate.
    let mut extra = phi12 - phi01;
    if extra < 0.0 {
        log::warn!(
            "qubit {}: 1-2 pure dephasing below 0-1 pure dephasing; level-2 dephasing rate {extra:.3e}/ns clamped to 0",
            q.id
        );
        extra = 0.0;
    }
    LadderRates { relax_1: g1, relax_2: g2, dephase_01: phi01, dephase_2: extra }
}

pub fn lindblad_operators(q: &QubitParams) -> Vec<CMatrix> {
    let r = ladder_rates(q);
    let op = |row: usize, col: usize, rate: f64| {
        let mut m = CMatrix::zeros(3, 3);
        m[(row, col)] = c64(rate.sqrt(), 0.0);
        m
    };
    vec![op(0, 1, r.relax_1), op(1, 2, r.relax_2), op(1, 1, 2.0 * r.dephase_01), op(2, 2, 2.0 * r.dephase_2)]
}

/// Column-stacking generator `sum_k conj(L)xL - (I x L^dag L + (L^dag L)^T x I) / 2`.
pub fn lindblad_generator(ops: &[CMatrix]) -> CMatrix {
    let d = ops[0].nrows();
    let id = CMatrix::identity(d, d);
    let mut g = CMatrix::zeros(d * d, d * d);
    for l in ops {
        let ldl = l.adjoint() * l;
        g += kron(&l.conjugate(), l);
        g -= (kron(&id, &ldl) + kron(&ldl.transpose(), &id)) * c64(0.5, 0.0);
    }
    g
}

pub fn decoherence_superoperator(q: &QubitParams, t_ns: f64) -> Result<Superoperator> {
    if t_ns < 0.0 || !t_ns.is_finite() {
        return Err(Error::InvalidDuration { requirement: "non-negative", value: t_ns });
    }
    if t_ns == 0.0 {
        return Ok(Superoperator::identity(3));
    }
    let g = lindblad_generator(&lindblad_operators(q)) * c64(t_ns, 0.0);
    Superoperator::from_matrix(3, g.exp())
}

/// Kraus set for `t_ns` of free decay, optionally under flux modulation.
pub fn decoherence_channel(
    q: &QubitParams,
    t_ns: f64,
    policy: Option<&ModulationDephasingPolicy>,
) -> Result<QutritNoiseChannel> {
    let q = match policy {
        Some(p) => p.apply(q),
        None => q.clone(),
    };
    if t_ns == 0.0 {
        return Ok(QutritNoiseChannel { site: q.id, kraus_ops: vec![CMatrix::identity(3, 3)], window_ns: 0.0 });
    }
    let s = decoherence_superoperator(&q, t_ns)?;
    Ok(QutritNoiseChannel { site: q.id, kraus_ops: s.to_kraus(KRAUS_CUTOFF), window_ns: t_ns })
}

/// Four ideal pulses, each followed by the decoherence of its window.
/// The final RZ layer is not included.
pub fn noisy_pulse_circuit(
    seq: &PulseSequence,
    model: &DeviceModel,
    chain: &[u32],
    options: &NoiseOptions,
) -> Result<ChannelCircuit> {
    seq.validate()?;
    let qubits = model.chain_qubits(chain)?;
    let mut circuit = ChannelCircuit::new(vec![3, 3, 3]);
    for pulse in &seq.pulses {
        let (a, b) = pulse.edge;
        circuit.push_local(vec![a, b], vec![pulse.unitary()]);
        let window = model.pulse_window_ns(pulse.duration_ns);
        for (site, q) in qubits.iter().enumerate() {
            let active = site == a || site == b;
            if !active && !options.idle_decoherence {
                continue;
            }
            let policy = options.modulation.as_ref().filter(|_| active && q.flux_tunable);
            let ch = decoherence_channel(q, window, policy)?;
            circuit.push_local(vec![site], ch.kraus_ops);
        }
    }
    Ok(circuit)
}

/// Channel of the whole sequence on the chain, including the RZ layer.
pub fn noisy_sequence_channel(
    seq: &PulseSequence,
    model: &DeviceModel,
    chain: &[u32],
    options: &NoiseOptions,
) -> Result<ChannelCircuit> {
    let mut c = noisy_pulse_circuit(seq, model, chain, options)?;
    c.push_full(seq.rz_unitary());
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn q11() -> QubitParams {
        DeviceModel::default_model().qubit(11).unwrap().clone()
    }

    #[test]
    fn zero_time_is_identity() {
        let ch = decoherence_channel(&q11(), 0.0, None).unwrap();
        assert_eq!(ch.kraus_ops, vec![CMatrix::identity(3, 3)]);
        assert!(decoherence_channel(&q11(), -1.0, None).is_err());
    }

    #[test]
    fn kraus_sets_are_cptp() {
        for t in [1.0, 93.0, 402.0, 5000.0] {
            let ch = decoherence_channel(&q11(), t, Some(&ModulationDephasingPolicy::default())).unwrap();
            let mut sum = CMatrix::zeros(3, 3);
            for k in &ch.kraus_ops {
                sum += k.adjoint() * k;
            }
            assert!(max_abs_diff(&sum, &CMatrix::identity(3, 3)) < 1e-10);
            assert!(ch.superoperator().min_choi_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn amplitude_damping_matches_exponential() {
        let t1 = 30.0;
        let q = QubitParams::new(0, t1, 15.0, 2.0 * t1, 2.0 * 15.0);
        let s = decoherence_superoperator(&q, t1 * 1e3).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(1, 1)] = c64(1.0, 0.0);
        let out = s.apply(&rho);
        assert!((out[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn coherence_12_decays_with_t2_12() {
        let q = q11();
        let s = decoherence_superoperator(&q, 100.0).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(1, 2)] = c64(0.5, 0.0);
        rho[(2, 1)] = c64(0.5, 0.0);
        rho[(1, 1)] = c64(0.5, 0.0);
        rho[(2, 2)] = c64(0.5, 0.0);
        let out = s.apply(&rho);
        let expected = 0.5 * (-100.0 / (q.t2_12_us * 1e3)).exp();
        assert!((out[(1, 2)].norm() - expected).abs() < 1e-6);
        let mut rho01 = CMatrix::zeros(3, 3);
        rho01[(0, 1)] = c64(0.5, 0.0);
        let out = s.apply(&rho01);
        let expected = 0.5 * (-100.0 / (q.t2_01_us * 1e3)).exp();
        assert!((out[(0, 1)].norm() - expected).abs() < 1e-9);
    }

    #[test]
    fn semigroup() {
        let q = DeviceModel::default_model().qubit(12).unwrap().clone();
        let a = decoherence_channel(&q, 77.0, None).unwrap().superoperator();
        let b = decoherence_channel(&q, 155.0, None).unwrap().superoperator();
        let ab = decoherence_channel(&q, 232.0, None).unwrap().superoperator();
        assert!(max_abs_diff(a.then(&b).matrix(), ab.matrix()) < 1e-8);
    }

    #[test]
    fn policy_bounds() {
        assert!(ModulationDephasingPolicy::new(0.0).is_err());
        assert!(ModulationDephasingPolicy::new(1.5).is_err());
        assert!(ModulationDephasingPolicy::new(1.0).is_ok());
    }

    #[test]
    fn fidelity_falls_with_exposure() {
        let mut last = 1.0 + 1e-12;
        for t in [0.0, 50.0, 100.0, 200.0, 400.0, 800.0] {
            let s = decoherence_superoperator(&q11(), t).unwrap();
            let f = crate::linalg::process_fidelity(&s, &CMatrix::identity(3, 3)).unwrap();
            assert!(f < last);
            last = f;
        }
    }
}
