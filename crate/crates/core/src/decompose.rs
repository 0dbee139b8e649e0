//! Reference compilation of `CCPHASE(theta)` into two-qubit gates on a
//! linear three-qubit chain, and its lowering to `RX`, `RZ`, `CZ` and
//! `CPHASE`.
//!
//! The level-1 circuit puts the phase on `|111>`. Gate names used in
//! [`GateList`]: `CPHASE`, `CNOT`, `CZ`, `RX`, `RZ`, `H`, `X` and
//! `CCPHASE011` (the native three-qubit gate, phase on `|011>`).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, ChannelCircuit, CMatrix, ComputationalEmbedding, Superoperator};
use crate::noise::{decoherence_superoperator, NoiseOptions};

pub const N_QUBITS: usize = 3;
/// Duration assumed for a non-trivial single-qubit gate.
pub const RX_DURATION_NS: f64 = 40.0;
pub const DEFAULT_F1Q: f64 = 0.995;
pub const DEFAULT_F2Q: f64 = 0.975;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    pub sites: Vec<usize>,
}

impl Gate {
    pub fn new(name: &str, param: Option<f64>, sites: &[usize]) -> Self {
        Self { name: name.to_string(), param, sites: sites.to_vec() }
    }

    fn angle(&self) -> Result<f64> {
        self.param.ok_or_else(|| Error::InvalidArgument(format!("gate {} needs a parameter", self.name)))
    }

    fn arity(&self) -> Result<usize> {
        match self.name.as_str() {
            "RX" | "RZ" | "H" | "X" => Ok(1),
            "CPHASE" | "CNOT" | "CZ" => Ok(2),
            "CCPHASE011" => Ok(3),
            other => Err(Error::InvalidArgument(format!("unknown gate `{other}`"))),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.sites.len() == 2
    }

    /// Counts toward the single-qubit total; `RZ` is a frame change.
    pub fn is_nontrivial_1q(&self) -> bool {
        self.sites.len() == 1 && self.name != "RZ"
    }

    /// Local matrix with the first listed site most significant.
    pub fn matrix(&self) -> Result<CMatrix> {
        let z = c64(0.0, 0.0);
        let one = c64(1.0, 0.0);
        let m = match self.name.as_str() {
            "RX" => {
                let a = self.angle()? / 2.0;
                let (c, s) = (c64(a.cos(), 0.0), c64(0.0, -a.sin()));
                CMatrix::from_row_slice(2, 2, &[c, s, s, c])
            }
            "RZ" => {
                let a = self.angle()? / 2.0;
                CMatrix::from_row_slice(2, 2, &[cis(-a), z, z, cis(a)])
            }
            "H" => {
                let h = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
            }
            "X" => CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
            "CPHASE" => CMatrix::from_diagonal(&crate::linalg::CVector::from_row_slice(&[
                one,
                one,
                one,
                cis(self.angle()?),
            ])),
            "CZ" => CMatrix::from_diagonal(&crate::linalg::CVector::from_row_slice(&[one, one, one, -one])),
            "CNOT" => {
                let mut m = CMatrix::zeros(4, 4);
                m[(0, 0)] = one;
                m[(1, 1)] = one;
                m[(2, 3)] = one;
                m[(3, 2)] = one;
                m
            }
            "CCPHASE011" => crate::synth::target_unitary(self.angle()?),
            other => return Err(Error::InvalidArgument(format!("unknown gate `{other}`"))),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub two_qubit: usize,
    pub one_qubit_nontrivial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateList {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl GateList {
    pub fn new(gates: Vec<Gate>) -> Result<Self> {
        let g = Self { n_qubits: N_QUBITS, gates };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, g) in self.gates.iter().enumerate() {
            let arity = g.arity()?;
            if g.sites.len() != arity {
                return Err(Error::InvalidArgument(format!("gate {k} ({}) expects {arity} sites", g.name)));
            }
            if g.sites.iter().any(|&s| s >= self.n_qubits) {
                return Err(Error::InvalidArgument(format!("gate {k} ({}) acts outside the chain", g.name)));
            }
            if arity == 2 && g.sites[0].abs_diff(g.sites[1]) != 1 {
                return Err(Error::InvalidArgument(format!("gate {k} ({}) on non-adjacent sites", g.name)));
            }
        }
        Ok(())
    }

    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name == name).count()
    }

    pub fn counts(&self) -> GateCounts {
        GateCounts {
            two_qubit: self.gates.iter().filter(|g| g.is_two_qubit()).count(),
            one_qubit_nontrivial: self.gates.iter().filter(|g| g.is_nontrivial_1q()).count(),
        }
    }

    pub fn circuit(&self) -> Result<ChannelCircuit> {
        let mut c = ChannelCircuit::new(vec![2; self.n_qubits]);
        for g in &self.gates {
            c.push_local(g.sites.clone(), vec![g.matrix()?]);
        }
        Ok(c)
    }

    pub fn unitary(&self) -> Result<CMatrix> {
        Ok(self.circuit()?.unitary().expect("gate lists are unitary"))
    }
}

/// `CCPHASE(theta)` on `|111>` as 3 `CPHASE` and 6 `CNOT` gates.
pub fn decompose_ccphase(theta: f64) -> GateList {
    let cp = |a: f64| Gate::new("CPHASE", Some(a), &[1, 2]);
    let cx = |c: usize, t: usize| Gate::new("CNOT", None, &[c, t]);
    GateList {
        n_qubits: N_QUBITS,
        gates: vec![
            cp(theta / 2.0),
            cx(0, 1),
            cp(-theta / 2.0),
            cx(1, 0),
            cx(0, 1),
            cp(theta / 2.0),
            cx(0, 1),
            cx(1, 0),
            cx(0, 1),
        ],
    }
}

fn is_multiple_of_2pi(a: f64) -> bool {
    let r = a.rem_euclid(2.0 * PI);
    r < 1e-12 || 2.0 * PI - r < 1e-12
}

/// `CNOT -> H CZ H`, `H -> RZ RX RZ`, then merge runs of `RZ` on a qubit.
pub fn lower_to_native(list: &GateList) -> Result<GateList> {
    list.validate()?;
    let h = |q: usize| {
        [
            Gate::new("RZ", Some(FRAC_PI_2), &[q]),
            Gate::new("RX", Some(FRAC_PI_2), &[q]),
            Gate::new("RZ", Some(FRAC_PI_2), &[q]),
        ]
    };
    let mut expanded = Vec::new();
    for g in &list.gates {
        match g.name.as_str() {
            "CNOT" => {
                let t = g.sites[1];
                expanded.extend(h(t));
                expanded.push(Gate::new("CZ", None, &g.sites));
                expanded.extend(h(t));
            }
            "H" => expanded.extend(h(g.sites[0])),
            _ => expanded.push(g.clone()),
        }
    }
    // merge each RZ into a pending RZ on the same qubit
    let mut out: Vec<Gate> = Vec::new();
    let mut pending: Vec<Option<usize>> = vec![None; list.n_qubits];
    for g in expanded {
        if g.name == "RZ" {
            let q = g.sites[0];
            if let Some(idx) = pending[q] {
                let p = out[idx].param.get_or_insert(0.0);
                *p += g.param.unwrap_or(0.0);
            } else {
                pending[q] = Some(out.len());
                out.push(g);
            }
        } else {
            for &s in &g.sites {
                pending[s] = None;
            }
            out.push(g);
        }
    }
    out.retain(|g| !(g.name == "RZ" && is_multiple_of_2pi(g.param.unwrap_or(0.0))));
    GateList::new(out)
}

/// `f2q^n2 * f1q^n1`.
pub fn estimate_fidelity(counts: GateCounts, f1q: f64, f2q: f64) -> Result<f64> {
    for (name, f) in [("f1q", f1q), ("f2q", f2q)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidArgument(format!("{name} = {f} outside (0, 1]")));
        }
    }
    Ok(f2q.powi(counts.two_qubit as i32) * f1q.powi(counts.one_qubit_nontrivial as i32))
}

/// Toffoli (controls q0, q1; target q2) from the native `|011>` gate.
pub fn toffoli_from_ccphase() -> GateList {
    GateList {
        n_qubits: N_QUBITS,
        gates: vec![
            Gate::new("H", None, &[2]),
            Gate::new("X", None, &[0]),
            Gate::new("CCPHASE011", Some(PI), &[0, 1, 2]),
            Gate::new("X", None, &[0]),
            Gate::new("H", None, &[2]),
        ],
    }
}

pub fn toffoli_unitary() -> CMatrix {
    let mut u = CMatrix::identity(8, 8);
    u[(6, 6)] = c64(0.0, 0.0);
    u[(7, 7)] = c64(0.0, 0.0);
    u[(6, 7)] = c64(1.0, 0.0);
    u[(7, 6)] = c64(1.0, 0.0);
    u
}

/// `CCPHASE(theta)` with the phase on `|111>`.
pub fn ccphase_111(theta: f64) -> CMatrix {
    let mut u = CMatrix::identity(8, 8);
    u[(7, 7)] = cis(theta);
    u
}

/// Gate durations and decoherence of a gate list on a device chain.
#[derive(Debug, Clone)]
pub struct GateNoiseModel {
    pub model: DeviceModel,
    pub chain: [u32; 3],
    pub options: NoiseOptions,
    pub rx_ns: f64,
}

impl GateNoiseModel {
    pub fn new(model: DeviceModel, chain: [u32; 3], options: NoiseOptions) -> Result<Self> {
        model.chain_edges(&chain)?;
        Ok(Self { model, chain, options, rx_ns: RX_DURATION_NS })
    }

    pub fn duration_ns(&self, gate: &Gate) -> Result<f64> {
        Ok(match gate.sites.len() {
            1 if gate.name == "RZ" => 0.0,
            1 => self.rx_ns,
            2 => {
                let (a, b) = (self.chain[gate.sites[0]], self.chain[gate.sites[1]]);
                self.model.edge(a, b)?.total_cphase_ns
            }
            _ => crate::device::total_ccphase_time(&self.model, &self.chain)?,
        })
    }

    /// Two-level Kraus sets for every site after `gate`.
    fn after(&self, gate: &Gate) -> Result<Vec<(usize, Vec<CMatrix>)>> {
        let t = self.duration_ns(gate)?;
        if t == 0.0 {
            return Ok(Vec::new());
        }
        let emb = ComputationalEmbedding::new(1);
        let qubits = self.model.chain_qubits(&self.chain)?;
        let mut out = Vec::new();
        for (site, q) in qubits.iter().enumerate() {
            let active = gate.sites.contains(&site);
            if !active && !self.options.idle_decoherence {
                continue;
            }
            let q = match self.options.modulation {
                Some(p) if active && gate.is_two_qubit() && q.flux_tunable => p.apply(q),
                _ => q.clone(),
            };
            let s = decoherence_superoperator(&q, t)?.restrict(&emb)?;
            out.push((site, s.to_kraus(1e-15)));
        }
        Ok(out)
    }
}

/// Channel of a gate list with `noise` local channels inserted after each gate.
pub fn noisy_circuit<F>(list: &GateList, mut noise: F) -> Result<ChannelCircuit>
where
    F: FnMut(&Gate) -> Result<Vec<(Vec<usize>, Vec<CMatrix>)>>,
{
    list.validate()?;
    let mut c = ChannelCircuit::new(vec![2; list.n_qubits]);
    for g in &list.gates {
        c.push_local(g.sites.clone(), vec![g.matrix()?]);
        for (sites, kraus) in noise(g)? {
            c.push_local(sites, kraus);
        }
    }
    Ok(c)
}

/// Lowered decomposition under device decoherence, as an 8-dimensional channel.
pub fn decomposition_channel(theta: f64, noise: &GateNoiseModel) -> Result<Superoperator> {
    let lowered = lower_to_native(&decompose_ccphase(theta))?;
    let c = noisy_circuit(&lowered, |g| {
        Ok(noise.after(g)?.into_iter().map(|(s, k)| (vec![s], k)).collect())
    })?;
    Ok(c.superoperator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::phase_insensitive_distance;

    #[test]
    fn level_one_counts_and_unitary() {
        let l = decompose_ccphase(PI);
        assert_eq!((l.count("CPHASE"), l.count("CNOT")), (3, 6));
        assert!(phase_insensitive_distance(&l.unitary().unwrap(), &ccphase_111(PI)) < 1e-10);
        let id = decompose_ccphase(0.0).unitary().unwrap();
        assert!(phase_insensitive_distance(&id, &CMatrix::identity(8, 8)) < 1e-10);
    }

    #[test]
    fn lowering_counts() {
        let low = lower_to_native(&decompose_ccphase(0.3)).unwrap();
        assert_eq!(low.counts(), GateCounts { two_qubit: 9, one_qubit_nontrivial: 12 });
        assert!(
            phase_insensitive_distance(&low.unitary().unwrap(), &decompose_ccphase(0.3).unitary().unwrap()) < 1e-10
        );
    }

    #[test]
    fn fidelity_estimates() {
        let c = GateCounts { two_qubit: 9, one_qubit_nontrivial: 12 };
        assert!((estimate_fidelity(c, 0.995, 0.975).unwrap() - 0.7498).abs() < 1e-4);
        assert!((estimate_fidelity(c, 0.995, 0.970).unwrap() - 0.7158).abs() < 1e-4);
        assert_eq!(estimate_fidelity(c, 1.0, 1.0).unwrap(), 1.0);
        assert!(estimate_fidelity(c, 0.0, 1.0).is_err());
    }

    #[test]
    fn toffoli_matches() {
        let u = toffoli_from_ccphase().unitary().unwrap();
        assert!(phase_insensitive_distance(&u, &toffoli_unitary()) < 1e-10);
    }

    #[test]
    fn validation_rejects_bad_sites() {
        assert!(GateList::new(vec![Gate::new("CZ", None, &[0, 2])]).is_err());
        assert!(GateList::new(vec![Gate::new("RX", Some(1.0), &[3])]).is_err());
        assert!(GateList::new(vec![Gate::new("FOO", None, &[0])]).is_err());
    }
}
