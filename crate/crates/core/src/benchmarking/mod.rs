//! Process-level verification on the three-qubit computational subspace.
//!
//! Channels handed to these routines are 8-dimensional superoperators. A
//! leaky qutrit channel restricted to the subspace is trace decreasing; the
//! missing population is read out as a uniformly random outcome.

pub mod cb;
pub mod qpt;

pub use cb::{cycle_benchmark, cycle_benchmark_gate, BenchmarkReport, CBConfig, PauliDecay};
pub use qpt::{qpt, QptReport};

use crate::decompose::{ccphase_111, decompose_ccphase, decomposition_channel, lower_to_native, GateNoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{c64, kron_all, CMatrix, Superoperator};

pub const N_QUBITS: usize = 3;
pub const DIM: usize = 8;

pub fn pauli_1q(c: char) -> Result<CMatrix> {
    let z = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let m = match c {
        'I' => [one, z, z, one],
        'X' => [z, one, one, z],
        'Y' => [z, -i, i, z],
        'Z' => [one, z, z, -one],
        other => return Err(Error::InvalidArgument(format!("unknown Pauli `{other}`"))),
    };
    Ok(CMatrix::from_row_slice(2, 2, &m))
}

/// Tensor product for a label such as `"XZI"` (qubit 0 first).
pub fn pauli_matrix(label: &str) -> Result<CMatrix> {
    if label.chars().count() != N_QUBITS {
        return Err(Error::InvalidArgument(format!("Pauli label `{label}` must have {N_QUBITS} letters")));
    }
    let ops = label.chars().map(pauli_1q).collect::<Result<Vec<_>>>()?;
    Ok(kron_all(&ops))
}

/// All 64 labels in lexicographic `I, X, Y, Z` order, starting with `III`.
pub fn all_pauli_labels() -> Vec<String> {
    const L: [char; 4] = ['I', 'X', 'Y', 'Z'];
    (0..64).map(|k| [L[k / 16], L[(k / 4) % 4], L[k % 4]].iter().collect()).collect()
}

/// Cycle benchmarking of the lowered two-qubit decomposition of
/// `CCPHASE(theta)`; noiseless when `noise` is `None`.
pub fn benchmark_decomposition(theta: f64, noise: Option<&GateNoiseModel>, config: &CBConfig) -> Result<BenchmarkReport> {
    let channel = |t: f64| -> Result<Superoperator> {
        match noise {
            Some(n) => decomposition_channel(t, n),
            None => Ok(Superoperator::from_unitary(&lower_to_native(&decompose_ccphase(t))?.unitary()?)),
        }
    };
    if config.composite {
        let second = 2.0 * std::f64::consts::PI - theta;
        let cycle = channel(theta)?.then(&channel(second)?);
        cycle_benchmark(&cycle, &(ccphase_111(second) * ccphase_111(theta)), config)
    } else {
        cycle_benchmark(&channel(theta)?, &ccphase_111(theta), config)
    }
}

/// Population that left the computational subspace.
pub(crate) fn lost_mass(rho: &CMatrix) -> f64 {
    (1.0 - rho.trace().re).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn paulis_square_to_identity() {
        for l in all_pauli_labels() {
            let p = pauli_matrix(&l).unwrap();
            assert!(max_abs_diff(&(&p * &p), &CMatrix::identity(8, 8)) < 1e-15);
        }
        assert_eq!(all_pauli_labels()[0], "III");
        assert_eq!(all_pauli_labels().len(), 64);
        assert!(pauli_matrix("XQ").is_err());
    }
}
