//! Executes pulse sequences the way a simulated device would: the ideal
//! pulses, the device's coherent imperfections and, optionally, decoherence.

use crate::device::DeviceModel;
use crate::error::Result;
use crate::linalg::{basis_digits, cis, CMatrix, ChannelCircuit};
use crate::noise::{noisy_pulse_circuit, NoiseOptions};
use crate::pulse::PulseImperfection;
use crate::synth::PulseSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseContext {
    pub model: DeviceModel,
    pub chain: [u32; 3],
    pub options: NoiseOptions,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Backend {
    pub imperfection: PulseImperfection,
    pub noise: Option<NoiseContext>,
}

impl Backend {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn with_imperfection(imperfection: PulseImperfection) -> Result<Self> {
        imperfection.validate()?;
        Ok(Self { imperfection, noise: None })
    }

    pub fn noisy(model: DeviceModel, chain: [u32; 3], options: NoiseOptions) -> Result<Self> {
        model.chain_edges(&chain)?;
        Ok(Self { imperfection: PulseImperfection::default(), noise: Some(NoiseContext { model, chain, options }) })
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    /// Diagonal phases the device adds to a run of `seq`.
    pub fn imperfection_unitary(&self, seq: &PulseSequence) -> CMatrix {
        let imp = &self.imperfection;
        let b = seq.retrieval_offset();
        let mut diag = Vec::with_capacity(27);
        for idx in 0..27 {
            let d = basis_digits(idx, 3, 3);
            let mut phase: f64 = (0..3).map(|s| imp.stray_diagonal_phases[s][d[s]]).sum();
            phase += imp.cross_coupling * b * d[1] as f64;
            if d[0] == 1 && d[1] == 1 {
                phase += imp.conditional_phase_error;
            }
            diag.push(cis(phase));
        }
        CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(diag))
    }

    /// Channel circuit of one sequence run on the three chain sites.
    pub fn sequence_circuit(&self, seq: &PulseSequence) -> Result<ChannelCircuit> {
        let mut c = match &self.noise {
            Some(ctx) => noisy_pulse_circuit(seq, &ctx.model, &ctx.chain, &ctx.options)?,
            None => {
                seq.validate()?;
                let mut c = ChannelCircuit::new(vec![3, 3, 3]);
                for p in &seq.pulses {
                    c.push_local(vec![p.edge.0, p.edge.1], vec![p.unitary()]);
                }
                c
            }
        };
        if self.imperfection != PulseImperfection::default() {
            c.push_full(self.imperfection_unitary(seq));
        }
        c.push_full(seq.rz_unitary());
        Ok(c)
    }

    /// Runs `before`, the sequence, then `after` on `rho`. Gates are single-site
    /// 3x3 unitaries.
    pub fn run(
        &self,
        seq: &PulseSequence,
        before: &[(usize, CMatrix)],
        after: &[(usize, CMatrix)],
        rho: &CMatrix,
    ) -> Result<CMatrix> {
        let mut c = ChannelCircuit::new(vec![3, 3, 3]);
        for (site, g) in before {
            c.push_local(vec![*site], vec![g.clone()]);
        }
        c.extend(&self.sequence_circuit(seq)?);
        for (site, g) in after {
            c.push_local(vec![*site], vec![g.clone()]);
        }
        Ok(c.apply(rho))
    }
}
