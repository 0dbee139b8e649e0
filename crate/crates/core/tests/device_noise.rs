use std::f64::consts::PI;

use ccphase_core::device::DeviceModel;
use ccphase_core::linalg::{max_abs_diff, subspace_process_fidelity, ComputationalEmbedding};
use ccphase_core::noise::{decoherence_channel, decoherence_superoperator, noisy_sequence_channel, NoiseOptions};
use ccphase_core::synth::{synthesize_on, target_unitary};

#[test]
fn model_round_trips_through_json() {
    let m = DeviceModel::default_model();
    let text = m.to_json_string().unwrap();
    let back = DeviceModel::from_json_str(&text).unwrap();
    assert_eq!(m, back);
    assert_eq!(back.to_json_string().unwrap(), text);
}

#[test]
fn unknown_field_is_a_schema_error() {
    let text = DeviceModel::default_model().to_json_string().unwrap().replacen("\"qubits\"", "\"bogus\": 1, \"qubits\"", 1);
    let err = DeviceModel::from_json_str(&text).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
}

#[test]
fn kraus_sets_are_cptp() {
    let m = DeviceModel::default_model();
    for q in &m.qubits {
        for t in [0.0, 16.0, 61.0, 500.0] {
            let s = decoherence_channel(q, t, None).unwrap().superoperator();
            assert!(s.trace_preservation_error() < 1e-10);
            assert!(s.min_choi_eigenvalue() > -1e-10);
        }
    }
}

#[test]
fn decoherence_is_a_semigroup() {
    let m = DeviceModel::default_model();
    for q in &m.qubits {
        let a = decoherence_superoperator(q, 37.0).unwrap();
        let b = decoherence_superoperator(q, 91.0).unwrap();
        let ab = decoherence_superoperator(q, 128.0).unwrap();
        assert!(max_abs_diff(a.then(&b).matrix(), ab.matrix()) < 1e-8);
    }
}

fn ccz_fidelity(model: &DeviceModel) -> f64 {
    let chain = model.default_chain().unwrap();
    let seq = synthesize_on(PI, model, &chain).unwrap();
    let c = noisy_sequence_channel(&seq, model, &chain, &NoiseOptions::default()).unwrap();
    subspace_process_fidelity(&c.restricted_superoperator(&ComputationalEmbedding::new(3)), &target_unitary(PI)).unwrap()
}

#[test]
fn fidelity_is_monotone_in_each_coherence_time() {
    let base = DeviceModel::default_model();
    type Field = fn(&mut ccphase_core::device::QubitParams) -> &mut f64;
    let fields: [Field; 4] = [|q| &mut q.t1_1_us, |q| &mut q.t1_2_us, |q| &mut q.t2_01_us, |q| &mut q.t2_12_us];
    for field in fields {
        let mut last = f64::INFINITY;
        for scale in [1.0, 0.8, 0.6, 0.4, 0.2] {
            let mut m = base.clone();
            for q in &mut m.qubits {
                let t = field(q);
                *t *= scale;
            }
            // keep T2 <= 2 T1 so every grid point is a valid model
            for q in &mut m.qubits {
                q.t2_01_us = q.t2_01_us.min(2.0 * q.t1_1_us);
                q.t2_12_us = q.t2_12_us.min(2.0 * q.t1_2_us);
            }
            let f = ccz_fidelity(&m);
            assert!(f <= last + 1e-12, "fidelity rose from {last} to {f}");
            last = f;
        }
    }
}
