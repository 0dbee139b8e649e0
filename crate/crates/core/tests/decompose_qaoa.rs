use std::f64::consts::PI;

use ccphase_core::decompose::{
    ccphase_111, decompose_ccphase, estimate_fidelity, lower_to_native, toffoli_from_ccphase, toffoli_unitary,
    GateCounts,
};
use ccphase_core::linalg::phase_insensitive_distance;
use ccphase_core::qaoa::{
    ansatz_expectation, cost_diagonal, phase_separator, Clause, QaoaBackend, SatInstance,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn counts_do_not_depend_on_angle(theta in -PI..PI) {
        let l1 = decompose_ccphase(theta);
        let reference = lower_to_native(&decompose_ccphase(PI)).unwrap().counts();
        let l2 = lower_to_native(&l1).unwrap();
        prop_assert_eq!(l1.gates.len(), 9);
        prop_assert_eq!(l2.counts(), reference);
        prop_assert!(phase_insensitive_distance(&l2.unitary().unwrap(), &ccphase_111(theta)) < 1e-9);
    }

    #[test]
    fn landscape_is_periodic(beta in -PI..PI, gamma in -PI..PI) {
        let inst = SatInstance::from_clauses(vec![Clause::positive([0, 1, 2]).unwrap()]).unwrap();
        let b = QaoaBackend::ideal();
        let e = |x, y| ansatz_expectation(&inst, x, y, &b, None, 0).unwrap();
        let v = e(beta, gamma);
        prop_assert!((v - e(beta + PI, gamma)).abs() < 1e-12);
        prop_assert!((v - e(beta, gamma + 2.0 * PI)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn separator_phases_follow_satisfaction(gamma in -PI..PI, negs in prop::array::uniform3(any::<bool>())) {
        let lits = format!(
            "{}x0|{}x1|{}x2",
            if negs[0] { "~" } else { "" },
            if negs[1] { "~" } else { "" },
            if negs[2] { "~" } else { "" }
        );
        let clause: Clause = lits.parse().unwrap();
        let inst = SatInstance::from_clauses(vec![clause]).unwrap();
        let sep = phase_separator(&inst, gamma, None).unwrap();
        let cost = cost_diagonal(&inst);
        let diag = sep.diagonal_c64();
        for (z, c) in cost.iter().enumerate() {
            let expected = ccphase_core::linalg::cis(sep.global_phase - gamma * c);
            prop_assert!((diag[z] - expected).norm() < 1e-9);
        }
        let u = sep.gates.unitary().unwrap();
        for z in 0..8 {
            prop_assert!((u[(z, z)] - diag[z]).norm() < 1e-9);
        }
    }
}

#[test]
fn toffoli_from_pi_phase() {
    assert!(phase_insensitive_distance(&toffoli_from_ccphase().unitary().unwrap(), &toffoli_unitary()) < 1e-9);
}

#[test]
fn fidelity_estimate_inputs() {
    let counts = GateCounts { two_qubit: 9, one_qubit_nontrivial: 12 };
    assert!((estimate_fidelity(counts, 0.995, 0.975).unwrap() - 0.7498).abs() < 1e-4);
    assert!((estimate_fidelity(counts, 0.995, 0.97).unwrap() - 0.995f64.powi(12) * 0.97f64.powi(9)).abs() < 1e-12);
    assert!(estimate_fidelity(counts, 1.2, 0.97).is_err());
}

#[test]
fn expectation_bounded_by_clause_count() {
    let clauses = vec![
        Clause::positive([0, 1, 2]).unwrap(),
        "~x1|x2|~x3".parse().unwrap(),
        "x0|~x2|x3".parse().unwrap(),
    ];
    let inst = SatInstance::from_clauses(clauses).unwrap();
    let b = QaoaBackend::ideal();
    for (beta, gamma) in [(0.0, 0.0), (0.4, -1.3), (2.2, 2.9)] {
        let v = ansatz_expectation(&inst, beta, gamma, &b, None, 0).unwrap();
        assert!((0.0..=3.0).contains(&v));
    }
    let uniform = ansatz_expectation(&inst, 0.0, 0.7, &b, None, 0).unwrap();
    assert!((uniform - 3.0 * 7.0 / 8.0).abs() < 1e-12);
}

#[test]
fn landscape_csv_round_trip() {
    use ccphase_core::qaoa::{grid_configs, landscape, BackendKind, Landscape};
    let inst = SatInstance::from_clauses(vec![Clause::positive([0, 1, 2]).unwrap()]).unwrap();
    let l = landscape(&inst, &grid_configs(4), &QaoaBackend::ideal(), Some(200), 1).unwrap();
    let mut buf = Vec::new();
    l.write_csv(&mut buf).unwrap();
    let back = Landscape::read_csv(buf.as_slice(), BackendKind::Ideal).unwrap();
    assert_eq!(back.points.len(), 16);
    for (a, b) in l.points.iter().zip(&back.points) {
        assert!((a.expectation - b.expectation).abs() < 1e-12 && a.shots == b.shots);
    }
}
