use std::f64::consts::PI;

use ccphase_core::linalg::{c64, max_abs_diff, unitarity_deviation, CMatrix};
use ccphase_core::pulse::bessel::bessel_j;
use ccphase_core::pulse::{
    coupling_for_duration, effective_coupling, iswap_unitary, normalize_angle, pulse_duration, rwa_evolution,
    CouplingParams, Subspace,
};
use proptest::prelude::*;

fn subspace() -> impl Strategy<Value = Subspace> {
    prop_oneof![Just(Subspace::Swap02), Just(Subspace::Swap20)]
}

// computational two-qutrit states |00>, |01>, |10>, |11>
const COMP: [usize; 4] = [0, 1, 3, 4];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn iswap_is_unitary(s in subspace(), beta in -10.0f64..10.0) {
        prop_assert!(unitarity_deviation(&iswap_unitary(s, beta)) < 1e-12);
    }

    #[test]
    fn pulse_pair_phase_law(s in subspace(), b1 in -PI..PI, b2 in -PI..PI) {
        let u = iswap_unitary(s, b2) * iswap_unitary(s, b1);
        for (i, &r) in COMP.iter().enumerate() {
            for (j, &c) in COMP.iter().enumerate() {
                if i != j {
                    prop_assert!(u[(r, c)].norm() < 1e-12);
                }
            }
        }
        for &k in &COMP[..3] {
            prop_assert!((u[(k, k)] - c64(1.0, 0.0)).norm() < 1e-12);
        }
        let phase = u[(4, 4)].arg();
        prop_assert!((u[(4, 4)].norm() - 1.0).abs() < 1e-12);
        prop_assert!(normalize_angle(phase - (PI + b1 - b2)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn rwa_matches_rabi_solution(g in 1.0f64..20.0, t in 0.0f64..200.0, beta in -PI..PI) {
        let p = CouplingParams { g_mhz: g, epsilon_mhz: 0.0, omega_m_mhz: 1.0, n: 0, beta_n: 0.0 };
        let gn = effective_coupling(&p).unwrap();
        let w = 2f64.sqrt() * gn.norm() * 2.0 * PI * 1e-3 * t;
        let (c, s) = (w.cos(), w.sin());
        let mi = c64(0.0, -1.0);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[c64(c, 0.0), mi * s * c64(beta.cos(), -beta.sin()), mi * s * c64(beta.cos(), beta.sin()), c64(c, 0.0)],
        );
        let u = rwa_evolution(&p, t, beta).unwrap();
        prop_assert!(max_abs_diff(&u, &expected) < 1e-6);
    }
}

#[test]
fn bessel_known_values() {
    assert!((bessel_j(0, 0.0) - 1.0).abs() < 1e-15);
    assert!(bessel_j(3, 0.0).abs() < 1e-15);
    assert!((bessel_j(0, 2.404825557695773)).abs() < 1e-12);
    assert!((bessel_j(1, 1.0) - 0.44005058574493355).abs() < 1e-13);
}

#[test]
fn duration_round_trip() {
    for ns in [30.0, 61.0, 76.0, 120.0] {
        let g = coupling_for_duration(ns).unwrap();
        let p = CouplingParams { g_mhz: g, epsilon_mhz: 0.0, omega_m_mhz: 1.0, n: 0, beta_n: 0.0 };
        assert!((pulse_duration(&p).unwrap() - ns).abs() < 1e-9);
    }
    assert!(coupling_for_duration(0.0).is_err());
}
