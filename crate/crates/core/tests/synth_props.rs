use std::f64::consts::PI;

use ccphase_core::linalg::{max_abs_diff, restrict_to_computational, CMatrix, ComputationalEmbedding};
use ccphase_core::pulse::Subspace;
use ccphase_core::synth::{
    combo_allowed, parse_combo, synthesize, target_unitary, unchecked_sequence, Combo, ALL_COMBOS,
};
use ccphase_core::Error;
use proptest::prelude::*;

fn allowed_combo() -> impl Strategy<Value = Combo> {
    prop::sample::select(ALL_COMBOS.into_iter().filter(|c| combo_allowed(*c).allowed).collect::<Vec<_>>())
}

fn block(u: &CMatrix) -> CMatrix {
    restrict_to_computational(u, &ComputationalEmbedding::new(3)).unwrap().block
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn full_unitary_is_generalized_permutation(theta in -PI..PI, combo in allowed_combo()) {
        let u = synthesize(theta, combo).unwrap().ideal_unitary().unwrap();
        for c in 0..27 {
            let nonzero: Vec<f64> = (0..27).map(|r| u[(r, c)].norm()).filter(|&x| x > 1e-10).collect();
            prop_assert_eq!(nonzero.len(), 1);
            prop_assert!((nonzero[0] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn restricted_unitary_is_target(theta in -PI..PI, combo in allowed_combo()) {
        let u = synthesize(theta, combo).unwrap().ideal_unitary().unwrap();
        prop_assert!(max_abs_diff(&block(&u), &target_unitary(theta)) < 1e-9);
    }

    #[test]
    fn complementary_angles_compose_to_identity(theta in -PI..PI, combo in allowed_combo()) {
        let a = synthesize(theta, combo).unwrap().ideal_unitary().unwrap();
        let b = synthesize(2.0 * PI - theta, combo).unwrap().ideal_unitary().unwrap();
        prop_assert!(max_abs_diff(&block(&(b * a)), &CMatrix::identity(8, 8)) < 1e-9);
    }
}

#[test]
fn forbidden_combo_is_rejected() {
    let combo = (Subspace::Swap02, Subspace::Swap20);
    assert!(!combo_allowed(combo).allowed);
    assert!(matches!(synthesize(1.0, combo), Err(Error::ForbiddenCombo { .. })));
    let u = unchecked_sequence(PI / 2.0, combo).ideal_unitary().unwrap();
    assert!(max_abs_diff(&block(&u), &target_unitary(PI / 2.0)) > 0.1);
}

#[test]
fn forbidden_combo_at_pi_is_real_diagonal() {
    let u = block(&unchecked_sequence(PI, (Subspace::Swap02, Subspace::Swap20)).ideal_unitary().unwrap());
    for r in 0..8 {
        for c in 0..8 {
            let x = u[(r, c)];
            if r == c {
                assert!(x.im.abs() < 1e-9 && (x.re.abs() - 1.0).abs() < 1e-9);
            } else {
                assert!(x.norm() < 1e-9);
            }
        }
    }
}

#[test]
fn combo_labels_round_trip() {
    for c in ALL_COMBOS {
        assert_eq!(parse_combo(&ccphase_core::synth::combo_label(c)).unwrap(), c);
    }
    assert!(parse_combo("03,20").is_err());
}
