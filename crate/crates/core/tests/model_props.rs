mod common;

use common::{circulant, eigen_oracle, sorted_triple, spectrum_distance};
use proptest::prelude::*;
use thomas::model::{circulant_eigenvalues, cyclic_permute, divergence, field, jacobian, reflect};
use thomas::{Damping, State3};

fn state() -> impl Strategy<Value = State3> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| State3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn field_commutes_with_cyclic_permutation(s in state(), b in 0.0..3.0f64) {
        let d = Damping::new(b).unwrap();
        let lhs = field(&cyclic_permute(&s), d).unwrap();
        let rhs = cyclic_permute(&field(&s, d).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn field_is_odd(s in state(), b in 0.0..3.0f64) {
        let d = Damping::new(b).unwrap();
        let lhs = field(&reflect(&s), d).unwrap();
        let rhs = -field(&s, d).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-15);
    }

    #[test]
    fn jacobian_trace_is_divergence(s in state(), b in 0.0..3.0f64) {
        let d = Damping::new(b).unwrap();
        let j = jacobian(&s, d).unwrap();
        prop_assert!((j[0][0] + j[1][1] + j[2][2] - divergence(d)).abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eigen_real_parts_sum_to_trace(c in -1.0..=1.0f64, b in 0.0..3.0f64) {
        let e = circulant_eigenvalues(c, Damping::new(b).unwrap()).unwrap();
        prop_assert!((e.real_part_sum() + 3.0 * b).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_matches_eigen_solver(c in -1.0..=1.0f64, b in 0.0..3.0f64) {
        let e = circulant_eigenvalues(c, Damping::new(b).unwrap()).unwrap();
        let closed = sorted_triple(e.lambda0, e.lambda12_re, e.lambda12_im);
        let oracle = eigen_oracle(circulant(c, b));
        prop_assert!(spectrum_distance(&closed, &oracle) <= 1e-10, "{:?} vs {:?}", closed, oracle);
    }
}

#[test]
fn diagonal_jacobian_is_circulant() {
    let d = Damping::new(0.3).unwrap();
    let x: f64 = 1.1;
    let j = jacobian(&State3::diagonal(x), d).unwrap();
    assert_eq!(j, circulant(x.cos(), 0.3));
}
