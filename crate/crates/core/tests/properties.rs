mod common;

use proptest::prelude::*;

use hamrec::models::{assemble, enumerate_terms, random_instance, CoefficientVector, ModelKind};
use hamrec::ose::{predicted_lie_count, recovery_error, DegeneracyProfile};
use hamrec::pauli::{PauliOp, PauliString};
use hamrec::spectral::{build_steady_state, cluster_weights, eigendecompose, SteadyStateSpec, WeightClass, DEFAULT_CLUSTER_TOL};
use hamrec::C64;

use common::*;

fn pauli_string(max_len: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(0usize..4, 1..=max_len)
        .prop_map(|codes| PauliString::new(codes.into_iter().map(|c| PauliOp::ALL[c]).collect()).unwrap())
}

fn state(dim: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn string_and_states(max_len: usize) -> impl Strategy<Value = (PauliString, Vec<C64>, Vec<C64>)> {
    pauli_string(max_len).prop_flat_map(|p| {
        let dim = p.dim();
        (Just(p), state(dim), state(dim))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_is_an_involution((p, psi, _) in string_and_states(8)) {
        let back = p.apply(&p.apply(&psi).unwrap()).unwrap();
        for (x, y) in back.iter().zip(&psi) {
            prop_assert!((x - y).norm() <= 1e-15);
        }
    }

    #[test]
    fn apply_matches_kronecker((p, psi, _) in string_and_states(5)) {
        let dense = string_dense(&p);
        let got = p.apply(&psi).unwrap();
        for r in 0..p.dim() {
            let want: C64 = (0..p.dim()).map(|c| dense[(r, c)] * psi[c]).sum();
            prop_assert!((want - got[r]).norm() <= 1e-13);
        }
    }

    #[test]
    fn matrix_elements_are_hermitian((p, phi, psi) in string_and_states(7)) {
        let ab = p.matrix_element(&phi, &psi).unwrap();
        let ba = p.matrix_element(&psi, &phi).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-12);
    }

    #[test]
    fn recovery_error_ignores_scale_and_sign(seed in 0u64..1000, other in 1000u64..2000, scale in -50.0f64..50.0) {
        prop_assume!(scale.abs() > 1e-3);
        let a = random_instance(ModelKind::H2, 4, seed).unwrap();
        let b = random_instance(ModelKind::H2, 4, other).unwrap();
        let basis = enumerate_terms(ModelKind::H2, 4).unwrap();
        let scaled = CoefficientVector::new(&basis, b.values.iter().map(|x| x * scale).collect()).unwrap();
        let d0 = recovery_error(&a, &b).unwrap();
        let d1 = recovery_error(&a, &scaled).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&d0));
        let self_scaled = CoefficientVector::new(&basis, a.values.iter().map(|x| x * scale).collect()).unwrap();
        prop_assert!(recovery_error(&a, &self_scaled).unwrap() <= 1e-15);
    }

    #[test]
    fn adding_a_class_never_lowers_the_count(
        length in 1usize..=10,
        q in prop::collection::vec(1usize..6, 1..5),
        extra in 1usize..6,
    ) {
        let mut bigger = q.clone();
        bigger.push(extra);
        prop_assume!(bigger.iter().sum::<usize>() <= 1 << length);
        let s = predicted_lie_count(&DegeneracyProfile::new(q.clone(), length).unwrap());
        let t = predicted_lie_count(&DegeneracyProfile::new(bigger.clone(), length).unwrap());
        prop_assert!(t >= s);
        prop_assert_eq!(t, lie_count(&bigger, length));
    }

    #[test]
    fn clustering_recovers_the_weight_blocks(
        length in 2usize..=8,
        q in prop::collection::vec(1usize..4, 1..4),
        raw in prop::collection::vec(1.0f64..10.0, 3),
        seed in 0u64..500,
    ) {
        prop_assume!(q.iter().sum::<usize>() <= 1 << length);
        let mut weights: Vec<f64> = raw[..q.len()].to_vec();
        // Keep weights well separated.
        for (i, w) in weights.iter_mut().enumerate() {
            *w += 20.0 * i as f64;
        }
        let norm: f64 = weights.iter().zip(&q).map(|(w, &n)| w * n as f64).sum();
        let mut next = 0;
        let classes = q
            .iter()
            .zip(&weights)
            .map(|(&n, w)| {
                let indices = (next..next + n).collect();
                next += n;
                WeightClass { weight: w / norm, indices }
            })
            .collect();
        let spec = SteadyStateSpec { classes };
        let kind = if length >= 3 { ModelKind::H3 } else { ModelKind::H2 };
        let basis = enumerate_terms(kind, length).unwrap();
        let h = assemble(&basis, &random_instance(kind, length, seed).unwrap()).unwrap().to_dense();
        let eig = eigendecompose(&h).unwrap();
        let (rho, truth) = build_steady_state(&spec, &eig).unwrap();
        let found = cluster_weights(&rho, DEFAULT_CLUSTER_TOL).unwrap();

        let mut want: Vec<(usize, f64)> = truth.profile().into_iter().zip(truth.weights()).collect();
        let mut got: Vec<(usize, f64)> = found.blocks.profile().into_iter().zip(found.blocks.weights()).collect();
        want.sort_by(|a, b| a.1.total_cmp(&b.1));
        got.sort_by(|a, b| a.1.total_cmp(&b.1));
        prop_assert_eq!(want.len(), got.len());
        for ((qa, wa), (qb, wb)) in want.iter().zip(&got) {
            prop_assert_eq!(qa, qb);
            prop_assert!((wa - wb).abs() <= 1e-12);
        }
        prop_assert_eq!(found.blocks.complement().len(), (1 << length) - q.iter().sum::<usize>());
        let rebuilt = found.blocks.density_matrix();
        prop_assert!(frobenius(&(&rebuilt - &rho)) <= 1e-12);
    }
}
